#pragma once

// Process estimators: operator-splitting (ADMM) over real coordinates of the process matrix.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "matcore.hpp"
#include "qobjects.hpp"
#include "simkit.hpp"

namespace tomokit {

namespace admm {

// min 1/2 x^T (pI I + pG G) x + q^T x + sum_b g_b(K_b x), G = D^T D.
struct Problem {
    int d = 0;  // process dimension; x has d^4 entries
    double pI = 0.0, pG = 0.0;
    RVec q;
    const RMat* D = nullptr;
    // blocks
    bool psd = true;
    bool tp = false;
    bool traceless_tp = false;  // only Tr_out chi proportional to identity
    bool l1 = false;
    CMat W;                     // l1 basis change: chi_V = W^dag chi W
    double l1_weight = 1.0;
    bool ball = false;
    RVec f;
    double eps = 0.0;
};

struct Result {
    RVec x;        // PSD-block iterate
    int iterations = 0;
    bool converged = false;
    double primal = 0.0, dual = 0.0;
};

inline RMat tp_rows(int d) {
    auto hb = hermitian_basis(d);
    const Eigen::Index n = Eigen::Index(d) * d * d * d;
    RMat a(Eigen::Index(d) * d, n);
    CMat id = CMat::Identity(d, d);
    for (int k = 0; k < d * d; ++k) a.row(k) = herm_to_real(CMat(kron(hb.elements[size_t(k)], id))).transpose();
    return a;
}

inline RVec tp_rhs(int d) {
    auto hb = hermitian_basis(d);
    RVec c(Eigen::Index(d) * d);
    for (int k = 0; k < d * d; ++k) c(k) = hb.elements[size_t(k)].trace().real();
    return c;
}

class Solver {
public:
    Solver(const Problem& pb) : pb_(pb) {
        const int d = pb.d;
        d2_ = d * d;
        n_ = Eigen::Index(d2_) * d2_;
        if (pb.tp || pb.traceless_tp) {
            A_ = tp_rows(d);
            c_ = tp_rhs(d);
            if (pb.traceless_tp) {
                A_ = RMat(A_.bottomRows(A_.rows() - 1));
                c_ = RVec::Zero(A_.rows());
            }
        }
        has_eq_ = pb.tp || pb.traceless_tp;
        n_orth_ = (pb.psd ? 1 : 0) + (pb.l1 ? 1 : 0);
        if (pb.pG != 0.0 || pb.ball) {
            // G = D^T D only through its range: keep eigenvectors with nonzero eigenvalue
            const RMat& dm = *pb.D;
            Eigen::SelfAdjointEigenSolver<RMat> es(dm * dm.transpose());
            double lmax = es.eigenvalues().size() ? es.eigenvalues().maxCoeff() : 0.0;
            std::vector<Eigen::Index> keep;
            for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
                if (es.eigenvalues()(i) > 1e-13 * lmax) keep.push_back(i);
            V_.resize(n_, Eigen::Index(keep.size()));
            lam_.resize(Eigen::Index(keep.size()));
            for (size_t k = 0; k < keep.size(); ++k) {
                double l = es.eigenvalues()(keep[k]);
                V_.col(Eigen::Index(k)) = dm.transpose() * es.eigenvectors().col(keep[k]) / std::sqrt(l);
                lam_(Eigen::Index(k)) = l;
            }
            use_g_ = true;
            s_ = lmax > 0 ? 1.0 / std::sqrt(lmax) : 1.0;
            lam_min_ = lam_.size() ? lam_.minCoeff() : 0.0;
        }
    }

    double data_scale() const { return s_; }

    // Quadratic data term: start rho well below its smallest curvature, which the penalty would otherwise swamp.
    double default_rho() const {
        if (pb_.pG > 0.0 && !pb_.ball && lam_min_ > 0.0) return 0.1 * pb_.pG * lam_min_;
        return 1.0;
    }

    Result run(const RVec& x0, double eps_tol, int max_iter, double rho0 = -1.0) {
        const double alpha = 1.6;
        if (rho0 <= 0.0) rho0 = default_rho();
        double rho = rho0;
        const bool quad = pb_.pG > 0.0 && !pb_.ball;
        const double rho_lo = rho0 * (quad ? 0.1 : 1e-6), rho_hi = rho0 * (quad ? 10.0 : 1e6);
        std::vector<RVec> z, u;
        std::vector<int> kinds;  // 0 psd, 2 l1, 3 ball
        if (pb_.psd) kinds.push_back(0);
        if (pb_.l1) kinds.push_back(2);
        if (pb_.ball) kinds.push_back(3);
        for (int k : kinds) {
            RVec kx = apply_k(k, x0);
            z.push_back(prox(k, kx, rho));
            u.push_back(RVec::Zero(kx.size()));
        }
        Result res;
        RVec x = x0;
        RVec rhs(n_);
        for (int it = 0; it < max_iter; ++it) {
            rhs = -pb_.q;
            for (size_t b = 0; b < kinds.size(); ++b) rhs += rho * apply_kt(kinds[b], z[b] - u[b]);
            x = solve(rhs, rho);
            double r2 = 0.0, kxn = 0.0, zn = 0.0;
            RVec dual = RVec::Zero(n_), ktu = RVec::Zero(n_);
            for (size_t b = 0; b < kinds.size(); ++b) {
                RVec kx = apply_k(kinds[b], x);
                RVec kh = alpha * kx + (1.0 - alpha) * z[b];
                RVec zold = z[b];
                z[b] = prox(kinds[b], kh + u[b], rho);
                u[b] += kh - z[b];
                r2 += (kx - z[b]).squaredNorm();
                kxn += kx.squaredNorm();
                zn += z[b].squaredNorm();
                dual += apply_kt(kinds[b], z[b] - zold);
                ktu += apply_kt(kinds[b], u[b]);
            }
            double r = std::sqrt(r2), s = rho * dual.norm();
            double tol_p = eps_tol * std::sqrt(double(n_ * kinds.size())) + eps_tol * std::sqrt(std::max(kxn, zn));
            double tol_d = eps_tol * std::sqrt(double(n_)) + eps_tol * rho * ktu.norm();
            res.iterations = it + 1;
            res.primal = r;
            res.dual = s;
            if (r <= tol_p && s <= tol_d) {
                res.converged = true;
                break;
            }
            if (it % 25 == 24) {
                double rp = r / std::max(std::sqrt(std::max(kxn, zn)), 1e-300);
                double rd = s / std::max(rho * ktu.norm(), 1e-300);
                double scale = std::sqrt(rp / std::max(rd, 1e-300));
                if (std::isfinite(scale) && (scale > 5.0 || scale < 0.2)) {
                    scale = std::clamp(scale, 1e-3, 1e3);
                    double nr = std::clamp(rho * scale, rho_lo, rho_hi);
                    for (auto& ub : u) ub *= rho / nr;
                    rho = nr;
                }
            }
        }
        res.x = pb_.psd ? z[0] : x;
        return res;
    }

private:
    RVec solve_free(const RVec& rhs, double rho) const {
        double a = pb_.pI + rho * n_orth_;
        if (!use_g_) return rhs / a;
        double b = pb_.pG + (pb_.ball ? rho * s_ * s_ : 0.0);
        // (a I + b V L V^T)^{-1} = (I - V diag(b l / (a + b l)) V^T) / a on orthonormal V
        RVec t = V_.transpose() * rhs;
        for (Eigen::Index i = 0; i < t.size(); ++i) t(i) *= b * lam_(i) / (a + b * lam_(i));
        return (rhs - V_ * t) / a;
    }

    // minimizer of the x-subproblem subject to A x = c (KKT via the small Schur system)
    RVec solve(const RVec& rhs, double rho) {
        RVec x = solve_free(rhs, rho);
        if (!has_eq_) return x;
        if (rho != schur_rho_) {
            minv_at_.resize(n_, A_.rows());
            for (Eigen::Index k = 0; k < A_.rows(); ++k) minv_at_.col(k) = solve_free(A_.row(k).transpose(), rho);
            schur_.compute(A_ * minv_at_);
            schur_rho_ = rho;
        }
        RVec lam = schur_.solve(A_ * x - c_);
        return x - minv_at_ * lam;
    }

    RVec apply_k(int kind, const RVec& x) const {
        switch (kind) {
            case 2: {
                CMat h;
                real_to_herm(x.data(), d2_, h);
                return herm_to_real(CMat(pb_.W.adjoint() * h * pb_.W));
            }
            case 3: return s_ * ((*pb_.D) * x);
            default: return x;
        }
    }

    RVec apply_kt(int kind, const RVec& y) const {
        switch (kind) {
            case 2: {
                CMat h;
                real_to_herm(y.data(), d2_, h);
                return herm_to_real(CMat(pb_.W * h * pb_.W.adjoint()));
            }
            case 3: return s_ * (pb_.D->transpose() * y);
            default: return y;
        }
    }

    RVec prox(int kind, const RVec& v, double rho) const {
        switch (kind) {
            case 0: {
                CMat h;
                real_to_herm(v.data(), d2_, h);
                return herm_to_real(psd_project(h));
            }
            case 2: {
                RVec out = v;
                const double t = pb_.l1_weight / rho;
                for (int i = 0; i < d2_; ++i) {
                    double a = std::abs(v(i)) - t;
                    out(i) = a > 0 ? std::copysign(a, v(i)) : 0.0;
                }
                const double tp = std::sqrt(2.0) * t;
                for (Eigen::Index k = d2_; k < v.size(); k += 2) {
                    double nrm = std::hypot(v(k), v(k + 1));
                    double sc = nrm > tp ? 1.0 - tp / nrm : 0.0;
                    out(k) = sc * v(k);
                    out(k + 1) = sc * v(k + 1);
                }
                return out;
            }
            case 3: {
                RVec c = s_ * pb_.f;
                RVec dv = v - c;
                double nrm = dv.norm(), rad = s_ * pb_.eps;
                return nrm <= rad ? v : RVec(c + dv * (rad / nrm));
            }
        }
        return v;
    }

    Problem pb_;
    int d2_ = 0;
    Eigen::Index n_ = 0;
    int n_orth_ = 0;
    RMat A_;
    RVec c_;
    RMat V_;
    RVec lam_;
    bool use_g_ = false;
    double s_ = 1.0;
    double lam_min_ = 0.0;
    bool has_eq_ = false;
    RMat minv_at_;
    Eigen::LDLT<RMat> schur_;
    double schur_rho_ = -1.0;
};

// Input-side partial trace T_{jl} = sum_i chi_{(i+dj),(i+dl)}.
inline CMat input_marginal(const CMat& chi, int d) {
    CMat t = CMat::Zero(d, d);
    for (int j = 0; j < d; ++j)
        for (int l = 0; l < d; ++l)
            for (int i = 0; i < d; ++i) t(j, l) += chi(i + d * j, i + d * l);
    return t;
}

// Restores Tr_out chi = I exactly by chi -> (S (x) I) chi (S (x) I)^dag, S = T^{-1/2}; keeps positivity.
inline CMat enforce_tp(const CMat& chi, int d) {
    CMat t = hermitize(input_marginal(chi, d));
    Eigen::SelfAdjointEigenSolver<CMat> es(t);
    if (es.eigenvalues()(0) <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) return chi;
    RVec is = es.eigenvalues().cwiseSqrt().cwiseInverse();
    CMat s = es.eigenvectors() * is.asDiagonal() * es.eigenvectors().adjoint();
    CMat k = kron(s, CMat::Identity(d, d));
    return hermitize(k * chi * k.adjoint());
}

}  // namespace admm

// Basis change to the target-adapted operator basis V_alpha = U_t H_alpha; columns vec(V_alpha).
inline CMat target_basis(const CMat& ut) {
    const int d = static_cast<int>(ut.rows());
    auto hb = hermitian_basis(d);
    CMat w(Eigen::Index(d) * d, Eigen::Index(d) * d);
    for (int a = 0; a < d * d; ++a) w.col(a) = vectorize(CMat(ut * hb.elements[size_t(a)]));
    return w;
}

}  // namespace tomokit
