#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "matcore.hpp"
#include "qobjects.hpp"
#include "rng.hpp"
#include "solvers.hpp"

namespace tomokit {

struct MeasuredMask {
    int dim = 0;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> known;
    CMat values;
    double trace = std::numeric_limits<double>::quiet_NaN();  // Tr rho when the record fixes it

    bool has(int i, int j) const { return known(i, j); }
    int count() const { return static_cast<int>(known.count()); }

    void set(int i, int j, cplx v) {
        known(i, j) = known(j, i) = true;
        values(i, j) = v;
        values(j, i) = std::conj(v);
        if (i == j) values(i, i) = v.real();
    }
};

inline MeasuredMask empty_mask(int d) {
    MeasuredMask m;
    m.dim = d;
    m.known.setConstant(d, d, false);
    m.values = CMat::Zero(d, d);
    return m;
}

inline MeasuredMask full_mask(const CMat& rho) {
    MeasuredMask m = empty_mask(static_cast<int>(rho.rows()));
    m.known.setConstant(true);
    m.values = rho;
    m.trace = rho.trace().real();
    return m;
}

namespace detail {
// position of Re(h_ij) (i < j) in herm_to_real coordinates; Im follows at +1
inline Eigen::Index real_offdiag_index(int i, int j, int d) {
    return d + 2 * (Eigen::Index(i) * d - Eigen::Index(i) * (i + 1) / 2 + (j - i - 1));
}

struct RowSpace {
    RMat V;     // orthonormal basis of the row space of R (columns)
    RMat pinv;  // R^+
};

inline RowSpace row_space(const RMat& R, double rel_tol) {
    Eigen::JacobiSVD<RMat> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    double smax = s.size() ? s(0) : 0.0;
    int k = 0;
    while (k < s.size() && s(k) > rel_tol * smax) ++k;
    RowSpace rs;
    rs.V = svd.matrixV().leftCols(k);
    RVec inv = s.head(k).cwiseInverse();
    rs.pinv = rs.V * inv.asDiagonal() * svd.matrixU().leftCols(k).transpose();
    return rs;
}

inline bool in_row_space(const RowSpace& rs, const RVec& g, double tol) {
    return (g - rs.V * (rs.V.transpose() * g)).norm() <= tol * std::max(1.0, g.norm());
}
}  // namespace detail

// Entries of rho fixed linearly by the record: a functional is measured when it lies in the row space of R.
inline MeasuredMask extract_elements(const MeasurementRecord& rec, const Povm& povm, double rel_tol = 1e-9) {
    if (rec.f.size() != povm.size()) throw DimensionMismatch("extract_elements: record length mismatch");
    const int d = povm.dim;
    auto rs = detail::row_space(povm.R, rel_tol);
    RVec x = rs.pinv * rec.f;
    MeasuredMask m = empty_mask(d);
    const Eigen::Index n = Eigen::Index(d) * d;
    RVec gt = RVec::Zero(n);
    gt.head(d).setOnes();
    if (detail::in_row_space(rs, gt, 1e-8)) m.trace = gt.dot(x);
    for (int i = 0; i < d; ++i) {
        RVec g = RVec::Zero(n);
        g(i) = 1.0;
        if (detail::in_row_space(rs, g, 1e-8)) m.set(i, i, x(i));
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            Eigen::Index k = detail::real_offdiag_index(i, j, d);
            RVec gr = RVec::Zero(n), gi = RVec::Zero(n);
            gr(k) = 1.0;
            gi(k + 1) = 1.0;
            if (detail::in_row_space(rs, gr, 1e-8) && detail::in_row_space(rs, gi, 1e-8))
                m.set(i, j, cplx(x(k), x(k + 1)) / std::sqrt(2.0));
        }
    return m;
}

enum class MaskPattern { complete, band, flammia, unsupported };

inline bool band_known(const MeasuredMask& m, int r) {
    for (int i = 0; i < m.dim; ++i)
        for (int j = i; j < m.dim && j <= i + r; ++j)
            if (!m.has(i, j)) return false;
    return true;
}

inline bool rows_known(const MeasuredMask& m, int r) {
    for (int i = 0; i < r && i < m.dim; ++i)
        for (int j = 0; j < m.dim; ++j)
            if (!m.has(i, j)) return false;
    return true;
}

inline MaskPattern classify_mask(const MeasuredMask& m, int r) {
    if (m.known.all()) return MaskPattern::complete;
    if (band_known(m, r)) return MaskPattern::band;
    if (rows_known(m, r)) return MaskPattern::flammia;
    return MaskPattern::unsupported;
}

namespace detail {
inline double mask_scale(const MeasuredMask& m) {
    double s = 0.0;
    for (int i = 0; i < m.dim; ++i)
        for (int j = 0; j < m.dim; ++j)
            if (m.has(i, j)) s = std::max(s, std::abs(m.values(i, j)));
    if (std::isfinite(m.trace)) s = std::max(s, std::abs(m.trace) / m.dim);
    return s;
}

// Fills each unknown (i, i+s), s = r+1.., from the window {i} + {i+1..i+r} + {i+s}: rank r forces the
// 2x2 Schur complement over the middle block to vanish.
inline CMat complete_band(const MeasuredMask& m, int r, double cap) {
    const int d = m.dim;
    CMat x = m.values;
    auto known = m.known;
    const double scale = mask_scale(m);
    for (int s = r + 1; s < d; ++s)
        for (int i = 0; i + s < d; ++i) {
            const int j = i + s;
            if (known(i, j)) continue;
            CMat a = x.block(i + 1, i + 1, r, r);
            if (block_singular(a, cap, scale))
                throw SingularBlock(i, "band completion: block A_" + std::to_string(i) + " is singular");
            CVec bi = x.block(i, i + 1, 1, r).transpose();
            CVec bj = x.block(j, i + 1, 1, r).transpose();
            // x_ij = b_i^T A^{-1} conj(b_j)
            CVec sol = a.fullPivLu().solve(CVec(bj.conjugate()));
            cplx v = bi.transpose() * sol;
            x(i, j) = v;
            x(j, i) = std::conj(v);
            known(i, j) = known(j, i) = true;
        }
    return hermitize(x);
}

inline CMat complete_flammia(const MeasuredMask& m, int r, double cap) {
    const int d = m.dim;
    CMat x = m.values;
    const double scale = mask_scale(m);
    CMat a = x.topLeftCorner(r, r);
    if (block_singular(a, cap, scale)) throw SingularBlock(0, "row completion: leading block is singular");
    CMat b = x.topRightCorner(r, d - r);
    CMat c = b.adjoint() * a.fullPivLu().solve(b);
    for (int i = r; i < d; ++i)
        for (int j = r; j < d; ++j)
            if (!m.has(i, j)) x(i, j) = c(i - r, j - r);
    return hermitize(x);
}

inline MeasuredMask rotate_mask(const MeasuredMask& m, int shift) {
    const int d = m.dim;
    MeasuredMask out = empty_mask(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (m.has(i, j)) {
                out.known((i + shift) % d, (j + shift) % d) = true;
                out.values((i + shift) % d, (j + shift) % d) = m.values(i, j);
            }
    out.trace = m.trace;
    return out;
}

inline CMat unrotate(const CMat& x, int shift) {
    const int d = static_cast<int>(x.rows());
    CMat out(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out(i, j) = x((i + shift) % d, (j + shift) % d);
    return out;
}
}  // namespace detail

// Fills the unmeasured entries of a rank-r mask. Band masks (offsets 0..r known) use sliding windows;
// masks with the first r rows known use one global Schur completion. Positivity is reported, not forced.
inline CMat complete_rank_r(const MeasuredMask& m, int r, double cond_cap = 1e8) {
    if (r < 1) throw InvalidArgument("complete_rank_r: rank must be at least 1");
    switch (classify_mask(m, r)) {
        case MaskPattern::complete: return m.values;
        case MaskPattern::band: return detail::complete_band(m, r, cond_cap);
        case MaskPattern::flammia: return detail::complete_flammia(m, r, cond_cap);
        default: throw InvalidArgument("complete_rank_r: mask does not cover a supported pattern for rank " + std::to_string(r));
    }
}

struct CompletionReport {
    CMat matrix;
    double min_eigenvalue = 0.0;
    bool psd = false;
    // second window family (cyclically shifted labels); NaN when unavailable
    double alt_disagreement = std::numeric_limits<double>::quiet_NaN();
};

inline CompletionReport complete_rank_r_report(const MeasuredMask& m, int r, double cond_cap = 1e8,
                                               bool with_alt = false) {
    CompletionReport rep;
    rep.matrix = complete_rank_r(m, r, cond_cap);
    Eigen::SelfAdjointEigenSolver<CMat> es(rep.matrix, Eigen::EigenvaluesOnly);
    rep.min_eigenvalue = es.eigenvalues()(0);
    rep.psd = rep.min_eigenvalue >= -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff());
    if (with_alt && m.dim > 2) {
        const int shift = m.dim / 2;
        MeasuredMask rot = detail::rotate_mask(m, shift);
        if (classify_mask(rot, r) == MaskPattern::band) {
            try {
                CMat alt = detail::unrotate(detail::complete_band(rot, r, cond_cap), shift);
                rep.alt_disagreement = (alt - rep.matrix).norm();
            } catch (const SingularBlock&) {
            }
        }
    }
    return rep;
}

struct StrictnessReport {
    int dim = 0;
    int rank = 0;
    int kernel_dim = 0;
    bool completion_route = false;  // completable mask with the relevant trace measured
    int samples = 0;
    int violations = 0;             // kernel samples with min(n+, n-) <= r
    Inertia example;                // inertia of the first violating sample
    std::string verdict;            // "strictly-complete", "not-strictly-complete", "no-violation-found"
};

// (a) exact route: the mask is completable at rank r and the trace of the unmeasured part is measured, which
// certifies strictness for states off the singular-block failure set; (b) randomized probe of the kernel of R.
// Kernel violations can coexist with (a): they correspond to failure-set states. Absence of violations is
// evidence only.
inline StrictnessReport strictness_probe(const Povm& povm, int r, int n_samples, std::uint64_t seed) {
    const int d = povm.dim;
    const Eigen::Index n = Eigen::Index(d) * d;
    StrictnessReport rep;
    rep.dim = d;
    rep.rank = r;
    Eigen::JacobiSVD<RMat> svd(povm.R, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    double smax = s.size() ? s(0) : 0.0;
    int rank = 0;
    while (rank < s.size() && s(rank) > 1e-10 * smax) ++rank;
    RMat ker = svd.matrixV().rightCols(n - rank);
    rep.kernel_dim = static_cast<int>(ker.cols());
    if (rep.kernel_dim == 0) {
        rep.completion_route = true;
        rep.verdict = "strictly-complete";
        return rep;
    }
    // mask pattern from the measurement alone: use random record values, only the support matters
    MeasurementRecord rec;
    rec.f = born_probabilities(povm, CMat(CMat::Identity(d, d) / double(d)));
    MeasuredMask m = extract_elements(rec, povm);
    auto rs = detail::row_space(povm.R, 1e-9);
    MaskPattern pat = classify_mask(m, r);
    if (pat == MaskPattern::band) {
        bool diag = true;
        for (int i = 0; i < d; ++i) diag = diag && m.has(i, i);
        rep.completion_route = diag;
    } else if (pat == MaskPattern::flammia) {
        RVec g = RVec::Zero(n);
        for (int i = r; i < d; ++i) g(i) = 1.0;
        rep.completion_route = detail::in_row_space(rs, g, 1e-8);
    }
    Rng rng(seed);
    rep.samples = n_samples;
    for (int k = 0; k < n_samples; ++k) {
        RVec c(ker.cols());
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = rng.normal();
        RVec v = ker * c;
        CMat h = real_to_herm(v);
        Inertia in = inertia(h);
        if (std::min(in.n_plus, in.n_minus) <= r) {
            if (rep.violations == 0) rep.example = in;
            ++rep.violations;
        }
    }
    if (rep.completion_route) rep.verdict = "strictly-complete";
    else if (rep.violations > 0) rep.verdict = "not-strictly-complete";
    else rep.verdict = "no-violation-found";
    return rep;
}

struct UniquenessReport {
    std::vector<double> infidelities;
    double max_infidelity = 0.0;
    int failures = 0;
    bool pass = false;
};

inline UniquenessReport verify_uniqueness_numeric(const Povm& povm, int r, int n_states, std::uint64_t seed,
                                                  double tol = 1e-5, const SolverOptions& o = {}) {
    UniquenessReport rep;
    for (int k = 0; k < n_states; ++k) {
        CMat rho = random_mixed_rank(povm.dim, r, child_seed(seed, std::uint64_t(k))).matrix;
        MeasurementRecord rec;
        rec.f = born_probabilities(povm, rho);
        double inf = 1.0;
        try {
            Estimate e = estimate_or_best([&] { return ls_state(rec, povm, o); });
            inf = 1.0 - fidelity(rho, e.matrix);
        } catch (const Error&) {
            inf = 1.0;
        }
        rep.infidelities.push_back(inf);
        rep.max_infidelity = std::max(rep.max_infidelity, inf);
        if (!(inf < tol)) ++rep.failures;
    }
    rep.pass = rep.failures == 0;
    return rep;
}

}  // namespace tomokit
