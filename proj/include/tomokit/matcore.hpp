#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "errors.hpp"

namespace tomokit {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr cplx I_unit{0.0, 1.0};

// Relative threshold used to call an eigenvalue zero.
inline constexpr double kZeroEigRel = 1e-9;

inline void require_square(const CMat& a, const char* what) {
    if (a.rows() != a.cols())
        throw DimensionMismatch(std::string(what) + ": matrix is not square");
}

inline bool is_finite(const CMat& a) { return a.allFinite(); }

inline double hermiticity_error(const CMat& a) { return (a - a.adjoint()).norm(); }

inline void require_hermitian(const CMat& a, const char* what, double tol = 1e-10) {
    require_square(a, what);
    double scale = std::max(1.0, a.norm());
    if (hermiticity_error(a) > tol * scale)
        throw NotHermitian(std::string(what) + ": input is not Hermitian");
}

inline CMat hermitize(const CMat& a) { return 0.5 * (a + a.adjoint()); }

// Column-stacking vectorization.
inline CVec vectorize(const CMat& a) {
    require_square(a, "vectorize");
    CVec v(a.size());
    Eigen::Index d = a.rows();
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) v(i + d * j) = a(i, j);
    return v;
}

inline CMat devectorize(const CVec& v) {
    auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (d * d != v.size()) throw DimensionMismatch("devectorize: length is not a square");
    CMat a(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) a(i, j) = v(i + d * j);
    return a;
}

// Tr(A^dagger B)
inline cplx hs_inner(const CMat& a, const CMat& b) { return (a.adjoint() * b).trace(); }

// Real orthonormal coordinates of a Hermitian matrix: the d diagonal entries, then
// sqrt(2) Re and sqrt(2) Im of each upper entry (i<j, row-major). The map is an
// isometry from the HS norm to the Euclidean norm, and Tr(E X) = <to_real(E), to_real(X)>.
inline Eigen::Index real_dim(Eigen::Index d) { return d * d; }

inline void herm_to_real(const CMat& h, double* out) {
    const Eigen::Index d = h.rows();
    const double s2 = std::sqrt(2.0);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i) out[k++] = h(i, i).real();
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) {
            out[k++] = s2 * h(i, j).real();
            out[k++] = s2 * h(i, j).imag();
        }
}

inline RVec herm_to_real(const CMat& h) {
    RVec x(h.rows() * h.rows());
    herm_to_real(h, x.data());
    return x;
}

inline void real_to_herm(const double* x, Eigen::Index d, CMat& h) {
    h.resize(d, d);
    const double r2 = 1.0 / std::sqrt(2.0);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i) h(i, i) = cplx(x[k++], 0.0);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) {
            cplx z(r2 * x[k], r2 * x[k + 1]);
            k += 2;
            h(i, j) = z;
            h(j, i) = std::conj(z);
        }
}

inline CMat real_to_herm(const RVec& x) {
    auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(x.size()))));
    if (d * d != x.size()) throw DimensionMismatch("real_to_herm: length is not a square");
    CMat h;
    real_to_herm(x.data(), d, h);
    return h;
}

// Trace-orthonormal Hermitian operator basis: element 0 is I/sqrt(d), then the
// d-1 diagonal generalized Gell-Mann matrices, then symmetric/antisymmetric pairs.
struct HermitianBasis {
    int dim = 0;
    std::vector<CMat> elements;
};

inline HermitianBasis hermitian_basis(int d) {
    if (d < 1) throw InvalidArgument("hermitian_basis: d must be positive");
    HermitianBasis hb;
    hb.dim = d;
    hb.elements.reserve(static_cast<size_t>(d) * d);
    hb.elements.push_back(CMat::Identity(d, d) / std::sqrt(double(d)));
    for (int l = 1; l < d; ++l) {
        CMat h = CMat::Zero(d, d);
        double nrm = 1.0 / std::sqrt(double(l) * (l + 1));
        for (int k = 0; k < l; ++k) h(k, k) = nrm;
        h(l, l) = -double(l) * nrm;
        hb.elements.push_back(h);
    }
    const double r2 = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) {
            CMat s = CMat::Zero(d, d);
            s(j, k) = r2;
            s(k, j) = r2;
            hb.elements.push_back(s);
            CMat a = CMat::Zero(d, d);
            a(j, k) = -I_unit * r2;
            a(k, j) = I_unit * r2;
            hb.elements.push_back(a);
        }
    return hb;
}

// Columns are vectorize(H_alpha); unitary because the basis is trace-orthonormal.
inline CMat basis_matrix(const std::vector<CMat>& elements) {
    if (elements.empty()) return CMat();
    Eigen::Index n = elements.front().size();
    CMat w(n, static_cast<Eigen::Index>(elements.size()));
    for (size_t a = 0; a < elements.size(); ++a) w.col(static_cast<Eigen::Index>(a)) = vectorize(elements[a]);
    return w;
}

struct Inertia {
    int n_minus = 0;
    int n_zero = 0;
    int n_plus = 0;
    int dim() const { return n_minus + n_zero + n_plus; }
    bool operator==(const Inertia&) const = default;
};

struct Eigh {
    RVec values;  // ascending
    CMat vectors;
};

inline Eigh eigh(const CMat& h) {
    require_hermitian(h, "eigh", 1e-8);
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h));
    return {es.eigenvalues(), es.eigenvectors()};
}

inline Inertia inertia(const CMat& h, double zero_tol) {
    require_hermitian(h, "inertia");
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h), Eigen::EigenvaluesOnly);
    Inertia in;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double v = es.eigenvalues()(i);
        if (v < -zero_tol)
            ++in.n_minus;
        else if (v > zero_tol)
            ++in.n_plus;
        else
            ++in.n_zero;
    }
    return in;
}

// Inertia with the zero threshold taken relative to the largest |eigenvalue|.
inline Inertia inertia(const CMat& h) {
    require_hermitian(h, "inertia");
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h), Eigen::EigenvaluesOnly);
    double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    return inertia(h, kZeroEigRel * std::max(scale, 1e-300));
}

inline int numerical_rank(const CMat& h, double rel = kZeroEigRel) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h), Eigen::EigenvaluesOnly);
    double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    int r = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i)) > rel * scale) ++r;
    return r;
}

// Block A is declared singular when sigma_min(A) <= max(sigma_max(A), scale) / cond_cap.
// The scale argument lets a 1x1 block that is tiny relative to the whole matrix count as singular.
inline bool block_singular(const CMat& a, double cond_cap, double scale) {
    if (a.size() == 0) return false;
    Eigen::JacobiSVD<CMat> svd(a);
    const auto& s = svd.singularValues();
    double smax = s(0), smin = s(s.size() - 1);
    return !(smin > std::max(smax, scale) / cond_cap);
}

// Schur complement M/A = C - B A^{-1} B^dagger for the leading r x r block A.
inline CMat schur_complement(const CMat& m, int r, double cond_cap = 1e8) {
    require_hermitian(m, "schur_complement", 1e-10);
    const Eigen::Index n = m.rows();
    if (r < 0 || r > n) throw InvalidArgument("schur_complement: block size out of range");
    if (r == 0) return m;
    CMat a = m.topLeftCorner(r, r);
    CMat b = m.bottomLeftCorner(n - r, r);
    CMat c = m.bottomRightCorner(n - r, n - r);
    double scale = m.cwiseAbs().maxCoeff();
    if (block_singular(a, cond_cap, scale)) throw SingularBlock(0, "condition number above cap");
    CMat x = a.fullPivLu().solve(b.adjoint());
    return hermitize(c - b * x);
}

// Euclidean projection of v onto {w >= 0, sum w = t}.
inline RVec project_simplex(const RVec& v, double t = 1.0) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        css += u[size_t(k)];
        double th = (css - t) / double(k + 1);
        if (u[size_t(k)] - th > 0) theta = th;
    }
    RVec w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = std::max(v(i) - theta, 0.0);
    return w;
}

inline CMat reassemble(const CMat& vecs, const RVec& vals) {
    return vecs * vals.asDiagonal() * vecs.adjoint();
}

// Nearest PSD matrix in HS norm: eigen-clip.
inline CMat psd_project(const CMat& h) {
    require_hermitian(h, "psd_project", 1e-8);
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h));
    RVec v = es.eigenvalues().cwiseMax(0.0);
    return hermitize(reassemble(es.eigenvectors(), v));
}

// Nearest point of {X >= 0, Tr X = t}.
inline CMat spectraplex_project(const CMat& h, double t = 1.0) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h));
    RVec v = project_simplex(es.eigenvalues(), t);
    return hermitize(reassemble(es.eigenvectors(), v));
}

// Nearest PSD matrix of rank <= r: keep the r largest eigenvalues, clipped at zero.
inline CMat rank_r_psd_project(const CMat& h, int r) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h));
    const Eigen::Index n = h.rows();
    RVec v = RVec::Zero(n);
    for (Eigen::Index i = std::max<Eigen::Index>(0, n - r); i < n; ++i)
        v(i) = std::max(es.eigenvalues()(i), 0.0);
    return hermitize(reassemble(es.eigenvectors(), v));
}

inline CMat sqrtm_psd(const CMat& h) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h));
    RVec v = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return reassemble(es.eigenvectors(), v);
}

// exp(i t H) for Hermitian H.
inline CMat expi_hermitian(const CMat& h, double t) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h));
    CVec ph(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) ph(i) = std::exp(I_unit * (t * es.eigenvalues()(i)));
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

inline CMat outer(const CVec& v) { return v * v.adjoint(); }

inline CMat kron(const CMat& a, const CMat& b) {
    CMat k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

// Orthonormal basis of the orthogonal complement of the column span of q (q has orthonormal columns).
inline CMat orthonormal_complement(const CMat& q, Eigen::Index n) {
    CMat full = CMat::Identity(n, n) - q * q.adjoint();
    Eigen::JacobiSVD<CMat> svd(full, Eigen::ComputeFullU);
    return svd.matrixU().leftCols(n - q.cols());
}

} // namespace tomokit
