#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matcore.hpp"
#include "rng.hpp"

namespace tomokit {

struct DensityMatrix {
    int dim = 0;
    CMat matrix;
};

inline void validate_state(const CMat& rho, double tol = 1e-9) {
    require_hermitian(rho, "state");
    if (!rho.allFinite()) throw InvalidArgument("state has non-finite entries");
    if (std::abs(rho.trace().real() - 1.0) > tol) throw InvalidArgument("state trace is not one");
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(rho), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -tol) throw InvalidArgument("state is not positive semidefinite");
}

inline DensityMatrix make_state(const CMat& rho) {
    validate_state(rho);
    return {static_cast<int>(rho.rows()), hermitize(rho)};
}

inline DensityMatrix pure_state(const CVec& psi) {
    CVec v = psi / psi.norm();
    return {static_cast<int>(v.size()), outer(v)};
}

// Measurement outcomes grouped in blocks; each block is one basis (weight 1/B) or the whole POVM.
struct Povm {
    int dim = 0;
    std::vector<CMat> elements;
    CMat xi;                     // N x d^2, row mu = vectorize(E_mu)^T
    RMat R;                      // N x d^2, row mu = herm_to_real(E_mu)
    std::vector<int> block;      // block index of each element
    std::vector<double> block_weight;
    std::string label;

    int size() const { return static_cast<int>(elements.size()); }
    int n_blocks() const { return static_cast<int>(block_weight.size()); }
    int block_size(int b) const {
        int n = 0;
        for (int k : block) n += (k == b);
        return n;
    }
};

inline double povm_closure_error(const std::vector<CMat>& elements) {
    if (elements.empty()) return 0.0;
    Eigen::Index d = elements.front().rows();
    CMat s = CMat::Zero(d, d);
    for (const auto& e : elements) s += e;
    return (s - CMat::Identity(d, d)).cwiseAbs().maxCoeff();
}

inline void validate_povm(const std::vector<CMat>& elements, double psd_tol = 1e-9, double closure_tol = 1e-8) {
    if (elements.empty()) throw InvalidPovm("no elements");
    Eigen::Index d = elements.front().rows();
    for (size_t k = 0; k < elements.size(); ++k) {
        const auto& e = elements[k];
        if (e.rows() != d || e.cols() != d) throw DimensionMismatch("POVM elements differ in size");
        if (hermiticity_error(e) > 1e-9) throw InvalidPovm("element " + std::to_string(k) + " not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(e), Eigen::EigenvaluesOnly);
        if (es.eigenvalues()(0) < -psd_tol)
            throw InvalidPovm("element " + std::to_string(k) + " not PSD (min eig " +
                              std::to_string(es.eigenvalues()(0)) + ")");
    }
    double err = povm_closure_error(elements);
    if (err > closure_tol) throw InvalidPovm("elements do not resolve the identity (error " + std::to_string(err) + ")");
}

inline Povm make_povm(std::vector<CMat> elements, std::string label, std::vector<int> block = {},
                      std::vector<double> block_weight = {}, bool validate = true) {
    if (validate) validate_povm(elements);
    Povm p;
    p.dim = static_cast<int>(elements.front().rows());
    const Eigen::Index n = static_cast<Eigen::Index>(elements.size());
    const Eigen::Index d2 = Eigen::Index(p.dim) * p.dim;
    p.xi.resize(n, d2);
    p.R.resize(n, d2);
    for (Eigen::Index k = 0; k < n; ++k) {
        CMat e = hermitize(elements[size_t(k)]);
        p.xi.row(k) = vectorize(e).transpose();
        p.R.row(k) = herm_to_real(e).transpose();
        elements[size_t(k)] = e;
    }
    p.elements = std::move(elements);
    if (block.empty()) {
        p.block.assign(size_t(n), 0);
        p.block_weight = {1.0};
    } else {
        p.block = std::move(block);
        p.block_weight = std::move(block_weight);
    }
    p.label = std::move(label);
    return p;
}

struct MeasurementRecord {
    RVec f;
    std::string povm_label;
    std::string noise_tag = "ideal";
    std::uint64_t seed = 0;
    std::vector<RVec> components;  // individual error/noise vectors, when retained
};

// p_mu = Tr(E_mu rho); tiny negatives from rounding are clipped.
inline RVec born_probabilities(const Povm& povm, const CMat& rho) {
    if (rho.rows() != povm.dim || rho.cols() != povm.dim)
        throw DimensionMismatch("born_probabilities: state and POVM dimensions differ");
    RVec p = povm.R * herm_to_real(hermitize(rho));
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) < 0 && p(i) > -1e-10) p(i) = 0.0;
    return p;
}

inline RVec born_probabilities(const Povm& povm, const DensityMatrix& rho) {
    return born_probabilities(povm, rho.matrix);
}

inline DensityMatrix random_pure(int d, std::uint64_t seed) {
    if (d < 1) throw InvalidArgument("random_pure: d must be positive");
    Rng rng(seed);
    return pure_state(rng.cgauss_vec(d));
}

inline CVec random_pure_vector(int d, std::uint64_t seed) {
    Rng rng(seed);
    CVec v = rng.cgauss_vec(d);
    return v / v.norm();
}

// rho = G G^dagger / Tr(G G^dagger), G a d x r Ginibre matrix.
inline DensityMatrix random_mixed_rank(int d, int r, std::uint64_t seed) {
    if (r < 1 || r > d) throw InvalidArgument("random_mixed_rank: rank out of range");
    Rng rng(seed);
    CMat g = rng.ginibre(d, r);
    CMat rho = g * g.adjoint();
    rho /= rho.trace().real();
    return {d, hermitize(rho)};
}

inline double hs_distance(const CMat& a, const CMat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("hs_distance: size mismatch");
    return (a - b).norm();
}

inline double hs_distance(const DensityMatrix& a, const DensityMatrix& b) { return hs_distance(a.matrix, b.matrix); }

namespace detail {
// (Tr sqrt(sqrt(A) B sqrt(A)))^2 computed on the support of A.
inline double root_fidelity_sq(const CMat& a, const CMat& b) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(a));
    const RVec& lam = es.eigenvalues();
    double lmax = std::max(lam.maxCoeff(), 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam(i) > 1e-14 * lmax) keep.push_back(i);
    if (keep.empty()) return 0.0;
    const Eigen::Index r = static_cast<Eigen::Index>(keep.size());
    CMat v(a.rows(), r);
    RVec sl(r);
    for (Eigen::Index k = 0; k < r; ++k) {
        v.col(k) = es.eigenvectors().col(keep[size_t(k)]);
        sl(k) = std::sqrt(lam(keep[size_t(k)]));
    }
    CMat m = sl.asDiagonal() * (v.adjoint() * b * v) * sl.asDiagonal();
    Eigen::SelfAdjointEigenSolver<CMat> em(hermitize(m), Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) s += std::sqrt(std::max(em.eigenvalues()(i), 0.0));
    return s * s;
}
}  // namespace detail

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. The lower-rank argument is used
// as the outer factor, which reduces to <psi|sigma|psi> when one state is pure.
inline double fidelity(const CMat& rho, const CMat& sigma) {
    if (rho.rows() != sigma.rows()) throw DimensionMismatch("fidelity: dimension mismatch");
    int ra = numerical_rank(rho, 1e-12), rb = numerical_rank(sigma, 1e-12);
    double f = ra <= rb ? detail::root_fidelity_sq(rho, sigma) : detail::root_fidelity_sq(sigma, rho);
    return std::clamp(f, 0.0, 1.0);
}

inline double fidelity(const DensityMatrix& a, const DensityMatrix& b) { return fidelity(a.matrix, b.matrix); }

inline double fidelity_pure(const CVec& psi, const CMat& sigma) {
    return std::clamp((psi.adjoint() * sigma * psi)(0, 0).real() / psi.squaredNorm(), 0.0, 1.0);
}

// Process matrices are stored in the elementary basis {|i><j|}: chi = sum_mu |A_mu)(A_mu|.
inline const std::string kElementaryBasis = "elementary";

struct ProcessMatrix {
    int dim = 0;
    std::string basis_label = kElementaryBasis;
    CMat chi;
    bool tp = false;
};

inline CMat unitary_chi(const CMat& u) {
    CVec v = vectorize(u);
    return v * v.adjoint();
}

inline double tp_error(const CMat& chi, int d) {
    CMat t = CMat::Zero(d, d);
    for (int j = 0; j < d; ++j)
        for (int l = 0; l < d; ++l)
            for (int i = 0; i < d; ++i) t(j, l) += chi(i + d * j, i + d * l);
    return (t - CMat::Identity(d, d)).cwiseAbs().maxCoeff();
}

inline ProcessMatrix kraus_to_chi(const std::vector<CMat>& kraus) {
    if (kraus.empty()) throw InvalidArgument("kraus_to_chi: empty Kraus list");
    const Eigen::Index d = kraus.front().rows();
    CMat chi = CMat::Zero(d * d, d * d);
    CMat s = CMat::Zero(d, d);
    for (const auto& a : kraus) {
        if (a.rows() != d || a.cols() != d) throw DimensionMismatch("kraus_to_chi: inconsistent Kraus sizes");
        CVec v = vectorize(a);
        chi += v * v.adjoint();
        s += a.adjoint() * a;
    }
    ProcessMatrix pm;
    pm.dim = static_cast<int>(d);
    pm.chi = hermitize(chi);
    pm.tp = (s - CMat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-8;
    return pm;
}

inline std::vector<CMat> chi_to_kraus(const ProcessMatrix& pm, double rel_tol = 1e-12) {
    if (pm.basis_label != kElementaryBasis) throw InvalidArgument("chi_to_kraus: expects the elementary basis");
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(pm.chi));
    double lmax = es.eigenvalues().maxCoeff();
    std::vector<CMat> out;
    for (Eigen::Index k = es.eigenvalues().size() - 1; k >= 0; --k) {
        double l = es.eigenvalues()(k);
        if (l <= rel_tol * lmax) break;
        out.push_back(std::sqrt(l) * devectorize(es.eigenvectors().col(k)));
    }
    return out;
}

// E(rho)_{ik} = sum_{jl} rho_{jl} chi_{(i+dj),(k+dl)}
inline CMat chi_apply(const ProcessMatrix& pm, const CMat& rho) {
    if (pm.basis_label != kElementaryBasis) throw InvalidArgument("chi_apply: expects the elementary basis");
    const int d = pm.dim;
    if (rho.rows() != d) throw DimensionMismatch("chi_apply: state dimension differs from process");
    CMat out = CMat::Zero(d, d);
    for (int j = 0; j < d; ++j)
        for (int l = 0; l < d; ++l) {
            cplx r = rho(j, l);
            if (r == cplx(0.0)) continue;
            out += r * pm.chi.block(d * j, d * l, d, d);
        }
    return out;
}

// chi expressed in the operator basis whose vectorized elements are the columns of w: W^dagger chi W.
inline CMat chi_in_basis(const CMat& chi_elementary, const CMat& w) { return w.adjoint() * chi_elementary * w; }

// F(chi1, chi2) = (Tr sqrt(sqrt(chi1) chi2 sqrt(chi1)))^2 / (Tr chi1 Tr chi2)
inline double process_fidelity(const ProcessMatrix& a, const ProcessMatrix& b) {
    if (a.basis_label != b.basis_label) throw InvalidArgument("process_fidelity: operator basis mismatch");
    if (a.dim != b.dim) throw DimensionMismatch("process_fidelity: dimension mismatch");
    double ta = a.chi.trace().real(), tb = b.chi.trace().real();
    CMat na = a.chi / ta, nb = b.chi / tb;
    return fidelity(na, nb);
}

// (U|chi|U) / d^2
inline double process_fidelity_unitary(const ProcessMatrix& pm, const CMat& u) {
    if (pm.basis_label != kElementaryBasis)
        throw InvalidArgument("process_fidelity_unitary: expects the elementary basis");
    CVec v = vectorize(u);
    double d = pm.dim;
    return std::clamp((v.adjoint() * pm.chi * v)(0, 0).real() / (d * d), 0.0, 1.0);
}

}  // namespace tomokit
