#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qobjects.hpp"
#include "rng.hpp"

namespace tomokit {

// Each basis is a d x d unitary whose columns are the basis vectors.
struct BasisSet {
    int dim = 0;
    std::vector<CMat> bases;
    std::string label;

    int size() const { return static_cast<int>(bases.size()); }
};

inline double basis_orthonormality_error(const CMat& b) {
    return (b.adjoint() * b - CMat::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff();
}

inline void validate_basis_set(const BasisSet& bs, double tol = 1e-10) {
    for (size_t b = 0; b < bs.bases.size(); ++b) {
        const auto& u = bs.bases[b];
        if (u.rows() != bs.dim || u.cols() != bs.dim) throw DimensionMismatch("basis has wrong size");
        if (basis_orthonormality_error(u) > tol)
            throw InvalidPovm("basis " + std::to_string(b) + " is not orthonormal");
    }
}

// Elements (1/B)|e><e|, one block per basis.
inline Povm as_povm(const BasisSet& bs) {
    if (bs.bases.empty()) throw InvalidArgument("as_povm: empty basis set");
    const int d = bs.dim;
    const double w = 1.0 / double(bs.bases.size());
    std::vector<CMat> el;
    std::vector<int> blk;
    el.reserve(bs.bases.size() * size_t(d));
    for (size_t b = 0; b < bs.bases.size(); ++b)
        for (int v = 0; v < d; ++v) {
            CVec e = bs.bases[b].col(v);
            el.push_back(w * outer(e));
            blk.push_back(int(b));
        }
    return make_povm(std::move(el), bs.label, std::move(blk), std::vector<double>(bs.bases.size(), w));
}

inline BasisSet computational_basis(int d) { return {d, {CMat::Identity(d, d)}, "computational"}; }

// ---------------------------------------------------------------------------
// SIC

namespace detail {
inline CMat weyl_shift(int d) {
    CMat x = CMat::Zero(d, d);
    for (int k = 0; k < d; ++k) x((k + 1) % d, k) = 1.0;
    return x;
}
inline CMat weyl_clock(int d) {
    CMat z = CMat::Zero(d, d);
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < d; ++k) z(k, k) = std::exp(I_unit * (2.0 * pi * k / d));
    return z;
}
}  // namespace detail

inline std::optional<CVec> builtin_sic_fiducial(int d) {
    const double pi = 3.14159265358979323846;
    if (d == 2) {
        double th = std::acos(1.0 / std::sqrt(3.0));
        CVec v(2);
        v << std::cos(th / 2), std::exp(I_unit * (pi / 4)) * std::sin(th / 2);
        return v;
    }
    if (d == 3) {
        CVec v(3);
        v << 0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
        return v;
    }
    if (d == 4) {
        // Numerical Weyl-Heisenberg covariant fiducial, overlaps exact to ~1e-16.
        CVec v(4);
        v << cplx(0.40084839132434091, 0.0), cplx(0.37276402538721909, -0.31138936445317877),
            cplx(0.55783384089734467, 0.50174572332246448), cplx(0.12898169793524522, 0.15440391488017488);
        return v;
    }
    return std::nullopt;
}

inline Povm sic(int d, const std::optional<CVec>& fiducial = std::nullopt) {
    CVec fid;
    if (fiducial) {
        fid = *fiducial;
        if (fid.size() != d) throw DimensionMismatch("sic: fiducial length differs from d");
    } else {
        auto b = builtin_sic_fiducial(d);
        if (!b) throw UnsupportedDim("sic: no built-in fiducial for d=" + std::to_string(d));
        fid = *b;
    }
    fid /= fid.norm();
    CMat x = detail::weyl_shift(d), z = detail::weyl_clock(d);
    std::vector<CMat> el;
    CMat xa = CMat::Identity(d, d);
    for (int a = 0; a < d; ++a) {
        CMat zb = CMat::Identity(d, d);
        for (int b = 0; b < d; ++b) {
            CVec v = xa * zb * fid;
            el.push_back(outer(v) / double(d));
            zb = zb * z;
        }
        xa = xa * x;
    }
    const double off = 1.0 / (double(d) * d * (d + 1));
    const double diag = 1.0 / (double(d) * d);
    for (size_t i = 0; i < el.size(); ++i)
        for (size_t j = i; j < el.size(); ++j) {
            double t = (el[i] * el[j]).trace().real();
            if (std::abs(t - (i == j ? diag : off)) > 1e-8)
                throw FiducialInvalid("sic: Weyl-Heisenberg orbit fails the overlap test");
        }
    return make_povm(std::move(el), "sic");
}

// ---------------------------------------------------------------------------
// MUB

namespace detail {
inline bool is_prime(int n) {
    if (n < 2) return false;
    for (int k = 2; k * k <= n; ++k)
        if (n % k == 0) return false;
    return true;
}

inline int log2_exact(int d) {
    if (d < 2 || (d & (d - 1)) != 0) return -1;
    int n = 0;
    while ((1 << n) < d) ++n;
    return n;
}

// Primitive polynomials over GF(2), including the leading term.
inline unsigned gf2_modulus(int n) {
    switch (n) {
        case 1: return 0b11;
        case 2: return 0b111;
        case 3: return 0b1011;
        case 4: return 0b10011;
        case 5: return 0b100101;
        case 6: return 0b1000011;
        default: return 0;
    }
}

inline unsigned gf2_mul(unsigned a, unsigned b, int n) {
    unsigned p = gf2_modulus(n), r = 0;
    while (b) {
        if (b & 1u) r ^= a;
        b >>= 1;
        a <<= 1;
        if ((a >> n) & 1u) a ^= p;
    }
    return r;
}

// Absolute trace GF(2^n) -> GF(2).
inline unsigned gf2_trace(unsigned a, int n) {
    unsigned s = 0, x = a;
    for (int k = 0; k < n; ++k) {
        s ^= x;
        x = gf2_mul(x, x, n);
    }
    return s & 1u;
}
}  // namespace detail

inline BasisSet mub(int d) {
    const double pi = 3.14159265358979323846;
    BasisSet bs{d, {}, "mub"};
    bs.bases.push_back(CMat::Identity(d, d));
    if (d > 2 && detail::is_prime(d)) {
        const double sd = 1.0 / std::sqrt(double(d));
        for (int b = 0; b < d; ++b) {
            CMat u(d, d);
            for (int v = 0; v < d; ++v)
                for (int x = 0; x < d; ++x) {
                    long ph = (long(b) * x * x + long(v) * x) % d;
                    u(x, v) = sd * std::exp(I_unit * (2.0 * pi * double(ph) / d));
                }
            bs.bases.push_back(u);
        }
    } else if (int n = detail::log2_exact(d); n >= 1 && n <= 6) {
        // |e_{a,v}> = d^{-1/2} sum_x i^{x^T S_a x} (-1)^{v.x} |x>, S_a[i][j] = tr(a b_i b_j) in the polynomial basis.
        const double sd = 1.0 / std::sqrt(double(d));
        const std::array<cplx, 4> ipow{cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
        for (int a = 0; a < d; ++a) {
            std::vector<int> s(size_t(n * n), 0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    s[size_t(i * n + j)] = int(detail::gf2_trace(
                        detail::gf2_mul(unsigned(a), detail::gf2_mul(1u << i, 1u << j, n), n), n));
            CMat u(d, d);
            for (int x = 0; x < d; ++x) {
                int q = 0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) q += ((x >> i) & 1) * s[size_t(i * n + j)] * ((x >> j) & 1);
                for (int v = 0; v < d; ++v) {
                    int par = __builtin_popcount(unsigned(v & x)) & 1;
                    u(x, v) = sd * ipow[size_t(q % 4)] * (par ? -1.0 : 1.0);
                }
            }
            bs.bases.push_back(u);
        }
    } else {
        throw UnsupportedDim("mub: d=" + std::to_string(d) + " is neither prime nor a power of two up to 64");
    }
    return bs;
}

inline double max_mub_overlap_error(const BasisSet& bs) {
    double err = 0.0;
    const double target = 1.0 / bs.dim;
    for (size_t a = 0; a < bs.bases.size(); ++a)
        for (size_t b = a + 1; b < bs.bases.size(); ++b) {
            RMat ov = (bs.bases[a].adjoint() * bs.bases[b]).cwiseAbs2();
            err = std::max(err, (ov.array() - target).abs().maxCoeff());
        }
    return err;
}

// ---------------------------------------------------------------------------
// Gell-Mann type bases

namespace detail {
// Basis made of 2-dim x-type (phase = 1) or y-type (phase = i) pairs; pairs must cover 0..d-1 once.
inline CMat pair_basis(int d, const std::vector<std::pair<int, int>>& pairs, cplx phase) {
    CMat u = CMat::Zero(d, d);
    const double s = 1.0 / std::sqrt(2.0);
    int col = 0;
    for (auto [m, n] : pairs) {
        u(m, col) = s;
        u(n, col) = s * phase;
        ++col;
        u(m, col) = s;
        u(n, col) = -s * phase;
        ++col;
    }
    if (col != d) throw InvalidArgument("pair_basis: pairs do not cover the space");
    return u;
}
}  // namespace detail

// Algorithm A.1: computational basis plus four bases per off-diagonal k = 1..r.
inline BasisSet gmb(int d, int r) {
    if (detail::log2_exact(d) < 1) throw UnsupportedDim("gmb: d must be a power of two");
    if (r < 1) throw InvalidArgument("gmb: r must be at least 1");
    if (r >= d) throw InvalidArgument("gmb: r must be below d");
    const int kmax = std::min(r, d / 2);
    BasisSet bs{d, {CMat::Identity(d, d)}, "gmb"};
    for (int k = 1; k <= kmax; ++k) {
        int ell = 1;
        while (k % (ell * 2) == 0) ell *= 2;
        std::vector<std::pair<int, int>> g1, g2;
        for (int t = 0; t < d; ++t) {
            std::pair<int, int> pr{t, (t + k) % d};
            ((t / ell) % 2 == 0 ? g1 : g2).push_back(pr);
        }
        bs.bases.push_back(detail::pair_basis(d, g1, 1.0));
        bs.bases.push_back(detail::pair_basis(d, g1, I_unit));
        if (2 * k == d) continue;  // second group repeats the first
        bs.bases.push_back(detail::pair_basis(d, g2, 1.0));
        bs.bases.push_back(detail::pair_basis(d, g2, I_unit));
    }
    return bs;
}

inline BasisSet gmb_4(int d) {
    if (d < 2 || d % 2 != 0) throw InvalidArgument("gmb_4: d must be even");
    std::vector<std::pair<int, int>> even, odd;
    for (int k = 0; k < d; k += 2) even.push_back({k, k + 1});
    for (int k = 1; k < d; k += 2) odd.push_back({k, (k + 1) % d});
    BasisSet bs{d, {}, "gmb4"};
    bs.bases = {detail::pair_basis(d, even, 1.0), detail::pair_basis(d, odd, 1.0),
                detail::pair_basis(d, even, I_unit), detail::pair_basis(d, odd, I_unit)};
    return bs;
}

inline BasisSet gmb_5(int d) {
    BasisSet b4 = gmb_4(d);
    BasisSet bs{d, {CMat::Identity(d, d)}, "gmb5"};
    for (auto& u : b4.bases) bs.bases.push_back(u);
    return bs;
}

// ---------------------------------------------------------------------------
// Flammia-type element-probing POVMs

namespace detail {
inline double min_eig(const CMat& h) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(h), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline std::vector<CMat> flammia_elements(int d, int r, const std::vector<double>& a, double b) {
    std::vector<CMat> el;
    CMat id = CMat::Identity(d, d);
    CMat sum = CMat::Zero(d, d);
    for (int k = 0; k < r; ++k) {
        CMat e = CMat::Zero(d, d);
        e(k, k) = a[size_t(k)];
        el.push_back(e);
        sum += e;
    }
    for (int k = 0; k < r; ++k) {
        for (int n = k + 1; n < d; ++n) {
            CMat e = id;
            e(k, n) += 1.0;
            e(n, k) += 1.0;
            el.push_back(b * e);
            sum += b * e;
        }
        for (int n = k + 1; n < d; ++n) {
            CMat e = id;
            e(k, n) += -I_unit;
            e(n, k) += I_unit;
            el.push_back(b * e);
            sum += b * e;
        }
    }
    el.push_back(id - sum);
    return el;
}

// Largest b keeping the closing element PSD, by bisection on its minimum eigenvalue.
inline double flammia_bmax(int d, int r, const std::vector<double>& a) {
    auto closing_min = [&](double b) { return min_eig(flammia_elements(d, r, a, b).back()); };
    if (closing_min(0.0) < -1e-12) {
        throw Infeasible("flammia: closing element not PSD even at b=0 (PSD violation " +
                         std::to_string(closing_min(0.0)) + ")");
    }
    double lo = 0.0, hi = 1.0;
    while (closing_min(hi) >= 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (closing_min(mid) >= 0.0 ? lo : hi) = mid;
    }
    return lo;
}
}  // namespace detail

inline Povm flammia_rank_r(int d, int r, std::vector<double> a = {}) {
    if (d < 2) throw InvalidArgument("flammia: d must be at least 2");
    if (r < 1 || r >= d) throw InvalidArgument("flammia_rank_r: need 1 <= r < d");
    if (a.empty()) a.assign(size_t(r), 0.5);
    if (int(a.size()) != r) throw InvalidArgument("flammia_rank_r: need one a_k per row");
    for (double ak : a)
        if (!(ak > 0.0 && ak < 1.0)) throw InvalidArgument("flammia: a must lie in (0,1)");
    double b = detail::flammia_bmax(d, r, a);
    if (!(b > 0.0)) throw Infeasible("flammia: no positive b keeps the closing element PSD");
    auto el = detail::flammia_elements(d, r, a, b);
    // clean the rounding-level negative eigenvalue of the closing element
    el.back() = psd_project(el.back());
    CMat id = CMat::Identity(d, d);
    CMat others = CMat::Zero(d, d);
    for (size_t k = 0; k + 1 < el.size(); ++k) others += el[k];
    el.back() = hermitize(id - others);
    return make_povm(std::move(el), r == 1 ? "flammia2d" : "flammia_rr");
}

inline Povm flammia_2d(int d, double a = 0.5) { return flammia_rank_r(d, 1, {a}); }

// 3d-2 rank-1 elements on adjacent 2-dim subspaces; weights b_j chosen so the elements resolve the identity.
inline Povm psi_3d(int d) {
    if (d < 2) throw InvalidArgument("psi_3d: d must be at least 2");
    std::vector<double> b(size_t(d), 0.0);
    b[size_t(d - 1)] = 0.5;
    for (int j = d - 2; j >= 1; --j) b[size_t(j)] = (1.0 - b[size_t(j + 1)]) / 2.0;
    double a = 1.0 - b[1];
    const double s2 = std::sqrt(2.0);
    const std::array<std::array<double, 3>, 3> n{{{2 * s2 / 3, 0.0, -1.0 / 3},
                                                  {-s2 / 3, std::sqrt(2.0 / 3), -1.0 / 3},
                                                  {-s2 / 3, -std::sqrt(2.0 / 3), -1.0 / 3}}};
    std::vector<CMat> el;
    CMat e0 = CMat::Zero(d, d);
    e0(0, 0) = a;
    el.push_back(e0);
    for (int j = 1; j < d; ++j) {
        int p = j - 1, q = j;
        for (const auto& v : n) {
            CMat e = CMat::Zero(d, d);
            e(p, p) = 1.0 + v[2];
            e(q, q) = 1.0 - v[2];
            e(p, q) = cplx(v[0], -v[1]);
            e(q, p) = cplx(v[0], v[1]);
            el.push_back(0.5 * b[size_t(j)] * e);
        }
    }
    return make_povm(std::move(el), "psi3d");
}

// ---------------------------------------------------------------------------
// Polynomial bases

// Orthonormal probabilists' Hermite Jacobi matrix of size n: off-diagonal sqrt(k), k = 1..n-1.
inline RMat hermite_jacobi(int n) {
    RMat j = RMat::Zero(n, n);
    for (int k = 1; k < n; ++k) j(k - 1, k) = j(k, k - 1) = std::sqrt(double(k));
    return j;
}

// p_0..p_{m-1} at x (orthonormal recurrence)
inline RVec hermite_values(int m, double x) {
    RVec p(m);
    if (m == 0) return p;
    p(0) = 1.0;
    if (m > 1) p(1) = x;
    for (int k = 1; k + 1 < m; ++k) p(k + 1) = (x * p(k) - std::sqrt(double(k)) * p(k - 1)) / std::sqrt(double(k + 1));
    return p;
}

namespace detail {
inline CMat hermite_basis(int d, int deg, double alpha, bool twist) {
    CMat u = CMat::Zero(d, d);
    Eigen::SelfAdjointEigenSolver<RMat> es(hermite_jacobi(deg));
    for (int j = 0; j < deg; ++j) {
        double x = es.eigenvalues()(j);
        RVec v = hermite_values(d, x);
        if (deg < d) v(d - 1) = 0.0;  // p_{d-1} vanishes at its own roots
        double nrm = v.norm();
        double res = std::abs(hermite_values(deg + 1, x)(deg)) / std::max(1.0, hermite_values(deg + 1, x).norm());
        if (!std::isfinite(nrm) || res > 1e-6)
            throw RootFindingFailed("poly_bases: root residual " + std::to_string(res));
        for (int k = 0; k < d; ++k) u(k, j) = (v(k) / nrm) * (twist ? std::exp(I_unit * (alpha * k)) : cplx(1.0));
    }
    if (deg < d) u(d - 1, d - 1) = 1.0;
    return u;
}
}  // namespace detail

inline BasisSet poly_bases(int d, int count = 5, double alpha = 1.0) {
    if (count != 4 && count != 5) throw InvalidArgument("poly_bases: count must be 4 or 5");
    if (d < 2) throw InvalidArgument("poly_bases: d must be at least 2");
    BasisSet bs{d, {}, count == 5 ? "poly5" : "poly4"};
    if (count == 5) bs.bases.push_back(CMat::Identity(d, d));
    bs.bases.push_back(detail::hermite_basis(d, d, alpha, false));
    bs.bases.push_back(detail::hermite_basis(d, d - 1, alpha, false));
    bs.bases.push_back(detail::hermite_basis(d, d, alpha, true));
    bs.bases.push_back(detail::hermite_basis(d, d - 1, alpha, true));
    return bs;
}

// ---------------------------------------------------------------------------
// Random bases

inline BasisSet random_bases(int d, int n, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("random_bases: n must be at least 1");
    BasisSet bs{d, {}, "random"};
    for (int b = 0; b < n; ++b) bs.bases.push_back(haar_unitary(d, child_seed(seed, std::uint64_t(b))));
    return bs;
}

inline BasisSet local_random_bases(int n_qubits, int n, std::uint64_t seed) {
    if (n < 1 || n_qubits < 1) throw InvalidArgument("local_random_bases: n and n_qubits must be positive");
    const int d = 1 << n_qubits;
    BasisSet bs{d, {}, "local-random"};
    for (int b = 0; b < n; ++b) {
        Rng rng(child_seed(seed, std::uint64_t(b)));
        CMat u = CMat::Identity(1, 1);
        for (int q = 0; q < n_qubits; ++q) u = kron(u, haar_unitary(2, rng));
        bs.bases.push_back(u);
    }
    return bs;
}

// ---------------------------------------------------------------------------
// Neumark extension

// Embeds a rank-1 POVM on an s-dim space as a basis of a d-dim space (first s coordinates are the system).
inline BasisSet neumark_extend(const Povm& povm, int d) {
    const int s = povm.dim;
    const int n = povm.size();
    if (n > d) throw InvalidArgument("neumark_extend: more elements than the target dimension");
    if (s > n) throw InvalidArgument("neumark_extend: fewer elements than the support dimension");
    CMat phi(s, n);
    for (int mu = 0; mu < n; ++mu) {
        Eigen::SelfAdjointEigenSolver<CMat> es(hermitize(povm.elements[size_t(mu)]));
        const RVec& ev = es.eigenvalues();
        if (ev(s - 1) > 0 && s > 1 && ev(s - 2) > 1e-9 * ev(s - 1))
            throw InvalidArgument("neumark_extend: element " + std::to_string(mu) + " is not rank one");
        phi.col(mu) = std::sqrt(std::max(ev(s - 1), 0.0)) * es.eigenvectors().col(s - 1);
    }
    if ((phi * phi.adjoint() - CMat::Identity(s, s)).cwiseAbs().maxCoeff() > 1e-8)
        throw InvalidArgument("neumark_extend: amplitude rows are not orthonormal");
    // rows of phi are orthonormal in C^n; complete them to an n x n unitary
    CMat rows_t = phi.adjoint();  // n x s, orthonormal columns
    CMat comp = orthonormal_complement(rows_t, n);
    CMat u(n, n);
    u.topRows(s) = phi;
    if (n > s) u.bottomRows(n - s) = comp.adjoint();
    CMat full = CMat::Identity(d, d);
    full.topLeftCorner(n, n) = u;
    return {d, {full}, "neumark"};
}

}  // namespace tomokit
