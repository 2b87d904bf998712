#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "matcore.hpp"
#include "qobjects.hpp"
#include "simkit.hpp"

namespace tomokit {

namespace detail {
inline CVec basis_ket(int d, int k) { return CVec::Unit(d, k); }

inline CVec plus_ket(int d) { return CVec::Constant(d, cplx(1.0 / std::sqrt(double(d)))); }

inline void require_dim(int d, const char* what) {
    if (d < 2) throw InvalidArgument(std::string(what) + ": dimension must be at least 2");
}
}  // namespace detail

// |k>, then (|k>+|n>)/sqrt2 for k<n, then (|k>+i|n>)/sqrt2 for k<n.
inline StateSet standard_states(int d) {
    detail::require_dim(d, "standard_states");
    StateSet s{d, {}, "standard"};
    for (int k = 0; k < d; ++k) s.states.push_back(pure_state(detail::basis_ket(d, k)));
    for (int k = 0; k < d; ++k)
        for (int n = k + 1; n < d; ++n)
            s.states.push_back(pure_state(CVec((detail::basis_ket(d, k) + detail::basis_ket(d, n)) / std::sqrt(2.0))));
    for (int k = 0; k < d; ++k)
        for (int n = k + 1; n < d; ++n)
            s.states.push_back(
                pure_state(CVec((detail::basis_ket(d, k) + I_unit * detail::basis_ket(d, n)) / std::sqrt(2.0))));
    return s;
}

inline std::vector<double> geometric_spectrum(int d) {
    std::vector<double> v;
    double s = 0.0;
    for (int n = 0; n < d; ++n) {
        v.push_back(std::ldexp(1.0, -n));
        s += v.back();
    }
    for (auto& x : v) x /= s;
    return v;
}

inline StateSet uic_minimal_mixed(int d, std::vector<double> spectrum = {}) {
    detail::require_dim(d, "uic_minimal_mixed");
    if (spectrum.empty()) spectrum = geometric_spectrum(d);
    if (int(spectrum.size()) != d) throw DimensionMismatch("uic_minimal_mixed: spectrum length must equal d");
    double sum = 0.0;
    for (int n = 0; n < d; ++n) {
        if (!(spectrum[size_t(n)] > 0.0)) throw InvalidArgument("uic_minimal_mixed: spectrum must be positive");
        if (n > 0 && !(spectrum[size_t(n)] < spectrum[size_t(n - 1)]))
            throw InvalidArgument("uic_minimal_mixed: spectrum must be strictly decreasing");
        sum += spectrum[size_t(n)];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument("uic_minimal_mixed: spectrum must sum to 1");
    CMat rho = CMat::Zero(d, d);
    for (int n = 0; n < d; ++n) rho(n, n) = spectrum[size_t(n)];
    return {d, {make_state(rho), pure_state(detail::plus_ket(d))}, "uic-mixed"};
}

inline StateSet uic_pure_nplus(int d) {
    detail::require_dim(d, "uic_pure_nplus");
    StateSet s{d, {}, "uic-nplus"};
    for (int k = 0; k + 1 < d; ++k) s.states.push_back(pure_state(detail::basis_ket(d, k)));
    s.states.push_back(pure_state(detail::plus_ket(d)));
    return s;
}

inline StateSet uic_pure_0plus(int d) {
    detail::require_dim(d, "uic_pure_0plus");
    StateSet s{d, {pure_state(detail::basis_ket(d, 0))}, "uic-0plus"};
    for (int n = 1; n < d; ++n)
        s.states.push_back(pure_state(CVec((detail::basis_ket(d, 0) + detail::basis_ket(d, n)) / std::sqrt(2.0))));
    return s;
}

inline int operator_rank(const StateSet& s) {
    if (s.states.empty()) return 0;
    CMat m(Eigen::Index(s.dim) * s.dim, s.size());
    for (int k = 0; k < s.size(); ++k) m.col(k) = vectorize(s.states[size_t(k)].matrix);
    Eigen::FullPivLU<CMat> lu(m);
    lu.setThreshold(1e-10);
    return static_cast<int>(lu.rank());
}

// Appends standard states, in their enumeration order, while they raise the operator-space rank.
inline StateSet supplement_to_full(const StateSet& in, int d) {
    if (in.dim != d) throw DimensionMismatch("supplement_to_full: dimension mismatch");
    StateSet out = in;
    out.label = in.label + "+standard";
    int rank = operator_rank(out);
    if (rank != out.size()) throw InvalidArgument("supplement_to_full: input states are not linearly independent");
    auto std_set = standard_states(d);
    for (const auto& st : std_set.states) {
        if (rank == d * d) break;
        out.states.push_back(st);
        int nr = operator_rank(out);
        if (nr > rank) rank = nr;
        else out.states.pop_back();
    }
    if (rank != d * d) throw InvalidArgument("supplement_to_full: could not reach full operator rank");
    if (out.size() == in.size()) out.label = in.label;
    return out;
}

// Dimension of {X : [X, rho_k] = 0 for every state in the set}.
inline int commutant_dimension(const StateSet& s, double tol = 1e-9) {
    const int d = s.dim;
    const Eigen::Index n = Eigen::Index(d) * d;
    CMat stack(n * s.size(), n);
    CMat id = CMat::Identity(d, d);
    for (int k = 0; k < s.size(); ++k) {
        const CMat& r = s.states[size_t(k)].matrix;
        // vec(X r - r X) = (r^T (x) I - I (x) r) vec(X)
        stack.block(n * k, 0, n, n) = kron(CMat(r.transpose()), id) - kron(id, r);
    }
    Eigen::JacobiSVD<CMat> svd(stack);
    const auto& sv = svd.singularValues();
    int zero = 0;
    double smax = sv.size() ? sv(0) : 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= tol * std::max(1.0, smax)) ++zero;
    return zero + static_cast<int>(n - sv.size());
}

}  // namespace tomokit
