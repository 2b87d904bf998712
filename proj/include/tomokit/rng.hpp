#pragma once

#include <cstdint>
#include <random>

#include "matcore.hpp"

namespace tomokit {

// splitmix64 finalizer; used to derive child seeds from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ (index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    double normal() { return nd_(eng_); }
    double uniform() { return ud_(eng_); }
    std::uint64_t next() { return eng_(); }
    std::mt19937_64& engine() { return eng_; }

    // Standard complex Gaussian: real and imaginary parts N(0, 1/2).
    cplx cnormal() {
        constexpr double s = 0.70710678118654752440;
        double re = nd_(eng_);
        double im = nd_(eng_);
        return {s * re, s * im};
    }

    CMat ginibre(Eigen::Index rows, Eigen::Index cols) {
        CMat g(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = cnormal();
        return g;
    }

    CVec cgauss_vec(Eigen::Index n) {
        CVec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal();
        return v;
    }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> nd_{0.0, 1.0};
    std::uniform_real_distribution<double> ud_{0.0, 1.0};
};

// Haar unitary: QR of a Ginibre matrix with the phases of R's diagonal absorbed.
inline CMat haar_unitary(Eigen::Index d, Rng& rng) {
    CMat g = rng.ginibre(d, d);
    Eigen::HouseholderQR<CMat> qr(g);
    CMat q = qr.householderQ() * CMat::Identity(d, d);
    CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d; ++i) {
        cplx z = r(i, i);
        double a = std::abs(z);
        q.col(i) *= (a > 0 ? z / a : cplx(1.0));
    }
    return q;
}

inline CMat haar_unitary(Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    return haar_unitary(d, rng);
}

// Random Hermitian matrix with unit HS norm (GUE direction).
inline CMat random_hermitian_unit(Eigen::Index d, Rng& rng) {
    CMat g = rng.ginibre(d, d);
    CMat h = hermitize(g);
    return h / h.norm();
}

} // namespace tomokit
