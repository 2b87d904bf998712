#include <gtest/gtest.h>

#include <tomokit/povmlib.hpp>
#include <tomokit/qobjects.hpp>

using namespace tomokit;

namespace {

CMat sqrtm_oracle(const CMat& a) {
    Eigen::ComplexEigenSolver<CMat> es(a);
    CVec ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::sqrt(ev(i));
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().inverse();
}

CMat kraus_sum(const std::vector<CMat>& ks, const CMat& rho) {
    CMat out = CMat::Zero(rho.rows(), rho.cols());
    for (const auto& k : ks) out += k * rho * k.adjoint();
    return out;
}

std::vector<CMat> random_cptp_kraus(int d, int n, std::uint64_t seed) {
    Rng rng(seed);
    CMat u = haar_unitary(d * n, rng);
    std::vector<CMat> ks;
    for (int k = 0; k < n; ++k) ks.push_back(u.block(k * d, 0, d, d));
    return ks;
}

}  // namespace

TEST(Born, MaximallyMixedUniform) {
    Povm p = as_povm(mub(3));
    RVec pr = born_probabilities(p, CMat(CMat::Identity(3, 3) / 3.0));
    // each basis block has weight 1/4 and d=3 outcomes
    for (Eigen::Index i = 0; i < pr.size(); ++i) EXPECT_NEAR(pr(i), 1.0 / 3.0 / 4.0, 1e-14);
    Povm c = as_povm(computational_basis(4));
    RVec pc = born_probabilities(c, CMat(CMat::Identity(4, 4) / 4.0));
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(pc(i), 0.25, 1e-15);
}

TEST(Born, ComputationalBasisKet) {
    Povm c = as_povm(computational_basis(3));
    CMat rho = CMat::Zero(3, 3);
    rho(0, 0) = 1.0;
    RVec p = born_probabilities(c, rho);
    EXPECT_DOUBLE_EQ(p(0), 1.0);
    EXPECT_DOUBLE_EQ(p(1), 0.0);
    EXPECT_DOUBLE_EQ(p(2), 0.0);
}

TEST(Born, SicMatchesLoopOracle) {
    Povm s = sic(4);
    DensityMatrix rho = random_mixed_rank(4, 4, 3);
    RVec p = born_probabilities(s, rho);
    double total = 0;
    for (int mu = 0; mu < s.size(); ++mu) {
        cplx t(0.0);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) t += s.elements[size_t(mu)](i, j) * rho.matrix(j, i);
        EXPECT_NEAR(p(mu), t.real(), 1e-12);
        total += p(mu);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Born, DimensionMismatch) {
    Povm c = as_povm(computational_basis(3));
    EXPECT_THROW(born_probabilities(c, CMat(CMat::Identity(2, 2))), DimensionMismatch);
}

TEST(Born, Linearity) {
    Povm s = sic(3);
    for (int t = 0; t < 20; ++t) {
        auto r1 = random_mixed_rank(3, 2, 100 + t), r2 = random_mixed_rank(3, 3, 200 + t);
        double a = t / 19.0;
        RVec lhs = born_probabilities(s, CMat(a * r1.matrix + (1 - a) * r2.matrix));
        RVec rhs = a * born_probabilities(s, r1) + (1 - a) * born_probabilities(s, r2);
        EXPECT_LT((lhs - rhs).norm(), 1e-10);
    }
}

TEST(Born, PovmMeasuresTrace) {
    Rng rng(4);
    for (const Povm& p : {sic(4), as_povm(gmb_5(4)), flammia_2d(4), psi_3d(4)}) {
        CMat g = rng.ginibre(4, 3);
        CMat x = g * g.adjoint();
        double s = p.R.colwise().sum() * herm_to_real(x);
        EXPECT_NEAR(s, x.trace().real(), 1e-10);
    }
}

TEST(RandomStates, PureHasUnitPurity) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto rho = random_mixed_rank(5, 1, s);
        EXPECT_NEAR((rho.matrix * rho.matrix).trace().real(), 1.0, 1e-10);
        auto psi = random_pure(5, s);
        EXPECT_NEAR((psi.matrix * psi.matrix).trace().real(), 1.0, 1e-10);
    }
}

TEST(RandomStates, RankMatchesConstruction) {
    for (int r = 1; r <= 4; ++r)
        for (std::uint64_t s = 0; s < 20; ++s) {
            auto rho = random_mixed_rank(4, r, s);
            Eigen::SelfAdjointEigenSolver<CMat> es(rho.matrix, Eigen::EigenvaluesOnly);
            int cnt = 0;
            for (int i = 0; i < 4; ++i) cnt += es.eigenvalues()(i) > 1e-9;
            EXPECT_EQ(cnt, r);
            EXPECT_NO_THROW(validate_state(rho.matrix));
        }
}

TEST(RandomStates, MeanPurityMatchesIndependentSampler) {
    // independent sampler: Box-Muller Ginibre with its own generator
    const int d = 4, n = 10000;
    std::vector<double> a, b;
    std::mt19937_64 eng(987654321);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto gauss = [&]() {
        double u1 = 1.0 - u(eng), u2 = u(eng);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * 3.14159265358979323846 * u2);
    };
    for (int s = 0; s < n; ++s) {
        auto rho = random_mixed_rank(d, d, 5000 + std::uint64_t(s));
        a.push_back((rho.matrix * rho.matrix).trace().real());
        CMat g(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) g(i, j) = cplx(gauss(), gauss());
        CMat w = g * g.adjoint();
        w /= w.trace().real();
        b.push_back((w * w).trace().real());
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); };
    auto var = [&](const std::vector<double>& v) {
        double m = mean(v), s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return s / double(v.size() - 1);
    };
    double se = std::sqrt(var(a) / n + var(b) / n);
    EXPECT_LT(std::abs(mean(a) - mean(b)), 3 * se);
    // HS-induced mean purity is 2d/(d^2+1)
    EXPECT_NEAR(mean(a), 2.0 * d / (d * d + 1.0), 4 * std::sqrt(var(a) / n));
}

TEST(RandomStates, RankOutOfRange) {
    EXPECT_THROW(random_mixed_rank(3, 0, 1), InvalidArgument);
    EXPECT_THROW(random_mixed_rank(3, 4, 1), InvalidArgument);
}

TEST(Fidelity, IdenticalStates) {
    auto rho = random_mixed_rank(4, 3, 8);
    EXPECT_NEAR(fidelity(rho, rho), 1.0, 1e-10);
    EXPECT_NEAR(hs_distance(rho, rho), 0.0, 1e-15);
}

TEST(Fidelity, OrthogonalPureDistance) {
    CVec a = CVec::Zero(2), b = CVec::Zero(2);
    a(0) = 1;
    b(1) = 1;
    double dist = hs_distance(outer(a), outer(b));
    EXPECT_NEAR(dist * dist, 2.0, 1e-15);
    EXPECT_NEAR(fidelity(outer(a), outer(b)), 0.0, 1e-15);
}

TEST(Fidelity, UhlmannMatchesSqrtmOracle) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto r = random_mixed_rank(4, 4, s), q = random_mixed_rank(4, 4, 1000 + s);
        CMat sr = sqrtm_oracle(r.matrix);
        double f = std::pow(sqrtm_oracle(sr * q.matrix * sr).trace().real(), 2);
        EXPECT_NEAR(fidelity(r, q), f, 1e-10);
        EXPECT_NEAR(fidelity(r, q), fidelity(q, r), 1e-10);
    }
}

TEST(Fidelity, PureArgumentUsesOverlap) {
    CVec psi = random_pure_vector(5, 4);
    auto sigma = random_mixed_rank(5, 3, 5);
    EXPECT_NEAR(fidelity(outer(psi), sigma.matrix), (psi.adjoint() * sigma.matrix * psi)(0, 0).real(), 1e-13);
}

TEST(ProcessFidelity, SelfIsOne) {
    auto pm = kraus_to_chi(random_cptp_kraus(3, 3, 1));
    EXPECT_NEAR(process_fidelity(pm, pm), 1.0, 1e-9);
}

TEST(ProcessFidelity, UnitaryOverlap) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        CMat ut = haar_unitary(3, s), v = haar_unitary(3, 100 + s);
        auto a = kraus_to_chi({ut}), b = kraus_to_chi({v});
        double oracle = std::norm((ut.adjoint() * v).trace()) / 9.0;
        EXPECT_NEAR(process_fidelity(b, a), oracle, 1e-9);
        EXPECT_NEAR(process_fidelity_unitary(b, ut), oracle, 1e-12);
    }
}

TEST(ProcessFidelity, DepolarizedMixture) {
    const int d = 3;
    CMat ut = haar_unitary(d, 77);
    for (double xi : {0.0, 0.1, 0.5, 0.9}) {
        ProcessMatrix pm;
        pm.dim = d;
        pm.chi = (1 - xi) * unitary_chi(ut) + xi * CMat::Identity(d * d, d * d) / double(d);
        EXPECT_NEAR(process_fidelity_unitary(pm, ut), (1 - xi) + xi / (d * d), 1e-9);
    }
}

TEST(ProcessFidelity, BasisMismatch) {
    auto a = kraus_to_chi({CMat(CMat::Identity(2, 2))});
    auto b = a;
    b.basis_label = "pauli";
    EXPECT_THROW(process_fidelity(a, b), InvalidArgument);
}

TEST(Kraus, UnitaryChiRankOneTraceD) {
    CMat u = haar_unitary(4, 3);
    auto pm = kraus_to_chi({u});
    EXPECT_EQ(numerical_rank(pm.chi), 1);
    EXPECT_NEAR(pm.chi.trace().real(), 4.0, 1e-12);
    EXPECT_TRUE(pm.tp);
}

TEST(Kraus, IdentityChannelExact) {
    auto pm = kraus_to_chi({CMat(CMat::Identity(3, 3))});
    auto rho = random_mixed_rank(3, 2, 1);
    EXPECT_EQ(chi_apply(pm, rho.matrix), rho.matrix);
}

TEST(Kraus, RandomChannelMatchesKrausSum) {
    auto ks = random_cptp_kraus(3, 3, 42);
    auto pm = kraus_to_chi(ks);
    EXPECT_TRUE(pm.tp);
    EXPECT_LT(tp_error(pm.chi, 3), 1e-10);
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto rho = random_mixed_rank(3, 3, s);
        EXPECT_LT((chi_apply(pm, rho.matrix) - kraus_sum(ks, rho.matrix)).norm(), 1e-12);
    }
}

TEST(Kraus, NonTraceSetFlagged) {
    auto pm = kraus_to_chi({CMat(0.5 * CMat::Identity(2, 2))});
    EXPECT_FALSE(pm.tp);
}

TEST(Kraus, RoundTripPreservesAction) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto pm = kraus_to_chi(random_cptp_kraus(3, 2, 500 + s));
        auto ks = chi_to_kraus(pm);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                CMat e = CMat::Zero(3, 3);
                e(i, j) = 1.0;
                EXPECT_LT((kraus_sum(ks, e) - chi_apply(pm, e)).norm(), 1e-9);
            }
    }
}

TEST(Kraus, InconsistentDims) {
    EXPECT_THROW(kraus_to_chi({CMat(CMat::Identity(2, 2)), CMat(CMat::Identity(3, 3))}), DimensionMismatch);
}
