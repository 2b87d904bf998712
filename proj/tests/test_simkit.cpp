#include <gtest/gtest.h>

#include <tomokit/povmlib.hpp>
#include <tomokit/simkit.hpp>

using namespace tomokit;

TEST(NoiseSpec, ParseRoundTrip) {
    EXPECT_EQ(parse_noise("ideal").kind, NoiseSpec::Kind::ideal);
    auto m = parse_noise("multinomial:m=4800");
    EXPECT_EQ(m.kind, NoiseSpec::Kind::multinomial);
    EXPECT_EQ(m.m, 4800);
    auto g = parse_noise("gaussian:sigma=0.01");
    EXPECT_DOUBLE_EQ(g.sigma, 0.01);
    auto c = parse_noise("multinomial:m=10+gaussian:sigma=0.5");
    ASSERT_EQ(c.kind, NoiseSpec::Kind::compound);
    EXPECT_EQ(c.parts.size(), 2u);
    EXPECT_THROW(parse_noise("poisson:lambda=3"), InvalidArgument);
    EXPECT_THROW(parse_noise("multinomial:m=0"), InvalidArgument);
    for (const char* t : {"ideal", "multinomial:m=4800", "gaussian:sigma=0.01", "multinomial:m=10+gaussian:sigma=0.5"})
        EXPECT_EQ(parse_noise(t).tag(), t);
}

TEST(SampleRecord, IdealReturnsProbabilities) {
    Povm p = as_povm(mub(3));
    RVec pr = born_probabilities(p, random_pure(3, 4));
    auto rec = sample_record(p, pr, NoiseSpec::ideal(), 1);
    EXPECT_EQ(rec.f, pr);
}

TEST(SampleRecord, MultinomialSumsPerBlock) {
    Povm p = as_povm(mub(4));
    RVec pr = born_probabilities(p, random_pure(4, 6));
    auto rec = sample_record(p, pr, NoiseSpec::multinomial(4800), 2);
    for (int b = 0; b < p.n_blocks(); ++b) {
        double s = 0.0;
        for (int mu = 0; mu < p.size(); ++mu)
            if (p.block[size_t(mu)] == b) s += rec.f(mu);
        EXPECT_NEAR(s, p.block_weight[size_t(b)], 1e-12);
    }
    EXPECT_GE(rec.f.minCoeff(), 0.0);
}

TEST(SampleRecord, DeterministicPerSeed) {
    Povm p = sic(2);
    RVec pr = born_probabilities(p, random_pure(2, 1));
    auto a = sample_record(p, pr, NoiseSpec::multinomial(100), 5);
    auto b = sample_record(p, pr, NoiseSpec::multinomial(100), 5);
    auto c = sample_record(p, pr, NoiseSpec::multinomial(100), 6);
    EXPECT_EQ(a.f, b.f);
    EXPECT_NE(a.f, c.f);
}

TEST(SampleRecord, LawOfLargeNumbers) {
    Povm p = as_povm(mub(3));
    RVec pr = born_probabilities(p, random_pure(3, 7));
    auto rec = sample_record(p, pr, NoiseSpec::multinomial(10000000), 3);
    EXPECT_LT((rec.f - pr).cwiseAbs().maxCoeff(), 1e-3);
}

// E||f - p||^2 = sum_b w_b^2 (1 - sum_mu q_mu^2) / m <= sum_b w_b^2 (1 - 1/N_b) / m
TEST(SampleRecord, MultinomialVarianceMatchesClosedForm) {
    Povm p = as_povm(mub(3));
    RVec pr = born_probabilities(p, random_pure(3, 8));
    const long long m = 200;
    double exact = 0.0, bound = 0.0;
    for (int b = 0; b < p.n_blocks(); ++b) {
        double w = p.block_weight[size_t(b)], sq = 0.0;
        int n = 0;
        for (int mu = 0; mu < p.size(); ++mu)
            if (p.block[size_t(mu)] == b) {
                sq += (pr(mu) / w) * (pr(mu) / w);
                ++n;
            }
        exact += w * w * (1.0 - sq) / double(m);
        bound += w * w * (1.0 - 1.0 / n) / double(m);
    }
    double acc = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) acc += (sample_record(p, pr, NoiseSpec::multinomial(m), std::uint64_t(t)).f - pr).squaredNorm();
    acc /= trials;
    EXPECT_NEAR(acc, exact, 0.06 * exact);
    EXPECT_LE(acc, bound * 1.05);
}

TEST(SampleRecord, GaussianStd) {
    RVec pr = RVec::Constant(1000, 0.1);
    auto rec = sample_record(pr, NoiseSpec::gaussian(0.01), 4);
    RVec e = rec.f - pr;
    double sd = std::sqrt(e.squaredNorm() / 1000.0);
    EXPECT_NEAR(sd, 0.01, 0.001);
}

TEST(SampleRecord, CompoundComponentsAddUp) {
    Povm p = as_povm(mub(2));
    RVec pr = born_probabilities(p, random_pure(2, 9));
    auto rec = sample_record(p, pr, parse_noise("multinomial:m=50+gaussian:sigma=0.02"), 11);
    ASSERT_EQ(rec.components.size(), 2u);
    EXPECT_LT((rec.f - pr - rec.components[0] - rec.components[1]).norm(), 1e-14);
    auto alone = sample_record(p, pr, NoiseSpec::multinomial(50), child_seed(11, 0));
    EXPECT_LT((rec.components[0] - (alone.f - pr)).norm(), 1e-14);
}

TEST(PerturbPovm, ZeroIsIdentityAndValid) {
    Povm p = as_povm(mub(3));
    Povm q0 = perturb_povm(p, 0.0, 1);
    for (int mu = 0; mu < p.size(); ++mu) EXPECT_EQ(q0.elements[size_t(mu)], p.elements[size_t(mu)]);
    Povm q = perturb_povm(p, 0.2, 1);
    EXPECT_LT(povm_closure_error(q.elements), 1e-10);
    EXPECT_THROW(perturb_povm(p, 0.6, 1), InvalidArgument);
}

// first-order distance grows linearly in eta
TEST(PerturbPovm, DistanceLinearInEta) {
    Povm p = as_povm(mub(3));
    auto dist = [&](double eta) {
        Povm q = perturb_povm(p, eta, 3);
        double s = 0.0;
        for (int mu = 0; mu < p.size(); ++mu) s += (q.elements[size_t(mu)] - p.elements[size_t(mu)]).squaredNorm();
        return std::sqrt(s);
    };
    double a = dist(1e-3), b = dist(2e-3);
    EXPECT_NEAR(b / a, 2.0, 1e-2);
}

TEST(PrepareWithError, MixesTowardFullRank) {
    CVec psi = random_pure_vector(4, 1);
    auto r0 = prepare_with_error(psi, 0.0, 2);
    EXPECT_LT((r0.matrix - outer(psi)).norm(), 1e-14);
    auto r = prepare_with_error(psi, 1e-3, 2);
    EXPECT_NEAR(r.matrix.trace().real(), 1.0, 1e-12);
    EXPECT_NEAR(fidelity_pure(psi, r.matrix), 1.0, 2e-3);
    EXPECT_EQ(numerical_rank(r.matrix), 4);
}

// sensing rows reproduce Tr[E eps(rho)] computed from a Kraus decomposition
TEST(QptSensing, MatchesKrausOracle) {
    const int d = 3;
    StateSet ss{d, {}, "t"};
    for (int k = 0; k < 4; ++k) ss.states.push_back(random_mixed_rank(d, 2, std::uint64_t(k)));
    Povm p = as_povm(mub(d));
    auto sm = qpt_sensing(ss, p);
    ProcessMatrix pm = incoherent_error(haar_unitary(d, 4), 0.3, 5);
    auto ks = chi_to_kraus(pm);
    RVec probs = qpt_probabilities(pm, sm);
    for (int v = 0; v < ss.size(); ++v) {
        CMat out = CMat::Zero(d, d);
        for (const auto& k : ks) out += k * ss.states[size_t(v)].matrix * k.adjoint();
        for (int mu = 0; mu < p.size(); ++mu)
            EXPECT_NEAR(probs(v * p.size() + mu), (p.elements[size_t(mu)] * out).trace().real(), 1e-12);
    }
}

TEST(QptSensing, LayoutBlocksPerState) {
    const int d = 2;
    StateSet ss{d, {pure_state(CVec::Unit(2, 0)), pure_state(CVec::Unit(2, 1))}, "z"};
    Povm p = as_povm(mub(d));
    auto sm = qpt_sensing(ss, p);
    EXPECT_EQ(sm.layout.weight.size(), size_t(2 * p.n_blocks()));
    EXPECT_EQ(sm.layout.block.back(), 2 * p.n_blocks() - 1);
}

TEST(ProcessErrors, CoherentIsUnitaryAndZeroIsTarget) {
    CMat u = haar_unitary(3, 7);
    auto c0 = coherent_error(u, 0.0, 1);
    EXPECT_NEAR(process_fidelity_unitary(c0, u), 1.0, 1e-12);
    auto c = coherent_error(u, 0.3, 1);
    EXPECT_LT(tp_error(c.chi, 3), 1e-12);
    EXPECT_EQ(numerical_rank(c.chi), 1);
}

TEST(ProcessErrors, IncoherentTpAndMonotone) {
    CMat u = haar_unitary(3, 8);
    double prev = 1.0 + 1e-12;
    for (double xi : {0.0, 0.1, 0.3, 0.6}) {
        auto pm = incoherent_error(u, xi, 9);
        EXPECT_LT(tp_error(pm.chi, 3), 1e-10);
        double f = process_fidelity_unitary(pm, u);
        EXPECT_LE(f, prev + 1e-12);
        prev = f;
    }
    EXPECT_THROW(incoherent_error(u, 1.5, 1), InvalidArgument);
}

TEST(Qdt, ProbingSetShapeAndTrace) {
    for (int d : {2, 3, 5}) {
        auto ss = qdt_probing_set(d);
        ASSERT_EQ(ss.size(), 3 * d - 2);
        for (const auto& s : ss.states) EXPECT_NO_THROW(validate_state(s.matrix));
        auto th = qdt_probing_matrix(ss);
        Eigen::FullPivLU<RMat> lu(th.R);
        EXPECT_EQ(lu.rank(), 3 * d - 2);
        // Tr E is measured: I lies in the row space
        RVec id = herm_to_real(CMat(CMat::Identity(d, d)));
        RVec coeff = th.R.transpose().colPivHouseholderQr().solve(id);
        EXPECT_LT((th.R.transpose() * coeff - id).norm(), 1e-10);
    }
}

TEST(Qdt, ProbeIdealMatchesTrace) {
    const int d = 3;
    auto th = qdt_probing_matrix(qdt_probing_set(d));
    CMat e = sic(3).elements[2];
    auto rec = qdt_probe_element(e, th, NoiseSpec::ideal(), 1);
    auto ss = qdt_probing_set(d);
    for (int v = 0; v < ss.size(); ++v) EXPECT_NEAR(rec.f(v), (e * ss.states[size_t(v)].matrix).trace().real(), 1e-13);
    auto noisy = qdt_probe_element(e, th, NoiseSpec::multinomial(1000), 2);
    EXPECT_GE(noisy.f.minCoeff(), 0.0);
    EXPECT_LE(noisy.f.maxCoeff(), 1.0);
}
