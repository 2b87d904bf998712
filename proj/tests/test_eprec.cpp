#include <gtest/gtest.h>

#include <tomokit/eprec.hpp>
#include <tomokit/povmlib.hpp>

using namespace tomokit;

namespace {

MeasuredMask mask_of(const Povm& p, const CMat& rho) {
    MeasurementRecord rec;
    rec.f = born_probabilities(p, rho);
    return extract_elements(rec, p);
}

void expect_entries(const MeasuredMask& m, const CMat& rho, double tol) {
    for (int i = 0; i < m.dim; ++i)
        for (int j = 0; j < m.dim; ++j)
            if (m.has(i, j)) EXPECT_LT(std::abs(m.values(i, j) - rho(i, j)), tol) << i << "," << j;
}

}  // namespace

TEST(ExtractElements, Gmb5MeasuresTwoDiagonals) {
    const int d = 6;
    CMat rho = random_mixed_rank(d, 3, 1).matrix;
    auto m = mask_of(as_povm(gmb_5(d)), rho);
    for (int i = 0; i < d; ++i) {
        EXPECT_TRUE(m.has(i, i));
        EXPECT_TRUE(m.has(i, (i + 1) % d));
    }
    expect_entries(m, rho, 1e-12);
    EXPECT_NEAR(m.trace, 1.0, 1e-12);
}

TEST(ExtractElements, Flammia2dMeasuresFirstRow) {
    const int d = 4;
    CMat rho = random_mixed_rank(d, 2, 2).matrix;
    auto m = mask_of(flammia_2d(d), rho);
    for (int j = 0; j < d; ++j) EXPECT_TRUE(m.has(0, j));
    for (int i = 1; i < d; ++i)
        for (int j = 1; j < d; ++j) EXPECT_FALSE(m.has(i, j));
    expect_entries(m, rho, 1e-12);
}

TEST(ExtractElements, Psi3dMeasuresMainAndFirstDiagonal) {
    const int d = 5;
    CMat rho = random_mixed_rank(d, 2, 3).matrix;
    auto m = mask_of(psi_3d(d), rho);
    for (int i = 0; i < d; ++i) EXPECT_TRUE(m.has(i, i));
    for (int i = 0; i + 1 < d; ++i) EXPECT_TRUE(m.has(i, i + 1));
    expect_entries(m, rho, 1e-12);
}

TEST(ExtractElements, Hermitian) {
    auto m = mask_of(as_povm(gmb_5(4)), random_mixed_rank(4, 2, 4).matrix);
    EXPECT_EQ(m.known, m.known.transpose());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (m.has(i, j)) EXPECT_LT(std::abs(m.values(i, j) - std::conj(m.values(j, i))), 1e-15);
}

TEST(CompleteRankR, FlammiaPure) {
    const int d = 6;
    for (std::uint64_t s = 0; s < 10; ++s) {
        CMat rho = random_pure(d, s).matrix;
        EXPECT_LT((complete_rank_r(mask_of(flammia_2d(d), rho), 1) - rho).norm(), 1e-10);
    }
}

TEST(CompleteRankR, GmbRankTwo) {
    const int d = 8;
    Povm p = as_povm(gmb(d, 2));
    for (std::uint64_t s = 0; s < 10; ++s) {
        CMat rho = random_mixed_rank(d, 2, 20 + s).matrix;
        auto m = mask_of(p, rho);
        ASSERT_EQ(classify_mask(m, 2), MaskPattern::band);
        EXPECT_LT((complete_rank_r(m, 2) - rho).norm(), 1e-8);
    }
}

TEST(CompleteRankR, FlammiaRankR) {
    const int d = 7;
    for (int r : {2, 3}) {
        Povm p = flammia_rank_r(d, r);
        for (std::uint64_t s = 0; s < 5; ++s) {
            CMat rho = random_mixed_rank(d, r, 40 + s).matrix;
            EXPECT_LT((complete_rank_r(mask_of(p, rho), r) - rho).norm(), 1e-8);
        }
    }
}

TEST(CompleteRankR, Psi3dPure) {
    const int d = 6;
    for (std::uint64_t s = 0; s < 10; ++s) {
        CMat rho = random_pure(d, 60 + s).matrix;
        EXPECT_LT((complete_rank_r(mask_of(psi_3d(d), rho), 1) - rho).norm(), 1e-8);
    }
}

TEST(CompleteRankR, ZeroLeadingAmplitudeIsSingular) {
    const int d = 4;
    CVec psi = random_pure_vector(d, 5);
    psi(0) = 0.0;
    psi.normalize();
    try {
        complete_rank_r(mask_of(flammia_2d(d), outer(psi)), 1);
        FAIL() << "expected SingularBlock";
    } catch (const SingularBlock& e) {
        EXPECT_EQ(e.index(), 0);
    }
}

// a zero amplitude in the middle of the band makes the window through it singular
TEST(CompleteRankR, BandSingularWindowNamed) {
    const int d = 6;
    CVec psi = random_pure_vector(d, 6);
    psi(2) = 0.0;
    psi.normalize();
    try {
        complete_rank_r(mask_of(as_povm(gmb_5(d)), outer(psi)), 1);
        FAIL() << "expected SingularBlock";
    } catch (const SingularBlock& e) {
        EXPECT_EQ(e.index(), 1);
    }
}

TEST(CompleteRankR, IdempotentOnCompleteMask) {
    CMat rho = random_mixed_rank(4, 4, 7).matrix;
    EXPECT_EQ(complete_rank_r(full_mask(rho), 1), rho);
}

TEST(CompleteRankR, OutputHermitian) {
    Povm p = as_povm(gmb_5(6));
    auto rec = sample_record(p, born_probabilities(p, random_pure(6, 8)), NoiseSpec::multinomial(500), 9);
    auto rep = complete_rank_r_report(extract_elements(rec, p), 1, 1e8, true);
    EXPECT_LT(hermiticity_error(rep.matrix), 1e-12);
    EXPECT_TRUE(std::isfinite(rep.alt_disagreement));
    EXPECT_GT(rep.alt_disagreement, 0.0);
}

TEST(CompleteRankR, UnsupportedMaskRejected) {
    auto m = mask_of(as_povm(gmb_4(4)), random_pure(4, 1).matrix);
    EXPECT_EQ(classify_mask(m, 1), MaskPattern::unsupported);
    EXPECT_THROW(complete_rank_r(m, 1), InvalidArgument);
}

// padding a traceless nonzero V into the unmeasured block of a pure flammia completion breaks positivity
TEST(CompleteRankR, InertiaCertificate) {
    const int d = 5;
    Rng rng(10);
    for (std::uint64_t s = 0; s < 20; ++s) {
        CMat x = complete_rank_r(mask_of(flammia_2d(d), random_pure(d, 70 + s).matrix), 1);
        CMat g = rng.ginibre(d - 1, d - 1);
        CMat v = hermitize(g);
        v -= CMat::Identity(d - 1, d - 1) * (v.trace() / double(d - 1));
        CMat y = x;
        y.bottomRightCorner(d - 1, d - 1) += v;
        EXPECT_GE(inertia(y).n_minus, 1);
    }
}

TEST(StrictnessProbe, Gmb5Strict) {
    auto rep = strictness_probe(as_povm(gmb_5(4)), 1, 200, 1);
    EXPECT_TRUE(rep.completion_route);
    EXPECT_EQ(rep.verdict, "strictly-complete");
}

TEST(StrictnessProbe, Gmb4NotStrict) {
    auto rep = strictness_probe(as_povm(gmb_4(4)), 1, 200, 1);
    EXPECT_FALSE(rep.completion_route);
    EXPECT_GT(rep.violations, 0);
    EXPECT_LE(std::min(rep.example.n_plus, rep.example.n_minus), 1);
    EXPECT_EQ(rep.verdict, "not-strictly-complete");
}

TEST(StrictnessProbe, FullIcEmptyKernel) {
    for (int r = 1; r <= 4; ++r) {
        auto rep = strictness_probe(as_povm(mub(4)), r, 10, 1);
        EXPECT_EQ(rep.kernel_dim, 0);
        EXPECT_EQ(rep.verdict, "strictly-complete");
    }
}

TEST(VerifyUniqueness, SixRandomBasesD11) {
    auto rep = verify_uniqueness_numeric(as_povm(random_bases(11, 6, 3)), 1, 10, 4);
    EXPECT_TRUE(rep.pass) << rep.max_infidelity;
}

TEST(VerifyUniqueness, FullIcAnyRank) {
    for (int r : {1, 2, 4}) EXPECT_TRUE(verify_uniqueness_numeric(as_povm(mub(4)), r, 5, 5).pass);
}

TEST(VerifyUniqueness, TooFewBasesFail) {
    auto rep = verify_uniqueness_numeric(as_povm(random_bases(11, 3, 3)), 1, 5, 6);
    EXPECT_FALSE(rep.pass);
    EXPECT_GT(rep.failures, 0);
}
