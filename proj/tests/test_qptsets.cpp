#include <gtest/gtest.h>

#include <tomokit/povmlib.hpp>
#include <tomokit/qptsets.hpp>
#include <tomokit/solvers.hpp>

using namespace tomokit;

TEST(StandardStates, CountsAndOrder) {
    EXPECT_EQ(standard_states(2).size(), 4);
    auto s = standard_states(4);
    ASSERT_EQ(s.size(), 16);
    for (int k = 0; k < 4; ++k) {
        CMat e = CMat::Zero(4, 4);
        e(k, k) = 1.0;
        EXPECT_LT((s.states[size_t(k)].matrix - e).norm(), 1e-15);
    }
    EXPECT_THROW(standard_states(1), InvalidArgument);
}

TEST(StandardStates, GramNonsingular) {
    for (int d : {2, 3, 5}) {
        auto s = standard_states(d);
        CMat m(d * d, s.size());
        for (int k = 0; k < s.size(); ++k) m.col(k) = vectorize(s.states[size_t(k)].matrix);
        CMat g = m.adjoint() * m;
        Eigen::SelfAdjointEigenSolver<CMat> es(g);
        EXPECT_GT(es.eigenvalues()(0), 1e-6);
        EXPECT_EQ(operator_rank(s), d * d);
    }
}

TEST(UicMixed, DefaultSpectrumAndCommutant) {
    auto s = uic_minimal_mixed(3);
    ASSERT_EQ(s.size(), 2);
    Eigen::SelfAdjointEigenSolver<CMat> es(s.states[0].matrix);
    for (int n = 1; n < 3; ++n) EXPECT_GT(es.eigenvalues()(n) - es.eigenvalues()(n - 1), 0.1);
    CMat plus = s.states[1].matrix;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(std::abs(plus(i, j)), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(commutant_dimension(s), 1);
}

TEST(UicMixed, RejectsDegenerateSpectrum) {
    EXPECT_THROW(uic_minimal_mixed(3, {0.4, 0.4, 0.2}), InvalidArgument);
    EXPECT_THROW(uic_minimal_mixed(3, {0.5, 0.5}), DimensionMismatch);
    EXPECT_THROW(uic_minimal_mixed(3, {0.5, 0.3, 0.1}), InvalidArgument);
}

// a single nondegenerate state commutes with every diagonal operator
TEST(Commutant, SingleStateIsLarge) {
    StateSet s{3, {uic_minimal_mixed(3).states[0]}, "one"};
    EXPECT_EQ(commutant_dimension(s), 3);
}

TEST(UicPure, SizesAndCommutant) {
    for (int d : {2, 3, 5}) {
        auto a = uic_pure_nplus(d), b = uic_pure_0plus(d);
        EXPECT_EQ(a.size(), d);
        EXPECT_EQ(b.size(), d);
        EXPECT_EQ(commutant_dimension(a), 1);
        EXPECT_EQ(commutant_dimension(b), 1);
    }
}

TEST(UicPure, ZeroPlusInsideStandard) {
    const int d = 4;
    auto std_set = standard_states(d);
    for (const auto& st : uic_pure_0plus(d).states) {
        bool found = false;
        for (const auto& s : std_set.states) found = found || (s.matrix - st.matrix).norm() == 0.0;
        EXPECT_TRUE(found);
    }
}

TEST(Supplement, ZeroPlusReachesFullRank) {
    const int d = 4;
    auto in = uic_pure_0plus(d);
    auto out = supplement_to_full(in, d);
    EXPECT_EQ(out.size(), d * d);
    EXPECT_EQ(operator_rank(out), d * d);
    for (int k = 0; k < d; ++k) EXPECT_EQ(out.states[size_t(k)].matrix, in.states[size_t(k)].matrix);
}

TEST(Supplement, FullInputUnchanged) {
    auto in = standard_states(3);
    auto out = supplement_to_full(in, 3);
    ASSERT_EQ(out.size(), in.size());
    for (int k = 0; k < in.size(); ++k) EXPECT_EQ(out.states[size_t(k)].matrix, in.states[size_t(k)].matrix);
    EXPECT_EQ(out.label, in.label);
}

TEST(Supplement, DependentInputRejected) {
    StateSet s{3, {standard_states(3).states[0], standard_states(3).states[0]}, "dup"};
    EXPECT_THROW(supplement_to_full(s, 3), InvalidArgument);
}

// ideal QPT data from the d UIC states with a rank-1 strictly-complete output POVM pins a unitary process
TEST(UicVerification, BothSetsRecoverUnitaries) {
    const int d = 3;
    Povm pov = flammia_2d(d);
    for (const StateSet& ss : {uic_pure_0plus(d), uic_pure_nplus(d)}) {
        auto sm = qpt_sensing(ss, pov);
        std::vector<double> fid;
        for (std::uint64_t s = 0; s < 25; ++s) {
            CMat u = haar_unitary(d, 200 + s);
            MeasurementRecord rec;
            rec.f = qpt_probabilities(kraus_to_chi({u}), sm);
            fid.push_back(process_fidelity_unitary(to_process(ls_process(rec, sm)), u));
        }
        double mean = 0.0, var = 0.0;
        for (double f : fid) {
            EXPECT_GE(f, 1.0 - 1e-5) << ss.label;
            mean += f;
        }
        mean /= double(fid.size());
        for (double f : fid) var += (f - mean) * (f - mean);
        EXPECT_LT(var / double(fid.size() - 1), 1e-10);
    }
}

// with standard states in enumeration order the fidelity curve has flat stretches
TEST(UicVerification, StandardOrderingPlateaus) {
    const int d = 3;
    auto all = qpt_sensing(standard_states(d), as_povm(mub(d)));
    CMat u = haar_unitary(d, 5);
    RVec f = qpt_probabilities(kraus_to_chi({u}), all);
    std::vector<double> curve;
    SolverOptions o;
    o.admm_eps = 1e-9;
    for (int k = 1; k <= all.n_states; ++k) {
        auto e = estimate_or_best([&] { return ls_process(first_states(all, f, k), d, o); });
        curve.push_back(process_fidelity_unitary(to_process(e), u));
    }
    int flat = 0;
    for (size_t k = 1; k < curve.size(); ++k) {
        EXPECT_GE(curve[k], curve[k - 1] - 1e-3);
        if (std::abs(curve[k] - curve[k - 1]) < 1e-3) ++flat;
    }
    EXPECT_GE(flat, 1);
    EXPECT_GE(curve.back(), 1.0 - 1e-6);
}
