#include <gtest/gtest.h>

#include <tomokit/bench.hpp>

using namespace tomokit;

TEST(Table, CsvQuotingAndNumbers) {
    Table t{"t", {"a", "b", "c"}, {}};
    t.add({std::string("x,y"), 0.5, 3LL});
    t.add({std::string("q\"z"), std::numeric_limits<double>::quiet_NaN(), -1LL});
    EXPECT_EQ(to_csv(t), "a,b,c\n\"x,y\",0.5,3\n\"q\"\"z\",nan,-1\n");
    EXPECT_THROW(t.add({1.0}), DimensionMismatch);
    EXPECT_EQ(t.num(0, "c"), 3.0);
    EXPECT_EQ(t.str(0, "a"), "x,y");
    EXPECT_THROW(t.column("zz"), InvalidArgument);
}

TEST(Table, DoubleRoundTrip) {
    double v = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_cell(v)), v);
}

TEST(Summary, Quantiles) {
    auto s = summarize({4.0, 1.0, 3.0, 2.0, 5.0});
    EXPECT_EQ(s.n, 5);
    EXPECT_DOUBLE_EQ(s.median, 3.0);
    EXPECT_DOUBLE_EQ(s.q1, 2.0);
    EXPECT_DOUBLE_EQ(s.q3, 4.0);
    EXPECT_DOUBLE_EQ(s.mean, 3.0);
    auto e = summarize({});
    EXPECT_EQ(e.n, 0);
    EXPECT_TRUE(std::isnan(e.median));
    EXPECT_DOUBLE_EQ(summarize({1.0, 2.0}).median, 1.5);
}

TEST(SecondDifference, FindsCusp) {
    // a flat stretch then a jump: the convex kink sits at index 3
    std::vector<double> c{0.2, 0.2, 0.2, 0.2, 0.9, 0.95, 1.0};
    EXPECT_EQ(max_abs_second_difference_index(c), 3);
    EXPECT_EQ(max_second_difference_index(c), 3);
    EXPECT_EQ(max_second_difference_index({1.0, 2.0}), -1);
}

TEST(BasisLowerBound, Counting) {
    EXPECT_EQ(detail::basis_lower_bound(11, 1), 2);
    EXPECT_EQ(detail::basis_lower_bound(4, 4), 5);
}

TEST(StrictSweep, SmallCellAndOrdering) {
    SweepSpec s;
    s.dims = {4};
    s.ranks = {1};
    s.n_states = 10;
    s.seed = 3;
    auto rnd = strict_completeness_cell(s, 4, 1);
    ASSERT_GT(rnd.min_bases, 0);
    EXPECT_LE(rnd.min_bases, 6);
    EXPECT_LT(rnd.max_infidelity, 1e-5);
    s.basis_kind = "mub";
    auto full = strict_completeness_cell(s, 4, 4);
    EXPECT_EQ(full.min_bases, 5);  // full rank needs every MUB basis
    auto mub1 = strict_completeness_cell(s, 4, 1);
    EXPECT_LE(mub1.min_bases, full.min_bases);
}

TEST(StrictSweep, BudgetExhaustedReported) {
    SweepSpec s;
    s.dims = {6};
    s.ranks = {2};
    s.n_states = 4;
    s.max_bases = 3;
    auto t = sweep_strict_completeness(s);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.str(0, "min_bases"), ">3");
}

TEST(StrictSweep, Reproducible) {
    SweepSpec s;
    s.dims = {4};
    s.ranks = {1, 2};
    s.n_states = 5;
    s.seed = 9;
    EXPECT_EQ(to_csv(sweep_strict_completeness(s)), to_csv(sweep_strict_completeness(s)));
}

TEST(Robustness, FiniteAndResampled) {
    auto h = sweep_robustness_ratio(as_povm(gmb_5(4)), 1, 500, 2);
    EXPECT_EQ(h.summary.n, 500);
    EXPECT_TRUE(std::isfinite(h.summary.max));
    EXPECT_GT(h.summary.median, 0.0);
    long long total = 0;
    for (auto c : h.counts) total += c;
    EXPECT_EQ(total, 500);
    // rank-d vs rank-d draws from distinct seeds are never equal, and every ratio is positive
    for (double r : h.ratios) EXPECT_GT(r, 0.0);
}

// full-IC MUB: ratio is bounded by 1/sigma_min of the unweighted probability map
TEST(Robustness, MubBoundedBySingularValue) {
    Povm p = as_povm(mub(3));
    RMat m = unweighted_rows(p);
    Eigen::JacobiSVD<RMat> svd(m);
    double smin = svd.singularValues().minCoeff();
    auto h = sweep_robustness_ratio(p, 1, 300, 4);
    EXPECT_LE(h.summary.max, 1.0 / smin + 1e-9);
}

TEST(Robustness, MedianShifts) {
    auto med = [](const Povm& p, int r) { return sweep_robustness_ratio(p, r, 400, 11).summary.median; };
    EXPECT_GT(med(as_povm(random_bases(12, 8, 1)), 1), med(as_povm(random_bases(6, 8, 1)), 1));
    Povm p = as_povm(random_bases(8, 11, 2));
    EXPECT_LT(med(p, 3), med(p, 1));
}

TEST(NoisySweep, IdealLimit) {
    SweepSpec s;
    s.dims = {4};
    s.min_bases = 5;
    s.max_bases = 5;
    s.basis_kind = "mub";
    s.n_states = 6;
    s.q = 0.0;
    s.m_per_dim = 1e12;
    auto t = sweep_noisy_estimation(s);
    ASSERT_EQ(t.rows.size(), 3u);
    for (size_t i = 0; i < t.rows.size(); ++i) {
        EXPECT_LT(t.num(i, "median"), 1e-5) << t.str(i, "estimator");
        EXPECT_EQ(t.num(i, "n"), 6.0);
    }
}

TEST(NoisySweep, Reproducible) {
    SweepSpec s;
    s.dims = {4};
    s.min_bases = 4;
    s.max_bases = 5;
    s.n_states = 3;
    s.estimators = {"ls"};
    s.seed = 5;
    EXPECT_EQ(to_csv(sweep_noisy_estimation(s)), to_csv(sweep_noisy_estimation(s)));
}

TEST(QptSweep, IdealUicReachesUnitFidelity) {
    SweepSpec s;
    s.dims = {3};
    s.povm_kind = "flammia2d";
    s.n_seeds = 5;
    s.max_states = 3;
    s.estimators = {"ls"};
    auto t = sweep_qpt(s);
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_GE(t.num(2, "median_f_applied"), 1.0 - 1e-5);
    EXPECT_LT(t.num(0, "median_f_applied"), 0.999);
}

TEST(Gramian, SymmetricAndMatchesTrace) {
    Povm p = as_povm(mub(3));
    RMat g = gramian(p);
    EXPECT_LT((g - g.transpose()).norm(), 1e-12);
    EXPECT_THROW(gramian(as_povm(random_bases(4, 2, 1))), RankDeficient);
}

TEST(Gramian, SyntheticFitRecovered) {
    GramianModel m;
    m.x_rand = 0.03;
    m.x_sys = 0.01;
    m.n_reps = 10;
    m.n_states = 400;
    auto r = gramian_analysis(as_povm(mub(8)), m);
    EXPECT_NEAR(r.x_rand, 0.03, 0.003);
    EXPECT_NEAR(r.x_sys, 0.01, 0.001);
}

TEST(Gramian, PureSystematicHasNoRandomPart) {
    GramianModel m;
    m.x_rand = 0.0;
    m.x_sys = 0.02;
    auto r = gramian_analysis(as_povm(mub(4)), m);
    EXPECT_LE(std::abs(r.x_rand), 2.0 * r.x_rand_se + 1e-15);
    EXPECT_NEAR(r.x_sys, 0.02, 0.01);
}

TEST(Gramian, RandomOnlySlope) {
    GramianModel m;
    m.x_rand = 0.05;
    m.x_sys = 0.0;
    m.n_states = 200;
    auto r = gramian_analysis(as_povm(mub(8)), m);
    EXPECT_NEAR(r.loglog_slope, -1.0, 0.1);
}

TEST(ElementCounts, Counting) {
    auto t = element_count_report({"mub", "flammia2d", "gmb"}, {4, 16});
    auto find = [&](const std::string& c, int d) {
        for (size_t i = 0; i < t.rows.size(); ++i)
            if (t.str(i, "construction") == c && t.num(i, "dim") == d) return int(i);
        return -1;
    };
    EXPECT_EQ(t.num(size_t(find("mub", 4)), "elements"), 20.0);
    EXPECT_EQ(t.num(size_t(find("flammia2d", 4)), "elements"), 8.0);
    int g = find("gmb", 16);
    EXPECT_EQ(t.num(size_t(g), "blocks"), 31.0);
    EXPECT_EQ(t.num(size_t(g), "elements"), 496.0);
    EXPECT_EQ(t.num(size_t(g), "n"), 0.0);
}
