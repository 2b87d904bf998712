#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <tomokit/io.hpp>

using namespace tomokit;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("tomokit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    std::string path(const std::string& f) const { return (dir_ / f).string(); }

    Result run(const std::string& args) const {
        std::string errf = path("stderr.txt");
        std::string cmd = std::string(TOMOKIT_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" + errf;
        int st = std::system(cmd.c_str());
        int code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
        return {code, read_text_file(errf)};
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, PovmBuildPassesInvariants) {
    auto r = run("povm build --kind mub --dim 4 --out " + path("m.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    Povm p = povm_from_json(read_json_file(path("m.json")));  // validates PSD and closure
    EXPECT_EQ(p.size(), 20);
    EXPECT_EQ(p.n_blocks(), 5);
    EXPECT_LT(povm_closure_error(p.elements), 1e-12);
    EXPECT_TRUE(fs::exists(path("m.json.manifest.json")));
}

TEST_F(Cli, MissingSeedIsUsageError) {
    ASSERT_EQ(run("povm build --kind gmb5 --dim 4 --out " + path("p.json")).code, 0);
    ASSERT_EQ(run("state random --dim 4 --seed 1 --out " + path("s.json")).code, 0);
    auto r = run("simulate --povm " + path("p.json") + " --state " + path("s.json") + " --out " + path("r.json"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--seed"), std::string::npos);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("r.json")));
}

TEST_F(Cli, UnknownOptionIsUsageError) { EXPECT_EQ(run("estimate --no-such-flag").code, 2); }

TEST_F(Cli, DomainErrorNamesType) {
    auto r = run("povm build --kind sic --dim 7 --out " + path("s.json"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("UnsupportedDim"), std::string::npos);
}

TEST_F(Cli, EndToEndGmb5Ls) {
    ASSERT_EQ(run("povm build --kind gmb5 --dim 4 --out " + path("p.json")).code, 0);
    ASSERT_EQ(run("state random --dim 4 --seed 11 --out " + path("s.json")).code, 0);
    ASSERT_EQ(run("simulate --povm " + path("p.json") + " --state " + path("s.json") + " --noise ideal --seed 3 --out " +
                  path("r.json"))
                  .code,
              0);
    auto r = run("estimate --method ls --record " + path("r.json") + " --povm " + path("p.json") + " --out " +
                 path("e.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    CMat truth = state_from_json(read_json_file(path("s.json"))).matrix;
    Estimate e = estimate_from_json(read_json_file(path("e.json")));
    EXPECT_LT(1.0 - fidelity(truth, e.matrix), 1e-5);
}

TEST_F(Cli, SingularBlockReported) {
    // amplitude 0 on the first basis state puts the pure state in the failure set of flammia2d
    CVec psi = CVec::Zero(4);
    psi(1) = 1.0;
    psi(3) = cplx(0.0, 1.0);
    psi.normalize();
    write_json_file(path("s.json"), state_to_json(pure_state(psi)));
    ASSERT_EQ(run("povm build --kind flammia2d --dim 4 --out " + path("f.json")).code, 0);
    ASSERT_EQ(run("simulate --povm " + path("f.json") + " --state " + path("s.json") + " --seed 1 --out " + path("r.json")).code, 0);
    auto r = run("eprec complete --record " + path("r.json") + " --povm " + path("f.json") + " --rank 1 --out " + path("c.json"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("SingularBlock"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("c.json")));
}

TEST_F(Cli, ByteIdenticalReruns) {
    ASSERT_EQ(run("povm build --kind random --bases 6 --dim 5 --seed 4 --out " + path("a.json")).code, 0);
    ASSERT_EQ(run("povm build --kind random --bases 6 --dim 5 --seed 4 --out " + path("b.json")).code, 0);
    EXPECT_EQ(read_text_file(path("a.json")), read_text_file(path("b.json")));
    write_json_file(path("spec.json"), json{{"dims", {4}}, {"ranks", {1}}, {"n_states", 3}, {"seed", 5}});
    ASSERT_EQ(run("bench strict --spec " + path("spec.json") + " --out " + path("o1")).code, 0);
    ASSERT_EQ(run("bench strict --spec " + path("spec.json") + " --out " + path("o2")).code, 0);
    EXPECT_EQ(read_text_file(path("o1/strict.csv")), read_text_file(path("o2/strict.csv")));
    json m = read_json_file(path("o1/manifest.json"));
    EXPECT_EQ(m["seeds"][0], 5);
    EXPECT_EQ(m["outputs"][0], "strict.csv");
    EXPECT_EQ(m["config_digest"], read_json_file(path("o2/manifest.json"))["config_digest"]);
}

TEST_F(Cli, ConfigFileFlagsWin) {
    write_json_file(path("cfg.json"), json{{"kind", "mub"}, {"dim", 3}, {"out", path("m.json")}});
    ASSERT_EQ(run("povm build --config " + path("cfg.json") + " --dim 4").code, 0);
    EXPECT_EQ(povm_from_json(read_json_file(path("m.json"))).dim, 4);
}

TEST_F(Cli, ThreadCountDoesNotChangeResults) {
    write_json_file(path("spec.json"),
                    json{{"dims", {4}}, {"min_bases", 4}, {"max_bases", 4}, {"n_states", 6}, {"estimators", {"ls"}},
                         {"seed", 2}});
    const std::string base = std::string("TOMOKIT_THREADS=");
    auto one = run("bench noisy --spec " + path("spec.json") + " --out " + path("t1"));
    ASSERT_EQ(one.code, 0);
    std::string cmd = base + "3 " + std::string(TOMOKIT_CLI_PATH) + " bench noisy --spec " + path("spec.json") +
                      " --out " + path("t3") + " >/dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_EQ(read_text_file(path("t1/noisy.csv")), read_text_file(path("t3/noisy.csv")));
}

TEST_F(Cli, ProcessRandomFeedsQpt) {
    ASSERT_EQ(run("process random --dim 3 --seed 9 --unitary-out " + path("u.json") + " --out " + path("p.json")).code, 0);
    CMat u = unitary_from_json(read_json_file(path("u.json")));
    ProcessMatrix truth = process_from_json(read_json_file(path("p.json")));
    // ideal error: chi is vec(U) vec(U)^dag in the elementary basis
    CVec v = vectorize(u);
    EXPECT_LT((truth.chi - v * v.adjoint()).norm(), 1e-12);

    ASSERT_EQ(run("qpt states --kind uic-0plus --dim 3 --out " + path("s.json")).code, 0);
    ASSERT_EQ(run("povm build --kind flammia2d --dim 3 --out " + path("f.json")).code, 0);
    ASSERT_EQ(run("simulate qpt --process " + path("p.json") + " --states " + path("s.json") + " --povm " + path("f.json") +
                  " --seed 1 --out " + path("r.json"))
                  .code,
              0);
    write_json_file(path("opts.json"), json{{"max_iter", 200000}});
    auto r = run("estimate qpt --method ls --record " + path("r.json") + " --states " + path("s.json") + " --povm " +
                 path("f.json") + " --target-unitary " + path("u.json") + " --opts " + path("opts.json") + " --out " +
                 path("e.json"));
    ASSERT_EQ(r.code, 0) << r.err;
    json e = read_json_file(path("e.json"));
    EXPECT_GT(e["diagnostics"]["fidelity_to_target"].get<double>(), 1.0 - 1e-5);

    // same seed, incoherent error: same target unitary, a non-unitary applied process
    ASSERT_EQ(run("process random --dim 3 --seed 9 --error incoherent --strength 0.2 --unitary-out " + path("u2.json") +
                  " --out " + path("p2.json"))
                  .code,
              0);
    EXPECT_EQ(read_text_file(path("u.json")), read_text_file(path("u2.json")));
    ProcessMatrix noisy = process_from_json(read_json_file(path("p2.json")));
    EXPECT_LT(tp_error(noisy.chi, 3), 1e-10);
    EXPECT_LT(process_fidelity_unitary(noisy, u), 1.0 - 1e-3);
}
