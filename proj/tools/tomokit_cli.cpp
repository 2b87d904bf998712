// tomokit command line: povm / state / simulate / estimate / eprec / qpt / bench.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <tomokit/tomokit.hpp>

namespace {

using namespace tomokit;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    UsageError(const std::string& m, const CLI::App* a) : std::runtime_error(m), app(a) {}
    const CLI::App* app;
};

// --config FILE: a JSON object whose keys are long option names. Keys absent from the command line are
// appended after it, so explicit flags win and the values land in the innermost subcommand.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file", nullptr);
            path = args[i + 1];
            args.erase(args.begin() + long(i), args.begin() + long(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + long(i));
            break;
        }
    }
    if (path.empty()) return args;
    json cfg = read_json_file(path);
    if (!cfg.is_object()) throw UsageError("--config: expected a JSON object", nullptr);
    auto given = [&](const std::string& flag) {
        return std::any_of(args.begin(), args.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    auto scalar = [](const json& v) {
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    };
    for (const auto& [key, v] : cfg.items()) {
        const std::string flag = "--" + key;
        if (given(flag)) continue;
        if (v.is_boolean()) {
            if (v.get<bool>()) args.push_back(flag);
        } else if (v.is_array()) {
            args.push_back(flag);
            for (const auto& x : v) args.push_back(scalar(x));
        } else {
            args.push_back(flag);
            args.push_back(scalar(v));
        }
    }
    return args;
}

// Effective option values of a parsed subcommand, for the manifest. Output locations are left out so the
// digest identifies the run configuration only.
json options_json(const CLI::App* sub) {
    json j = json::object();
    for (const CLI::Option* o : sub->get_options()) {
        std::string name = o->get_name();
        while (!name.empty() && name.front() == '-') name.erase(name.begin());
        if (name == "help" || name == "out" || name.ends_with("-out")) continue;
        if (o->count() > 0) {
            auto r = o->results();
            if (r.size() == 1) j[name] = r.front();
            else j[name] = r;
        } else if (!o->get_default_str().empty()) {
            j[name] = o->get_default_str();
        }
    }
    return j;
}

struct Run {
    std::vector<std::string> argv;
    const CLI::App* sub = nullptr;
    std::string command;
    std::vector<std::uint64_t> seeds;
    WallClock clock;

    RunManifest manifest(const std::vector<std::string>& outputs, json extra = json::object()) const {
        RunManifest m;
        m.command_line = argv;
        m.config = json{{"command", command}, {"options", options_json(sub)}};
        for (auto& [k, v] : extra.items()) m.config[k] = v;
        m.seeds = seeds;
        m.wall_time_s = clock.seconds();
        m.outputs = outputs;
        return m;
    }

    // Single-file output: the manifest sits beside it as <file>.manifest.json.
    void write_file(const std::string& out, const json& doc) const {
        write_json_file(out, doc);
        write_manifest(out + ".manifest.json", manifest({fs::path(out).filename().string()}));
    }
};

std::optional<std::uint64_t> seed_of(const CLI::App* sub, std::uint64_t value) {
    if (sub->count("--seed") == 0) return std::nullopt;
    return value;
}

std::uint64_t require_seed(const CLI::App* sub, std::uint64_t value) {
    auto s = seed_of(sub, value);
    if (!s) throw UsageError("--seed is required for this command", sub);
    return *s;
}

void require(const CLI::App* sub, const std::string& flag, bool present) {
    if (!present) throw UsageError(flag + " is required", sub);
}

SolverOptions solver_options(const std::string& path) {
    SolverOptions o;
    if (path.empty()) return o;
    json j = read_json_file(path);
    if (!j.is_object()) throw FormatError("--opts: expected a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (k == "epsilon") o.epsilon = v.get<double>();
        else if (k == "tol_obj") o.tol_obj = v.get<double>();
        else if (k == "tol_grad") o.tol_grad = v.get<double>();
        else if (k == "target_obj") o.target_obj = v.get<double>();
        else if (k == "tol_step") o.tol_step = v.get<double>();
        else if (k == "max_iter") o.max_iter = v.get<int>();
        else if (k == "restarts") o.restarts = v.get<int>();
        else if (k == "stall_window") o.stall_window = v.get<int>();
        else if (k == "bt_increase") o.bt_increase = v.get<double>();
        else if (k == "bt_decrease") o.bt_decrease = v.get<double>();
        else if (k == "admm_eps") o.admm_eps = v.get<double>();
        else if (k == "record_history") o.record_history = v.get<bool>();
        else throw FormatError("--opts: unknown field '" + k + "'");
    }
    return o;
}

CVec fiducial_from_file(const std::string& path) {
    json j = read_json_file(path);
    CMat m = matrix_from_json(j.contains("matrix") ? j["matrix"] : j);
    if (m.cols() != 1 && m.rows() != 1) throw DimensionMismatch("fiducial: expected a vector");
    return m.cols() == 1 ? CVec(m.col(0)) : CVec(m.row(0).transpose());
}

Povm build_povm(const std::string& kind, int d, int rank, int bases, std::optional<std::uint64_t> seed,
                const std::string& fiducial, const std::string& source, const CLI::App* sub) {
    auto need_seed = [&] {
        if (!seed) throw UsageError("--seed is required for --kind " + kind, sub);
        return *seed;
    };
    if (kind == "sic") {
        if (fiducial.empty()) return sic(d);
        return sic(d, fiducial_from_file(fiducial));
    }
    if (kind == "mub") return as_povm(mub(d));
    if (kind == "gmb") return as_povm(gmb(d, rank));
    if (kind == "gmb4") return as_povm(gmb_4(d));
    if (kind == "gmb5") return as_povm(gmb_5(d));
    if (kind == "flammia2d") return flammia_2d(d);
    if (kind == "flammia-rr") return flammia_rank_r(d, rank);
    if (kind == "psi3d") return psi_3d(d);
    if (kind == "poly4") return as_povm(poly_bases(d, 4));
    if (kind == "poly5") return as_povm(poly_bases(d, 5));
    if (kind == "random") return as_povm(random_bases(d, bases, need_seed()));
    if (kind == "local-random") {
        int nq = detail::log2_exact(d);
        if (nq < 1) throw InvalidArgument("local-random: d must be a power of 2");
        return as_povm(local_random_bases(nq, bases, need_seed()));
    }
    if (kind == "neumark") {
        if (source.empty()) throw UsageError("--kind neumark needs --povm FILE", sub);
        return as_povm(neumark_extend(povm_from_json(read_json_file(source)), d));
    }
    throw UsageError("unknown --kind " + kind, sub);
}

const std::vector<std::string> kPovmKinds{"sic",       "mub",        "gmb",   "gmb4",  "gmb5",   "flammia2d",    "flammia-rr",
                                          "psi3d",     "poly4",      "poly5", "random", "local-random", "neumark"};

json with_dim(json doc, int d) {
    doc["dim"] = d;
    return doc;
}

// ---------------------------------------------------------------------------
// bench

void write_tables(const Run& run, const std::string& dir, const std::vector<Table>& tables, const SweepSpec& spec) {
    std::vector<std::string> outs;
    for (const auto& t : tables) {
        write_csv_file((fs::path(dir) / (t.name + ".csv")).string(), t);
        outs.push_back(t.name + ".csv");
    }
    RunManifest m = run.manifest(outs, json{{"spec", sweep_spec_to_json(spec)}});
    write_manifest((fs::path(dir) / "manifest.json").string(), m);
}

bool rank_one_only(const std::string& c) { return c == "gmb5" || c == "poly5" || c == "psi3d"; }

std::vector<Table> run_bench(const std::string& which, const SweepSpec& spec) {
    if (which == "strict") return {sweep_strict_completeness(spec)};
    if (which == "noisy") return {sweep_noisy_estimation(spec)};
    if (which == "qpt") return {sweep_qpt(spec)};
    if (which == "robustness") {
        std::vector<RatioHistogram> hs;
        for (const auto& c : spec.constructions)
            for (int d : spec.dims)
                for (int r : spec.ranks) {
                    if (rank_one_only(c) && r != 1) continue;
                    Povm p = strict_construction(c, d, r, child_seed(spec.seed, std::uint64_t(d)));
                    hs.push_back(sweep_robustness_ratio(p, r, spec.n_pairs,
                                                        child_seed(spec.seed, std::uint64_t(d) * 100 + std::uint64_t(r))));
                    hs.back().label = c;
                }
        return {histogram_table(hs), ratio_summary_table(hs)};
    }
    if (which == "gramian") {
        Table series{"gramian", {"povm", "dim", "n", "delta2", "fit"}, {}};
        Table fit{"gramian_fit",
                  {"povm", "dim", "n_states", "n_reps", "x_rand", "x_rand_se", "x_sys", "x_sys_se", "loglog_slope",
                   "lambda_min", "lambda_max"},
                  {}};
        for (int d : spec.dims) {
            GramianModel gm;
            gm.x_rand = spec.x_rand;
            gm.x_sys = spec.x_sys;
            gm.n_reps = spec.n_reps;
            gm.n_states = spec.n_states;
            gm.seed = child_seed(spec.seed, std::uint64_t(d));
            GramianReport r = gramian_analysis(povm_of_kind(spec.povm_kind, d), gm);
            for (size_t i = 0; i < r.n.size(); ++i)
                series.add({spec.povm_kind, (long long)d, (long long)r.n[i], r.delta2[i], r.x_rand / r.n[i] + r.x_sys});
            fit.add({spec.povm_kind, (long long)d, (long long)gm.n_states, (long long)gm.n_reps, r.x_rand, r.x_rand_se,
                     r.x_sys, r.x_sys_se, r.loglog_slope, r.lambda_min, r.lambda_max});
        }
        return {series, fit};
    }
    if (which == "counts") return {element_count_report(spec.constructions, spec.dims, spec.n_states, spec.seed)};
    throw InvalidArgument("unknown bench experiment " + which);
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> raw(argv + 1, argv + argc);
    CLI::App app{"tomokit: quantum state, detector and process tomography toolkit"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    app.set_version_flag("--version", std::string(kToolVersion));
    std::string config_path;
    app.add_option("--config", config_path, "JSON file of option values; explicit flags win");

    Run run;
    run.argv.push_back("tomokit");
    run.argv.insert(run.argv.end(), raw.begin(), raw.end());

    // povm build
    auto* povm_cmd = app.add_subcommand("povm", "POVM constructions");
    povm_cmd->require_subcommand(1);
    auto* povm_build = povm_cmd->add_subcommand("build", "build a POVM and write it as JSON");
    std::string pb_kind, pb_out, pb_fid, pb_src;
    int pb_dim = 0, pb_rank = 1, pb_bases = 6;
    std::uint64_t pb_seed = 0;
    povm_build->add_option("--kind", pb_kind, "construction")->required()->check(CLI::IsMember(kPovmKinds));
    povm_build->add_option("--dim", pb_dim, "Hilbert-space dimension")->required()->check(CLI::PositiveNumber);
    povm_build->add_option("--rank", pb_rank, "rank for gmb / flammia-rr")->capture_default_str();
    povm_build->add_option("--bases", pb_bases, "basis count for random / local-random")->capture_default_str();
    povm_build->add_option("--seed", pb_seed, "seed (random kinds)");
    povm_build->add_option("--fiducial", pb_fid, "SIC fiducial vector file");
    povm_build->add_option("--povm", pb_src, "source POVM for neumark");
    povm_build->add_option("--out", pb_out, "output file")->required();

    // state random
    auto* state_cmd = app.add_subcommand("state", "state generation");
    state_cmd->require_subcommand(1);
    auto* state_random = state_cmd->add_subcommand("random", "random rank-r state (Haar pure for r = 1)");
    int sr_dim = 0, sr_rank = 1;
    std::uint64_t sr_seed = 0;
    std::string sr_out;
    state_random->add_option("--dim", sr_dim)->required()->check(CLI::PositiveNumber);
    state_random->add_option("--rank", sr_rank)->capture_default_str();
    state_random->add_option("--seed", sr_seed);
    state_random->add_option("--out", sr_out)->required();

    // process random
    auto* proc_cmd = app.add_subcommand("process", "process generation");
    proc_cmd->require_subcommand(1);
    auto* proc_random = proc_cmd->add_subcommand("random", "Haar unitary target and the applied process");
    int pr_dim = 0;
    std::uint64_t pr_seed = 0;
    std::string pr_error = "ideal", pr_unitary_out, pr_out;
    double pr_strength = 0.0;
    proc_random->add_option("--dim", pr_dim)->required()->check(CLI::PositiveNumber);
    proc_random->add_option("--error", pr_error, "applied error")
        ->check(CLI::IsMember({"ideal", "coherent", "incoherent"}))
        ->capture_default_str();
    proc_random->add_option("--strength", pr_strength, "eta (coherent) or xi (incoherent)")->capture_default_str();
    proc_random->add_option("--seed", pr_seed);
    proc_random->add_option("--unitary-out", pr_unitary_out, "target unitary file")->required();
    proc_random->add_option("--out", pr_out, "applied process file")->required();

    // simulate [qpt | qdt]
    auto* sim = app.add_subcommand("simulate", "simulate a measurement record");
    sim->require_subcommand(0, 1);
    std::string sm_povm, sm_state, sm_noise = "ideal", sm_perturb, sm_out;
    std::uint64_t sm_seed = 0;
    sim->add_option("--povm", sm_povm, "POVM file");
    sim->add_option("--state", sm_state, "state file");
    sim->add_option("--noise", sm_noise, "ideal | multinomial:m=M | gaussian:sigma=S, joined with +")->capture_default_str();
    sim->add_option("--perturb", sm_perturb, "detector perturbation eta=E");
    sim->add_option("--seed", sm_seed, "seed (required)");
    sim->add_option("--out", sm_out, "output record file");
    auto* sim_qpt = sim->add_subcommand("qpt", "simulate process tomography data");
    std::string sq_process, sq_states, sq_povm, sq_noise = "ideal", sq_out;
    std::uint64_t sq_seed = 0;
    sim_qpt->add_option("--process", sq_process)->required();
    sim_qpt->add_option("--states", sq_states)->required();
    sim_qpt->add_option("--povm", sq_povm)->required();
    sim_qpt->add_option("--noise", sq_noise)->capture_default_str();
    sim_qpt->add_option("--seed", sq_seed, "seed (required)");
    sim_qpt->add_option("--out", sq_out)->required();
    auto* sim_qdt = sim->add_subcommand("qdt", "simulate detector tomography data for one POVM element");
    std::string sd_povm, sd_probes, sd_noise = "ideal", sd_out;
    int sd_element = 0;
    std::uint64_t sd_seed = 0;
    sim_qdt->add_option("--povm", sd_povm)->required();
    sim_qdt->add_option("--element", sd_element)->capture_default_str();
    sim_qdt->add_option("--probes", sd_probes, "probe state set (default: built-in set)");
    sim_qdt->add_option("--noise", sd_noise)->capture_default_str();
    sim_qdt->add_option("--seed", sd_seed, "seed (required)");
    sim_qdt->add_option("--out", sd_out)->required();

    // estimate [qpt | qdt]
    auto* est = app.add_subcommand("estimate", "estimate a state, process or detector element");
    est->require_subcommand(0, 1);
    std::string es_method, es_record, es_povm, es_opts, es_out;
    int es_rank = 1;
    double es_eps = -1.0, es_floor = 1e-6;
    std::uint64_t es_seed = 0;
    est->add_option("--method", es_method)->check(CLI::IsMember({"li", "ls", "ml", "trmin", "rankr"}));
    est->add_option("--rank", es_rank)->capture_default_str();
    est->add_option("--record", es_record);
    est->add_option("--povm", es_povm);
    est->add_option("--eps", es_eps, "noise radius (default: calibrated from the record's noise tag)");
    est->add_option("--eps-floor", es_floor, "lower bound on the calibrated radius")->capture_default_str();
    est->add_option("--opts", es_opts, "solver options JSON");
    est->add_option("--seed", es_seed, "seed (rankr restarts)");
    est->add_option("--out", es_out);
    auto* est_qpt = est->add_subcommand("qpt", "process tomography");
    std::string eq_method, eq_record, eq_states, eq_povm, eq_target, eq_opts, eq_out;
    int eq_k = 0, eq_cyclic = 0;
    double eq_eps = -1.0, eq_floor = 1e-6;
    est_qpt->add_option("--method", eq_method)->required()->check(CLI::IsMember({"ls", "trmin", "l1"}));
    est_qpt->add_option("--record", eq_record)->required();
    est_qpt->add_option("--states", eq_states)->required();
    est_qpt->add_option("--povm", eq_povm)->required();
    est_qpt->add_option("--target-unitary", eq_target);
    est_qpt->add_option("--n-states", eq_k, "use the first K input states (default: all)");
    est_qpt->add_option("--cyclic-average", eq_cyclic, "l1 only: average over the d cyclic windows of K states");
    est_qpt->add_option("--eps", eq_eps);
    est_qpt->add_option("--eps-floor", eq_floor, "lower bound on the calibrated radius")->capture_default_str();
    est_qpt->add_option("--opts", eq_opts);
    est_qpt->add_option("--out", eq_out)->required();
    auto* est_qdt = est->add_subcommand("qdt", "detector element from probe data");
    std::string ed_record, ed_probes, ed_opts, ed_out;
    int ed_dim = 0;
    est_qdt->add_option("--record", ed_record)->required();
    est_qdt->add_option("--probes", ed_probes, "probe state set (default: built-in set, needs --dim)");
    est_qdt->add_option("--dim", ed_dim);
    est_qdt->add_option("--opts", ed_opts);
    est_qdt->add_option("--out", ed_out)->required();

    // eprec complete | probe
    auto* ep = app.add_subcommand("eprec", "element-probing reconstruction");
    ep->require_subcommand(1);
    auto* ep_complete = ep->add_subcommand("complete", "rank-r completion from element-probing data");
    std::string ec_record, ec_povm, ec_kind, ec_out;
    int ec_rank = 1, ec_dim = 0;
    double ec_cap = 1e8;
    ep_complete->add_option("--record", ec_record)->required();
    ep_complete->add_option("--povm", ec_povm, "POVM file");
    ep_complete->add_option("--povm-kind", ec_kind, "built-in construction (with --dim) instead of --povm");
    ep_complete->add_option("--dim", ec_dim);
    ep_complete->add_option("--rank", ec_rank)->capture_default_str();
    ep_complete->add_option("--cond-cap", ec_cap)->capture_default_str();
    ep_complete->add_option("--out", ec_out)->required();
    auto* ep_probe = ep->add_subcommand("probe", "strict-completeness probe of a POVM");
    std::string epr_povm, epr_out;
    int epr_rank = 1, epr_samples = 200;
    std::uint64_t epr_seed = 0;
    ep_probe->add_option("--povm", epr_povm)->required();
    ep_probe->add_option("--rank", epr_rank)->capture_default_str();
    ep_probe->add_option("--samples", epr_samples)->capture_default_str();
    ep_probe->add_option("--seed", epr_seed, "seed (required)");
    ep_probe->add_option("--out", epr_out, "report file (default: stdout)");

    // qpt states
    auto* qpt = app.add_subcommand("qpt", "process tomography input states");
    qpt->require_subcommand(1);
    auto* qpt_states = qpt->add_subcommand("states", "write an input state set");
    std::string qs_kind, qs_out;
    int qs_dim = 0;
    bool qs_supp = false;
    qpt_states->add_option("--kind", qs_kind)->required()->check(
        CLI::IsMember({"standard", "uic-mixed", "uic-nplus", "uic-0plus"}));
    qpt_states->add_option("--dim", qs_dim)->required()->check(CLI::PositiveNumber);
    qpt_states->add_flag("--supplement", qs_supp, "extend to a full operator basis");
    qpt_states->add_option("--out", qs_out)->required();

    // bench
    auto* bench = app.add_subcommand("bench", "experiment sweeps");
    bench->require_subcommand(1);
    std::string bn_spec, bn_out;
    std::uint64_t bn_seed = 0;
    std::vector<CLI::App*> bench_subs;
    for (const char* name : {"strict", "robustness", "noisy", "qpt", "gramian", "counts"}) {
        auto* b = bench->add_subcommand(name, std::string("sweep: ") + name);
        b->add_option("--spec", bn_spec, "sweep spec JSON")->required();
        b->add_option("--out", bn_out, "output directory")->required();
        b->add_option("--seed", bn_seed, "seed (overrides the seed field of --spec)");
        bench_subs.push_back(b);
    }

    try {
        std::vector<std::string> args = expand_config(raw);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (povm_build->parsed()) {
            run.sub = povm_build;
            run.command = "povm build";
            auto seed = seed_of(povm_build, pb_seed);
            if (seed) run.seeds.push_back(*seed);
            Povm p = build_povm(pb_kind, pb_dim, pb_rank, pb_bases, seed, pb_fid, pb_src, povm_build);
            validate_povm(p.elements);
            run.write_file(pb_out, povm_to_json(p));
        } else if (state_random->parsed()) {
            run.sub = state_random;
            run.command = "state random";
            std::uint64_t s = require_seed(state_random, sr_seed);
            run.seeds.push_back(s);
            DensityMatrix st = sr_rank == 1 ? random_pure(sr_dim, s) : random_mixed_rank(sr_dim, sr_rank, s);
            run.write_file(sr_out, state_to_json(st, "random-rank-" + std::to_string(sr_rank)));
        } else if (proc_random->parsed()) {
            run.sub = proc_random;
            run.command = "process random";
            std::uint64_t s = require_seed(proc_random, pr_seed);
            run.seeds.push_back(s);
            SweepSpec spec;
            spec.error_kind = pr_error;
            spec.error_strength = pr_strength;
            CMat ut = haar_unitary(pr_dim, child_seed(s, 0));
            run.write_file(pr_unitary_out, unitary_to_json(ut, "haar"));
            run.write_file(pr_out, process_to_json(applied_process(spec, ut, child_seed(s, 1)), pr_error));
        } else if (sim_qpt->parsed()) {
            run.sub = sim_qpt;
            run.command = "simulate qpt";
            std::uint64_t s = require_seed(sim_qpt, sq_seed);
            run.seeds.push_back(s);
            ProcessMatrix pm = process_from_json(read_json_file(sq_process));
            StateSet ss = state_set_from_json(read_json_file(sq_states));
            Povm pov = povm_from_json(read_json_file(sq_povm));
            SensingMatrix sm = qpt_sensing(ss, pov);
            MeasurementRecord rec = sample_record(qpt_probabilities(pm, sm), sm.layout, parse_noise(sq_noise), s);
            rec.povm_label = pov.label;
            rec.seed = s;
            run.write_file(sq_out, record_to_json(rec));
        } else if (sim_qdt->parsed()) {
            run.sub = sim_qdt;
            run.command = "simulate qdt";
            std::uint64_t s = require_seed(sim_qdt, sd_seed);
            run.seeds.push_back(s);
            Povm pov = povm_from_json(read_json_file(sd_povm));
            if (sd_element < 0 || sd_element >= pov.size()) throw InvalidArgument("--element out of range");
            StateSet probes = sd_probes.empty() ? qdt_probing_set(pov.dim) : state_set_from_json(read_json_file(sd_probes));
            MeasurementRecord rec =
                qdt_probe_element(pov.elements[size_t(sd_element)], qdt_probing_matrix(probes), parse_noise(sd_noise), s);
            rec.povm_label = probes.label;
            rec.seed = s;
            run.write_file(sd_out, record_to_json(rec));
        } else if (sim->parsed()) {
            run.sub = sim;
            run.command = "simulate";
            std::uint64_t s = require_seed(sim, sm_seed);
            require(sim, "--povm", !sm_povm.empty());
            require(sim, "--state", !sm_state.empty());
            require(sim, "--out", !sm_out.empty());
            run.seeds.push_back(s);
            Povm pov = povm_from_json(read_json_file(sm_povm));
            DensityMatrix st = state_from_json(read_json_file(sm_state));
            if (!sm_perturb.empty()) {
                if (sm_perturb.rfind("eta=", 0) != 0) throw UsageError("--perturb expects eta=E", sim);
                pov = perturb_povm(pov, std::stod(sm_perturb.substr(4)), child_seed(s, 1));
            }
            MeasurementRecord rec = sample_record(pov, born_probabilities(pov, st), parse_noise(sm_noise), child_seed(s, 0));
            rec.povm_label = pov.label;
            rec.seed = s;
            run.write_file(sm_out, record_to_json(rec));
        } else if (est_qpt->parsed()) {
            run.sub = est_qpt;
            run.command = "estimate qpt";
            MeasurementRecord rec = record_from_json(read_json_file(eq_record));
            StateSet ss = state_set_from_json(read_json_file(eq_states));
            Povm pov = povm_from_json(read_json_file(eq_povm));
            SensingMatrix sm = qpt_sensing(ss, pov);
            if (rec.f.size() != sm.D.rows()) throw DimensionMismatch("record length differs from states x outcomes");
            const int d = sm.dim;
            const int k = eq_k > 0 ? eq_k : sm.n_states;
            SolverOptions o = solver_options(eq_opts);
            const NoiseSpec noise = parse_noise(rec.noise_tag);
            auto eps_of = [&](const SensingSlice& sl) {
                return eq_eps >= 0 ? eq_eps : std::max(eq_floor, calibrated_epsilon(sl.layout, noise));
            };
            std::optional<CMat> ut;
            if (!eq_target.empty()) ut = unitary_from_json(read_json_file(eq_target));
            Estimate e;
            if (eq_cyclic > 0) {
                if (eq_method != "l1") throw UsageError("--cyclic-average applies to --method l1", est_qpt);
                if (!ut) throw UsageError("--method l1 needs --target-unitary", est_qpt);
                e = l1_cyclic_average(sm, rec.f, eq_cyclic, *ut, o, eps_of);
            } else {
                SensingSlice sl = first_states(sm, rec.f, k);
                if (eq_method == "ls") {
                    e = estimate_or_best([&] { return ls_process(sl, d, o); });
                } else if (eq_method == "trmin") {
                    o.epsilon = eps_of(sl);
                    e = estimate_or_best([&] { return trmin_process(sl, d, o); });
                } else {
                    if (!ut) throw UsageError("--method l1 needs --target-unitary", est_qpt);
                    o.epsilon = eps_of(sl);
                    e = estimate_or_best([&] { return l1_process(sl, d, *ut, o); });
                }
            }
            json doc = with_dim(estimate_to_json(e, "process"), d);
            if (ut) doc["diagnostics"]["fidelity_to_target"] = process_fidelity_unitary(to_process(e), *ut);
            run.write_file(eq_out, doc);
        } else if (est_qdt->parsed()) {
            run.sub = est_qdt;
            run.command = "estimate qdt";
            MeasurementRecord rec = record_from_json(read_json_file(ed_record));
            StateSet probes;
            if (!ed_probes.empty()) probes = state_set_from_json(read_json_file(ed_probes));
            else if (ed_dim > 0) probes = qdt_probing_set(ed_dim);
            else throw UsageError("estimate qdt needs --probes or --dim", est_qdt);
            Estimate e = estimate_or_best([&] { return qdt_element_ls(rec, qdt_probing_matrix(probes), solver_options(ed_opts)); });
            run.write_file(ed_out, with_dim(estimate_to_json(e, "detector-element"), probes.dim));
        } else if (est->parsed()) {
            run.sub = est;
            run.command = "estimate";
            require(est, "--method", !es_method.empty());
            require(est, "--record", !es_record.empty());
            require(est, "--povm", !es_povm.empty());
            require(est, "--out", !es_out.empty());
            MeasurementRecord rec = record_from_json(read_json_file(es_record));
            Povm pov = povm_from_json(read_json_file(es_povm));
            SolverOptions o = solver_options(es_opts);
            Estimate e;
            if (es_method == "li") {
                e = linear_inversion(rec, pov);
            } else if (es_method == "ls") {
                e = estimate_or_best([&] { return ls_state(rec, pov, o); });
            } else if (es_method == "ml") {
                e = estimate_or_best([&] { return ml_state(rec, pov, o); });
            } else if (es_method == "trmin") {
                o.epsilon = es_eps >= 0 ? es_eps
                                        : std::max(es_floor, calibrated_epsilon(layout_of(pov), parse_noise(rec.noise_tag)));
                e = estimate_or_best([&] { return trmin_state(rec, pov, o); });
            } else {
                o.seed = require_seed(est, es_seed);
                run.seeds.push_back(o.seed);
                e = rankr_projection_state(rec, pov, es_rank, o);
            }
            run.write_file(es_out, with_dim(estimate_to_json(e, "state"), pov.dim));
        } else if (ep_complete->parsed()) {
            run.sub = ep_complete;
            run.command = "eprec complete";
            MeasurementRecord rec = record_from_json(read_json_file(ec_record));
            Povm pov;
            if (!ec_povm.empty()) {
                pov = povm_from_json(read_json_file(ec_povm));
            } else {
                if (ec_kind.empty() || ec_dim < 2) throw UsageError("eprec complete needs --povm or --povm-kind with --dim", ep_complete);
                pov = build_povm(ec_kind, ec_dim, ec_rank, 0, std::nullopt, "", "", ep_complete);
            }
            CompletionReport rep = complete_rank_r_report(extract_elements(rec, pov), ec_rank, ec_cap, true);
            Estimate e;
            e.matrix = rep.matrix;
            e.method = "eprec-complete";
            e.converged = true;
            e.negative_eigenvalues = !rep.psd;
            json doc = with_dim(estimate_to_json(e, "state"), pov.dim);
            doc["completion"] = json{{"rank", ec_rank},
                                     {"psd", rep.psd},
                                     {"min_eigenvalue", rep.min_eigenvalue},
                                     {"alt_disagreement", std::isfinite(rep.alt_disagreement) ? json(rep.alt_disagreement) : json()}};
            run.write_file(ec_out, doc);
        } else if (ep_probe->parsed()) {
            run.sub = ep_probe;
            run.command = "eprec probe";
            std::uint64_t s = require_seed(ep_probe, epr_seed);
            run.seeds.push_back(s);
            Povm pov = povm_from_json(read_json_file(epr_povm));
            StrictnessReport r = strictness_probe(pov, epr_rank, epr_samples, s);
            json doc{{"kind", "strictness_report"},
                     {"label", pov.label},
                     {"dim", r.dim},
                     {"rank", r.rank},
                     {"kernel_dim", r.kernel_dim},
                     {"completion_route", r.completion_route},
                     {"samples", r.samples},
                     {"violations", r.violations},
                     {"example_inertia", {r.example.n_minus, r.example.n_zero, r.example.n_plus}},
                     {"verdict", r.verdict}};
            if (epr_out.empty()) std::cout << doc.dump(2) << "\n";
            else run.write_file(epr_out, doc);
        } else if (qpt_states->parsed()) {
            run.sub = qpt_states;
            run.command = "qpt states";
            StateSet s;
            if (qs_kind == "standard") s = standard_states(qs_dim);
            else if (qs_kind == "uic-mixed") s = uic_minimal_mixed(qs_dim);
            else if (qs_kind == "uic-nplus") s = uic_pure_nplus(qs_dim);
            else s = uic_pure_0plus(qs_dim);
            if (qs_supp) s = supplement_to_full(s, qs_dim);
            run.write_file(qs_out, state_set_to_json(s));
        } else {
            for (CLI::App* b : bench_subs) {
                if (!b->parsed()) continue;
                run.sub = b;
                run.command = "bench " + b->get_name();
                json j = read_json_file(bn_spec);
                SweepSpec spec = sweep_spec_from_json(j);
                if (b->count("--seed")) spec.seed = bn_seed;
                else if (!j.contains("seed")) throw UsageError("--seed is required (or a seed field in the --spec file)", b);
                spec.experiment = b->get_name();
                run.seeds.push_back(spec.seed);
                fs::create_directories(bn_out);
                write_tables(run, bn_out, run_bench(spec.experiment, spec), spec);
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.app) std::cerr << e.app->help();
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: FormatError: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: IOError: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
