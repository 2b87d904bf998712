#pragma once

// Structured-text exchange: matrices as {rows, cols, entries}, objects wrapped with a kind tag.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bench.hpp"
#include "qobjects.hpp"
#include "simkit.hpp"
#include "solvers.hpp"

namespace tomokit {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Matrices

inline json matrix_to_json(const CMat& m) {
    json e = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) e.push_back({m(i, j).real(), m(i, j).imag()});
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", std::move(e)}};
}

inline CMat matrix_from_json(const json& j) {
    try {
        const Eigen::Index r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
        const json& e = j.at("entries");
        if (r < 0 || c < 0 || e.size() != size_t(r * c)) throw FormatError("matrix: entries length differs from rows*cols");
        CMat m(r, c);
        size_t k = 0;
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index jj = 0; jj < c; ++jj, ++k) {
                const json& p = e[k];
                if (p.is_number()) m(i, jj) = cplx(p.get<double>(), 0.0);
                else if (p.is_array() && p.size() == 2) m(i, jj) = cplx(p[0].get<double>(), p[1].get<double>());
                else throw FormatError("matrix: entry is not a [re, im] pair");
            }
        return m;
    } catch (const json::exception& ex) {
        throw FormatError(std::string("matrix: ") + ex.what());
    }
}

inline json vector_to_json(const RVec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline RVec vector_from_json(const json& a) {
    if (!a.is_array()) throw FormatError("expected an array of numbers");
    RVec v(Eigen::Index(a.size()));
    for (size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw FormatError("expected an array of numbers");
        v(Eigen::Index(i)) = a[i].get<double>();
    }
    return v;
}

namespace detail {

inline void expect_kind(const json& j, const char* kind) {
    if (!j.is_object() || !j.contains("kind") || j["kind"] != kind)
        throw FormatError(std::string("expected a document of kind '") + kind + "'");
}

template <class T>
T field(const json& j, const char* name, T fallback) {
    return j.contains(name) ? j[name].get<T>() : fallback;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Wrapped objects

inline json state_to_json(const DensityMatrix& s, const std::string& label = "") {
    return json{{"kind", "state"}, {"dim", s.dim}, {"basis_label", "computational"}, {"label", label},
                {"matrix", matrix_to_json(s.matrix)}};
}

inline DensityMatrix state_from_json(const json& j) {
    detail::expect_kind(j, "state");
    CMat m = matrix_from_json(j.at("matrix"));
    if (m.rows() != m.cols() || m.rows() != detail::field<int>(j, "dim", int(m.rows())))
        throw DimensionMismatch("state: dim field disagrees with the matrix");
    return make_state(m);
}

inline json povm_to_json(const Povm& p) {
    json el = json::array();
    for (const auto& e : p.elements) el.push_back(matrix_to_json(e));
    return json{{"kind", "povm"},         {"dim", p.dim},           {"basis_label", "computational"},
                {"label", p.label},       {"block", p.block},       {"block_weight", p.block_weight},
                {"elements", std::move(el)}};
}

inline Povm povm_from_json(const json& j) {
    detail::expect_kind(j, "povm");
    std::vector<CMat> el;
    for (const auto& e : j.at("elements")) el.push_back(matrix_from_json(e));
    if (el.empty()) throw FormatError("povm: no elements");
    const int d = detail::field<int>(j, "dim", int(el.front().rows()));
    for (const auto& e : el)
        if (e.rows() != d || e.cols() != d) throw DimensionMismatch("povm: element size differs from dim");
    auto block = detail::field<std::vector<int>>(j, "block", {});
    auto weight = detail::field<std::vector<double>>(j, "block_weight", {});
    if (!block.empty()) {
        if (block.size() != el.size()) throw FormatError("povm: block list length differs from element count");
        for (int b : block)
            if (b < 0 || size_t(b) >= weight.size()) throw FormatError("povm: block index without a weight");
    }
    return make_povm(std::move(el), detail::field<std::string>(j, "label", ""), std::move(block), std::move(weight));
}

inline json process_to_json(const ProcessMatrix& p, const std::string& label = "") {
    return json{{"kind", "process"}, {"dim", p.dim},  {"basis_label", p.basis_label}, {"label", label},
                {"tp", p.tp},        {"matrix", matrix_to_json(p.chi)}};
}

inline ProcessMatrix process_from_json(const json& j) {
    detail::expect_kind(j, "process");
    ProcessMatrix p;
    p.chi = matrix_from_json(j.at("matrix"));
    p.dim = j.at("dim").get<int>();
    if (p.chi.rows() != Eigen::Index(p.dim) * p.dim || p.chi.cols() != p.chi.rows())
        throw DimensionMismatch("process: matrix is not d^2 x d^2");
    p.basis_label = detail::field<std::string>(j, "basis_label", kElementaryBasis);
    if (p.basis_label != kElementaryBasis) throw InvalidArgument("process: only the elementary basis is read");
    p.tp = detail::field<bool>(j, "tp", false);
    return p;
}

inline json unitary_to_json(const CMat& u, const std::string& label = "") {
    return json{{"kind", "unitary"}, {"dim", u.rows()}, {"basis_label", "computational"}, {"label", label},
                {"matrix", matrix_to_json(u)}};
}

inline CMat unitary_from_json(const json& j) {
    detail::expect_kind(j, "unitary");
    CMat u = matrix_from_json(j.at("matrix"));
    if (u.rows() != u.cols()) throw DimensionMismatch("unitary: matrix is not square");
    if ((u.adjoint() * u - CMat::Identity(u.rows(), u.cols())).norm() > 1e-8)
        throw InvalidArgument("unitary: matrix is not unitary");
    return u;
}

inline json state_set_to_json(const StateSet& s) {
    json st = json::array();
    for (const auto& x : s.states) st.push_back(matrix_to_json(x.matrix));
    return json{{"kind", "state_set"}, {"dim", s.dim}, {"basis_label", "computational"}, {"label", s.label},
                {"states", std::move(st)}};
}

inline StateSet state_set_from_json(const json& j) {
    detail::expect_kind(j, "state_set");
    StateSet s;
    s.dim = j.at("dim").get<int>();
    s.label = detail::field<std::string>(j, "label", "");
    for (const auto& m : j.at("states")) {
        CMat x = matrix_from_json(m);
        if (x.rows() != s.dim || x.cols() != s.dim) throw DimensionMismatch("state_set: state size differs from dim");
        s.states.push_back(make_state(x));
    }
    return s;
}

inline json record_to_json(const MeasurementRecord& r) {
    return json{{"kind", "record"}, {"povm_label", r.povm_label}, {"noise_tag", r.noise_tag}, {"seed", r.seed},
                {"f", vector_to_json(r.f)}};
}

inline MeasurementRecord record_from_json(const json& j) {
    detail::expect_kind(j, "record");
    MeasurementRecord r;
    r.f = vector_from_json(j.at("f"));
    r.povm_label = detail::field<std::string>(j, "povm_label", "");
    r.noise_tag = detail::field<std::string>(j, "noise_tag", "ideal");
    r.seed = detail::field<std::uint64_t>(j, "seed", 0);
    return r;
}

inline json estimate_to_json(const Estimate& e, const std::string& kind = "state") {
    json j{{"kind", "estimate"},
           {"target", kind},
           {"method", e.method},
           {"matrix", matrix_to_json(e.matrix)},
           {"diagnostics",
            {{"objective", e.objective},
             {"residual", e.residual},
             {"iterations", e.iterations},
             {"converged", e.converged},
             {"restarts_used", e.restarts_used},
             {"degenerate", e.degenerate},
             {"negative_eigenvalues", e.negative_eigenvalues}}}};
    return j;
}

inline Estimate estimate_from_json(const json& j) {
    detail::expect_kind(j, "estimate");
    Estimate e;
    e.matrix = matrix_from_json(j.at("matrix"));
    e.method = detail::field<std::string>(j, "method", "");
    if (j.contains("diagnostics")) {
        const json& d = j["diagnostics"];
        e.objective = detail::field<double>(d, "objective", 0.0);
        e.residual = detail::field<double>(d, "residual", 0.0);
        e.iterations = detail::field<int>(d, "iterations", 0);
        e.converged = detail::field<bool>(d, "converged", false);
        e.restarts_used = detail::field<int>(d, "restarts_used", 0);
        e.degenerate = detail::field<bool>(d, "degenerate", false);
        e.negative_eigenvalues = detail::field<bool>(d, "negative_eigenvalues", false);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Sweep specs: every field optional, unknown keys rejected

inline json sweep_spec_to_json(const SweepSpec& s) {
    return json{{"experiment", s.experiment},
                {"dims", s.dims},
                {"ranks", s.ranks},
                {"n_states", s.n_states},
                {"seed", s.seed},
                {"output", s.output},
                {"basis_kind", s.basis_kind},
                {"min_bases", s.min_bases},
                {"max_bases", s.max_bases},
                {"q", s.q},
                {"m_per_dim", s.m_per_dim},
                {"estimators", s.estimators},
                {"constructions", s.constructions},
                {"n_pairs", s.n_pairs},
                {"state_kind", s.state_kind},
                {"povm_kind", s.povm_kind},
                {"error_kind", s.error_kind},
                {"error_strength", s.error_strength},
                {"noise", s.noise},
                {"n_seeds", s.n_seeds},
                {"max_states", s.max_states},
                {"admm_eps", s.admm_eps},
                {"eps_floor", s.eps_floor},
                {"x_rand", s.x_rand},
                {"x_sys", s.x_sys},
                {"n_reps", s.n_reps}};
}

inline SweepSpec sweep_spec_from_json(const json& j) {
    if (!j.is_object()) throw FormatError("sweep spec must be an object");
    SweepSpec s;
    const json known = sweep_spec_to_json(s);
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) throw FormatError("sweep spec: unknown field '" + k + "'");
    try {
        auto get = [&](const char* k, auto& dst) {
            if (j.contains(k)) dst = j[k].get<std::decay_t<decltype(dst)>>();
        };
        get("experiment", s.experiment);
        get("dims", s.dims);
        get("ranks", s.ranks);
        get("n_states", s.n_states);
        get("seed", s.seed);
        get("output", s.output);
        get("basis_kind", s.basis_kind);
        get("min_bases", s.min_bases);
        get("max_bases", s.max_bases);
        get("q", s.q);
        get("m_per_dim", s.m_per_dim);
        get("estimators", s.estimators);
        get("constructions", s.constructions);
        get("n_pairs", s.n_pairs);
        get("state_kind", s.state_kind);
        get("povm_kind", s.povm_kind);
        get("error_kind", s.error_kind);
        get("error_strength", s.error_strength);
        get("noise", s.noise);
        get("n_seeds", s.n_seeds);
        get("max_states", s.max_states);
        get("admm_eps", s.admm_eps);
        get("eps_floor", s.eps_floor);
        get("x_rand", s.x_rand);
        get("x_sys", s.x_sys);
        get("n_reps", s.n_reps);
    } catch (const json::exception& e) {
        throw FormatError(std::string("sweep spec: ") + e.what());
    }
    if (s.n_states < 0 || s.n_pairs < 1 || s.n_seeds < 1 || s.min_bases < 1 || s.max_bases < s.min_bases)
        throw InvalidArgument("sweep spec: counts out of range");
    for (int d : s.dims)
        if (d < 2) throw InvalidArgument("sweep spec: dims must be at least 2");
    return s;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json_file(const std::string& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// Write to a sibling temporary, then rename over the target.
inline void write_text_atomic(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidArgument("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw InvalidArgument("write failed: " + tmp.string());
    }
    fs::rename(tmp, p);
}

inline void write_json_file(const std::string& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

inline void write_csv_file(const std::string& path, const Table& t) { write_text_atomic(path, to_csv(t)); }

// ---------------------------------------------------------------------------
// Run manifest

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct RunManifest {
    std::vector<std::string> command_line;
    json config = json::object();
    std::vector<std::uint64_t> seeds;
    std::string tool_version = kToolVersion;
    double wall_time_s = 0.0;
    std::vector<std::string> outputs;

    // digest of the compact, key-ordered config text
    std::string config_digest() const { return hex64(fnv1a64(nlohmann::json(config).dump())); }

    json to_json() const {
        return json{{"kind", "manifest"},
                    {"command_line", command_line},
                    {"config", config},
                    {"config_digest", config_digest()},
                    {"seeds", seeds},
                    {"tool_version", tool_version},
                    {"wall_time_s", wall_time_s},
                    {"outputs", outputs}};
    }
};

inline void write_manifest(const std::string& path, const RunManifest& m) { write_json_file(path, m.to_json()); }

class WallClock {
public:
    WallClock() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

}  // namespace tomokit
