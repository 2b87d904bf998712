#pragma once

// Experiment harness: sweeps over constructions, dimensions and estimators, emitting plain tables.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "parallel.hpp"
#include "povmlib.hpp"
#include "qptsets.hpp"
#include "simkit.hpp"
#include "solvers.hpp"

namespace tomokit {

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::string, double, long long>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw DimensionMismatch("Table::add: row width differs from header");
        rows.push_back(std::move(row));
    }
    int column(const std::string& c) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == c) return static_cast<int>(i);
        throw InvalidArgument("Table: no column " + c);
    }
    double num(size_t row, const std::string& c) const {
        const Cell& v = rows.at(row).at(size_t(column(c)));
        if (auto d = std::get_if<double>(&v)) return *d;
        if (auto i = std::get_if<long long>(&v)) return double(*i);
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::string str(size_t row, const std::string& c) const;
};

inline std::string format_cell(const Cell& c) {
    if (auto s = std::get_if<std::string>(&c)) {
        bool quote = s->find_first_of(",\"\n") != std::string::npos;
        if (!quote) return *s;
        std::string q = "\"";
        for (char ch : *s) {
            if (ch == '"') q += '"';
            q += ch;
        }
        return q + "\"";
    }
    if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
    double v = std::get<double>(c);
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    // shortest text that reads back to the same double
    char buf[40];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string Table::str(size_t row, const std::string& c) const {
    const Cell& v = rows.at(row).at(size_t(column(c)));
    if (auto s = std::get_if<std::string>(&v)) return *s;
    return format_cell(v);
}

inline std::string to_csv(const Table& t) {
    std::ostringstream os;
    for (size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << format_cell(t.columns[i]);
    os << "\n";
    for (const auto& r : t.rows) {
        for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_cell(r[i]);
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Summary statistics

struct Summary {
    long long n = 0;
    double median = std::numeric_limits<double>::quiet_NaN();
    double q1 = median, q3 = median, min = median, max = median, mean = median;
};

// linear interpolation between order statistics
inline double quantile_sorted(const std::vector<double>& s, double q) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    double pos = q * double(s.size() - 1);
    size_t lo = size_t(std::floor(pos));
    size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - double(lo)) * (s[hi] - s[lo]);
}

inline Summary summarize(std::vector<double> v) {
    Summary s;
    s.n = static_cast<long long>(v.size());
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    s.median = quantile_sorted(v, 0.5);
    s.q1 = quantile_sorted(v, 0.25);
    s.q3 = quantile_sorted(v, 0.75);
    s.min = v.front();
    s.max = v.back();
    double acc = 0.0;
    for (double x : v) acc += x;
    s.mean = acc / double(v.size());
    return s;
}

// Index k maximizing c[k-1] - 2c[k] + c[k+1]; -1 if the curve has fewer than 3 points.
inline int max_second_difference_index(const std::vector<double>& c) {
    int best = -1;
    double bv = -std::numeric_limits<double>::infinity();
    for (size_t k = 1; k + 1 < c.size(); ++k) {
        double v = c[k - 1] - 2.0 * c[k] + c[k + 1];
        if (v > bv) {
            bv = v;
            best = static_cast<int>(k);
        }
    }
    return best;
}

// Index k maximizing |c[k-1] - 2c[k] + c[k+1]|.
inline int max_abs_second_difference_index(const std::vector<double>& c) {
    int best = -1;
    double bv = -1.0;
    for (size_t k = 1; k + 1 < c.size(); ++k) {
        double v = std::abs(c[k - 1] - 2.0 * c[k] + c[k + 1]);
        if (v > bv) {
            bv = v;
            best = static_cast<int>(k);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Sweep parameters

struct SweepSpec {
    std::string experiment;  // strict | robustness | noisy | qpt | gramian | counts
    std::vector<int> dims;
    std::vector<int> ranks{1};
    int n_states = 50;
    std::uint64_t seed = 1;
    std::string output;

    // state tomography
    std::string basis_kind = "random";  // random | local-random | mub | gmb
    int min_bases = 1;
    int max_bases = 20;
    double q = 1e-3;            // preparation error weight
    double m_per_dim = 300.0;   // copies per basis = m_per_dim * d
    std::vector<std::string> estimators{"ls", "ml", "trmin"};

    // robustness ratio
    std::vector<std::string> constructions;
    int n_pairs = 10000;

    // process tomography
    std::string state_kind = "uic-0plus";
    std::string povm_kind = "mub";
    std::string error_kind = "ideal";  // ideal | coherent | incoherent
    double error_strength = 0.0;
    std::string noise = "ideal";
    int n_seeds = 50;
    int max_states = 0;  // 0: all states of the set
    double admm_eps = 1e-7;
    double eps_floor = 1e-6;  // Tr-min / l1 radius floor when the noise model gives no radius

    // Gramian fit
    double x_rand = 0.03;
    double x_sys = 0.01;
    int n_reps = 10;
};

namespace detail {

inline BasisSet bases_of_kind(const std::string& kind, int d, int n, std::uint64_t seed) {
    if (kind == "random") return random_bases(d, n, seed);
    if (kind == "local-random") {
        int nq = detail::log2_exact(d);
        if (nq < 1) throw InvalidArgument("local-random bases need d a power of 2");
        return local_random_bases(nq, n, seed);
    }
    BasisSet full;
    if (kind == "mub") full = mub(d);
    else if (kind == "gmb") full = gmb(d, d / 2);
    else throw InvalidArgument("unknown basis kind: " + kind);
    if (n > full.size()) throw InvalidArgument(kind + ": only " + std::to_string(full.size()) + " bases available");
    full.bases.resize(size_t(n));
    return full;
}

inline int max_bases_of_kind(const std::string& kind, int d, int requested) {
    if (kind == "mub") return std::min(requested, d + 1);
    if (kind == "gmb") return std::min(requested, 2 * d - 1);
    return requested;
}

// real-parameter count of rank-r states: the fewest basis outcomes that could possibly pin them
inline int basis_lower_bound(int d, int r) {
    int params = 2 * d * r - r * r - 1;
    return std::max(1, (params + d - 2) / (d - 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Strict completeness: fewest bases (prefixes of one seeded sequence) that reconstruct every sampled state

struct StrictCell {
    int dim = 0, rank = 0, n_states = 0;
    int min_bases = -1;  // -1: budget exhausted
    double max_infidelity = std::numeric_limits<double>::quiet_NaN();
    double median_infidelity = max_infidelity;
    int failed_state_below = -1;  // first failing state at min_bases - 1
};

inline StrictCell strict_completeness_cell(const SweepSpec& spec, int d, int r) {
    StrictCell cell;
    cell.dim = d;
    cell.rank = r;
    cell.n_states = spec.n_states;
    const std::uint64_t cs = child_seed(spec.seed, std::uint64_t(d) * 1000 + std::uint64_t(r));
    const int kmax = detail::max_bases_of_kind(spec.basis_kind, d, spec.max_bases);
    BasisSet all = detail::bases_of_kind(spec.basis_kind, d, kmax, child_seed(cs, 0));
    std::vector<CMat> states;
    for (int s = 0; s < spec.n_states; ++s)
        states.push_back(random_mixed_rank(d, r, child_seed(child_seed(cs, 1), std::uint64_t(s))).matrix);
    const int threads = thread_count();
    for (int k = std::max(spec.min_bases, detail::basis_lower_bound(d, r)); k <= kmax; ++k) {
        BasisSet pre = all;
        pre.bases.resize(size_t(k));
        Povm p = as_povm(pre);
        std::vector<double> inf;
        bool ok = true;
        // batches of one state per thread; stop at the first batch with a failure
        for (int start = 0; start < spec.n_states && ok; start += threads) {
            int cnt = std::min(threads, spec.n_states - start);
            auto got = parallel_map<double>(cnt, [&](int i) {
                MeasurementRecord rec;
                rec.f = born_probabilities(p, states[size_t(start + i)]);
                Estimate e = estimate_or_best([&] { return ls_state(rec, p); });
                return 1.0 - fidelity(states[size_t(start + i)], e.matrix);
            });
            for (int i = 0; i < cnt; ++i) {
                inf.push_back(got[size_t(i)]);
                if (!(got[size_t(i)] < 1e-5)) {
                    ok = false;
                    cell.failed_state_below = start + i;
                    break;
                }
            }
        }
        if (ok) {
            cell.min_bases = k;
            Summary s = summarize(inf);
            cell.max_infidelity = s.max;
            cell.median_infidelity = s.median;
            return cell;
        }
    }
    return cell;
}

inline Table sweep_strict_completeness(const SweepSpec& spec) {
    Table t{"strict", {"basis_kind", "dim", "rank", "n_states", "min_bases", "median_infidelity", "max_infidelity",
                       "failed_state_below"}, {}};
    for (int d : spec.dims)
        for (int r : spec.ranks) {
            StrictCell c = strict_completeness_cell(spec, d, r);
            t.add({spec.basis_kind, (long long)d, (long long)r, (long long)c.n_states,
                   c.min_bases < 0 ? Cell(">" + std::to_string(spec.max_bases)) : Cell((long long)c.min_bases),
                   c.median_infidelity, c.max_infidelity, (long long)c.failed_state_below});
        }
    return t;
}

// ---------------------------------------------------------------------------
// Robustness ratio ||rho_r - sigma|| / ||M[rho_r - sigma]|| with per-block probabilities (each basis sums to 1)

struct RatioHistogram {
    std::string label;
    int dim = 0, rank = 0;
    std::vector<double> ratios;  // in sampling order
    Summary summary;
    std::vector<double> edges;
    std::vector<long long> counts;
};

inline RMat unweighted_rows(const Povm& p) {
    RMat r = p.R;
    for (int mu = 0; mu < p.size(); ++mu) r.row(mu) /= p.block_weight[size_t(p.block[size_t(mu)])];
    return r;
}

inline RatioHistogram sweep_robustness_ratio(const Povm& povm, int r, int n_pairs, std::uint64_t seed, int bins = 50) {
    const int d = povm.dim;
    RatioHistogram h;
    h.label = povm.label;
    h.dim = d;
    h.rank = r;
    const RMat m = unweighted_rows(povm);
    h.ratios = parallel_map<double>(n_pairs, [&](int k) {
        std::uint64_t s = child_seed(seed, std::uint64_t(k));
        for (std::uint64_t attempt = 0;; ++attempt) {
            CMat a = random_mixed_rank(d, r, child_seed(s, 2 * attempt)).matrix;
            CMat b = random_mixed_rank(d, d, child_seed(s, 2 * attempt + 1)).matrix;
            CMat diff = a - b;
            double num = diff.norm();
            if (num < 1e-12) continue;  // identical pair: resample
            double den = (m * herm_to_real(diff)).norm();
            return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
        }
    });
    h.summary = summarize(h.ratios);
    double top = std::isfinite(h.summary.max) ? h.summary.max : 0.0;
    h.edges.resize(size_t(bins) + 1);
    for (int i = 0; i <= bins; ++i) h.edges[size_t(i)] = top * double(i) / double(bins);
    h.counts.assign(size_t(bins), 0);
    for (double x : h.ratios) {
        if (!std::isfinite(x) || top <= 0.0) continue;
        int i = std::min(bins - 1, static_cast<int>(x / top * bins));
        ++h.counts[size_t(i)];
    }
    return h;
}

inline Table histogram_table(const std::vector<RatioHistogram>& hs) {
    Table t{"robustness", {"label", "dim", "rank", "bin_lo", "bin_hi", "count"}, {}};
    for (const auto& h : hs)
        for (size_t i = 0; i < h.counts.size(); ++i)
            t.add({h.label, (long long)h.dim, (long long)h.rank, h.edges[i], h.edges[i + 1], h.counts[i]});
    return t;
}

inline Table ratio_summary_table(const std::vector<RatioHistogram>& hs) {
    Table t{"robustness_summary", {"label", "dim", "rank", "n", "median", "q1", "q3", "max"}, {}};
    for (const auto& h : hs)
        t.add({h.label, (long long)h.dim, (long long)h.rank, h.summary.n, h.summary.median, h.summary.q1, h.summary.q3,
               h.summary.max});
    return t;
}

// Shipped strictly-complete constructions by name at (d, r).
inline Povm strict_construction(const std::string& name, int d, int r, std::uint64_t seed) {
    if (name == "gmb5") return as_povm(gmb_5(d));
    if (name == "gmb") return as_povm(gmb(d, r));
    if (name == "poly5") return as_povm(poly_bases(d, 5));
    if (name == "psi3d") return psi_3d(d);
    if (name == "flammia") return flammia_rank_r(d, r);
    if (name == "random") {
        // basis counts that reconstruct every sampled state in the unary strict-completeness sweep
        static const int counts[] = {6, 8, 11};
        return as_povm(random_bases(d, counts[std::clamp(r, 1, 3) - 1], seed));
    }
    if (name == "local-random") {
        static const int counts[] = {6, 9, 15};
        int nq = detail::log2_exact(d);
        if (nq < 1) throw InvalidArgument("local-random needs d a power of 2");
        return as_povm(local_random_bases(nq, counts[std::clamp(r, 1, 3) - 1], seed));
    }
    throw InvalidArgument("unknown construction: " + name);
}

// ---------------------------------------------------------------------------
// Noisy estimation: q-mixed pure targets, multinomial sampling with m = m_per_dim * d per basis

struct NoisyTrial {
    std::vector<double> infidelity;  // per estimator
    std::vector<int> failed;         // NotConverged (best iterate used) or error
    std::vector<int> eps_fallback;   // Tr-min radius raised to the LS residual
};

inline NoisyTrial noisy_trial(const Povm& p, const CVec& psi, const SweepSpec& spec, int d, std::uint64_t seed) {
    NoisyTrial t;
    auto rho = prepare_with_error(psi, spec.q, child_seed(seed, 0));
    const long long m = std::llround(spec.m_per_dim * d);
    auto rec = sample_record(p, born_probabilities(p, rho), NoiseSpec::multinomial(m), child_seed(seed, 1));
    Estimate ls;
    bool have_ls = false;
    auto run_ls = [&] {
        if (!have_ls) {
            ls = estimate_or_best([&] { return ls_state(rec, p); });
            have_ls = true;
        }
        return ls;
    };
    for (const auto& est : spec.estimators) {
        double inf = std::numeric_limits<double>::quiet_NaN();
        int failed = 0, fallback = 0;
        try {
            Estimate e;
            if (est == "ls") {
                e = run_ls();
            } else if (est == "ml") {
                e = estimate_or_best([&] { return ml_state(rec, p); });
            } else if (est == "trmin") {
                SolverOptions o;
                o.epsilon = calibrated_epsilon(layout_of(p), NoiseSpec::multinomial(m));
                try {
                    e = estimate_or_best([&] { return trmin_state(rec, p, o); });
                } catch (const Infeasible&) {
                    o.epsilon = 1.01 * run_ls().residual;
                    fallback = 1;
                    e = estimate_or_best([&] { return trmin_state(rec, p, o); });
                }
            } else {
                throw InvalidArgument("unknown estimator: " + est);
            }
            failed = e.converged ? 0 : 1;
            inf = 1.0 - fidelity_pure(psi, e.matrix);
        } catch (const InvalidArgument&) {
            throw;
        } catch (const Error&) {
            failed = 1;
        }
        t.infidelity.push_back(inf);
        t.failed.push_back(failed);
        t.eps_fallback.push_back(fallback);
    }
    return t;
}

inline Table sweep_noisy_estimation(const SweepSpec& spec) {
    Table t{"noisy", {"basis_kind", "dim", "bases", "estimator", "n", "median", "q1", "q3", "failed", "eps_fallback"}, {}};
    for (int d : spec.dims) {
        const std::uint64_t cs = child_seed(spec.seed, std::uint64_t(d));
        const int kmax = detail::max_bases_of_kind(spec.basis_kind, d, spec.max_bases);
        BasisSet all = detail::bases_of_kind(spec.basis_kind, d, kmax, child_seed(cs, 0));
        for (int k = spec.min_bases; k <= kmax; ++k) {
            BasisSet pre = all;
            pre.bases.resize(size_t(k));
            Povm p = as_povm(pre);
            auto trials = parallel_map<NoisyTrial>(spec.n_states, [&](int s) {
                std::uint64_t ts = child_seed(child_seed(cs, 1), std::uint64_t(s));
                CVec psi = random_pure_vector(d, child_seed(ts, 0));
                // the same target and noise seeds for every basis count
                return noisy_trial(p, psi, spec, d, child_seed(ts, 1));
            });
            for (size_t e = 0; e < spec.estimators.size(); ++e) {
                std::vector<double> v;
                long long failed = 0, fb = 0;
                for (const auto& tr : trials) {
                    if (std::isfinite(tr.infidelity[e])) v.push_back(tr.infidelity[e]);
                    failed += tr.failed[e];
                    fb += tr.eps_fallback[e];
                }
                Summary s = summarize(v);
                t.add({spec.basis_kind, (long long)d, (long long)k, spec.estimators[e], s.n, s.median, s.q1, s.q3, failed,
                       fb});
            }
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Process tomography sweeps

inline StateSet states_of_kind(const std::string& kind, int d) {
    if (kind == "standard") return standard_states(d);
    if (kind == "uic-0plus") return supplement_to_full(uic_pure_0plus(d), d);
    if (kind == "uic-nplus") return supplement_to_full(uic_pure_nplus(d), d);
    if (kind == "uic-mixed") return supplement_to_full(uic_minimal_mixed(d), d);
    throw InvalidArgument("unknown state kind: " + kind);
}

inline Povm povm_of_kind(const std::string& kind, int d) {
    if (kind == "mub") return as_povm(mub(d));
    if (kind == "flammia2d") return flammia_2d(d);
    if (kind == "psi3d") return psi_3d(d);
    if (kind == "gmb5") return as_povm(gmb_5(d));
    if (kind == "poly5") return as_povm(poly_bases(d, 5));
    if (kind == "sic") return sic(d);
    throw InvalidArgument("unknown povm kind: " + kind);
}

inline ProcessMatrix applied_process(const SweepSpec& spec, const CMat& ut, std::uint64_t seed) {
    if (spec.error_kind == "ideal") return kraus_to_chi({ut});
    if (spec.error_kind == "coherent") return coherent_error(ut, spec.error_strength, seed);
    if (spec.error_kind == "incoherent") return incoherent_error(ut, spec.error_strength, seed);
    throw InvalidArgument("unknown error kind: " + spec.error_kind);
}

struct QptPoint {
    std::vector<double> f_applied, f_target;  // per state count
    std::vector<int> failed;
};

inline Table sweep_qpt(const SweepSpec& spec) {
    Table t{"qpt", {"dim", "error_kind", "error_strength", "estimator", "states", "n", "median_f_applied", "q1_f_applied",
                    "q3_f_applied", "median_f_target", "failed"}, {}};
    const NoiseSpec noise = parse_noise(spec.noise);
    for (int d : spec.dims) {
        StateSet ss = states_of_kind(spec.state_kind, d);
        Povm pov = povm_of_kind(spec.povm_kind, d);
        SensingMatrix sm = qpt_sensing(ss, pov);
        const int kmax = spec.max_states > 0 ? std::min(spec.max_states, ss.size()) : ss.size();
        const std::uint64_t cs = child_seed(spec.seed, std::uint64_t(d));
        for (const auto& est : spec.estimators) {
            auto pts = parallel_map<QptPoint>(spec.n_seeds, [&](int s) {
                std::uint64_t ts = child_seed(cs, std::uint64_t(s));
                CMat ut = haar_unitary(d, child_seed(ts, 0));
                ProcessMatrix pa = applied_process(spec, ut, child_seed(ts, 1));
                RVec f = sample_record(qpt_probabilities(pa, sm), sm.layout, noise, child_seed(ts, 2)).f;
                QptPoint pt;
                for (int k = 1; k <= kmax; ++k) {
                    SensingSlice sl = first_states(sm, f, k);
                    SolverOptions o;
                    o.admm_eps = spec.admm_eps;
                    o.epsilon = std::max(spec.eps_floor, calibrated_epsilon(sl.layout, noise));
                    auto eps_of = [&](const SensingSlice& x) {
                        return std::max(spec.eps_floor, calibrated_epsilon(x.layout, noise));
                    };
                    double fa = std::numeric_limits<double>::quiet_NaN(), ft = fa;
                    int failed = 0;
                    try {
                        Estimate e;
                        if (est == "ls") e = estimate_or_best([&] { return ls_process(sl, d, o); });
                        else if (est == "trmin") e = estimate_or_best([&] { return trmin_process(sl, d, o); });
                        else if (est == "l1") e = estimate_or_best([&] { return l1_process(sl, d, ut, o); });
                        else if (est == "l1-cyclic") e = l1_cyclic_average(sm, f, k, ut, o, eps_of);
                        else throw InvalidArgument("unknown process estimator: " + est);
                        failed = e.converged ? 0 : 1;
                        ProcessMatrix pe = to_process(e);
                        fa = process_fidelity(pe, pa);
                        ft = process_fidelity_unitary(pe, ut);
                    } catch (const InvalidArgument&) {
                        throw;
                    } catch (const Error&) {
                        failed = 1;
                    }
                    pt.f_applied.push_back(fa);
                    pt.f_target.push_back(ft);
                    pt.failed.push_back(failed);
                }
                return pt;
            });
            for (int k = 1; k <= kmax; ++k) {
                std::vector<double> fa, ft;
                long long failed = 0;
                for (const auto& p : pts) {
                    if (std::isfinite(p.f_applied[size_t(k - 1)])) fa.push_back(p.f_applied[size_t(k - 1)]);
                    if (std::isfinite(p.f_target[size_t(k - 1)])) ft.push_back(p.f_target[size_t(k - 1)]);
                    failed += p.failed[size_t(k - 1)];
                }
                Summary sa = summarize(fa), st = summarize(ft);
                t.add({(long long)d, spec.error_kind, spec.error_strength, est, (long long)k, sa.n, sa.median, sa.q1, sa.q3,
                       st.median, failed});
            }
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Gramian analysis: Delta^2 = Tr[Y G] for linear-inversion errors, G_{mu nu} = <Q_mu, Q_nu>

struct GramianReport {
    RMat G;
    double lambda_min = 0.0, lambda_max = 0.0;
    std::vector<int> n;          // repetition counts
    std::vector<double> delta2;  // mean squared HS error of the n-repetition average
    double x_rand = 0.0, x_sys = 0.0;
    double x_rand_se = 0.0, x_sys_se = 0.0;  // standard errors of the fit
    double loglog_slope = 0.0;
};

struct GramianModel {
    double x_rand = 0.03;  // target E||Q e_rand||^2 for a single repetition
    double x_sys = 0.01;   // target E||Q e_sys||^2
    int n_reps = 10;
    int n_states = 10;
    std::uint64_t seed = 1;
};

// Q_mu are the columns of R^+ in real coordinates, so G = (R^+)^T R^+.
inline RMat gramian(const Povm& povm) {
    Eigen::CompleteOrthogonalDecomposition<RMat> cod(povm.R);
    cod.setThreshold(1e-10);
    if (cod.rank() < povm.R.cols()) throw RankDeficient("gramian: POVM is not fully informationally complete");
    RMat pinv = cod.pseudoInverse();
    return pinv.transpose() * pinv;
}

inline GramianReport gramian_analysis(const Povm& povm, const GramianModel& model) {
    GramianReport rep;
    rep.G = gramian(povm);
    Eigen::SelfAdjointEigenSolver<RMat> es(rep.G, Eigen::EigenvaluesOnly);
    double tol = 1e-12 * es.eigenvalues().maxCoeff();
    rep.lambda_max = es.eigenvalues().maxCoeff();
    rep.lambda_min = rep.lambda_max;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > tol) rep.lambda_min = std::min(rep.lambda_min, es.eigenvalues()(i));
    Eigen::CompleteOrthogonalDecomposition<RMat> cod(povm.R);
    cod.setThreshold(1e-10);
    const RMat Q = cod.pseudoInverse();  // d^2 x N
    const double trg = rep.G.trace();
    // iid Gaussian errors with variance s^2 give E||Q e||^2 = s^2 Tr G
    const double sr = std::sqrt(model.x_rand / trg), ss = std::sqrt(model.x_sys / trg);
    const Eigen::Index N = povm.R.rows();
    auto gauss = [&](Rng& rng, double s) {
        RVec v(N);
        for (Eigen::Index i = 0; i < N; ++i) v(i) = s * rng.normal();
        return v;
    };
    std::vector<RVec> sys;
    for (int st = 0; st < model.n_states; ++st) {
        Rng rng(child_seed(child_seed(model.seed, 0), std::uint64_t(st)));
        sys.push_back(gauss(rng, ss));
    }
    for (int n = 1; n <= model.n_reps; ++n) {
        double acc = 0.0;
        for (int st = 0; st < model.n_states; ++st) {
            Rng rng(child_seed(child_seed(model.seed, std::uint64_t(n)), std::uint64_t(st)));
            RVec e = RVec::Zero(N);
            for (int k = 0; k < n; ++k) e += gauss(rng, sr);
            e = sys[size_t(st)] + e / double(n);
            acc += (Q * e).squaredNorm();
        }
        rep.n.push_back(n);
        rep.delta2.push_back(acc / model.n_states);
    }
    // least squares delta2(n) = x_rand / n + x_sys
    const int m = static_cast<int>(rep.n.size());
    RMat A(m, 2);
    RVec y(m);
    for (int i = 0; i < m; ++i) {
        A(i, 0) = 1.0 / rep.n[size_t(i)];
        A(i, 1) = 1.0;
        y(i) = rep.delta2[size_t(i)];
    }
    if (m >= 2) {
        RVec c = A.colPivHouseholderQr().solve(y);
        rep.x_rand = c(0);
        rep.x_sys = c(1);
        if (m > 2) {
            double s2 = (A * c - y).squaredNorm() / double(m - 2);
            RMat cov = s2 * (A.transpose() * A).inverse();
            rep.x_rand_se = std::sqrt(cov(0, 0));
            rep.x_sys_se = std::sqrt(cov(1, 1));
        }
        // slope of log delta2 against log n
        double mx = 0, my = 0;
        for (int i = 0; i < m; ++i) {
            mx += std::log(double(rep.n[size_t(i)]));
            my += std::log(rep.delta2[size_t(i)]);
        }
        mx /= m;
        my /= m;
        double sxy = 0, sxx = 0;
        for (int i = 0; i < m; ++i) {
            double dx = std::log(double(rep.n[size_t(i)])) - mx;
            sxy += dx * (std::log(rep.delta2[size_t(i)]) - my);
            sxx += dx * dx;
        }
        rep.loglog_slope = sxy / sxx;
    }
    return rep;
}

inline Table gramian_table(const GramianReport& r) {
    Table t{"gramian", {"n", "delta2", "fit"}, {}};
    for (size_t i = 0; i < r.n.size(); ++i)
        t.add({(long long)r.n[i], r.delta2[i], r.x_rand / r.n[i] + r.x_sys});
    return t;
}

// ---------------------------------------------------------------------------
// Element counts, optionally with a noisy-LS median per construction

inline Povm construction_of(const std::string& name, int d, std::uint64_t seed) {
    if (name == "mub") return as_povm(mub(d));
    if (name == "gmb") return as_povm(gmb(d, d / 2));
    if (name == "gmb4") return as_povm(gmb_4(d));
    if (name == "gmb5") return as_povm(gmb_5(d));
    if (name == "sic") return sic(d);
    if (name == "flammia2d") return flammia_2d(d);
    if (name == "psi3d") return psi_3d(d);
    if (name == "poly4") return as_povm(poly_bases(d, 4));
    if (name == "poly5") return as_povm(poly_bases(d, 5));
    if (name == "random") return as_povm(random_bases(d, 6, seed));
    throw InvalidArgument("unknown construction: " + name);
}

inline Table element_count_report(const std::vector<std::string>& constructions, const std::vector<int>& dims,
                                  int n_states = 0, std::uint64_t seed = 1) {
    Table t{"counts", {"construction", "dim", "elements", "blocks", "n", "median_ls_infidelity", "q1", "q3"}, {}};
    for (const auto& c : constructions)
        for (int d : dims) {
            Povm p;
            try {
                p = construction_of(c, d, child_seed(seed, std::uint64_t(d)));
            } catch (const InvalidArgument&) {
                continue;  // construction not defined at this dimension
            }
            Summary s;
            if (n_states > 0) {
                SweepSpec sp;
                sp.estimators = {"ls"};
                auto v = parallel_map<double>(n_states, [&](int k) {
                    std::uint64_t ts = child_seed(child_seed(seed, 7), std::uint64_t(k));
                    CVec psi = random_pure_vector(d, child_seed(ts, 0));
                    return noisy_trial(p, psi, sp, d, child_seed(ts, 1)).infidelity[0];
                });
                s = summarize(v);
            }
            t.add({c, (long long)d, (long long)p.size(), (long long)p.n_blocks(), s.n, s.median, s.q1, s.q3});
        }
    return t;
}

}  // namespace tomokit
