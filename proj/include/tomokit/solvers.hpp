#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "admm.hpp"
#include "qobjects.hpp"
#include "rng.hpp"
#include "simkit.hpp"

namespace tomokit {

struct SolverOptions {
    double epsilon = -1.0;      // noise-ball radius; negative means "not set"
    double tol_obj = 1e-8;      // relative objective stall over a window of iterations
    double tol_grad = 1e-5;     // gamma_2: relative residual stall per window, rank-r projection
    double target_obj = 1e-5;   // gamma_1: residual target for rank-r projection
    double tol_step = 1e-14;    // fixed-point tolerance ||x_{k+1} - y_k||
    int max_iter = 20000;
    int restarts = 20;
    int stall_window = 200;
    double bt_increase = 2.0;   // backtracking: L <- L * bt_increase on failure
    double bt_decrease = 0.9;   // L <- L * bt_decrease after an accepted step (ML only)
    double admm_eps = 1e-9;     // ADMM absolute/relative residual tolerance
    std::uint64_t seed = 0;
    bool record_history = false;
};

struct Estimate {
    CMat matrix;                  // state, detector element, or process matrix (elementary basis)
    CMat raw;                     // unnormalized optimizer output (trace-min)
    std::string method;
    double objective = 0.0;
    double residual = 0.0;        // ||M[X] - f||_2
    int iterations = 0;
    bool converged = false;
    int restarts_used = 0;
    bool degenerate = false;
    bool negative_eigenvalues = false;
    std::vector<double> history;
};

class NotConverged : public Error {
public:
    NotConverged(const std::string& m, Estimate e) : Error("NotConverged", m), est_(std::move(e)) {}
    const Estimate& estimate() const noexcept { return est_; }

private:
    Estimate est_;
};

class AllRestartsTrapped : public Error {
public:
    AllRestartsTrapped(const std::string& m, Estimate e) : Error("AllRestartsTrapped", m), est_(std::move(e)) {}
    const Estimate& estimate() const noexcept { return est_; }

private:
    Estimate est_;
};

// Returns the estimate of a solver run, also when it ended in NotConverged / AllRestartsTrapped.
template <class Fn>
Estimate estimate_or_best(Fn&& fn) {
    try {
        return fn();
    } catch (const NotConverged& e) {
        return e.estimate();
    } catch (const AllRestartsTrapped& e) {
        return e.estimate();
    }
}

// ---------------------------------------------------------------------------
// Projections in real Hermitian coordinates

inline RVec project_spectraplex_real(const RVec& x, int d, double t) {
    CMat h;
    real_to_herm(x.data(), d, h);
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    RVec v = project_simplex(es.eigenvalues(), t);
    return herm_to_real(CMat(reassemble(es.eigenvectors(), v)));
}

inline RVec project_psd_real(const RVec& x, int d) {
    CMat h;
    real_to_herm(x.data(), d, h);
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    RVec v = es.eigenvalues().cwiseMax(0.0);
    return herm_to_real(CMat(reassemble(es.eigenvectors(), v)));
}

inline RVec project_rank_r_real(const RVec& x, int d, int r) {
    CMat h;
    real_to_herm(x.data(), d, h);
    return herm_to_real(rank_r_psd_project(h, r));
}

inline double spectral_norm_sq(const RMat& a) {
    if (a.rows() == 0) return 0.0;
    if (a.rows() <= a.cols()) {
        Eigen::SelfAdjointEigenSolver<RMat> es(a * a.transpose(), Eigen::EigenvaluesOnly);
        return es.eigenvalues().maxCoeff();
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(a.transpose() * a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// ---------------------------------------------------------------------------
// Monotone accelerated projected gradient (MFISTA) with optional backtracking and restart

struct PgResult {
    RVec x;
    double obj = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

struct PgProblem {
    std::function<double(const RVec&)> obj;
    std::function<RVec(const RVec&)> grad;
    std::function<RVec(const RVec&)> proj;
    double lipschitz = 1.0;
    bool backtrack = false;
    double obj_floor = 0.0;  // stop once obj <= obj_floor
    // extrapolated points rejected here restart the momentum
    std::function<bool(const RVec& y, const RVec& x)> in_domain;
};

inline PgResult mfista(const PgProblem& pb, RVec x0, const SolverOptions& o) {
    PgResult res;
    RVec x = pb.proj(x0);
    double fx = pb.obj(x);
    RVec y = x, xprev = x, z;
    double t = 1.0, L = pb.lipschitz;
    std::vector<double> best_hist;
    best_hist.reserve(size_t(std::min(o.max_iter, 1 << 20)) + 1);
    best_hist.push_back(fx);
    if (o.record_history) res.history.push_back(fx);
    int k = 0;
    for (; k < o.max_iter; ++k) {
        if (fx <= pb.obj_floor) {
            res.converged = true;
            break;
        }
        if (pb.in_domain && !pb.in_domain(y, x)) {
            y = x;
            t = 1.0;
        }
        RVec g = pb.grad(y);
        double fz;
        if (pb.backtrack) {
            double fy = pb.obj(y);
            for (int bt = 0;; ++bt) {
                z = pb.proj(y - g / L);
                fz = pb.obj(z);
                RVec dz = z - y;
                if (fz <= fy + g.dot(dz) + 0.5 * L * dz.squaredNorm() + 1e-15 * std::abs(fy) || bt > 60) break;
                L *= o.bt_increase;
            }
        } else {
            z = pb.proj(y - g / L);
            fz = pb.obj(z);
        }
        double step = (z - y).norm();
        double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        xprev = x;
        bool accepted = fz <= fx;
        if (accepted) {
            x = z;
            fx = fz;
        }
        // gradient-based restart: momentum points uphill, or candidate rejected
        bool restart = !accepted || (y - z).dot(z - xprev) > 0.0;
        if (restart) {
            t = 1.0;
            y = x;
        } else {
            y = x + (t / tn) * (z - x) + ((t - 1.0) / tn) * (x - xprev);
            t = tn;
        }
        if (pb.backtrack) L *= o.bt_decrease;
        best_hist.push_back(fx);
        if (o.record_history) res.history.push_back(fx);
        if (step <= o.tol_step && accepted) {
            res.converged = true;
            ++k;
            break;
        }
        const size_t w = size_t(o.stall_window);
        if (best_hist.size() > w) {
            double old = best_hist[best_hist.size() - 1 - w];
            if (old - fx <= o.tol_obj * std::abs(fx)) {
                res.converged = true;
                ++k;
                break;
            }
        }
    }
    res.x = x;
    res.obj = fx;
    res.iterations = k;
    return res;
}

// ---------------------------------------------------------------------------
// States

namespace detail {
inline void check_record(const MeasurementRecord& rec, const Povm& povm) {
    if (rec.f.size() != povm.size())
        throw DimensionMismatch("record has " + std::to_string(rec.f.size()) + " entries, POVM has " +
                                std::to_string(povm.size()));
}

inline Estimate finish_state(const RVec& x, int d, const RMat& R, const RVec& f, const std::string& method,
                             const PgResult& pr) {
    Estimate e;
    e.method = method;
    CMat h;
    real_to_herm(x.data(), d, h);
    e.matrix = h;
    e.raw = h;
    e.objective = pr.obj;
    e.residual = (R * x - f).norm();
    e.iterations = pr.iterations;
    e.converged = pr.converged;
    e.history = pr.history;
    return e;
}
}  // namespace detail

inline Estimate linear_inversion(const MeasurementRecord& rec, const Povm& povm) {
    detail::check_record(rec, povm);
    const int d = povm.dim;
    Eigen::CompleteOrthogonalDecomposition<RMat> cod(povm.R);
    cod.setThreshold(1e-10);
    if (cod.rank() < d * d)
        throw RankDeficient("linear_inversion: measurement matrix has rank " + std::to_string(cod.rank()) + " < " +
                            std::to_string(d * d));
    RVec x = cod.solve(rec.f);
    Estimate e;
    e.method = "li";
    e.matrix = real_to_herm(x);
    e.raw = e.matrix;
    e.residual = (povm.R * x - rec.f).norm();
    e.objective = e.residual;
    e.converged = true;
    Eigen::SelfAdjointEigenSolver<CMat> es(e.matrix, Eigen::EigenvaluesOnly);
    e.negative_eigenvalues = es.eigenvalues()(0) < -1e-12;
    return e;
}

// min 1/2 ||R x - f||^2 over {X >= 0, Tr X = t}; trace < 0 drops the trace constraint.
inline Estimate ls_constrained(const RMat& R, const RVec& f, int d, double trace, const SolverOptions& o,
                               const RVec* warm = nullptr, const std::string& method = "ls") {
    PgProblem pb;
    pb.obj = [&](const RVec& x) { return 0.5 * (R * x - f).squaredNorm(); };
    pb.grad = [&](const RVec& x) { RVec r = R * x - f; return RVec(R.transpose() * r); };
    if (trace >= 0)
        pb.proj = [d, trace](const RVec& x) { return project_spectraplex_real(x, d, trace); };
    else
        pb.proj = [d](const RVec& x) { return project_psd_real(x, d); };
    pb.lipschitz = std::max(spectral_norm_sq(R), 1e-300);
    pb.obj_floor = 1e-32 * std::max(1.0, f.squaredNorm());
    RVec x0 = warm ? *warm : herm_to_real(CMat(CMat::Identity(d, d) * (trace >= 0 ? trace / d : 1.0 / d)));
    PgResult pr = mfista(pb, x0, o);
    return detail::finish_state(pr.x, d, R, f, method, pr);
}

inline Estimate ls_state(const MeasurementRecord& rec, const Povm& povm, const SolverOptions& o = {}) {
    detail::check_record(rec, povm);
    Estimate e = ls_constrained(povm.R, rec.f, povm.dim, 1.0, o);
    if (!e.converged) throw NotConverged("ls_state: iteration cap reached", e);
    return e;
}

inline Estimate ml_state(const MeasurementRecord& rec, const Povm& povm, const SolverOptions& o = {}) {
    detail::check_record(rec, povm);
    const int d = povm.dim;
    RVec f = rec.f.cwiseMax(0.0);
    if (f.sum() <= 0.0) throw DegenerateRecord("ml_state: all frequencies are zero");
    const RMat& R = povm.R;
    const double delta = 1e-12;
    // generalized KL, sum_mu f log(f/p) - f + p: equals -sum f log p plus a constant on the spectraplex
    // (the POVM sums to I). Each term is p h((f-p)/p) with h(u) = (1+u)log(1+u) - u, evaluated without
    // cancellation so tiny objective values stay resolvable. Below delta the term is continued quadratically.
    auto h = [](double u) {
        if (std::abs(u) < 1e-3) {
            double s = 0.0, pw = u;
            for (int k = 2; k <= 7; ++k) {
                pw *= u;
                s += ((k % 2) ? -1.0 : 1.0) * pw / double(k * (k - 1));
            }
            return s;
        }
        return (1.0 + u) * std::log1p(u) - u;
    };
    auto term = [&](double fi, double q) {
        if (fi == 0.0) return q;
        if (q >= delta) return q * h((fi - q) / q);
        double v0 = delta * h((fi - delta) / delta), g0 = 1.0 - fi / delta, c0 = fi / (delta * delta);
        double w = q - delta;
        return v0 + g0 * w + 0.5 * c0 * w * w;
    };
    auto dterm = [&](double fi, double q) {
        if (fi == 0.0) return 1.0;
        if (q >= delta) return 1.0 - fi / q;
        return 1.0 - fi / delta + fi / (delta * delta) * (q - delta);
    };
    PgProblem pb;
    pb.obj = [&](const RVec& x) {
        RVec p = R * x;
        double s = 0.0;
        for (Eigen::Index i = 0; i < p.size(); ++i) s += term(f(i), p(i));
        return s;
    };
    pb.grad = [&](const RVec& x) {
        RVec p = R * x;
        RVec w(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) w(i) = dterm(f(i), p(i));
        return RVec(R.transpose() * w);
    };
    pb.proj = [d](const RVec& x) { return project_spectraplex_real(x, d, 1.0); };
    pb.lipschitz = std::max(spectral_norm_sq(R), 1e-12);
    pb.backtrack = true;
    pb.obj_floor = -std::numeric_limits<double>::infinity();
    pb.in_domain = [&](const RVec& y, const RVec& x) {
        RVec py = R * y, px = R * x;
        for (Eigen::Index i = 0; i < py.size(); ++i)
            if (f(i) > 0.0 && py(i) < 0.5 * px(i)) return false;
        return true;
    };
    SolverOptions oo = o;
    RVec x0 = herm_to_real(CMat(CMat::Identity(d, d) / double(d)));
    PgResult pr = mfista(pb, x0, oo);
    Estimate e = detail::finish_state(pr.x, d, povm.R, rec.f, "ml", pr);
    if (!e.converged) throw NotConverged("ml_state: iteration cap reached", e);
    return e;
}

// Trace minimization over {X >= 0, ||R x - f|| <= eps}. The minimal trace t* solves phi(t) = eps, where
// phi(t) is the least residual over the scaled spectraplex of trace t; phi is convex and nonincreasing on [0, t0].
inline Estimate trmin_state(const MeasurementRecord& rec, const Povm& povm, const SolverOptions& o) {
    detail::check_record(rec, povm);
    if (!(o.epsilon >= 0.0)) throw InvalidArgument("trmin_state: epsilon must be set");
    const int d = povm.dim;
    const RMat& R = povm.R;
    const RVec& f = rec.f;
    const double eps = o.epsilon;
    const double fnorm = f.norm();
    if (eps >= fnorm) {
        Estimate e;
        e.method = "trmin";
        e.matrix = CMat::Identity(d, d) / double(d);
        e.raw = CMat::Zero(d, d);
        e.residual = fnorm;
        e.degenerate = true;
        e.converged = true;
        return e;
    }
    Estimate free = ls_constrained(R, f, d, -1.0, o, nullptr, "trmin");
    const double floor = free.residual;
    if (floor > eps * (1.0 + 1e-9)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "trmin_state: epsilon %.3e below the residual floor %.3e", eps, floor);
        throw Infeasible(buf);
    }
    double t0 = free.matrix.trace().real();
    int total_iter = free.iterations;
    RVec warm = herm_to_real(free.matrix);
    auto phi = [&](double t, Estimate& out) {
        RVec w = t0 > 0 ? RVec(warm * (t / std::max(t0, 1e-300))) : warm;
        out = ls_constrained(R, f, d, t, o, &w, "trmin");
        total_iter += out.iterations;
        return out.residual;
    };
    // Illinois false position on g(t) = phi(t) - eps between t_lo (infeasible) and t_hi (feasible)
    double lo = 0.0, glo = fnorm - eps;
    double hi = t0, ghi = floor - eps;
    Estimate best = free;
    Estimate cur;
    int side = 0;
    for (int it = 0; it < 80; ++it) {
        if (ghi > -1e-6 * eps && ghi <= 0.0) break;
        if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
        double t = (lo * ghi - hi * glo) / (ghi - glo);
        if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
        double g = phi(t, cur) - eps;
        if (g <= 0.0) {
            hi = t;
            ghi = g;
            best = cur;
            if (side == +1) glo *= 0.5;
            side = +1;
        } else {
            lo = t;
            glo = g;
            if (side == -1) ghi *= 0.5;
            side = -1;
        }
    }
    Estimate e = best;
    e.method = "trmin";
    e.raw = e.matrix;
    double tr = e.raw.trace().real();
    e.objective = tr;
    e.iterations = total_iter;
    e.residual = (R * herm_to_real(e.raw) - f).norm();
    if (tr <= 0.0) {
        e.degenerate = true;
        e.matrix = CMat::Identity(d, d) / double(d);
    } else {
        e.matrix = e.raw / tr;
    }
    e.converged = true;
    return e;
}

struct RankRRun {
    Estimate estimate;
    bool reached_target = false;
};

// Projected gradient on ||R x - f|| with projection onto PSD matrices of rank <= r, from Ginibre starts.
inline std::vector<RankRRun> rankr_projection_runs(const RMat& R, const RVec& f, int d, int r, const SolverOptions& o,
                                                   int n_runs, bool stop_on_success) {
    if (r < 1 || r > d) throw InvalidArgument("rankr_projection: r out of range");
    const double L = std::max(spectral_norm_sq(R), 1e-300);
    std::vector<RankRRun> runs;
    for (int k = 0; k < n_runs; ++k) {
        Rng rng(child_seed(o.seed, std::uint64_t(k)));
        CMat g = rng.ginibre(d, r);
        CMat x0 = g * g.adjoint();
        x0 /= x0.trace().real();
        RVec x = herm_to_real(x0);
        int it = 0;
        double res = (R * x - f).norm();
        bool hit = res <= o.target_obj;
        std::vector<double> hist;
        const int window = std::max(1, o.stall_window);
        double res_window = res;
        for (; it < o.max_iter && !hit; ++it) {
            RVec grad = R.transpose() * (R * x - f);
            RVec xn = project_rank_r_real(x - grad / L, d, r);
            double stepn = (xn - x).norm();
            x = xn;
            res = (R * x - f).norm();
            if (o.record_history) hist.push_back(res);
            if (res <= o.target_obj) hit = true;
            if (stepn <= o.tol_step) {
                ++it;
                break;
            }
            // gamma_2: relative progress over the window has stalled
            if ((it + 1) % window == 0) {
                if (res_window - res <= o.tol_grad * res_window) {
                    ++it;
                    break;
                }
                res_window = res;
            }
        }
        RankRRun run;
        CMat h = real_to_herm(x);
        run.estimate.method = "rankr";
        run.estimate.raw = h;
        double tr = h.trace().real();
        run.estimate.matrix = tr > 0 ? CMat(h / tr) : h;
        run.estimate.residual = res;
        run.estimate.objective = res;
        run.estimate.iterations = it;
        run.estimate.converged = hit;
        run.estimate.restarts_used = k;
        run.estimate.history = std::move(hist);
        run.reached_target = hit;
        runs.push_back(std::move(run));
        if (hit && stop_on_success) break;
    }
    return runs;
}

inline Estimate rankr_projection_state(const MeasurementRecord& rec, const Povm& povm, int r,
                                       const SolverOptions& o = {}) {
    detail::check_record(rec, povm);
    auto runs = rankr_projection_runs(povm.R, rec.f, povm.dim, r, o, std::max(1, o.restarts), true);
    const RankRRun* best = &runs.front();
    for (const auto& run : runs)
        if (run.estimate.residual < best->estimate.residual) best = &run;
    Estimate e = best->estimate;
    e.restarts_used = static_cast<int>(runs.size()) - 1;
    if (!best->reached_target)
        throw AllRestartsTrapped("rankr_projection: no restart reached the residual target", e);
    return e;
}

// Detector element: min ||R_theta x - f|| over x >= 0 (no trace constraint).
inline Estimate qdt_element_ls(const MeasurementRecord& rec, const ProbingMatrix& theta, const SolverOptions& o = {}) {
    if (rec.f.size() != theta.R.rows()) throw DimensionMismatch("qdt_element_ls: record length mismatch");
    const int d = theta.dim;
    Estimate e = ls_constrained(theta.R, rec.f, d, -1.0, o, nullptr, "qdt-ls");
    if (!e.converged) throw NotConverged("qdt_element_ls: iteration cap reached", e);
    return e;
}

// ---------------------------------------------------------------------------
// Noise-ball radius

// sqrt(sum_b w_b^2 (1 - 1/N_b) / m): the multinomial bound on E||e||^2 per block, summed.
inline double multinomial_epsilon(const BlockLayout& lay, long long m) {
    std::vector<int> counts(lay.weight.size(), 0);
    for (int b : lay.block) ++counts[size_t(b)];
    double s = 0.0;
    for (size_t b = 0; b < lay.weight.size(); ++b)
        if (counts[b] > 0) s += lay.weight[b] * lay.weight[b] * (1.0 - 1.0 / counts[b]) / double(m);
    return std::sqrt(s);
}

inline double calibrated_epsilon(const BlockLayout& lay, const NoiseSpec& noise, double eta_hat = 0.0) {
    double xi = 0.0;
    switch (noise.kind) {
        case NoiseSpec::Kind::ideal: break;
        case NoiseSpec::Kind::multinomial: xi = multinomial_epsilon(lay, noise.m); break;
        case NoiseSpec::Kind::gaussian: xi = noise.sigma * std::sqrt(double(lay.block.size())); break;
        case NoiseSpec::Kind::compound:
            for (const auto& p : noise.parts) xi += calibrated_epsilon(lay, p, 0.0);
            break;
    }
    return xi + eta_hat;
}

// ---------------------------------------------------------------------------
// Processes

inline ProcessMatrix to_process(const Estimate& e) {
    const int d = static_cast<int>(std::lround(std::sqrt(double(e.matrix.rows()))));
    ProcessMatrix pm;
    pm.dim = d;
    pm.basis_label = kElementaryBasis;
    pm.chi = e.matrix;
    pm.tp = tp_error(e.matrix, d) <= 1e-7;
    return pm;
}

// Sensing rows and record entries belonging to the first k states.
struct SensingSlice {
    RMat D;
    RVec f;
    BlockLayout layout;
};

inline SensingSlice slice_states(const SensingMatrix& s, const RVec& f, const std::vector<int>& states) {
    if (f.size() != s.D.rows()) throw DimensionMismatch("record length does not match the sensing matrix");
    SensingSlice out;
    const int n = s.n_outcomes;
    out.D.resize(Eigen::Index(states.size()) * n, s.D.cols());
    out.f.resize(out.D.rows());
    const int nb = static_cast<int>(s.layout.weight.size()) / std::max(1, s.n_states);
    for (size_t k = 0; k < states.size(); ++k) {
        int v = states[k];
        if (v < 0 || v >= s.n_states) throw InvalidArgument("state index out of range");
        for (int mu = 0; mu < n; ++mu) {
            Eigen::Index src = Eigen::Index(v) * n + mu, dst = Eigen::Index(k) * n + mu;
            out.D.row(dst) = s.D.row(src);
            out.f(dst) = f(src);
            int b = s.layout.block[size_t(src)] - v * nb;
            out.layout.block.push_back(int(k) * nb + b);
        }
        for (int b = 0; b < nb; ++b) out.layout.weight.push_back(s.layout.weight[size_t(v * nb + b)]);
    }
    return out;
}

inline SensingSlice first_states(const SensingMatrix& s, const RVec& f, int k) {
    std::vector<int> idx;
    for (int v = 0; v < k; ++v) idx.push_back(v);
    return slice_states(s, f, idx);
}

namespace detail {
inline Estimate finish_process(const admm::Result& r, int d, const RMat& D, const RVec& f, const std::string& method,
                               bool renormalize) {
    Estimate e;
    e.method = method;
    CMat chi;
    real_to_herm(r.x.data(), d * d, chi);
    e.raw = chi;
    double tr = chi.trace().real();
    if (renormalize) {
        if (tr <= 1e-14) {
            e.degenerate = true;
            chi = CMat::Identity(d * d, d * d) / double(d);
        } else {
            chi *= double(d) / tr;
        }
    }
    e.matrix = admm::enforce_tp(chi, d);
    e.objective = tr;
    e.residual = D.rows() ? (D * herm_to_real(e.matrix) - f).norm() : 0.0;
    e.iterations = r.iterations;
    e.converged = r.converged;
    return e;
}

inline RVec identity_channel_start(int d) {
    return herm_to_real(CMat(CMat::Identity(d * d, d * d) / double(d)));
}
}  // namespace detail

// min ||D x - f|| over CPTP process matrices.
inline Estimate ls_process(const SensingSlice& s, int d, const SolverOptions& o = {}) {
    admm::Problem pb;
    pb.d = d;
    const double sc = 1.0 / std::max(spectral_norm_sq(s.D), 1e-300);
    pb.pG = sc;
    pb.D = &s.D;
    pb.q = -sc * (s.D.transpose() * s.f);
    pb.psd = true;
    pb.tp = true;
    admm::Solver solver(pb);
    auto r = solver.run(detail::identity_channel_start(d), o.admm_eps, o.max_iter);
    Estimate e = detail::finish_process(r, d, s.D, s.f, "ls", false);
    e.objective = e.residual;
    if (!r.converged) throw NotConverged("ls_process: iteration cap reached", e);
    return e;
}

inline Estimate ls_process(const MeasurementRecord& rec, const SensingMatrix& s, const SolverOptions& o = {}) {
    return ls_process(first_states(s, rec.f, s.n_states), s.dim, o);
}

// min Tr chi over chi >= 0 with Tr_out chi proportional to I and ||D x - f|| <= eps; output rescaled to Tr = d.
inline Estimate trmin_process(const SensingSlice& s, int d, const SolverOptions& o) {
    if (!(o.epsilon >= 0.0)) throw InvalidArgument("trmin_process: epsilon must be set");
    if (o.epsilon >= s.f.norm()) {
        Estimate e;
        e.method = "trmin";
        e.raw = CMat::Zero(d * d, d * d);
        e.matrix = CMat::Identity(d * d, d * d) / double(d);
        e.degenerate = true;
        e.converged = true;
        e.residual = (s.D * herm_to_real(e.matrix) - s.f).norm();
        return e;
    }
    admm::Problem pb;
    pb.d = d;
    pb.D = &s.D;
    pb.q = herm_to_real(CMat(CMat::Identity(d * d, d * d)));
    pb.psd = true;
    pb.traceless_tp = true;
    pb.ball = true;
    pb.f = s.f;
    pb.eps = o.epsilon;
    admm::Solver solver(pb);
    auto r = solver.run(detail::identity_channel_start(d), o.admm_eps, o.max_iter);
    double viol = (s.D * r.x - s.f).norm() - o.epsilon;
    Estimate e = detail::finish_process(r, d, s.D, s.f, "trmin", true);
    if (!r.converged && viol > 0.1 * o.epsilon + 1e-6 * s.f.norm())
        throw Infeasible("trmin_process: no process matrix within the noise ball");
    if (!r.converged) throw NotConverged("trmin_process: iteration cap reached", e);
    return e;
}

// min sum |chi^V| over CPTP with ||D x - f|| <= eps, chi^V in the target-adapted basis.
inline Estimate l1_process(const SensingSlice& s, int d, const CMat& target_unitary, const SolverOptions& o) {
    if (!(o.epsilon >= 0.0)) throw InvalidArgument("l1_process: epsilon must be set");
    admm::Problem pb;
    pb.d = d;
    pb.D = &s.D;
    pb.q = RVec::Zero(Eigen::Index(d) * d * d * d);
    pb.psd = true;
    pb.tp = true;
    pb.l1 = true;
    pb.W = target_basis(target_unitary);
    pb.ball = true;
    pb.f = s.f;
    pb.eps = o.epsilon;
    admm::Solver solver(pb);
    auto r = solver.run(herm_to_real(unitary_chi(target_unitary)), o.admm_eps, o.max_iter);
    Estimate e = detail::finish_process(r, d, s.D, s.f, "l1", false);
    e.objective = (pb.W.adjoint() * e.matrix * pb.W).cwiseAbs().sum();
    if (!r.converged) throw NotConverged("l1_process: iteration cap reached", e);
    return e;
}

// Nearest CPTP process matrix in HS norm.
inline CMat cptp_project(const CMat& chi, int d, const SolverOptions& o = {}) {
    admm::Problem pb;
    pb.d = d;
    pb.pI = 1.0;
    pb.q = -herm_to_real(hermitize(chi));
    pb.psd = true;
    pb.tp = true;
    admm::Solver solver(pb);
    auto r = solver.run(herm_to_real(hermitize(chi)), o.admm_eps, o.max_iter);
    CMat out;
    real_to_herm(r.x.data(), d * d, out);
    return admm::enforce_tp(out, d);
}

// l1_process over the d cyclic rotations of the first d states, each truncated to k states; averaged and
// projected back onto CPTP. Epsilon per rotation comes from eps_of(slice).
template <class EpsFn>
Estimate l1_cyclic_average(const SensingMatrix& s, const RVec& f, int k, const CMat& target_unitary,
                           const SolverOptions& o, EpsFn&& eps_of) {
    const int d = s.dim;
    if (s.n_states < d) throw InvalidArgument("l1_cyclic_average: needs at least d states");
    if (k < 1 || k > d) throw InvalidArgument("l1_cyclic_average: k out of range");
    CMat acc = CMat::Zero(d * d, d * d);
    int iters = 0;
    bool conv = true;
    for (int c = 0; c < d; ++c) {
        std::vector<int> idx;
        for (int j = 0; j < k; ++j) idx.push_back((c + j) % d);
        SensingSlice sl = slice_states(s, f, idx);
        SolverOptions oc = o;
        oc.epsilon = eps_of(sl);
        Estimate e = estimate_or_best([&] { return l1_process(sl, d, target_unitary, oc); });
        conv = conv && e.converged;
        iters += e.iterations;
        acc += e.matrix;
    }
    acc /= double(d);
    Estimate out;
    out.method = "l1-cyclic";
    out.matrix = cptp_project(acc, d, o);
    out.raw = acc;
    out.iterations = iters;
    out.converged = conv;
    SensingSlice all = first_states(s, f, k);
    out.residual = (all.D * herm_to_real(out.matrix) - all.f).norm();
    return out;
}

}  // namespace tomokit
