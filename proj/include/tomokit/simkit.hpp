#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "povmlib.hpp"
#include "qobjects.hpp"
#include "rng.hpp"

namespace tomokit {

struct NoiseSpec {
    enum class Kind { ideal, multinomial, gaussian, compound };
    Kind kind = Kind::ideal;
    long long m = 0;     // copies per block (multinomial)
    double sigma = 0.0;  // per-outcome std (gaussian)
    std::vector<NoiseSpec> parts;

    static NoiseSpec ideal() { return {}; }
    static NoiseSpec multinomial(long long copies) {
        if (copies < 1) throw InvalidArgument("multinomial: m must be at least 1");
        NoiseSpec n;
        n.kind = Kind::multinomial;
        n.m = copies;
        return n;
    }
    static NoiseSpec gaussian(double s) {
        if (!(s >= 0.0)) throw InvalidArgument("gaussian: sigma must be nonnegative");
        NoiseSpec n;
        n.kind = Kind::gaussian;
        n.sigma = s;
        return n;
    }
    static NoiseSpec compound(std::vector<NoiseSpec> ps) {
        NoiseSpec n;
        n.kind = Kind::compound;
        n.parts = std::move(ps);
        return n;
    }

    // text accepted back by parse_noise
    std::string tag() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind) {
            case Kind::ideal: os << "ideal"; break;
            case Kind::multinomial: os << "multinomial:m=" << m; break;
            case Kind::gaussian: os << "gaussian:sigma=" << sigma; break;
            case Kind::compound:
                for (size_t i = 0; i < parts.size(); ++i) os << (i ? "+" : "") << parts[i].tag();
                break;
        }
        return os.str();
    }
};

// Parses "ideal", "multinomial:m=4800", "gaussian:sigma=0.01", and '+'-joined compounds.
inline NoiseSpec parse_noise(const std::string& text) {
    if (text.find('+') != std::string::npos) {
        std::vector<NoiseSpec> parts;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, '+')) parts.push_back(parse_noise(item));
        return NoiseSpec::compound(std::move(parts));
    }
    if (text == "ideal") return NoiseSpec::ideal();
    auto value_of = [&](const std::string& key) {
        auto pos = text.find(key + "=");
        if (pos == std::string::npos) throw InvalidArgument("noise spec '" + text + "' lacks " + key);
        return text.substr(pos + key.size() + 1);
    };
    if (text.rfind("multinomial", 0) == 0) return NoiseSpec::multinomial(std::stoll(value_of("m")));
    if (text.rfind("gaussian", 0) == 0) return NoiseSpec::gaussian(std::stod(value_of("sigma")));
    throw InvalidArgument("unknown noise spec '" + text + "'");
}

struct ErrorSpec {
    enum class Kind { povm_perturb, prep_mix, coherent, incoherent };
    Kind kind = Kind::povm_perturb;
    double value = 0.0;
    std::uint64_t seed = 0;
};

// Block layout used for sampling: block index and weight per outcome.
struct BlockLayout {
    std::vector<int> block;
    std::vector<double> weight;
};

inline BlockLayout layout_of(const Povm& p) { return {p.block, p.block_weight}; }

inline BlockLayout single_block(Eigen::Index n) { return {std::vector<int>(size_t(n), 0), {1.0}}; }

namespace detail {
inline RVec sample_multinomial(const RVec& p, const BlockLayout& lay, long long m, Rng& rng) {
    RVec f = RVec::Zero(p.size());
    const int nb = static_cast<int>(lay.weight.size());
    for (int b = 0; b < nb; ++b) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < p.size(); ++i)
            if (lay.block[size_t(i)] == b) idx.push_back(i);
        const double w = lay.weight[size_t(b)];
        long long left = m;
        double mass = 1.0;
        for (size_t k = 0; k < idx.size(); ++k) {
            double q = std::max(p(idx[k]) / w, 0.0);
            long long c;
            if (k + 1 == idx.size()) {
                c = left;
            } else {
                double prob = mass > 0 ? std::clamp(q / mass, 0.0, 1.0) : 0.0;
                std::binomial_distribution<long long> bd(left, prob);
                c = left > 0 ? bd(rng.engine()) : 0;
            }
            f(idx[k]) = w * double(c) / double(m);
            left -= c;
            mass -= q;
        }
    }
    return f;
}
}  // namespace detail

inline MeasurementRecord sample_record(const RVec& p, const BlockLayout& lay, const NoiseSpec& noise, std::uint64_t seed) {
    MeasurementRecord rec;
    rec.seed = seed;
    rec.noise_tag = noise.tag();
    Rng rng(seed);
    switch (noise.kind) {
        case NoiseSpec::Kind::ideal: rec.f = p; break;
        case NoiseSpec::Kind::multinomial: rec.f = detail::sample_multinomial(p, lay, noise.m, rng); break;
        case NoiseSpec::Kind::gaussian: {
            rec.f = p;
            for (Eigen::Index i = 0; i < p.size(); ++i) rec.f(i) += noise.sigma * rng.normal();
            break;
        }
        case NoiseSpec::Kind::compound: {
            rec.f = p;
            for (size_t k = 0; k < noise.parts.size(); ++k) {
                MeasurementRecord part = sample_record(p, lay, noise.parts[k], child_seed(seed, k));
                RVec e = part.f - p;
                rec.components.push_back(e);
                rec.f += e;
            }
            break;
        }
    }
    return rec;
}

inline MeasurementRecord sample_record(const Povm& povm, const RVec& p, const NoiseSpec& noise, std::uint64_t seed) {
    auto rec = sample_record(p, layout_of(povm), noise, seed);
    rec.povm_label = povm.label;
    return rec;
}

inline MeasurementRecord sample_record(const RVec& p, const NoiseSpec& noise, std::uint64_t seed) {
    return sample_record(p, single_block(p.size()), noise, seed);
}

// Conjugates each block of the POVM by exp(i eta H_b), H_b a random unit-norm Hermitian matrix.
inline Povm perturb_povm(const Povm& povm, double eta, std::uint64_t seed) {
    if (!(eta >= 0.0) || eta > 0.5) throw InvalidArgument("perturb_povm: eta must lie in [0, 0.5]");
    if (eta == 0.0) return povm;
    Rng rng(seed);
    std::vector<CMat> us;
    for (int b = 0; b < povm.n_blocks(); ++b) us.push_back(expi_hermitian(random_hermitian_unit(povm.dim, rng), eta));
    std::vector<CMat> el;
    for (int mu = 0; mu < povm.size(); ++mu) {
        const CMat& u = us[size_t(povm.block[size_t(mu)])];
        el.push_back(hermitize(u * povm.elements[size_t(mu)] * u.adjoint()));
    }
    Povm out = make_povm(std::move(el), povm.label, povm.block, povm.block_weight);
    return out;
}

inline DensityMatrix prepare_with_error(const CVec& psi, double q, std::uint64_t seed) {
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("prepare_with_error: q must lie in [0,1]");
    CVec v = psi / psi.norm();
    const int d = static_cast<int>(v.size());
    if (q == 0.0) return {d, outer(v)};
    auto tau = random_mixed_rank(d, d, seed);
    return {d, hermitize((1.0 - q) * outer(v) + q * tau.matrix)};
}

// ---------------------------------------------------------------------------
// Process tomography

struct StateSet {
    int dim = 0;
    std::vector<DensityMatrix> states;
    std::string label;
    int size() const { return static_cast<int>(states.size()); }
};

// Rows indexed nu * N + mu, each herm_to_real(rho_nu^T (x) E_mu), so p = D x(chi) for chi in the elementary basis.
struct SensingMatrix {
    int dim = 0;
    int n_states = 0;
    int n_outcomes = 0;
    RMat D;
    BlockLayout layout;
    std::string basis_label = kElementaryBasis;

    Eigen::Index rows_for(int k_states) const { return Eigen::Index(k_states) * n_outcomes; }
};

inline SensingMatrix qpt_sensing(const StateSet& states, const Povm& povm, const std::string& basis = kElementaryBasis) {
    if (basis != kElementaryBasis) throw InvalidArgument("qpt_sensing: only the elementary basis is supported");
    if (states.dim != povm.dim) throw DimensionMismatch("qpt_sensing: state and POVM dimensions differ");
    const int d = povm.dim, n = povm.size(), m = states.size();
    SensingMatrix s;
    s.dim = d;
    s.n_states = m;
    s.n_outcomes = n;
    s.D.resize(Eigen::Index(m) * n, Eigen::Index(d) * d * d * d);
    const int nb = povm.n_blocks();
    for (int v = 0; v < m; ++v) {
        CMat rt = states.states[size_t(v)].matrix.transpose();
        for (int mu = 0; mu < n; ++mu) {
            CMat k = kron(rt, povm.elements[size_t(mu)]);
            s.D.row(Eigen::Index(v) * n + mu) = herm_to_real(k).transpose();
            s.layout.block.push_back(v * nb + povm.block[size_t(mu)]);
        }
        for (int b = 0; b < nb; ++b) s.layout.weight.push_back(povm.block_weight[size_t(b)]);
    }
    return s;
}

inline RVec qpt_probabilities(const ProcessMatrix& pm, const SensingMatrix& s) {
    if (pm.basis_label != s.basis_label) throw InvalidArgument("qpt_probabilities: basis mismatch");
    if (pm.dim != s.dim) throw DimensionMismatch("qpt_probabilities: dimension mismatch");
    return s.D * herm_to_real(pm.chi);
}

inline ProcessMatrix coherent_error(const CMat& ut, double eta_c, std::uint64_t seed) {
    if (!(eta_c >= 0.0)) throw InvalidArgument("coherent_error: eta must be nonnegative");
    const int d = static_cast<int>(ut.rows());
    auto h = random_mixed_rank(d, d, seed);
    CMat u_err = expi_hermitian(h.matrix, eta_c);
    return kraus_to_chi({CMat(u_err * ut)});
}

// Kraus operators A_n = (<n|_env) U (|nu>_env) of a Haar unitary on system (x) environment, env dim d^2.
inline std::vector<CMat> environment_kraus(int d, std::uint64_t seed) {
    const int e = d * d;
    CMat u = haar_unitary(Eigen::Index(d) * e, child_seed(seed, 0));
    CVec nu = random_pure_vector(e, child_seed(seed, 1));
    std::vector<CMat> ks;
    for (int n = 0; n < e; ++n) {
        CMat a = CMat::Zero(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                cplx s(0.0);
                for (int m = 0; m < e; ++m) s += u(i * e + n, j * e + m) * nu(m);
                a(i, j) = s;
            }
        ks.push_back(a);
    }
    return ks;
}

inline ProcessMatrix incoherent_error(const CMat& ut, double xi, std::uint64_t seed) {
    if (!(xi >= 0.0 && xi <= 1.0)) throw InvalidArgument("incoherent_error: xi must lie in [0,1]");
    const int d = static_cast<int>(ut.rows());
    std::vector<CMat> ks{CMat(std::sqrt(1.0 - xi) * ut)};
    if (xi > 0.0)
        for (const auto& a : environment_kraus(d, seed)) ks.push_back(std::sqrt(xi) * a * ut);
    return kraus_to_chi(ks);
}

// ---------------------------------------------------------------------------
// Detector tomography

struct ProbingMatrix {
    int dim = 0;
    CMat theta;  // d^2 x M, columns vectorize(rho_nu)
    RMat R;      // M x d^2, rows herm_to_real(rho_nu): f_nu = R x(E)
};

inline ProbingMatrix qdt_probing_matrix(const StateSet& states) {
    ProbingMatrix pm;
    pm.dim = states.dim;
    const Eigen::Index d2 = Eigen::Index(states.dim) * states.dim;
    pm.theta.resize(d2, states.size());
    pm.R.resize(states.size(), d2);
    for (int v = 0; v < states.size(); ++v) {
        pm.theta.col(v) = vectorize(states.states[size_t(v)].matrix);
        pm.R.row(v) = herm_to_real(states.states[size_t(v)].matrix).transpose();
    }
    return pm;
}

// Translated flammia_2d probing states plus the populations |k><k| that fix the trace.
inline StateSet qdt_probing_set(int d) {
    StateSet s{d, {}, "qdt-flammia2d"};
    CMat id = CMat::Identity(d, d);
    CMat p0 = CMat::Zero(d, d);
    p0(0, 0) = 1.0;
    s.states.push_back({d, p0});
    for (int k = 1; k < d; ++k) {
        CMat e = id;
        e(0, k) += 1.0;
        e(k, 0) += 1.0;
        s.states.push_back({d, e / double(d)});
    }
    for (int k = 1; k < d; ++k) {
        CMat e = id;
        e(0, k) += -I_unit;
        e(k, 0) += I_unit;
        s.states.push_back({d, e / double(d)});
    }
    for (int k = 1; k < d; ++k) {
        CMat e = CMat::Zero(d, d);
        e(k, k) = 1.0;
        s.states.push_back({d, e});
    }
    return s;
}

inline MeasurementRecord qdt_probe_element(const CMat& e_unknown, const ProbingMatrix& theta, const NoiseSpec& noise,
                                           std::uint64_t seed) {
    RVec p = theta.R * herm_to_real(hermitize(e_unknown));
    // each probe is an independent two-outcome experiment; only the element's outcome is kept
    auto rec = noise.kind == NoiseSpec::Kind::multinomial
                   ? MeasurementRecord{}
                   : sample_record(p, single_block(p.size()), noise, seed);
    if (noise.kind == NoiseSpec::Kind::multinomial) {
        Rng rng(seed);
        rec.f.resize(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            std::binomial_distribution<long long> bd(noise.m, std::clamp(p(i), 0.0, 1.0));
            rec.f(i) = double(bd(rng.engine())) / double(noise.m);
        }
        rec.noise_tag = noise.tag();
        rec.seed = seed;
    }
    rec.povm_label = "qdt-probe";
    return rec;
}

}  // namespace tomokit
