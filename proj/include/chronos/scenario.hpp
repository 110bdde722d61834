#pragma once

#include "chronos/equivalence.hpp"
#include "chronos/twoclock.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

namespace chronos {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_path, const std::string& what)
        : std::runtime_error(what + " (field: " + field_path + ")"), field(std::move(field_path)) {}
};

struct Tolerances {
    Real kernel_eps = 1e-9;
    Real rank_tol = 1e-9;
    Real condition_tol = 1e-6;
};

struct ClockConfig {
    Index d = 16;
    Real dt = 1.0;
};

struct RestConfig {
    Index dim = 4;
    bool snap_to_lattice = true;     // generate eigenvalues on the clock frequency lattice
    std::vector<Real> spectrum;      // explicit eigenvalues when not snapping
};

struct CouplingConfig {
    std::string type = "none";
    // time_dependent: named profile or one value per reading
    std::string profile = "cosine";
    std::vector<Real> profile_values;
    // dilation: strength as a multiple of the clock base frequency inverse,
    // so snapped spectra stay commensurate at every d
    Real g = 1.0 / 6.0;
    // product
    std::string factor_spec = "shifted_quadratic";
    Real delta = 1.0;
    // mass_energy
    Index cm_dim = 4;
    Real m = 1.0;
    std::vector<Real> lambda_profile;
    // custom
    std::string matrix_file;
};

struct SeedConfig {
    bool random = true;
    std::uint64_t rng_seed = 1;
    Index time_index = 0;
    std::vector<Complex> rest_vector;
};

struct ScenarioConfig {
    std::string name = "scenario";
    ClockConfig clock;
    RestConfig rest;
    CouplingConfig coupling;
    SeedConfig seed_state;
    std::vector<Index> grid;         // reading indices to report; empty means all
    Tolerances tolerances;
};

namespace detail {

inline const std::vector<std::string>& known_couplings() {
    static const std::vector<std::string> tags = {
        "none", "time_dependent", "dilation", "product",
        "klein_gordon", "mass_energy", "pathological_product", "custom"};
    return tags;
}

// Frequency-lattice multiplier tables used when the rest spectrum snaps.
inline std::vector<Real> snapped_multipliers(const std::string& coupling_type, Index dim) {
    static const std::vector<Real> generic = {-3, -2, 3, 6, -6, -1, 1, 2};
    static const std::vector<Real> paired = {-2, -1, 1, 2, -3, 3, -4, 4};
    static const std::vector<Real> with_zero = {0, 1, 2, 3, -1, -2, 4, -4};
    const std::vector<Real>* table = &generic;
    if (coupling_type == "klein_gordon") table = &paired;
    if (coupling_type == "pathological_product") table = &with_zero;
    if (dim > static_cast<Index>(table->size()))
        throw ConfigError("rest.dim", "snapped spectrum supports at most 8 levels");
    return {table->begin(), table->begin() + dim};
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ScenarioConfig& cfg) {
    nlohmann::ordered_json j;
    j["name"] = cfg.name;
    j["clock"] = {{"d", cfg.clock.d}, {"dt", cfg.clock.dt}};
    j["rest"]["dim"] = cfg.rest.dim;
    if (cfg.rest.snap_to_lattice) j["rest"]["spectrum"] = "snap_to_lattice";
    else j["rest"]["spectrum"] = cfg.rest.spectrum;
    nlohmann::ordered_json c;
    c["type"] = cfg.coupling.type;
    if (cfg.coupling.type == "time_dependent") {
        if (cfg.coupling.profile_values.empty()) c["profile"] = cfg.coupling.profile;
        else c["profile"] = cfg.coupling.profile_values;
    } else if (cfg.coupling.type == "dilation") {
        c["g"] = cfg.coupling.g;
    } else if (cfg.coupling.type == "product") {
        c["factor_spec"] = cfg.coupling.factor_spec;
        c["delta"] = cfg.coupling.delta;
    } else if (cfg.coupling.type == "mass_energy") {
        c["cm_dim"] = cfg.coupling.cm_dim;
        c["m"] = cfg.coupling.m;
        c["lambda_profile"] = cfg.coupling.lambda_profile;
    } else if (cfg.coupling.type == "custom") {
        c["matrix_file"] = cfg.coupling.matrix_file;
    }
    j["coupling"] = c;
    if (cfg.seed_state.random) {
        j["seed_state"] = {{"random", {{"rng_seed", cfg.seed_state.rng_seed}}}};
    } else {
        nlohmann::ordered_json rv = nlohmann::ordered_json::array();
        for (const Complex& z : cfg.seed_state.rest_vector)
            rv.push_back({z.real(), z.imag()});
        j["seed_state"] = {{"time_index", cfg.seed_state.time_index}, {"rest_vector", rv}};
    }
    if (!cfg.grid.empty()) j["grid"] = cfg.grid;
    j["tolerances"] = {{"kernel_eps", cfg.tolerances.kernel_eps},
                       {"rank_tol", cfg.tolerances.rank_tol},
                       {"condition_tol", cfg.tolerances.condition_tol}};
    return j;
}

inline ScenarioConfig parse_scenario(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError("<document>", std::string("not a well-formed config document: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("<document>", "config root must be an object");

    ScenarioConfig cfg;
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ConfigError("name", "must be a string");
        cfg.name = j["name"].get<std::string>();
    }

    if (!j.contains("clock") || !j["clock"].is_object())
        throw ConfigError("clock", "required object missing");
    const auto& jc = j["clock"];
    if (!jc.contains("d") || !jc["d"].is_number_integer() || jc["d"].get<Index>() < 2)
        throw ConfigError("clock.d", "must be an integer >= 2");
    cfg.clock.d = jc["d"].get<Index>();
    if (!jc.contains("dt") || !jc["dt"].is_number() || !(jc["dt"].get<Real>() > 0.0))
        throw ConfigError("clock.dt", "must be a positive number");
    cfg.clock.dt = jc["dt"].get<Real>();

    if (!j.contains("rest") || !j["rest"].is_object())
        throw ConfigError("rest", "required object missing");
    const auto& jr = j["rest"];
    if (!jr.contains("dim") || !jr["dim"].is_number_integer() || jr["dim"].get<Index>() < 1)
        throw ConfigError("rest.dim", "must be an integer >= 1");
    cfg.rest.dim = jr["dim"].get<Index>();
    if (jr.contains("spectrum")) {
        if (jr["spectrum"].is_string()) {
            if (jr["spectrum"].get<std::string>() != "snap_to_lattice")
                throw ConfigError("rest.spectrum", "string form must be \"snap_to_lattice\"");
            cfg.rest.snap_to_lattice = true;
        } else if (jr["spectrum"].is_array()) {
            cfg.rest.snap_to_lattice = false;
            for (const auto& v : jr["spectrum"]) {
                if (!v.is_number()) throw ConfigError("rest.spectrum", "entries must be numbers");
                cfg.rest.spectrum.push_back(v.get<Real>());
            }
            if (static_cast<Index>(cfg.rest.spectrum.size()) != cfg.rest.dim)
                throw ConfigError("rest.spectrum", "length must equal rest.dim");
        } else {
            throw ConfigError("rest.spectrum", "must be a list of numbers or \"snap_to_lattice\"");
        }
    }

    if (!j.contains("coupling") || !j["coupling"].is_object() || !j["coupling"].contains("type"))
        throw ConfigError("coupling.type", "required field missing");
    const auto& jk = j["coupling"];
    cfg.coupling.type = jk["type"].get<std::string>();
    const auto& tags = detail::known_couplings();
    if (std::find(tags.begin(), tags.end(), cfg.coupling.type) == tags.end())
        throw ConfigError("coupling.type", "unknown coupling tag \"" + cfg.coupling.type + "\"");
    if (cfg.coupling.type == "time_dependent") {
        if (jk.contains("profile")) {
            if (jk["profile"].is_string()) {
                cfg.coupling.profile = jk["profile"].get<std::string>();
                if (cfg.coupling.profile != "cosine")
                    throw ConfigError("coupling.profile", "unknown named profile");
            } else if (jk["profile"].is_array()) {
                for (const auto& v : jk["profile"]) cfg.coupling.profile_values.push_back(v.get<Real>());
                if (static_cast<Index>(cfg.coupling.profile_values.size()) != cfg.clock.d)
                    throw ConfigError("coupling.profile", "explicit profile needs one value per reading");
            } else {
                throw ConfigError("coupling.profile", "must be a name or a list of numbers");
            }
        }
    } else if (cfg.coupling.type == "dilation") {
        if (!jk.contains("g") || !jk["g"].is_number())
            throw ConfigError("coupling.g", "dilation coupling requires a numeric strength");
        cfg.coupling.g = jk["g"].get<Real>();
    } else if (cfg.coupling.type == "product") {
        if (jk.contains("factor_spec")) cfg.coupling.factor_spec = jk["factor_spec"].get<std::string>();
        if (cfg.coupling.factor_spec != "shifted_quadratic")
            throw ConfigError("coupling.factor_spec", "unknown factor specification");
        if (jk.contains("delta")) {
            if (!jk["delta"].is_number() || !(jk["delta"].get<Real>() > 0.0))
                throw ConfigError("coupling.delta", "must be a positive number");
            cfg.coupling.delta = jk["delta"].get<Real>();
        }
    } else if (cfg.coupling.type == "mass_energy") {
        if (!jk.contains("cm_dim") || !jk["cm_dim"].is_number_integer() || jk["cm_dim"].get<Index>() < 2)
            throw ConfigError("coupling.cm_dim", "must be an integer >= 2");
        cfg.coupling.cm_dim = jk["cm_dim"].get<Index>();
        if (jk.contains("m")) {
            if (!jk["m"].is_number() || !(jk["m"].get<Real>() > 0.0))
                throw ConfigError("coupling.m", "must be a positive number");
            cfg.coupling.m = jk["m"].get<Real>();
        }
        if (!jk.contains("lambda_profile") || !jk["lambda_profile"].is_array())
            throw ConfigError("coupling.lambda_profile", "required list missing");
        for (const auto& v : jk["lambda_profile"]) cfg.coupling.lambda_profile.push_back(v.get<Real>());
        if (static_cast<Index>(cfg.coupling.lambda_profile.size()) != cfg.coupling.cm_dim)
            throw ConfigError("coupling.lambda_profile", "length must equal coupling.cm_dim");
    } else if (cfg.coupling.type == "custom") {
        if (!jk.contains("matrix_file") || !jk["matrix_file"].is_string())
            throw ConfigError("coupling.matrix_file", "custom coupling requires a file path");
        cfg.coupling.matrix_file = jk["matrix_file"].get<std::string>();
    }

    if (j.contains("seed_state")) {
        const auto& js = j["seed_state"];
        if (!js.is_object()) throw ConfigError("seed_state", "must be an object");
        if (js.contains("random")) {
            cfg.seed_state.random = true;
            if (!js["random"].is_object() || !js["random"].contains("rng_seed"))
                throw ConfigError("seed_state.random.rng_seed", "required seed missing");
            cfg.seed_state.rng_seed = js["random"]["rng_seed"].get<std::uint64_t>();
        } else {
            cfg.seed_state.random = false;
            if (!js.contains("time_index") || !js["time_index"].is_number_integer())
                throw ConfigError("seed_state.time_index", "required integer missing");
            cfg.seed_state.time_index = js["time_index"].get<Index>();
            if (cfg.seed_state.time_index < 0 || cfg.seed_state.time_index >= cfg.clock.d)
                throw ConfigError("seed_state.time_index", "reading index out of range");
            if (!js.contains("rest_vector") || !js["rest_vector"].is_array())
                throw ConfigError("seed_state.rest_vector", "required list of [re, im] pairs missing");
            for (const auto& p : js["rest_vector"]) {
                if (!p.is_array() || p.size() != 2)
                    throw ConfigError("seed_state.rest_vector", "entries must be [re, im] pairs");
                cfg.seed_state.rest_vector.emplace_back(p[0].get<Real>(), p[1].get<Real>());
            }
        }
    }

    if (j.contains("grid")) {
        if (!j["grid"].is_array()) throw ConfigError("grid", "must be a list of reading indices");
        for (const auto& v : j["grid"]) {
            if (!v.is_number_integer()) throw ConfigError("grid", "entries must be integers");
            const Index k = v.get<Index>();
            if (k < 0 || k >= cfg.clock.d) throw ConfigError("grid", "reading index out of range");
            cfg.grid.push_back(k);
        }
    }

    if (j.contains("tolerances")) {
        const auto& jt = j["tolerances"];
        auto read_tol = [&jt](const char* key, Real& out) {
            if (!jt.contains(key)) return;
            if (!jt[key].is_number() || !(jt[key].get<Real>() > 0.0))
                throw ConfigError(std::string("tolerances.") + key, "must be a positive number");
            out = jt[key].get<Real>();
        };
        read_tol("kernel_eps", cfg.tolerances.kernel_eps);
        read_tol("rank_tol", cfg.tolerances.rank_tol);
        read_tol("condition_tol", cfg.tolerances.condition_tol);
    }
    return cfg;
}

inline ScenarioConfig preset(const std::string& name) {
    ScenarioConfig cfg;
    cfg.name = name;
    if (name == "free") {
        cfg.clock = {64, 1.0};
        cfg.rest = {4, true, {}};
        cfg.coupling.type = "none";
        cfg.seed_state.rng_seed = 11;
    } else if (name == "time_dependent") {
        cfg.clock = {64, 1.0};
        cfg.rest = {4, true, {}};
        cfg.coupling.type = "time_dependent";
        cfg.coupling.profile = "cosine";
        cfg.seed_state.rng_seed = 12;
    } else if (name == "dilation") {
        cfg.clock = {64, 1.0};
        cfg.rest = {4, true, {}};
        cfg.coupling.type = "dilation";
        cfg.coupling.g = 1.0 / 6.0;
        cfg.seed_state.rng_seed = 13;
    } else if (name == "dilation_kernel_tuned") {
        cfg.clock = {64, 1.0};
        const Real base = 2.0 * M_PI / 64.0;
        cfg.rest = {4, false, {-6.0 * base, -2.0 * base, 3.0 * base, 6.0 * base}};
        cfg.coupling.type = "dilation";
        cfg.coupling.g = 1.0 / 6.0;
        cfg.seed_state.rng_seed = 14;
    } else if (name == "product_unitary") {
        cfg.clock = {32, 1.0};
        cfg.rest = {4, true, {}};
        cfg.coupling.type = "product";
        cfg.coupling.factor_spec = "shifted_quadratic";
        cfg.coupling.delta = 1.0;
        cfg.seed_state.rng_seed = 15;
    } else if (name == "klein_gordon") {
        cfg.clock = {32, 1.0};
        cfg.rest = {4, true, {}};
        cfg.coupling.type = "klein_gordon";
        cfg.seed_state.rng_seed = 16;
    } else if (name == "mass_energy") {
        cfg.clock = {16, 1.0};
        cfg.rest = {2, true, {}};
        cfg.coupling.type = "mass_energy";
        cfg.coupling.cm_dim = 4;
        cfg.coupling.m = 1.0;
        cfg.coupling.lambda_profile = {0.0, 0.3, 0.6, 0.9};
        cfg.seed_state.rng_seed = 17;
    } else if (name == "pathological") {
        cfg.clock = {16, 1.0};
        cfg.rest = {4, true, {}};
        cfg.coupling.type = "pathological_product";
        cfg.seed_state.rng_seed = 18;
    } else {
        throw ConfigError("preset", "unknown preset \"" + name + "\"");
    }
    return cfg;
}

inline std::vector<std::string> preset_names() {
    return {"free", "time_dependent", "dilation", "dilation_kernel_tuned",
            "product_unitary", "klein_gordon", "mass_energy", "pathological"};
}

namespace detail {

inline Matrix load_custom_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("coupling.matrix_file", "cannot open \"" + path + "\"");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("coupling.matrix_file", std::string("bad matrix document: ") + e.what());
    }
    if (!j.contains("dim") || !j.contains("real") || !j.contains("imag"))
        throw ConfigError("coupling.matrix_file", "matrix document needs dim, real, imag");
    const Index n = j["dim"].get<Index>();
    const auto& re = j["real"];
    const auto& im = j["imag"];
    if (static_cast<Index>(re.size()) != n * n || static_cast<Index>(im.size()) != n * n)
        throw ConfigError("coupling.matrix_file", "entry count must be dim squared");
    Matrix out(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k)
            out(i, k) = Complex(re[i * n + k].get<Real>(), im[i * n + k].get<Real>());
    return out;
}

}  // namespace detail

inline RealVector config_spectrum(const ScenarioConfig& cfg, const FiniteClock& clock) {
    std::vector<Real> values = cfg.rest.snap_to_lattice
        ? detail::snapped_multipliers(cfg.coupling.type, cfg.rest.dim)
        : cfg.rest.spectrum;
    RealVector spectrum(cfg.rest.dim);
    for (Index i = 0; i < cfg.rest.dim; ++i)
        spectrum(i) = cfg.rest.snap_to_lattice ? values[i] * clock.base_frequency() : values[i];
    return spectrum;
}

// Instantiate the model a config describes; the construction tag decides the
// exact rate attached for condition checks.
inline UniverseModel build_from_config(const ScenarioConfig& cfg) {
    const FiniteClock clock = make_clock(cfg.clock.d, cfg.clock.dt);
    const Index d = clock.d;
    const std::string& type = cfg.coupling.type;

    if (type == "custom") {
        const Matrix m = detail::load_custom_matrix(cfg.coupling.matrix_file);
        if (m.rows() % d != 0)
            throw ConfigError("coupling.matrix_file", "matrix dimension not divisible by clock.d");
        if (!is_hermitian(m, 1e-10))
            throw ConfigError("coupling.matrix_file", "matrix is not Hermitian");
        UniverseModel u;
        u.clock = clock;
        u.factor_dims = {d, m.rows() / d};
        u.H_U = hermitize(m);
        u.construction = "custom";
        return u;
    }

    const RealVector spectrum = config_spectrum(cfg, clock);
    Matrix H_R = Matrix::Zero(cfg.rest.dim, cfg.rest.dim);
    for (Index i = 0; i < cfg.rest.dim; ++i) H_R(i, i) = spectrum(i);
    const Matrix I_r = Matrix::Identity(cfg.rest.dim, cfg.rest.dim);
    const Matrix I_c = Matrix::Identity(d, d);

    if (type == "none") return build_additive(clock, H_R, Matrix());

    if (type == "time_dependent") {
        // Couples only the top two rest levels, so the lower sectors keep an
        // intact kernel while the profile drives the rest.
        if (cfg.rest.dim < 2)
            throw ConfigError("rest.dim", "time-dependent coupling needs at least two levels");
        Matrix O = Matrix::Zero(cfg.rest.dim, cfg.rest.dim);
        O(cfg.rest.dim - 1, cfg.rest.dim - 1) = 1.0;
        O(cfg.rest.dim - 2, cfg.rest.dim - 2) = 1.0;
        const Real base = clock.base_frequency();
        Matrix V = Matrix::Zero(d * cfg.rest.dim, d * cfg.rest.dim);
        for (Index k = 0; k < d; ++k) {
            const Real f = cfg.coupling.profile_values.empty()
                ? 0.3 * base * std::cos(base * clock.times(k))
                : cfg.coupling.profile_values[k];
            V.block(k * cfg.rest.dim, k * cfg.rest.dim, cfg.rest.dim, cfg.rest.dim) = f * O;
        }
        UniverseModel u = build_additive(clock, H_R, V, tensor(I_c, I_r));
        u.construction = "time_dependent";
        return u;
    }

    if (type == "dilation") {
        const Real g_abs = cfg.coupling.g / clock.base_frequency();
        const Matrix V = g_abs * tensor(clock.H_C, H_R);
        UniverseModel u = build_additive(clock, H_R, V, tensor(I_c, I_r + g_abs * H_R));
        u.construction = "dilation";
        return u;
    }

    const Matrix Hc_ext = tensor(clock.H_C, I_r);
    const Matrix Hr_ext = tensor(I_c, H_R);
    const Matrix I_full = Matrix::Identity(d * cfg.rest.dim, d * cfg.rest.dim);

    if (type == "product") {
        const Matrix first = Hc_ext * Hc_ext + Hr_ext * Hr_ext + cfg.coupling.delta * I_full;
        const Matrix second = Hc_ext + Hr_ext;
        UniverseModel u = build_product(clock, {first, second}, {2.0 * Hc_ext, I_full});
        u.construction = "product_shifted_quadratic";
        return u;
    }
    if (type == "klein_gordon") {
        UniverseModel u = build_product(clock, {Hc_ext + Hr_ext, Hc_ext - Hr_ext}, {I_full, I_full});
        u.construction = "klein_gordon";
        return u;
    }
    if (type == "pathological_product") {
        UniverseModel u = build_product(clock, {Hc_ext, Hr_ext},
                                        {I_full, Matrix::Zero(I_full.rows(), I_full.cols())});
        u.construction = "pathological_product";
        return u;
    }
    if (type == "mass_energy") {
        return build_mass_energy(clock, cfg.coupling.cm_dim, cfg.coupling.m,
                                 cfg.coupling.lambda_profile, H_R);
    }
    throw ConfigError("coupling.type", "unknown coupling tag \"" + type + "\"");
}

inline Vector seed_vector(const ScenarioConfig& cfg, const UniverseModel& u) {
    const Index total = u.total_dim();
    if (cfg.seed_state.random) return random_unit_vector(total, cfg.seed_state.rng_seed);
    const Index rest = u.rest_dim();
    if (static_cast<Index>(cfg.seed_state.rest_vector.size()) != rest)
        throw ConfigError("seed_state.rest_vector", "length must equal the rest dimension");
    Vector chi(rest);
    for (Index i = 0; i < rest; ++i) chi(i) = cfg.seed_state.rest_vector[i];
    if (chi.norm() == 0.0) throw ConfigError("seed_state.rest_vector", "must be nonzero");
    Vector out = Vector::Zero(total);
    out.segment(cfg.seed_state.time_index * rest, rest) = chi / chi.norm();
    return out;
}

struct StageStatus {
    bool ran = false;
    std::string skip_reason;
};

struct TrajectorySummary {
    Real norm_drift = 0.0;
    Real gram_drift = 0.0;
    Real max_residual = 0.0;
};

struct ObservablesSummary {
    Real rate_drift = 0.0;
    Real variance_law_error = 0.0;
};

struct EquivalenceSummary {
    bool aborted = false;
    Real witness_deviation = 0.0;
    Real containment_residual = 0.0;
    Real equality_angle = 0.0;
    std::string prime_verdict;
    Real fit_residual = 0.0;
    Real hermitization_defect = 0.0;
};

struct Provenance {
    std::string config_hash;
    std::string library_version = kLibraryVersion;
    std::uint64_t rng_seed = 0;
};

struct CsvRow {
    Real t = 0.0;
    std::optional<Real> norm, norm_drift, gram_drift, schrodinger_residual;
    std::optional<Real> rate, rate_drift, variance, variance_law_error;
};

struct RunReport {
    ScenarioConfig config;
    IdealnessReport idealness;
    ConditionReport conditions;
    StageStatus dynamics_status;
    TrajectorySummary trajectory_summary;
    StageStatus observables_status;
    ObservablesSummary observables_summary;
    StageStatus equivalence_status;
    EquivalenceSummary equivalence_summary;
    std::vector<CsvRow> rows;
    Provenance provenance;
};

namespace detail {

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[h & 0xF];
        h >>= 4;
    }
    buf[16] = '\0';
    return buf;
}

inline bool two_clock_applicable(const std::string& type) {
    return type == "none" || type == "time_dependent" || type == "dilation" || type == "mass_energy";
}

}  // namespace detail

inline RunReport run_scenario(const ScenarioConfig& cfg) {
    RunReport rep;
    rep.config = cfg;
    rep.provenance.config_hash = detail::fnv1a_hex(to_json(cfg).dump());
    rep.provenance.rng_seed = cfg.seed_state.random ? cfg.seed_state.rng_seed : 0;

    const UniverseModel u = build_from_config(cfg);
    const FiniteClock& clock = u.clock;
    rep.idealness = idealness_report(clock);
    rep.conditions = check_conditions(u, cfg.tolerances.condition_tol);

    std::vector<Index> grid = cfg.grid;
    if (grid.empty())
        for (Index k = 0; k < clock.d; ++k) grid.push_back(k);
    rep.rows.resize(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) rep.rows[i].t = clock.times(grid[i]);

    // Relational dynamics: undefined on a pathological constraint, otherwise
    // attempted and skipped with the module's reason when preparation fails.
    if (rep.conditions.verdict == Verdict::Pathological) {
        rep.dynamics_status.skip_reason =
            "pathological constraint: rate operator and Hamiltonian share a null vector, "
            "so no relational dynamics is defined";
    } else {
        try {
            const StationaryState st = prepare_stationary(u, seed_vector(cfg, u), cfg.tolerances.kernel_eps);
            const TrajectoryRecord rec = extract_trajectory(u, st);
            const UnitarityDiagnostics diag = unitarity_diagnostics(rec, rec);
            rep.dynamics_status.ran = true;
            rep.trajectory_summary.norm_drift = diag.norm_drift;
            rep.trajectory_summary.gram_drift = diag.gram_drift;
            rep.trajectory_summary.max_residual =
                *std::max_element(rec.residuals.begin(), rec.residuals.end());
            for (size_t i = 0; i < grid.size(); ++i) {
                const Index k = grid[i];
                rep.rows[i].norm = rec.norms[k];
                rep.rows[i].norm_drift = std::abs(rec.norms[k] - rec.norms[0]) / rec.norms[0];
                rep.rows[i].gram_drift = std::abs(rec.norms[k] * rec.norms[k] - rec.norms[0] * rec.norms[0])
                                         / (rec.norms[0] * rec.norms[0]);
                rep.rows[i].schrodinger_residual = rec.residuals[k];
            }
        } catch (const EmptyKernel& e) {
            rep.dynamics_status.skip_reason = e.what();
        } catch (const SeedAnnihilated& e) {
            rep.dynamics_status.skip_reason = e.what();
        }
    }

    // External-time observables: meaningful for additive-style couplings
    // where T_C (x) I is still the clock reading of the composite.
    if (!detail::two_clock_applicable(cfg.coupling.type)) {
        rep.observables_status.skip_reason = "no external-time run requested for this coupling";
    } else {
        const Real sigma = interior_width(clock);
        const Real center = std::min(6.5 * sigma, clock.period() / 2.0);
        const Vector packet = gaussian_wavepacket(clock, center, sigma);
        const Index rest = u.rest_dim();
        Vector chi;
        if (cfg.seed_state.random) {
            chi = random_unit_vector(rest, cfg.seed_state.rng_seed);
        } else {
            chi = Vector(rest);
            for (Index i = 0; i < rest; ++i) chi(i) = cfg.seed_state.rest_vector[i];
            chi /= chi.norm();
        }
        const TwoClockRun run = make_two_clock_run(clock, u.H_U, tensor(packet, chi), clock.times);
        const RateSeries rates = rate_series(run);
        const VarianceSeries vars = variance_series(run);
        const Real a0 = rates.expectation[0];
        rep.observables_status.ran = true;
        for (size_t i = 0; i < grid.size(); ++i) {
            const Index k = grid[i];
            const Real t = clock.times(k);
            rep.rows[i].rate = rates.expectation[k];
            rep.rows[i].rate_drift = std::abs(rates.expectation[k] - a0);
            rep.rows[i].variance = vars.sigma2[k];
            rep.rows[i].variance_law_error =
                std::abs((vars.sigma2[k] - vars.sigma2[0]) - t * t * vars.sigma2_alpha) / (1.0 + t * t);
        }
        // Law checks stay on a pre-wraparound window. The margin is taken in
        // measured widths around the measured mean, so a packet whose energy
        // components travel at different speeds still stays clear of the
        // seam; the multiplier is as many initial widths as half the grid
        // holds, capped once the tail is negligible at double precision.
        const Real margin = std::min(6.5, (clock.period() / 2.0 - sigma) / sigma);
        for (Index k = 0; k < clock.d; ++k) {
            const Real mean_k = mean_reading(run, k);
            const Real width_k = std::sqrt(std::max(vars.sigma2[k], 0.0));
            if (k > 0 && (mean_k - margin * width_k < 0.0 || mean_k + margin * width_k > clock.period()))
                break;
            rep.observables_summary.rate_drift =
                std::max(rep.observables_summary.rate_drift, std::abs(rates.expectation[k] - a0));
            const Real t = clock.times(k);
            rep.observables_summary.variance_law_error =
                std::max(rep.observables_summary.variance_law_error,
                         std::abs((vars.sigma2[k] - vars.sigma2[0]) - t * t * vars.sigma2_alpha)
                             / (1.0 + t * t));
        }
    }

    // First-order equivalence: attempted whenever a kernel exists; a
    // non-unitary family is recorded, not propagated as a failure.
    if (rep.conditions.verdict == Verdict::Pathological) {
        rep.equivalence_status.skip_reason = "pathological constraint";
    } else {
        try {
            const RoundtripResult rt = run_equivalence_roundtrip(u, cfg.tolerances.kernel_eps);
            rep.equivalence_status.ran = true;
            rep.equivalence_summary.containment_residual = rt.report.containment_residual;
            rep.equivalence_summary.equality_angle = rt.report.equality_angle;
            rep.equivalence_summary.prime_verdict = to_string(rt.report.prime_conditions.verdict);
            rep.equivalence_summary.fit_residual = rt.family.fit_residual;
            rep.equivalence_summary.hermitization_defect = rt.generators.hermitization_defect;
        } catch (const EmptyKernel& e) {
            rep.equivalence_status.skip_reason = e.what();
        } catch (const NonUnitaryWitness& w) {
            rep.equivalence_status.ran = true;
            rep.equivalence_summary.aborted = true;
            rep.equivalence_summary.witness_deviation = w.deviation;
        }
    }
    return rep;
}

inline ConditionReport classify(const ScenarioConfig& cfg) {
    return check_conditions(build_from_config(cfg), cfg.tolerances.condition_tol);
}

struct SweepRow {
    Index d = 0;
    Real interior_residual = 0.0;
    std::optional<Real> norm_drift;
    std::optional<Real> rate_drift;
    std::string verdict;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<RunReport> reports;
};

inline SweepTable sweep_dimension(const ScenarioConfig& cfg, const std::vector<Index>& d_list) {
    for (size_t i = 1; i < d_list.size(); ++i)
        if (!(d_list[i] > d_list[i - 1]))
            throw std::invalid_argument("sweep_dimension: dimension list must be ascending");
    SweepTable table;
    for (Index d : d_list) {
        ScenarioConfig item = cfg;
        item.clock.d = d;
        item.grid.clear();
        const RunReport rep = run_scenario(item);
        SweepRow row;
        row.d = d;
        row.interior_residual = rep.idealness.interior_residual;
        if (rep.dynamics_status.ran) row.norm_drift = rep.trajectory_summary.norm_drift;
        if (rep.observables_status.ran) row.rate_drift = rep.observables_summary.rate_drift;
        row.verdict = to_string(rep.conditions.verdict);
        table.rows.push_back(row);
        table.reports.push_back(rep);
    }
    return table;
}

namespace detail {

inline std::string format_number(Real v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

inline void append_cell(std::string& line, const std::optional<Real>& v) {
    line.push_back(',');
    if (v) line += format_number(*v);
}

}  // namespace detail

inline void emit_csv(const RunReport& report, std::ostream& out) {
    out << "t,norm,norm_drift,gram_drift,schrodinger_residual,rate,rate_drift,variance,variance_law_error\n";
    for (const CsvRow& row : report.rows) {
        std::string line = detail::format_number(row.t);
        detail::append_cell(line, row.norm);
        detail::append_cell(line, row.norm_drift);
        detail::append_cell(line, row.gram_drift);
        detail::append_cell(line, row.schrodinger_residual);
        detail::append_cell(line, row.rate);
        detail::append_cell(line, row.rate_drift);
        detail::append_cell(line, row.variance);
        detail::append_cell(line, row.variance_law_error);
        out << line << '\n';
        if (!out) throw std::runtime_error("emit_csv: write failure");
    }
}

inline nlohmann::ordered_json report_to_json(const RunReport& rep) {
    nlohmann::ordered_json j;
    j["name"] = rep.config.name;
    j["conditions"] = {
        {"c1_residual", rep.conditions.c1_residual},
        {"c2_residual", rep.conditions.c2_residual},
        {"pathology_dim", rep.conditions.pathology_dim},
        {"effective_tol", rep.conditions.effective_tol},
        {"verdict", to_string(rep.conditions.verdict)},
    };
    j["clock"] = {{"d", rep.idealness.d},
                  {"commutator_residual", rep.idealness.commutator_residual},
                  {"interior_residual", rep.idealness.interior_residual}};
    auto stage = [](const StageStatus& s) {
        nlohmann::ordered_json o;
        o["ran"] = s.ran;
        if (!s.ran) o["skip_reason"] = s.skip_reason;
        return o;
    };
    j["dynamics"] = stage(rep.dynamics_status);
    if (rep.dynamics_status.ran) {
        j["dynamics"]["norm_drift"] = rep.trajectory_summary.norm_drift;
        j["dynamics"]["gram_drift"] = rep.trajectory_summary.gram_drift;
        j["dynamics"]["max_residual"] = rep.trajectory_summary.max_residual;
    }
    j["observables"] = stage(rep.observables_status);
    if (rep.observables_status.ran) {
        j["observables"]["rate_drift"] = rep.observables_summary.rate_drift;
        j["observables"]["variance_law_error"] = rep.observables_summary.variance_law_error;
    }
    j["equivalence"] = stage(rep.equivalence_status);
    if (rep.equivalence_status.ran) {
        if (rep.equivalence_summary.aborted) {
            j["equivalence"]["aborted"] = true;
            j["equivalence"]["witness_deviation"] = rep.equivalence_summary.witness_deviation;
        } else {
            j["equivalence"]["containment_residual"] = rep.equivalence_summary.containment_residual;
            j["equivalence"]["equality_angle"] = rep.equivalence_summary.equality_angle;
            j["equivalence"]["prime_verdict"] = rep.equivalence_summary.prime_verdict;
            j["equivalence"]["fit_residual"] = rep.equivalence_summary.fit_residual;
            j["equivalence"]["hermitization_defect"] = rep.equivalence_summary.hermitization_defect;
        }
    }
    j["provenance"] = {{"config_hash", rep.provenance.config_hash},
                       {"library_version", rep.provenance.library_version},
                       {"rng_seed", rep.provenance.rng_seed}};
    return j;
}

}  // namespace chronos
