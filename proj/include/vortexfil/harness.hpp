/**
 * @file harness.hpp
 *
 * @brief Batch driver for beta sweeps: run configuration, per-beta jobs,
 * CSV / JSONL / manifest output, snapshot export and resume.
 *
 * Output layout under the configured directory:
 *
 *   results.csv            one row per finished beta point, beta-index order
 *   manifest.json          config, config hash, code version, per-point status
 *   traces/beta_NNN.jsonl  per-sweep observables
 *   snapshots/beta_NNN.csv final state of each chain
 *
 * Per-beta seeds are derived from the master seed and the beta index, so
 * results do not depend on the number of workers or completion order.
 */

#pragma once

#include "core_model.hpp"
#include "meanfield.hpp"
#include "observables.hpp"
#include "sampler.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#ifndef VORTEXFIL_VERSION
#define VORTEXFIL_VERSION "0.1.0"
#endif

namespace vortexfil {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Malformed or invalid run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kOutputRootEnv = "VORTEXFIL_OUTPUT_ROOT";

struct PhysicsConfig {
    double alpha = 1e7;
    double mu = 2000.0;
    double big_l = 10.0;
    std::size_t n_filaments = 10;
    std::size_t n_segments = 64;

    [[nodiscard]] SystemParams at_beta(double beta) const
    {
        return {alpha, beta, mu, big_l, n_filaments, n_segments};
    }

    friend bool operator==(const PhysicsConfig&, const PhysicsConfig&) = default;
};

struct EquilibrationConfig {
    /// Trailing window as a fraction of sweeps_total.
    double window_fraction = 0.05;
    double rel_tol = 1e-3;

    friend bool operator==(const EquilibrationConfig&, const EquilibrationConfig&) = default;
};

struct OutputConfig {
    std::string directory = "vortexfil_out";
    bool traces = true;
    std::size_t trace_stride = 1;
    bool snapshots = true;

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct RunConfig {
    PhysicsConfig physics;
    std::vector<double> betas;
    SamplerConfig sampler;
    EquilibrationConfig equilibration;
    OutputConfig output;
    std::size_t workers = 1;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// n values geometrically spaced from lo to hi inclusive.
inline std::vector<double> log_spaced(std::size_t n, double lo, double hi)
{
    if (n == 0)
        return {};
    if (n == 1)
        return {lo};
    std::vector<double> v(n);
    const double step = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo * std::exp(step * static_cast<double>(i));
    v.back() = hi;
    return v;
}

/// Named presets. "paper-fig4" is the full-size beta sweep; "desk-fig4" is
/// the reduced system used for routine checks.
inline std::optional<RunConfig> preset(const std::string& name)
{
    RunConfig c;
    if (name == "paper-fig4") {
        c.physics = {1e7, 2000.0, 10.0, 20, 1024};
        c.betas = log_spaced(20, 1e-3, 1.0);
        c.betas.push_back(10.0);
        c.betas.push_back(100.0);
        c.sampler.sweeps_burnin = 50000;
        c.sampler.sweeps_total = 60000;
        c.sampler.max_bisection_level = 6;
        c.sampler.translate_radius = 0.01;
        c.output.directory = "out_paper_fig4";
        c.output.trace_stride = 10;
        c.workers = 4;
        return c;
    }
    if (name == "desk-fig4") {
        c.physics = {1e7, 2000.0, 10.0, 10, 64};
        c.betas = {10.0, 1.0, 0.1, 0.01, 0.001};
        c.sampler.sweeps_burnin = 20000;
        c.sampler.sweeps_total = 60000;
        c.sampler.max_bisection_level = 4;
        c.sampler.translate_radius = 0.01;
        c.output.directory = "out_desk_fig4";
        c.output.trace_stride = 10;
        c.workers = 4;
        return c;
    }
    return std::nullopt;
}

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::set<std::string> allowed)
{
    if (!obj.is_object())
        throw ConfigError("config field '" + where + "' must be an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key '" + key + "' in '" + where + "'");
}

inline double get_real(const json& obj, const std::string& key, const std::string& where)
{
    const auto& v = obj.at(key);
    if (!v.is_number())
        throw ConfigError("field '" + where + "." + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw ConfigError("field '" + where + "." + key + "' must be finite");
    return x;
}

inline double get_positive(const json& obj, const std::string& key, const std::string& where)
{
    const double x = get_real(obj, key, where);
    if (!(x > 0.0))
        throw ConfigError("field '" + where + "." + key + "' must be > 0");
    return x;
}

inline std::uint64_t get_count(const json& obj, const std::string& key, const std::string& where)
{
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned())
        throw ConfigError("field '" + where + "." + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

inline bool get_bool(const json& obj, const std::string& key, const std::string& where)
{
    const auto& v = obj.at(key);
    if (!v.is_boolean())
        throw ConfigError("field '" + where + "." + key + "' must be true or false");
    return v.get<bool>();
}

inline std::vector<double> get_real_list(const json& obj, const std::string& key,
                                         const std::string& where)
{
    const auto& v = obj.at(key);
    if (!v.is_array())
        throw ConfigError("field '" + where + "." + key + "' must be a list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number())
            throw ConfigError("field '" + where + "." + key + "[" + std::to_string(i)
                              + "]' must be a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

inline std::vector<double> dedupe(const std::vector<double>& in)
{
    std::vector<double> out;
    for (double b : in) {
        const bool seen = std::any_of(out.begin(), out.end(), [&](double o) {
            return std::abs(o - b) <= 1e-12 * std::max(std::abs(o), std::abs(b));
        });
        if (!seen)
            out.push_back(b);
    }
    return out;
}

} // namespace detail

inline void validate(const RunConfig& c)
{
    if (c.betas.empty())
        throw ConfigError("sweep: beta list is empty");
    for (double b : c.betas)
        if (!(b > 0.0) || !std::isfinite(b))
            throw ConfigError("sweep: beta values must be finite and > 0");
    if (detail::dedupe(c.betas).size() != c.betas.size())
        throw ConfigError("sweep: duplicate beta values");
    const auto& p = c.physics;
    if (!(p.alpha > 0.0) || !(p.mu > 0.0) || !(p.big_l > 0.0))
        throw ConfigError("physics: alpha, mu and L must be > 0");
    if (p.n_filaments < 1)
        throw ConfigError("physics: N must be >= 1");
    if (p.n_segments < 2)
        throw ConfigError("physics: M must be >= 2");
    try {
        c.sampler.validate(p.n_segments);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(c.equilibration.window_fraction > 0.0) || c.equilibration.window_fraction > 1.0)
        throw ConfigError("equilibration: window_fraction must be in (0, 1]");
    if (!(c.equilibration.rel_tol >= 0.0))
        throw ConfigError("equilibration: rel_tol must be >= 0");
    if (c.output.directory.empty())
        throw ConfigError("output: directory must not be empty");
    if (c.output.trace_stride < 1)
        throw ConfigError("output: trace_stride must be >= 1");
    if (c.workers < 1)
        throw ConfigError("workers must be >= 1");
}

/// Parses a JSON run configuration. A "preset" key seeds every field; any
/// other section given overrides the preset field by field (a "sweep"
/// section replaces the preset's beta list).
inline RunConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }
    detail::check_keys(doc, "<root>",
                       {"preset", "physics", "sweep", "sampler", "equilibration", "output",
                        "workers"});

    RunConfig c;
    if (doc.contains("preset")) {
        if (!doc["preset"].is_string())
            throw ConfigError("field 'preset' must be a string");
        const auto p = preset(doc["preset"].get<std::string>());
        if (!p)
            throw ConfigError("unknown preset '" + doc["preset"].get<std::string>() + "'");
        c = *p;
    }

    try {
        if (doc.contains("physics")) {
            const auto& j = doc["physics"];
            detail::check_keys(j, "physics", {"alpha", "mu", "L", "N", "M"});
            if (j.contains("alpha")) c.physics.alpha = detail::get_positive(j, "alpha", "physics");
            if (j.contains("mu")) c.physics.mu = detail::get_positive(j, "mu", "physics");
            if (j.contains("L")) c.physics.big_l = detail::get_positive(j, "L", "physics");
            if (j.contains("N")) c.physics.n_filaments = detail::get_count(j, "N", "physics");
            if (j.contains("M")) c.physics.n_segments = detail::get_count(j, "M", "physics");
        }

        if (doc.contains("sweep")) {
            const auto& j = doc["sweep"];
            detail::check_keys(j, "sweep", {"betas", "log_spaced", "extra"});
            std::vector<double> betas;
            if (j.contains("log_spaced")) {
                const auto& l = j["log_spaced"];
                detail::check_keys(l, "sweep.log_spaced", {"count", "min", "max"});
                for (const char* k : {"count", "min", "max"})
                    if (!l.contains(k))
                        throw ConfigError(std::string("missing field 'sweep.log_spaced.") + k + "'");
                const auto n = detail::get_count(l, "count", "sweep.log_spaced");
                const double lo = detail::get_positive(l, "min", "sweep.log_spaced");
                const double hi = detail::get_positive(l, "max", "sweep.log_spaced");
                if (!(lo <= hi))
                    throw ConfigError("sweep.log_spaced: min must not exceed max");
                betas = log_spaced(n, lo, hi);
            }
            if (j.contains("betas")) {
                const auto v = detail::get_real_list(j, "betas", "sweep");
                betas.insert(betas.end(), v.begin(), v.end());
            }
            if (j.contains("extra")) {
                const auto v = detail::get_real_list(j, "extra", "sweep");
                betas.insert(betas.end(), v.begin(), v.end());
            }
            c.betas = detail::dedupe(betas);
        }

        if (doc.contains("sampler")) {
            const auto& j = doc["sampler"];
            const std::string w = "sampler";
            detail::check_keys(j, w,
                               {"seed", "sweeps_total", "sweeps_burnin", "max_bisection_level",
                                "translate_radius", "mode", "translate_move", "min_separation",
                                "init_side"});
            auto& s = c.sampler;
            if (j.contains("seed")) s.seed = detail::get_count(j, "seed", w);
            if (j.contains("sweeps_total")) s.sweeps_total = detail::get_count(j, "sweeps_total", w);
            if (j.contains("sweeps_burnin"))
                s.sweeps_burnin = detail::get_count(j, "sweeps_burnin", w);
            if (j.contains("max_bisection_level")) {
                const auto l = detail::get_count(j, "max_bisection_level", w);
                if (l > 30)
                    throw ConfigError("field 'sampler.max_bisection_level' is out of range");
                s.max_bisection_level = static_cast<unsigned>(l);
            }
            if (j.contains("translate_radius"))
                s.translate_radius = detail::get_real(j, "translate_radius", w);
            if (j.contains("min_separation"))
                s.min_separation = detail::get_positive(j, "min_separation", w);
            if (j.contains("init_side")) s.init_side = detail::get_real(j, "init_side", w);
            if (j.contains("mode")) {
                const auto m = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
                if (m == "bridge")
                    s.mode = ProposalMode::bridge;
                else if (m == "naive")
                    s.mode = ProposalMode::naive;
                else
                    throw ConfigError("field 'sampler.mode' must be \"bridge\" or \"naive\"");
            }
            if (j.contains("translate_move")) {
                const auto m = j["translate_move"].is_string() ? j["translate_move"].get<std::string>()
                                                               : "";
                if (m == "rigid")
                    s.translate_move = TranslateMove::rigid;
                else if (m == "single_bead")
                    s.translate_move = TranslateMove::single_bead;
                else
                    throw ConfigError(
                        "field 'sampler.translate_move' must be \"rigid\" or \"single_bead\"");
            }
        }

        if (doc.contains("equilibration")) {
            const auto& j = doc["equilibration"];
            detail::check_keys(j, "equilibration", {"window_fraction", "rel_tol"});
            if (j.contains("window_fraction"))
                c.equilibration.window_fraction =
                    detail::get_real(j, "window_fraction", "equilibration");
            if (j.contains("rel_tol"))
                c.equilibration.rel_tol = detail::get_real(j, "rel_tol", "equilibration");
        }

        if (doc.contains("output")) {
            const auto& j = doc["output"];
            detail::check_keys(j, "output", {"directory", "traces", "trace_stride", "snapshots"});
            if (j.contains("directory")) {
                if (!j["directory"].is_string())
                    throw ConfigError("field 'output.directory' must be a string");
                c.output.directory = j["directory"].get<std::string>();
            }
            if (j.contains("traces")) c.output.traces = detail::get_bool(j, "traces", "output");
            if (j.contains("trace_stride"))
                c.output.trace_stride = detail::get_count(j, "trace_stride", "output");
            if (j.contains("snapshots"))
                c.output.snapshots = detail::get_bool(j, "snapshots", "output");
        }

        if (doc.contains("workers"))
            c.workers = detail::get_count(doc, "workers", "<root>");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }

    validate(c);
    return c;
}

/// Canonical JSON form of a config; parse_config(serialize_config(c)) == c.
inline json config_to_json(const RunConfig& c)
{
    json j;
    j["physics"] = {{"alpha", c.physics.alpha},
                    {"mu", c.physics.mu},
                    {"L", c.physics.big_l},
                    {"N", c.physics.n_filaments},
                    {"M", c.physics.n_segments}};
    j["sweep"] = {{"betas", c.betas}};
    j["sampler"] = {{"seed", c.sampler.seed},
                    {"sweeps_total", c.sampler.sweeps_total},
                    {"sweeps_burnin", c.sampler.sweeps_burnin},
                    {"max_bisection_level", c.sampler.max_bisection_level},
                    {"translate_radius", c.sampler.translate_radius},
                    {"mode", to_string(c.sampler.mode)},
                    {"translate_move", to_string(c.sampler.translate_move)},
                    {"min_separation", c.sampler.min_separation},
                    {"init_side", c.sampler.init_side}};
    j["equilibration"] = {{"window_fraction", c.equilibration.window_fraction},
                          {"rel_tol", c.equilibration.rel_tol}};
    j["output"] = {{"directory", c.output.directory},
                   {"traces", c.output.traces},
                   {"trace_stride", c.output.trace_stride},
                   {"snapshots", c.output.snapshots}};
    j["workers"] = c.workers;
    return j;
}

inline std::string serialize_config(const RunConfig& c) { return config_to_json(c).dump(2); }

inline RunConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Redirects output to $VORTEXFIL_OUTPUT_ROOT when set.
inline void apply_env_overrides(RunConfig& c)
{
    if (const char* root = std::getenv(kOutputRootEnv); root && *root)
        c.output.directory = root;
}

/// FNV-1a over the canonical config text, minus fields that do not affect
/// science output (workers, output directory).
inline std::string config_hash(const RunConfig& c)
{
    json j = config_to_json(c);
    j.erase("workers");
    j["output"].erase("directory");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// splitmix64 finaliser.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::size_t beta_index)
{
    return mix64(master ^ mix64(static_cast<std::uint64_t>(beta_index) + 1));
}

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline const std::vector<std::string>& csv_columns()
{
    static const std::vector<std::string> cols = {
        "beta",          "r2_mc",          "r2_err",        "a2_mc",
        "a2_err",        "mean_slope",     "r2_formula_3d", "r2_formula_2d",
        "accept_rate_translate", "accept_rate_regrow", "e_mean", "sweeps_used",
        "seed"};
    return cols;
}

inline std::string csv_header()
{
    std::string h;
    for (const auto& c : csv_columns())
        h += (h.empty() ? "" : ",") + c;
    return h;
}

/// Summary of one beta point.
struct PointResult {
    std::size_t index = 0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    std::size_t burnin_used = 0;
    std::size_t measured = 0;
    bool equilibrated = false;
    double r2_mc = 0.0;
    double r2_err = 0.0;
    double a2_mc = 0.0;
    double a2_err = 0.0;
    double mean_slope = 0.0;
    double r2_formula_3d = 0.0;
    double r2_formula_2d = 0.0;
    double accept_translate = 0.0;
    double accept_regrow = 0.0;
    double e_mean = 0.0;
    StraightnessReport straightness;

    [[nodiscard]] std::size_t sweeps_used() const noexcept { return burnin_used + measured; }

    [[nodiscard]] std::string csv_row() const
    {
        std::ostringstream os;
        os << format_real(beta) << ',' << format_real(r2_mc) << ',' << format_real(r2_err) << ','
           << format_real(a2_mc) << ',' << format_real(a2_err) << ',' << format_real(mean_slope)
           << ',' << format_real(r2_formula_3d) << ',' << format_real(r2_formula_2d) << ','
           << format_real(accept_translate) << ',' << format_real(accept_regrow) << ','
           << format_real(e_mean) << ',' << sweeps_used() << ',' << seed;
        return os.str();
    }
};

/// Writes bead coordinates as CSV: filament_index,k,x,y,z with 1-based
/// indices and z = (k-1) delta.
inline void snapshot_export(const SystemState& state, double delta, const fs::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("snapshot_export: cannot open '" + path.string() + "'");
    out << "filament_index,k,x,y,z\n";
    for (std::size_t i = 0; i < state.n_filaments(); ++i) {
        const auto& beads = state.filaments[i].beads;
        for (std::size_t k = 0; k < beads.size(); ++k)
            out << (i + 1) << ',' << (k + 1) << ',' << format_real(beads[k].real()) << ','
                << format_real(beads[k].imag()) << ','
                << format_real(static_cast<double>(k) * delta) << '\n';
    }
    if (!out)
        throw std::runtime_error("snapshot_export: write failed for '" + path.string() + "'");
}

inline SystemState snapshot_import(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("snapshot_import: cannot open '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (line != "filament_index,k,x,y,z")
        throw std::runtime_error("snapshot_import: unexpected header in '" + path.string() + "'");
    std::map<std::size_t, std::map<std::size_t, PlanarPoint>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::size_t i = 0;
        std::size_t k = 0;
        double x = 0.0;
        double y = 0.0;
        double z = 0.0;
        if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf,%lf", &i, &k, &x, &y, &z) != 5 || i == 0
            || k == 0)
            throw std::runtime_error("snapshot_import: bad row at " + path.string() + ":"
                                     + std::to_string(lineno));
        rows[i][k] = {x, y};
    }
    SystemState state;
    for (const auto& [i, beads] : rows) {
        if (i != state.n_filaments() + 1)
            throw std::runtime_error("snapshot_import: filament indices are not contiguous");
        Filament f;
        for (const auto& [k, p] : beads) {
            if (k != f.size() + 1)
                throw std::runtime_error("snapshot_import: bead indices are not contiguous");
            f.beads.push_back(p);
        }
        state.filaments.push_back(std::move(f));
    }
    return state;
}

inline std::string trace_line(const TraceRecord& r, const char* phase)
{
    json j = {{"sweep", r.sweep_index},
              {"phase", phase},
              {"r2", r.r_squared},
              {"a2", r.a_squared},
              {"kinetic", r.kinetic},
              {"interaction", r.interaction},
              {"angular_momentum", r.angular_momentum},
              {"translate_proposed", r.acceptance.translate.proposed},
              {"translate_accepted", r.acceptance.translate.accepted},
              {"regrow_proposed", r.acceptance.regrow.proposed},
              {"regrow_accepted", r.acceptance.regrow.accepted}};
    return j.dump();
}

inline std::string point_stem(std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "beta_%03zu", index);
    return buf;
}

/// Runs one beta point: burn-in until the cumulative energy mean settles
/// (or the burn-in cap), then sweeps_total - sweeps_burnin measurement sweeps.
/// `measured == 0` means the point produces no data row.
inline PointResult run_point(const RunConfig& config, std::size_t index,
                             const fs::path& out_dir = {})
{
    const double beta = config.betas.at(index);
    const SystemParams params = config.physics.at_beta(beta);
    SamplerConfig sc = config.sampler;
    sc.seed = derive_seed(config.sampler.seed, index);

    PointResult res;
    res.index = index;
    res.beta = beta;
    res.seed = sc.seed;
    const MeanFieldInputs mf = meanfield_inputs(params);
    res.r2_formula_3d = r_squared_3d(mf);
    res.r2_formula_2d = r_squared_2d(mf.n_filaments, beta, mf.mu);

    std::ofstream trace;
    if (!out_dir.empty() && config.output.traces) {
        fs::create_directories(out_dir / "traces");
        const fs::path p = out_dir / "traces" / (point_stem(index) + ".jsonl");
        trace.open(p);
        if (!trace)
            throw std::runtime_error("cannot open trace file '" + p.string() + "'");
    }

    Chain chain = Chain::from_random_start(params, sc);
    const std::size_t window = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(config.equilibration.window_fraction
                                                  * static_cast<double>(sc.sweeps_total))));
    EquilibrationDetector detector(window, config.equilibration.rel_tol);
    constexpr std::size_t kResyncEvery = 1000;

    std::size_t sweep_no = 0;
    while (res.burnin_used < sc.sweeps_burnin) {
        chain.sweep();
        ++res.burnin_used;
        ++sweep_no;
        if (sweep_no % kResyncEvery == 0)
            chain.resync();
        if (trace.is_open() && sweep_no % config.output.trace_stride == 0)
            trace << trace_line(record_of(chain, sweep_no), "burnin") << '\n';
        if (detector.push(chain.cumulative_energy_term())) {
            res.equilibrated = true;
            break;
        }
    }

    const std::size_t n_measure = sc.sweeps_total - sc.sweeps_burnin;
    const AcceptanceStats before = chain.stats();
    std::vector<double> r2;
    std::vector<double> a2;
    r2.reserve(n_measure);
    a2.reserve(n_measure);
    RunningStats energy;
    for (std::size_t s = 0; s < n_measure; ++s) {
        chain.sweep();
        ++sweep_no;
        if (sweep_no % kResyncEvery == 0)
            chain.resync();
        const TraceRecord rec = record_of(chain, sweep_no);
        r2.push_back(rec.r_squared);
        a2.push_back(rec.a_squared);
        energy.accumulate(chain.cumulative_energy_term());
        if (trace.is_open() && sweep_no % config.output.trace_stride == 0)
            trace << trace_line(rec, "measure") << '\n';
    }
    res.measured = n_measure;

    if (!out_dir.empty() && config.output.snapshots) {
        fs::create_directories(out_dir / "snapshots");
        snapshot_export(chain.state(), params.delta(),
                        out_dir / "snapshots" / (point_stem(index) + ".csv"));
    }

    if (n_measure == 0)
        return res;

    auto summarise = [](const std::vector<double>& col, double& mean, double& err) {
        RunningStats s;
        for (double x : col)
            s.accumulate(x);
        mean = s.mean();
        err = col.size() >= kMinBlocks ? blocked_error(col).plateau
                                        : std::numeric_limits<double>::quiet_NaN();
    };
    summarise(r2, res.r2_mc, res.r2_err);
    summarise(a2, res.a2_mc, res.a2_err);
    res.mean_slope = slope_from_amplitude(res.a2_mc, params.delta());
    res.straightness = straightness_from_amplitude(res.a2_mc, params.delta());
    const auto& after = chain.stats();
    const MoveCounter tr{after.translate.proposed - before.translate.proposed,
                         after.translate.accepted - before.translate.accepted};
    const MoveCounter rg{after.regrow.proposed - before.regrow.proposed,
                         after.regrow.accepted - before.regrow.accepted};
    res.accept_translate = tr.rate();
    res.accept_regrow = rg.rate();
    res.e_mean = energy.mean();
    return res;
}

inline std::string utc_timestamp()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Append-only record of sweep progress; the only state shared by workers.
class Manifest {
public:
    Manifest(fs::path path, const RunConfig& config) : path_(std::move(path))
    {
        doc_["code_version"] = VORTEXFIL_VERSION;
        doc_["config_hash"] = config_hash(config);
        doc_["config"] = config_to_json(config);
        doc_["created"] = utc_timestamp();
        doc_["points"] = json::array();
        for (std::size_t i = 0; i < config.betas.size(); ++i)
            doc_["points"].push_back({{"index", i},
                                      {"beta", config.betas[i]},
                                      {"seed", derive_seed(config.sampler.seed, i)},
                                      {"status", "pending"}});
    }

    Manifest(Manifest&& o) noexcept : path_(std::move(o.path_)), doc_(std::move(o.doc_)) {}
    Manifest& operator=(Manifest&& o) noexcept
    {
        path_ = std::move(o.path_);
        doc_ = std::move(o.doc_);
        return *this;
    }

    /// Loads an existing manifest; nullopt if absent.
    static std::optional<Manifest> load(const fs::path& path)
    {
        std::ifstream in(path);
        if (!in)
            return std::nullopt;
        Manifest m;
        m.path_ = path;
        try {
            in >> m.doc_;
        } catch (const json::exception& e) {
            throw std::runtime_error("corrupt manifest '" + path.string() + "': " + e.what());
        }
        return m;
    }

    [[nodiscard]] std::string hash() const { return doc_.value("config_hash", ""); }

    [[nodiscard]] std::string status(std::size_t index) const
    {
        return doc_["points"].at(index).value("status", "pending");
    }

    void mark(std::size_t index, const std::string& status, const json& extra = json::object())
    {
        std::lock_guard lock(mutex_);
        auto& p = doc_["points"].at(index);
        p["status"] = status;
        for (const auto& [k, v] : extra.items())
            p[k] = v;
        p["updated"] = utc_timestamp();
        write_locked();
    }

    void save()
    {
        std::lock_guard lock(mutex_);
        write_locked();
    }

    /// Data rows of finished points, in beta-index order.
    [[nodiscard]] std::vector<std::string> rows() const
    {
        std::lock_guard lock(mutex_);
        std::vector<std::string> out;
        for (const auto& p : doc_["points"])
            if (p.value("status", "") == "done" && p.contains("row")
                && !p["row"].get<std::string>().empty())
                out.push_back(p["row"].get<std::string>());
        return out;
    }

    [[nodiscard]] const json& document() const { return doc_; }

private:
    Manifest() = default;

    void write_locked()
    {
        const fs::path tmp = path_.string() + ".tmp";
        {
            std::ofstream out(tmp);
            if (!out)
                throw std::runtime_error("cannot write manifest '" + tmp.string() + "'");
            out << doc_.dump(2) << '\n';
        }
        fs::rename(tmp, path_);
    }

    fs::path path_;
    json doc_;
    mutable std::mutex mutex_;
};

struct SweepOutcome {
    fs::path directory;
    std::vector<PointResult> results; ///< points run in this invocation
    std::size_t completed = 0;        ///< done points in the manifest
    std::size_t skipped = 0;          ///< already done before this invocation
    std::vector<std::pair<std::size_t, std::string>> failures;
};

inline void write_results_csv(const fs::path& path, const std::vector<std::string>& rows)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << csv_header() << '\n';
        for (const auto& r : rows)
            out << r << '\n';
    }
    fs::rename(tmp, path);
}

/// Runs every beta point of the config on a bounded worker pool. With
/// `resume`, points already marked done in an existing manifest with the
/// same config hash are skipped.
inline SweepOutcome run_sweep(const RunConfig& config, bool resume = false)
{
    validate(config);
    SweepOutcome outcome;
    outcome.directory = config.output.directory;
    std::error_code ec;
    fs::create_directories(outcome.directory, ec);
    if (ec || !fs::is_directory(outcome.directory))
        throw ConfigError("output directory '" + outcome.directory.string()
                          + "' is not writable: " + ec.message());

    const fs::path manifest_path = outcome.directory / "manifest.json";
    std::optional<Manifest> manifest;
    if (resume) {
        manifest = Manifest::load(manifest_path);
        if (manifest && manifest->hash() != config_hash(config))
            throw ConfigError("resume: manifest in '" + outcome.directory.string()
                              + "' was written for a different configuration");
    }
    if (!manifest)
        manifest.emplace(manifest_path, config);
    manifest->save();

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < config.betas.size(); ++i) {
        if (manifest->status(i) == "done")
            ++outcome.skipped;
        else
            todo.push_back(i);
    }

    std::mutex results_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < todo.size(); t = next++) {
            const std::size_t index = todo[t];
            manifest->mark(index, "running", {{"started", utc_timestamp()}});
            try {
                PointResult r = run_point(config, index, outcome.directory);
                manifest->mark(index, "done",
                               {{"row", r.measured > 0 ? r.csv_row() : std::string{}},
                                {"burnin_sweeps", r.burnin_used},
                                {"equilibrated", r.equilibrated},
                                {"measure_sweeps", r.measured}});
                std::lock_guard lock(results_mutex);
                outcome.results.push_back(std::move(r));
            } catch (const std::exception& e) {
                manifest->mark(index, "failed", {{"error", e.what()}});
                std::lock_guard lock(results_mutex);
                outcome.failures.emplace_back(index, e.what());
            }
        }
    };

    const std::size_t n_workers = std::min(config.workers, std::max<std::size_t>(todo.size(), 1));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w)
            pool.emplace_back(worker);
    }

    std::sort(outcome.results.begin(), outcome.results.end(),
              [](const PointResult& a, const PointResult& b) { return a.index < b.index; });
    std::sort(outcome.failures.begin(), outcome.failures.end());
    write_results_csv(outcome.directory / "results.csv", manifest->rows());
    for (std::size_t i = 0; i < config.betas.size(); ++i)
        outcome.completed += manifest->status(i) == "done";
    return outcome;
}

} // namespace vortexfil
