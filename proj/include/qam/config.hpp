#pragma once

// Experiment manifests: key = value text with [section] headers and dotted keys, or JSON.
//
//   name = weak_translated
//   t_final = 50
//   [dissipator]
//   kind = translated
//   nu_minus = 1e-2
//   [sweep]
//   nu_minus = 1e-2, 1, 10
//
// Omitted keys keep their defaults (dt 1e-3, N 24, 200 trajectories, D 0.01, tau 10, nu_+ 1e-8).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qam/dissipators.hpp"
#include "qam/errors.hpp"
#include "qam/evolver.hpp"
#include "qam/io.hpp"
#include "qam/wigner.hpp"

namespace qam {

inline constexpr const char* kCodeVersion = "qam 1.0.0";

struct FitWindow {
    double t_lo = 0.0;
    double t_hi = 0.0;
};

struct WignerOptions {
    double x_c = 3.0;
    std::optional<double> t_relax; ///< default: 10 / slowest drift rate
    PhaseSpaceGrid grid;
};

struct OracleOptions {
    double rel_tol = 1e-3;
    double abs_tol = 1e-6;
};

struct ExperimentManifest {
    std::string name = "experiment";
    SimulationConfig cfg;
    std::vector<DissipatorKind> sweep_kinds;
    std::vector<double> sweep_nu_minus;
    std::vector<FitWindow> fit_windows;
    WignerOptions wigner;
    OracleOptions oracle;
    std::string outputs = "results";
    std::string created;
    std::string code_version = kCodeVersion;

    bool has_sweep() const { return !sweep_kinds.empty() || !sweep_nu_minus.empty(); }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class ConfigReader {
  public:
    explicit ConfigReader(ExperimentManifest& m) : m_(m) { register_keys(); }

    void set(const std::string& key, const std::string& value, int line) {
        const auto it = setters_.find(key);
        if (it == setters_.end()) throw ConfigError("unknown config key '" + key + "'", key, line);
        key_ = key;
        line_ = line;
        it->second(trim(value));
    }

    void finish() {
        auto& th = m_.cfg.dissipator.thermal;
        try {
            if (gamma_ || nbar_) {
                if (nu_plus_ || nu_minus_)
                    throw ConfigError("give either (nu_plus, nu_minus) or (gamma, nbar), not both", "gamma", 0);
                th = ThermalParams::from_gamma_nbar(gamma_.value_or(0.0), nbar_.value_or(0.0));
            } else {
                th = ThermalParams::from_rates(nu_plus_.value_or(1e-8), nu_minus_.value_or(1e-2));
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what(), "dissipator", 0);
        }
        try {
            m_.cfg.validate();
            m_.wigner.grid.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what(), "", 0);
        }
        for (double v : m_.sweep_nu_minus)
            if (!(v > nu_plus_.value_or(1e-8)))
                throw ConfigError("sweep nu_minus values must exceed nu_plus", "sweep.nu_minus", 0);
        for (const auto& w : m_.fit_windows)
            if (!(w.t_lo > 0.0) || !(w.t_hi > w.t_lo))
                throw ConfigError("fit windows need 0 < t_lo < t_hi", "fits.windows", 0);
        if (m_.name.empty()) throw ConfigError("name must be nonempty", "name", 0);
        if (m_.created.empty()) m_.created = utc_timestamp();
    }

  private:
    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(what, key_, line_); }

    double to_double(const std::string& s) const {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
            fail("key '" + key_ + "': '" + s + "' is not a finite number");
        return v;
    }
    long long to_int(const std::string& s) const {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) fail("key '" + key_ + "': '" + s + "' is not an integer");
        return v;
    }
    double positive(const std::string& s) const {
        const double v = to_double(s);
        if (!(v > 0.0)) fail("key '" + key_ + "' must be positive");
        return v;
    }

    void add(std::initializer_list<const char*> names, std::function<void(const std::string&)> f) {
        for (const char* n : names) setters_[n] = f;
    }

    void register_keys() {
        auto& c = m_.cfg;
        add({"name"}, [this](const std::string& v) { m_.name = v; });
        add({"created"}, [this](const std::string& v) { m_.created = v; });
        add({"code_version"}, [this](const std::string& v) { m_.code_version = v; });
        // written into manifest copies for reference; recomputed from the rates on input
        add({"derived.gamma", "derived.nbar", "derived.temperature"}, [](const std::string&) {});
        add({"output.dir", "outputs"}, [this](const std::string& v) { m_.outputs = v; });
        add({"dt", "simulation.dt"}, [this, &c](const std::string& v) { c.dt = positive(v); });
        add({"t_final", "simulation.t_final"}, [this, &c](const std::string& v) { c.t_final = positive(v); });
        add({"dim", "simulation.dim"}, [this, &c](const std::string& v) {
            const auto n = to_int(v);
            if (n < 2 || n > 4096) fail("dim must lie in [2, 4096]");
            c.dim = static_cast<int>(n);
        });
        add({"n_traj", "simulation.n_traj"}, [this, &c](const std::string& v) {
            const auto n = to_int(v);
            if (n < 1) fail("n_traj must be >= 1");
            c.n_traj = static_cast<int>(n);
        });
        add({"base_seed", "simulation.base_seed"}, [this, &c](const std::string& v) {
            const auto n = to_int(v);
            if (n < 0) fail("base_seed must be non-negative");
            c.base_seed = static_cast<std::uint64_t>(n);
        });
        add({"record_stride", "record.stride"}, [this, &c](const std::string& v) {
            const auto n = to_int(v);
            if (n < 1) fail("record stride must be >= 1");
            c.record.stride = static_cast<std::size_t>(n);
        });
        add({"record.mode"}, [this, &c](const std::string& v) {
            if (v == "linear")
                c.record.mode = RecordSchedule::Mode::Linear;
            else if (v == "log")
                c.record.mode = RecordSchedule::Mode::Log;
            else
                fail("record.mode must be 'linear' or 'log'");
        });
        add({"record.per_decade"}, [this, &c](const std::string& v) {
            const auto n = to_int(v);
            if (n < 1) fail("record.per_decade must be >= 1");
            c.record.per_decade = static_cast<int>(n);
        });
        add({"kind", "dissipator.kind"}, [this, &c](const std::string& v) {
            try {
                c.dissipator.kind = parse_dissipator_kind(v);
            } catch (const std::invalid_argument& e) {
                fail(e.what());
            }
        });
        add({"nu_plus", "dissipator.nu_plus"}, [this](const std::string& v) { nu_plus_ = to_double(v); });
        add({"nu_minus", "dissipator.nu_minus"}, [this](const std::string& v) { nu_minus_ = to_double(v); });
        add({"gamma", "dissipator.gamma"}, [this](const std::string& v) { gamma_ = to_double(v); });
        add({"nbar", "dissipator.nbar"}, [this](const std::string& v) { nbar_ = to_double(v); });
        add({"tau", "ou.tau"}, [this, &c](const std::string& v) { c.ou.tau = positive(v); });
        add({"diff", "D", "ou.diff", "ou.D"}, [this, &c](const std::string& v) {
            c.ou.diff = to_double(v);
            if (c.ou.diff < 0.0) fail("ou.diff must be non-negative");
        });
        add({"integrator.corrector"}, [this, &c](const std::string& v) {
            if (v == "frozen")
                c.corrector = CorrectorDrive::Frozen;
            else if (v == "midpoint")
                c.corrector = CorrectorDrive::Midpoint;
            else
                fail("integrator.corrector must be 'frozen' or 'midpoint'");
        });
        add({"integrator.frame"}, [this, &c](const std::string& v) {
            if (v == "lab")
                c.frame = Frame::Lab;
            else if (v == "comoving")
                c.frame = Frame::Comoving;
            else
                fail("integrator.frame must be 'lab' or 'comoving'");
        });
        add({"force_convention", "integrator.force"}, [this, &c](const std::string& v) {
            if (v == "m_omega2")
                c.force_convention = ForceConvention::MassOmegaSquared;
            else if (v == "m_omega")
                c.force_convention = ForceConvention::MassOmega;
            else
                fail("force convention must be 'm_omega2' or 'm_omega'");
        });
        add({"diagnostics.eig_every"}, [this, &c](const std::string& v) {
            const auto n = to_int(v);
            if (n < 1) fail("diagnostics.eig_every must be >= 1");
            c.eig_every = static_cast<int>(n);
        });
        add({"diagnostics.top_pop_warn"}, [this, &c](const std::string& v) { c.top_pop_warn = positive(v); });
        add({"diagnostics.top_pop_error"}, [this, &c](const std::string& v) { c.top_pop_error = positive(v); });
        add({"sweep.kind"}, [this](const std::string& v) {
            m_.sweep_kinds.clear();
            for (const auto& item : split_list(v)) {
                try {
                    m_.sweep_kinds.push_back(parse_dissipator_kind(item));
                } catch (const std::invalid_argument& e) {
                    fail(e.what());
                }
            }
        });
        add({"sweep.nu_minus"}, [this](const std::string& v) {
            m_.sweep_nu_minus.clear();
            for (const auto& item : split_list(v)) m_.sweep_nu_minus.push_back(to_double(item));
            if (m_.sweep_nu_minus.empty()) fail("sweep.nu_minus is empty");
        });
        add({"fits.windows"}, [this](const std::string& v) {
            m_.fit_windows.clear();
            for (const auto& item : split_list(v)) {
                const auto colon = item.find(':');
                if (colon == std::string::npos) fail("fit window '" + item + "' must read t_lo:t_hi");
                m_.fit_windows.push_back({to_double(trim(item.substr(0, colon))), to_double(trim(item.substr(colon + 1)))});
            }
        });
        add({"wigner.x_c"}, [this](const std::string& v) { m_.wigner.x_c = to_double(v); });
        add({"wigner.t_relax"}, [this](const std::string& v) { m_.wigner.t_relax = positive(v); });
        add({"wigner.x_min"}, [this](const std::string& v) { m_.wigner.grid.x_min = to_double(v); });
        add({"wigner.x_max"}, [this](const std::string& v) { m_.wigner.grid.x_max = to_double(v); });
        add({"wigner.p_min"}, [this](const std::string& v) { m_.wigner.grid.p_min = to_double(v); });
        add({"wigner.p_max"}, [this](const std::string& v) { m_.wigner.grid.p_max = to_double(v); });
        add({"wigner.n_x"}, [this](const std::string& v) { m_.wigner.grid.n_x = static_cast<int>(to_int(v)); });
        add({"wigner.n_p"}, [this](const std::string& v) { m_.wigner.grid.n_p = static_cast<int>(to_int(v)); });
        add({"oracle.rel_tol"}, [this](const std::string& v) { m_.oracle.rel_tol = positive(v); });
        add({"oracle.abs_tol"}, [this](const std::string& v) { m_.oracle.abs_tol = positive(v); });
    }

    ExperimentManifest& m_;
    std::map<std::string, std::function<void(const std::string&)>> setters_;
    std::string key_;
    int line_ = 0;
    std::optional<double> nu_plus_, nu_minus_, gamma_, nbar_;
};

inline void flatten_json(const nlohmann::json& j, const std::string& prefix, ConfigReader& reader) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        const auto& v = it.value();
        if (v.is_object()) {
            flatten_json(v, key, reader);
        } else if (v.is_array()) {
            std::string joined;
            for (const auto& e : v) {
                if (!joined.empty()) joined += ",";
                joined += e.is_string() ? e.get<std::string>() : e.dump();
            }
            reader.set(key, joined, 0);
        } else if (v.is_string()) {
            reader.set(key, v.get<std::string>(), 0);
        } else {
            reader.set(key, v.dump(), 0);
        }
    }
}

} // namespace detail

/// Parses manifest text (key = value or JSON).
inline ExperimentManifest parse_config_text(const std::string& text) {
    ExperimentManifest m;
    detail::ConfigReader reader(m);
    const std::string body = detail::trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("JSON parse failure: ") + e.what(), "", 0);
        }
        detail::flatten_json(j, "", reader);
    } else {
        std::istringstream in(text);
        std::string raw, section;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            const auto hash = raw.find('#');
            std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": malformed section header", "", line);
                section = detail::trim(s.substr(1, s.size() - 2));
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(line) + ": expected key = value", "", line);
            const std::string key = detail::trim(s.substr(0, eq));
            if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key", "", line);
            reader.set(section.empty() ? key : section + "." + key, s.substr(eq + 1), line);
        }
    }
    reader.finish();
    return m;
}

inline ExperimentManifest parse_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what(), "", 0);
    }
    return parse_config_text(text);
}

inline nlohmann::json to_json(const ExperimentManifest& m) {
    const auto& c = m.cfg;
    const auto& th = c.dissipator.thermal;
    nlohmann::json j;
    j["name"] = m.name;
    j["created"] = m.created;
    j["code_version"] = m.code_version;
    j["outputs"] = m.outputs;
    j["simulation"] = {{"dt", c.dt},       {"t_final", c.t_final}, {"dim", c.dim},
                       {"n_traj", c.n_traj}, {"base_seed", c.base_seed}};
    j["record"] = {{"mode", c.record.mode == RecordSchedule::Mode::Linear ? "linear" : "log"},
                   {"per_decade", c.record.per_decade}};
    if (c.record.stride > 0) j["record"]["stride"] = c.record.stride;
    j["dissipator"] = {{"kind", std::string(to_string(c.dissipator.kind))},
                       {"nu_plus", th.nu_plus},
                       {"nu_minus", th.nu_minus}};
    j["derived"] = {{"gamma", th.gamma}, {"nbar", th.nbar}, {"temperature", th.temperature()}};
    j["ou"] = {{"tau", c.ou.tau}, {"diff", c.ou.diff}};
    j["integrator"] = {{"corrector", std::string(to_string(c.corrector))},
                       {"frame", std::string(to_string(c.frame))},
                       {"force", std::string(to_string(c.force_convention))}};
    j["diagnostics"] = {{"eig_every", c.eig_every}, {"top_pop_warn", c.top_pop_warn}, {"top_pop_error", c.top_pop_error}};
    if (m.has_sweep()) {
        nlohmann::json kinds = nlohmann::json::array();
        for (auto k : m.sweep_kinds) kinds.push_back(std::string(to_string(k)));
        j["sweep"] = nlohmann::json::object();
        if (!kinds.empty()) j["sweep"]["kind"] = kinds;
        if (!m.sweep_nu_minus.empty()) j["sweep"]["nu_minus"] = m.sweep_nu_minus;
    }
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : m.fit_windows) windows.push_back(io::fmt(w.t_lo) + ":" + io::fmt(w.t_hi));
    j["fits"] = {{"windows", windows}};
    j["wigner"] = {{"x_c", m.wigner.x_c},
                   {"x_min", m.wigner.grid.x_min},
                   {"x_max", m.wigner.grid.x_max},
                   {"p_min", m.wigner.grid.p_min},
                   {"p_max", m.wigner.grid.p_max},
                   {"n_x", m.wigner.grid.n_x},
                   {"n_p", m.wigner.grid.n_p}};
    if (m.wigner.t_relax) j["wigner"]["t_relax"] = *m.wigner.t_relax;
    j["oracle"] = {{"rel_tol", m.oracle.rel_tol}, {"abs_tol", m.oracle.abs_tol}};
    return j;
}

} // namespace qam
