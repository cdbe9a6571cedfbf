#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "maqkd/params.hpp"

namespace maqkd {

// Configuration problems carry enough context to point at the offending
// line; they are distinct from domain errors raised by the physics layer.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ParsedConfig {
    ProtocolConfig cfg;
    bool explicit_tau_init = false;
    bool explicit_source_rate = false;
    bool explicit_memory_cutoff = false;
    std::vector<std::string> warnings;
};

namespace config_detail {

enum class Dim { time, rate, decibel, db_per_km, length, plain };

struct KeySpec {
    double* slot;
    Dim dim;
};

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool unit_scale(Dim dim, const std::string& unit, double& scale) {
    scale = 1.0;
    if (unit.empty()) return true;
    switch (dim) {
        case Dim::time:
            if (unit == "s") scale = 1.0;
            else if (unit == "ms") scale = 1e-3;
            else if (unit == "us") scale = 1e-6;
            else if (unit == "ns") scale = 1e-9;
            else if (unit == "ps") scale = 1e-12;
            else return false;
            return true;
        case Dim::rate:
            if (unit == "Hz") scale = 1.0;
            else if (unit == "MHz") scale = 1e6;
            else if (unit == "GHz") scale = 1e9;
            else return false;
            return true;
        case Dim::decibel:
            if (unit == "dB") scale = 1.0;
            else return false;
            return true;
        case Dim::db_per_km:
            if (unit == "dB/km") scale = 1.0;
            else return false;
            return true;
        case Dim::length:
            if (unit == "km") scale = 1.0;
            else return false;
            return true;
        case Dim::plain:
            return false;   // dimensionless keys take bare numbers only
    }
    return false;
}

inline double parse_number(const std::string& text, std::size_t& consumed) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    consumed = static_cast<std::size_t>(end - begin);
    return v;
}

} // namespace config_detail

// Parse "number [unit]" with the unit interpreted in the given dimension,
// e.g. "10 ns", "4.5MHz", "0.3 dB/km", "0.13". Throws ConfigError with the
// supplied context on any malformation.
inline double parse_quantity(const std::string& text, config_detail::Dim dim,
                             const std::string& context) {
    using namespace config_detail;
    const std::string t = trim(text);
    if (t.empty()) throw ConfigError("config: empty value for " + context);
    std::size_t consumed = 0;
    const double v = parse_number(t, consumed);
    if (consumed == 0) throw ConfigError("config: not a number in " + context + ": '" + t + "'");
    const std::string unit = trim(t.substr(consumed));
    double scale = 1.0;
    if (!unit_scale(dim, unit, scale))
        throw ConfigError("config: bad unit '" + unit + "' for " + context);
    return v * scale;
}

inline double parse_time_quantity(const std::string& text, const std::string& context) {
    return parse_quantity(text, config_detail::Dim::time, context);
}

namespace config_detail {

inline std::map<std::string, KeySpec> key_table(ProtocolConfig& c) {
    return {
        {"t1", {&c.device.decoherence.t1_amplitude, Dim::time}},
        {"t2", {&c.device.decoherence.t2_dephase, Dim::time}},
        {"t1n", {&c.device.decoherence.t1_nuclear, Dim::time}},
        {"t2n", {&c.device.decoherence.t2_nuclear, Dim::time}},
        {"t_en", {&c.device.decoherence.conv_time_e_n, Dim::time}},
        {"tau_r", {&c.device.tau_r, Dim::time}},
        {"tau_pi", {&c.device.tau_pi, Dim::time}},
        {"tau_init", {&c.device.tau_init, Dim::time}},
        {"tau_p", {&c.device.tau_p, Dim::time}},
        {"eta_up", {&c.device.eta_up, Dim::plain}},
        {"eta_down", {&c.device.eta_down, Dim::plain}},
        {"gamma_linewidth", {&c.device.gamma_linewidth_hz, Dim::rate}},
        {"eta_w", {&c.device.eta_w, Dim::plain}},
        {"eta_r0", {&c.device.eta_r0, Dim::plain}},
        {"eta_spd", {&c.link.detector.efficiency, Dim::plain}},
        {"t_spd", {&c.link.detector.timing_jitter_s, Dim::time}},
        {"gamma_dc", {&c.link.detector.dark_rate_hz, Dim::rate}},
        {"gamma_bg", {&c.link.detector.background_rate_hz, Dim::rate}},
        {"alpha_ob", {&c.link.fiber.attenuation_db_per_km, Dim::db_per_km}},
        {"e_a", {&c.misalignment_a, Dim::plain}},
        {"e_b", {&c.misalignment_b, Dim::plain}},
        {"f", {&c.error_correction_f, Dim::plain}},
        {"eta_oc", {&c.link.optics.circulator_loss_db, Dim::decibel}},
        {"eta_os", {&c.link.optics.switch_loss_db, Dim::decibel}},
        {"t_os", {&c.link.optics.switch_rise_fall_s, Dim::time}},
        {"dt_os", {&c.link.optics.switch_min_dwell_s, Dim::time}},
        {"source_rate", {&c.source_rate_hz, Dim::rate}},
        {"memory_cutoff", {&c.memory_cutoff_s, Dim::time}},
    };
}

} // namespace config_detail

// Recompute the derived defaults that follow other parameters unless the
// file pinned them, then run the full validity check.
inline void finalize(ParsedConfig& pc) {
    auto& cfg = pc.cfg;
    if (!pc.explicit_tau_init)
        cfg.device.tau_init = cfg.device.tau_r + cfg.device.tau_pi;
    if (!pc.explicit_source_rate)
        cfg.source_rate_hz = repetition_rate(cfg.device.tau_pi, cfg.device.tau_p);
    if (!pc.explicit_memory_cutoff)
        cfg.memory_cutoff_s = 10.0 * cfg.device.decoherence.t2_dephase;
    try {
        validate(cfg);
    } catch (const std::domain_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    pc.warnings.clear();
    const double round_time = 2.0 * (cfg.device.tau_p + cfg.device.tau_pi);
    if (round_time < cfg.link.optics.switch_min_dwell_s) {
        std::ostringstream os;
        os << "warning: write round (" << round_time
           << " s) is shorter than the minimum switch dwell ("
           << cfg.link.optics.switch_min_dwell_s
           << " s); the switch cannot keep up with per-round toggling";
        pc.warnings.push_back(os.str());
    }
}

// Parse a key = value configuration. Unknown keys, duplicate keys, negative
// physical quantities, malformed numbers and units are all hard errors that
// name the line. An empty file yields the full default parameter set.
// Unspecified derived values follow their parents: tau_init = tau_r +
// tau_pi, the source clock matches the write round, and the memory cutoff
// is ten dephasing times.
inline ParsedConfig parse_config(const std::string& text) {
    using namespace config_detail;
    ParsedConfig pc;
    pc.cfg = ProtocolConfig{};   // raw defaults; derived fields filled in finalize
    auto table = key_table(pc.cfg);
    std::map<std::string, int> seen;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no)
                              + ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = table.find(key);
        if (it == table.end())
            throw ConfigError("config: line " + std::to_string(line_no)
                              + ": unknown key '" + key + "'");
        if (seen.count(key))
            throw ConfigError("config: line " + std::to_string(line_no)
                              + ": duplicate key '" + key + "' (first at line "
                              + std::to_string(seen[key]) + ")");
        seen[key] = line_no;
        const std::string context = "line " + std::to_string(line_no) + ", key '" + key + "'";
        const double v = parse_quantity(value, it->second.dim, context);
        if (v < 0.0)
            throw ConfigError("config: " + context + ": negative value");
        *it->second.slot = v;
        if (key == "tau_init") pc.explicit_tau_init = true;
        if (key == "source_rate") pc.explicit_source_rate = true;
        if (key == "memory_cutoff") pc.explicit_memory_cutoff = true;
    }
    finalize(pc);
    return pc;
}

namespace config_detail {

inline std::string render_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace config_detail

// Canonical text form: every key in a fixed order, values in base SI units
// with shortest exact round-trip formatting. parse_config(render_config(c))
// reproduces c bit for bit.
inline std::string render_config(const ProtocolConfig& cfg) {
    ProtocolConfig copy = cfg;
    auto table = config_detail::key_table(copy);
    static const char* order[] = {
        "t1", "t2", "t1n", "t2n", "t_en",
        "tau_r", "tau_pi", "tau_init", "tau_p",
        "eta_up", "eta_down", "gamma_linewidth",
        "eta_w", "eta_r0",
        "eta_spd", "t_spd", "gamma_dc", "gamma_bg",
        "alpha_ob", "e_a", "e_b", "f",
        "eta_oc", "eta_os", "t_os", "dt_os",
        "source_rate", "memory_cutoff",
    };
    std::string out;
    for (const char* key : order) {
        out += key;
        out += " = ";
        out += config_detail::render_double(*table.at(key).slot);
        out += '\n';
    }
    return out;
}

// FNV-1a over the canonical rendering; stable across platforms and runs.
inline std::uint64_t config_digest(const ProtocolConfig& cfg) {
    const std::string text = render_config(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace maqkd
