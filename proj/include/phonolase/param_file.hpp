#pragma once

// Flat "key = value" parameter files. Frequencies in files are ordinary
// frequencies (Hz); they become angular frequencies here and nowhere else.

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "phonolase/errors.hpp"
#include "phonolase/params.hpp"

namespace phonolase {

struct KeyValue {
    std::string key;
    double value = 0.0;
    std::size_t line = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text, std::size_t line) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || text.empty())
        throw ConfigError("cannot parse number '" + std::string(text) + "'", line);
    return v;
}

}  // namespace detail

/// Parse "key = value" lines; '#' starts a comment. Duplicate keys are an error.
inline std::vector<KeyValue> parse_key_values(std::istream& in) {
    std::vector<KeyValue> out;
    std::set<std::string> seen;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = raw;
        if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = detail::trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line);
        std::string key(detail::trim(s.substr(0, eq)));
        const auto val = detail::trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line);
        if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'", line);
        out.push_back({key, detail::parse_double(val, line), line});
    }
    return out;
}

inline std::vector<KeyValue> parse_key_values_text(const std::string& text) {
    std::istringstream in(text);
    return parse_key_values(in);
}

inline std::vector<KeyValue> read_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse_key_values(in);
}

/// Parse "key=value" as given on the command line.
inline KeyValue parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: '" + text + "'");
    std::string key(detail::trim(std::string_view(text).substr(0, eq)));
    return {key, detail::parse_double(detail::trim(std::string_view(text).substr(eq + 1)), 0), 0};
}

// ---------------------------------------------------------------- system parameters

inline const std::vector<std::string>& system_keys() {
    static const std::vector<std::string> keys = {"omega_m_hz",     "chi_hz",        "gamma_m_hz",
                                                  "gamma_c_hz",     "g_hz",          "delta_hz",
                                                  "omega_drive_hz", "temperature_k", "geometry_factor"};
    return keys;
}

inline bool is_system_key(const std::string& k) {
    for (const auto& s : system_keys())
        if (s == k) return true;
    return false;
}

/// Set one file-level key on `p`. The drive keeps its phase when the modulus changes.
inline void apply_system_key(SystemParams& p, const std::string& key, double v, std::size_t line = 0) {
    if (key == "omega_m_hz") p.omega_m = hz_to_rad(v);
    else if (key == "chi_hz") p.chi = hz_to_rad(v);
    else if (key == "gamma_m_hz") p.gamma_m = hz_to_rad(v);
    else if (key == "gamma_c_hz") p.gamma_c = hz_to_rad(v);
    else if (key == "g_hz") p.g = hz_to_rad(v);
    else if (key == "delta_hz") p.delta_drive = hz_to_rad(v);
    else if (key == "omega_drive_hz") {
        if (v < 0.0) throw ConfigError("omega_drive_hz is a modulus and must be >= 0", line);
        const double ph = std::arg(p.omega_drive);
        p.omega_drive = std::polar(hz_to_rad(v), p.omega_drive == cplx{} ? 0.0 : ph);
    } else if (key == "temperature_k") p.temperature = v;
    else if (key == "geometry_factor") {
        if (v == 1.0) p.geometry = Geometry::membrane;
        else if (v == 0.5) p.geometry = Geometry::coupled_toroid;
        else throw ConfigError("geometry_factor must be 1 or 0.5", line);
    } else throw ConfigError("unknown key '" + key + "'", line);
}

inline double system_key_value(const SystemParams& p, const std::string& key) {
    if (key == "omega_m_hz") return rad_to_hz(p.omega_m);
    if (key == "chi_hz") return rad_to_hz(p.chi);
    if (key == "gamma_m_hz") return rad_to_hz(p.gamma_m);
    if (key == "gamma_c_hz") return rad_to_hz(p.gamma_c);
    if (key == "g_hz") return rad_to_hz(p.g);
    if (key == "delta_hz") return rad_to_hz(p.delta_drive);
    if (key == "omega_drive_hz") return rad_to_hz(p.drive_abs());
    if (key == "temperature_k") return p.temperature;
    if (key == "geometry_factor") return geometry_factor(p.geometry);
    throw ConfigError("unknown key '" + key + "'");
}

/// Required keys: the five rates. delta, drive and temperature default to 0,
/// geometry_factor to 1.
inline SystemParams system_params_from(const std::vector<KeyValue>& kvs) {
    SystemParams p;
    std::set<std::string> have;
    for (const auto& kv : kvs) {
        apply_system_key(p, kv.key, kv.value, kv.line);
        have.insert(kv.key);
    }
    for (const char* req : {"omega_m_hz", "chi_hz", "gamma_m_hz", "gamma_c_hz", "g_hz"})
        if (!have.count(req)) throw ConfigError(std::string("missing required key '") + req + "'");
    try {
        p.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    return p;
}

inline SystemParams load_system_params(const std::string& path) {
    return system_params_from(read_key_value_file(path));
}

}  // namespace phonolase
