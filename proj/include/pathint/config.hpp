#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathint/errors.hpp"
#include "pathint/io.hpp"
#include "pathint/version.hpp"

namespace pathint {

/// Sectioned key = value text configuration with line anchoring for errors.
/// '#' and ';' start comments; keys are unique within a section.
class ConfigFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };

    static ConfigFile parse(const std::string& text, const std::string& origin) {
        ConfigFile cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        std::string section = "run";
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t comment = line.find_first_of("#;");
            if (comment != std::string::npos) line = line.substr(0, comment);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section");
                continue;
            }
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            auto& sec = cfg.sections_[section];
            if (sec.count(key))
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                                  key + "' in [" + section + "]");
            sec[key] = Entry{value, lineno, false};
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        return parse(read_text_file(path), path);
    }

    const Entry* find(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        if (s == sections_.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    /// Every key must have been consumed by the schema; leftovers are errors.
    void reject_unknown() const {
        for (const auto& [section, entries] : sections_) {
            for (const auto& [key, entry] : entries) {
                if (!entry.used)
                    throw ConfigError(origin_ + ":" + std::to_string(entry.line) +
                                      ": unknown key '" + key + "' in [" + section + "]");
            }
        }
    }

    const std::string& origin() const { return origin_; }

private:
    static std::string trim(const std::string& s) {
        const size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        const size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    std::string origin_;
    std::map<std::string, std::map<std::string, Entry>> sections_;
};

/// Fully resolved run configuration. Values are kept as strings (the manifest
/// serializes them verbatim, so a replay resolves to identical numbers).
struct RunConfig {
    std::string experiment;
    std::map<std::string, std::map<std::string, std::string>> values;

    const std::string* find(const std::string& section, const std::string& key) const {
        auto s = values.find(section);
        if (s == values.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const {
        const std::string* v = find(section, key);
        return v ? *v : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        const std::string* v = find(section, key);
        if (!v) throw ConfigError("missing [" + section + "] " + key);
        return parse_double(section, key, *v);
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        const std::string* v = find(section, key);
        return v ? parse_double(section, key, *v) : fallback;
    }

    long long get_int(const std::string& section, const std::string& key,
                      long long fallback) const {
        const std::string* v = find(section, key);
        if (!v) return fallback;
        try {
            size_t pos = 0;
            const long long out = std::stoll(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("trailing");
            return out;
        } catch (const std::exception&) {
            throw ConfigError("[" + section + "] " + key + ": not an integer: '" + *v + "'");
        }
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const {
        const std::string* v = find(section, key);
        if (!v) return fallback;
        try {
            size_t pos = 0;
            const std::uint64_t out = std::stoull(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("trailing");
            return out;
        } catch (const std::exception&) {
            throw ConfigError("[" + section + "] " + key + ": not an unsigned integer");
        }
    }

    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 const std::string& fallback) const {
        const std::string text = get(section, key, fallback);
        std::vector<double> out;
        std::istringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ','))
            out.push_back(parse_double(section, key, item));
        if (out.empty()) throw ConfigError("[" + section + "] " + key + ": empty list");
        return out;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        values[section][key] = value;
    }

    nlohmann::json to_manifest() const {
        nlohmann::json j;
        j["library_version"] = PATHINT_VERSION;
        j["experiment"] = experiment;
        j["config"] = values;
        return j;
    }

    static RunConfig from_manifest(const nlohmann::json& j) {
        RunConfig cfg;
        if (!j.contains("experiment") || !j.contains("config"))
            throw ConfigError("manifest: missing 'experiment' or 'config'");
        cfg.experiment = j["experiment"].get<std::string>();
        for (const auto& [section, entries] : j["config"].items())
            for (const auto& [key, value] : entries.items())
                cfg.values[section][key] = value.get<std::string>();
        return cfg;
    }

private:
    static double parse_double(const std::string& section, const std::string& key,
                               const std::string& text) {
        try {
            size_t pos = 0;
            const double out = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing");
            return out;
        } catch (const std::exception&) {
            throw ConfigError("[" + section + "] " + key + ": not a number: '" + text + "'");
        }
    }
};

/// Allowed keys per experiment; consuming the config through this table is
/// what rejects unknown keys with their line numbers.
inline const std::map<std::string, std::set<std::string>>& config_schema(
    const std::string& experiment) {
    static const std::map<std::string, std::set<std::string>> common = {
        {"run", {"experiment", "seed", "samples", "out", "workers"}},
        {"manifold", {"kind", "dim", "radius", "curvature", "periods"}},
    };
    static std::map<std::string, std::map<std::string, std::set<std::string>>> per_exp = [] {
        std::map<std::string, std::map<std::string, std::set<std::string>>> m;
        m["simulate"] = {{"experiment", {"horizon", "steps", "paths_out"}}};
        m["converge"] = {{"experiment",
                          {"horizon", "kind", "partitions", "center", "radius", "amplitude",
                           "times", "resolution"}}};
        m["ibp-check"] = {{"experiment",
                           {"horizon", "steps", "center", "radius", "amplitude", "h", "h_mode",
                            "h_amplitude"}}};
        m["trichotomy"] = {{"experiment", {"horizons", "mesh"}}};
        m["heat-kernel-check"] = {{"experiment", {"time", "resolution"}}};
        m["free-path"] = {{"experiment",
                           {"horizon", "kind", "segments", "steps", "atoms", "weights", "center",
                            "radius", "amplitude", "times"}}};
        return m;
    }();
    static std::map<std::string, std::map<std::string, std::set<std::string>>> merged = [] {
        std::map<std::string, std::map<std::string, std::set<std::string>>> m;
        for (const auto& [exp, extra] : per_exp) {
            auto full = common;
            for (const auto& [sec, keys] : extra) full[sec].insert(keys.begin(), keys.end());
            m[exp] = full;
        }
        return m;
    }();
    auto it = merged.find(experiment);
    if (it == merged.end()) throw ConfigError("unknown experiment '" + experiment + "'");
    return it->second;
}

/// Build the resolved config: file values validated against the schema, then
/// command-line overrides applied on top.
inline RunConfig resolve_config(const std::string& experiment, const ConfigFile* file,
                                const std::map<std::string, std::string>& overrides) {
    const auto& schema = config_schema(experiment);
    RunConfig cfg;
    cfg.experiment = experiment;
    if (file) {
        for (const auto& [section, keys] : schema)
            for (const std::string& key : keys)
                if (const ConfigFile::Entry* e = file->find(section, key))
                    cfg.set(section, key, e->value);
        if (const ConfigFile::Entry* e = file->find("run", "experiment")) {
            if (e->value != experiment)
                throw ConfigError(file->origin() + ":" + std::to_string(e->line) +
                                  ": config is for experiment '" + e->value +
                                  "', invoked as '" + experiment + "'");
        }
        file->reject_unknown();
    }
    for (const auto& [key, value] : overrides) cfg.set("run", key, value);
    cfg.set("run", "experiment", experiment);
    return cfg;
}

}  // namespace pathint
