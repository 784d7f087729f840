#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sketchlab/errors.hpp"
#include "sketchlab/parallel.hpp"

namespace sketchlab::cli {

using Json = nlohmann::json;
using ParamValue = std::variant<std::int64_t, double, bool, std::string>;

/// Declares one experiment-specific parameter: its type tag and default.
struct ParamSpec {
    ParamValue default_value;
};

using ParamSchema = std::map<std::string, ParamSpec>;

/// Resolved run configuration: common knobs plus the experiment's flat
/// parameter map. Unknown keys are rejected at parse time.
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    std::int64_t trials = 1;
    unsigned threads = 1;
    std::string out_dir = "out";
    bool check = false;  // exit 4 when a pass threshold fails
    std::map<std::string, ParamValue> params;

    std::int64_t get_int(const std::string& key) const {
        return std::get<std::int64_t>(params.at(key));
    }
    double get_double(const std::string& key) const {
        const auto& v = params.at(key);
        if (std::holds_alternative<std::int64_t>(v))
            return static_cast<double>(std::get<std::int64_t>(v));
        return std::get<double>(v);
    }
    bool get_bool(const std::string& key) const {
        return std::get<bool>(params.at(key));
    }
    std::string get_string(const std::string& key) const {
        return std::get<std::string>(params.at(key));
    }

    Json echo() const {
        Json j;
        j["experiment"] = experiment;
        j["seed"] = seed;
        j["trials"] = trials;
        j["threads"] = threads;
        j["out"] = out_dir;
        j["check"] = check;
        for (const auto& [k, v] : params) {
            if (std::holds_alternative<std::int64_t>(v)) j[k] = std::get<std::int64_t>(v);
            else if (std::holds_alternative<double>(v)) j[k] = std::get<double>(v);
            else if (std::holds_alternative<bool>(v)) j[k] = std::get<bool>(v);
            else j[k] = std::get<std::string>(v);
        }
        return j;
    }
};

namespace detail {

inline ParamValue coerce(const std::string& key, const ParamValue& slot,
                         const Json& raw) {
    if (std::holds_alternative<std::int64_t>(slot)) {
        if (raw.is_number_integer()) return raw.get<std::int64_t>();
        throw ConfigError("config key '" + key + "': expected integer");
    }
    if (std::holds_alternative<double>(slot)) {
        if (raw.is_number()) return raw.get<double>();
        throw ConfigError("config key '" + key + "': expected number");
    }
    if (std::holds_alternative<bool>(slot)) {
        if (raw.is_boolean()) return raw.get<bool>();
        throw ConfigError("config key '" + key + "': expected boolean");
    }
    if (raw.is_string()) return raw.get<std::string>();
    throw ConfigError("config key '" + key + "': expected string");
}

inline ParamValue coerce_text(const std::string& key, const ParamValue& slot,
                              const std::string& text) {
    try {
        if (std::holds_alternative<std::int64_t>(slot))
            return static_cast<std::int64_t>(std::stoll(text));
        if (std::holds_alternative<double>(slot)) return std::stod(text);
        if (std::holds_alternative<bool>(slot)) {
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw ConfigError("config key '" + key + "': expected boolean");
        }
        return text;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    }
}

}  // namespace detail

/// Builds the resolved config for `experiment` from an optional JSON file and
/// `--key value` flag pairs (flags override the file). Every key must be a
/// common knob or appear in the experiment's schema.
inline ExperimentConfig parse_config(
    const std::string& experiment, const ParamSchema& schema,
    const std::vector<std::pair<std::string, std::string>>& flags,
    std::int64_t default_trials = 1) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    cfg.trials = default_trials;
    cfg.threads = hardware_threads();
    for (const auto& [key, spec] : schema) cfg.params[key] = spec.default_value;

    Json file_json;
    for (const auto& [key, value] : flags) {
        if (key == "config") {
            std::ifstream in(value);
            if (!in) throw ConfigError("config file not found: " + value);
            try {
                in >> file_json;
            } catch (const std::exception& e) {
                throw ConfigError(std::string("config file parse error: ") + e.what());
            }
            if (!file_json.is_object())
                throw ConfigError("config file must hold a flat JSON object");
        }
    }

    auto apply = [&](const std::string& key, const Json& raw,
                     const std::string& text, bool from_file) {
        if (key == "experiment") {
            const std::string want = from_file ? raw.get<std::string>() : text;
            if (want != experiment)
                throw ConfigError("config experiment '" + want +
                                  "' does not match subcommand '" + experiment + "'");
            return;
        }
        if (key == "seed") {
            cfg.seed = from_file ? raw.get<std::uint64_t>()
                                 : static_cast<std::uint64_t>(std::stoull(text));
            return;
        }
        if (key == "trials") {
            cfg.trials = from_file ? raw.get<std::int64_t>() : std::stoll(text);
            if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
            return;
        }
        if (key == "threads") {
            const std::int64_t n = from_file ? raw.get<std::int64_t>() : std::stoll(text);
            if (n < 1) throw ConfigError("threads must be >= 1");
            cfg.threads = static_cast<unsigned>(n);
            return;
        }
        if (key == "out") {
            cfg.out_dir = from_file ? raw.get<std::string>() : text;
            return;
        }
        if (key == "check") {
            cfg.check = from_file ? raw.get<bool>() : (text == "true" || text == "1");
            return;
        }
        const auto it = cfg.params.find(key);
        if (it == cfg.params.end())
            throw ConfigError("unknown config key '" + key + "' for experiment '" +
                              experiment + "'");
        it->second = from_file ? detail::coerce(key, it->second, raw)
                               : detail::coerce_text(key, it->second, text);
    };

    if (file_json.is_object())
        for (const auto& [key, raw] : file_json.items()) apply(key, raw, "", true);
    for (const auto& [key, value] : flags) {
        if (key == "config") continue;
        try {
            apply(key, Json{}, value, false);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("bad value for --" + key + ": '" + value + "'");
        }
    }
    return cfg;
}

/// Writes the resolved config next to the run's outputs.
inline void echo_config(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/config.echo.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config echo");
    out << cfg.echo().dump(2) << "\n";
}

}  // namespace sketchlab::cli
