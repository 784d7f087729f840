#pragma once

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

namespace sketchlab::cli {

/// Calibrated constants produced by the `calibrate` subcommand. The tail
/// theorems leave their absolute constants unspecified, so each distribution
/// kind carries its own (c1, c2) pair picked by a pre-registered grid search;
/// defaults below are used when no fixture file is present.
struct Fixtures {
    double gaussian_c1 = 1.0;
    double gaussian_c2 = 1.0 / 64.0;
    double rademacher_c1 = 1.0;
    double rademacher_c2 = 1.0 / 64.0;
    double hanson_wright_c = 0.125;
    double fed_sketch_c = 2.0;
    double c_width = 1.0;
    // Per-experiment pass thresholds (mirrored as schema defaults).
    double jlt_min_pass_rate = 0.95;
    double inner_min_pass_rate = 0.90;
    double regress_min_coverage = 0.95;
    double scaling_slope_lo = 0.4;
    double scaling_slope_hi = 0.6;
    double fed_slope_tol = 0.3;
    double fed_min_r2 = 0.95;

    static Fixtures load(const std::string& path) {
        Fixtures f;
        std::ifstream in(path);
        if (!in) return f;
        nlohmann::json j;
        in >> j;
        auto pick = [&](const char* key, double& slot) {
            if (j.contains(key)) slot = j[key].get<double>();
        };
        pick("gaussian_c1", f.gaussian_c1);
        pick("gaussian_c2", f.gaussian_c2);
        pick("rademacher_c1", f.rademacher_c1);
        pick("rademacher_c2", f.rademacher_c2);
        pick("hanson_wright_c", f.hanson_wright_c);
        pick("fed_sketch_c", f.fed_sketch_c);
        pick("c_width", f.c_width);
        pick("jlt_min_pass_rate", f.jlt_min_pass_rate);
        pick("inner_min_pass_rate", f.inner_min_pass_rate);
        pick("regress_min_coverage", f.regress_min_coverage);
        pick("scaling_slope_lo", f.scaling_slope_lo);
        pick("scaling_slope_hi", f.scaling_slope_hi);
        pick("fed_slope_tol", f.fed_slope_tol);
        pick("fed_min_r2", f.fed_min_r2);
        return f;
    }

    /// Resolution order: $SKETCHLAB_FIXTURES, then the repo fixture path
    /// baked in at configure time, then built-in defaults.
    static Fixtures load_default() {
        if (const char* env = std::getenv("SKETCHLAB_FIXTURES")) return load(env);
#ifdef SKETCHLAB_FIXTURE_PATH
        return load(SKETCHLAB_FIXTURE_PATH);
#else
        return Fixtures{};
#endif
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["gaussian_c1"] = gaussian_c1;
        j["gaussian_c2"] = gaussian_c2;
        j["rademacher_c1"] = rademacher_c1;
        j["rademacher_c2"] = rademacher_c2;
        j["hanson_wright_c"] = hanson_wright_c;
        j["fed_sketch_c"] = fed_sketch_c;
        j["c_width"] = c_width;
        j["jlt_min_pass_rate"] = jlt_min_pass_rate;
        j["inner_min_pass_rate"] = inner_min_pass_rate;
        j["regress_min_coverage"] = regress_min_coverage;
        j["scaling_slope_lo"] = scaling_slope_lo;
        j["scaling_slope_hi"] = scaling_slope_hi;
        j["fed_slope_tol"] = fed_slope_tol;
        j["fed_min_r2"] = fed_min_r2;
        return j;
    }
};

}  // namespace sketchlab::cli
