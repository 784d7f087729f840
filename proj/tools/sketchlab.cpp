#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "sketchlab/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCheckFailed = 4;

void print_usage() {
    std::puts(
        "usage: sketchlab <subcommand> [--config FILE] [--seed N] [--trials N]\n"
        "                 [--threads N] [--out DIR] [--check true] [--key value ...]\n"
        "\n"
        "subcommands:\n"
        "  deviation   Monte-Carlo distribution of the cross-form deviation\n"
        "  scaling     median deviation of summed forms vs batch length\n"
        "  jlt         norm-preservation pass rate at the required sketch size\n"
        "  inner       inner-product preservation over two vector sets\n"
        "  regress     sketched ridge error against the width-based bound\n"
        "  bandit      LinUCB/LinTS and their sketched variants, regret + time\n"
        "  fedsim      sketched distributed GD on a quadratic model\n"
        "  calibrate   grid-search the tail constants, write the fixture file\n"
        "\n"
        "Every run writes results.csv, config.echo.json, plot.svg and check.txt\n"
        "into --out (default ./out). With --check true a failed threshold sets\n"
        "exit code 4.");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace sketchlab;
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        print_usage();
        return args.empty() ? kExitConfig : kExitOk;
    }
    const std::string subcommand = args[0];
    const auto& registry = cli::experiment_registry();
    const auto entry = registry.find(subcommand);
    if (entry == registry.end()) {
        std::fprintf(stderr, "unknown subcommand '%s'\n", subcommand.c_str());
        print_usage();
        return kExitConfig;
    }

    try {
        std::vector<std::pair<std::string, std::string>> flags;
        for (std::size_t i = 1; i < args.size(); i += 2) {
            if (args[i].rfind("--", 0) != 0)
                throw ConfigError("expected --key, got '" + args[i] + "'");
            if (i + 1 >= args.size())
                throw ConfigError("flag '" + args[i] + "' is missing a value");
            flags.emplace_back(args[i].substr(2), args[i + 1]);
        }
        const cli::ExperimentConfig cfg = cli::parse_config(
            subcommand, entry->second.schema, flags, entry->second.default_trials);

        const bool ok = cli::run_experiment(cfg);
        if (!ok) {
            std::fprintf(stderr, "%s: check threshold failed (see %s/check.txt)\n",
                         subcommand.c_str(), cfg.out_dir.c_str());
            return kExitCheckFailed;
        }
        std::printf("%s: wrote %s/results.csv\n", subcommand.c_str(),
                    cfg.out_dir.c_str());
        return kExitOk;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericFailure& e) {
        std::fprintf(stderr, "numeric failure: %s (last value %g)\n", e.what(),
                     e.last_value());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
}
