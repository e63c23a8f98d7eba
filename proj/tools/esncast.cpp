// esncast command-line front end.
//
//   esncast run    <config.json>   forecasting exercise on a data manifest
//   esncast bounds <config.json>   Monte-Carlo regret-vs-bound validation
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 validation failure.

#include <optional>
#include <string>

#include <CLI11.hpp>

#include "esncast/app.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Multi-frequency ESN ensemble forecasting and regret validation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "JSON experiment config")->required();
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--out-dir", out_dir, "override the output directory");
        sub->add_option("--threads", threads, "worker threads");
    };

    CLI::App* run = app.add_subcommand("run", "fit ensembles and run the online exercise");
    add_common(run);
    CLI::App* bounds = app.add_subcommand("bounds", "validate empirical regret against bounds");
    add_common(bounds);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : esncast::kExitConfig;
    }

    if (run->parsed()) return esncast::cmd_run(config_path, seed, out_dir, threads);
    return esncast::cmd_bounds(config_path, seed, out_dir, threads);
}
