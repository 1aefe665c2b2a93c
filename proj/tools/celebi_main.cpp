#include <CLI11.hpp>

#include "celebi/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"CELEBI lab: sender/receiver reconstruction games with iterated learning"};
    app.require_subcommand(1);

    celebi::CliOptions options;
    std::vector<std::string> seed_list;
    std::string out_dir;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", options.config_path, "experiment config file")->required();
        cmd->add_option("--set", options.overrides, "override a config key, e.g. --set channel.vocab=15");
        cmd->add_option("--seeds", seed_list, "comma-separated seed list")->delimiter(',');
        cmd->add_option("--out", out_dir, "output directory (default from config or CELEBI_OUT)");
        cmd->add_option("--jobs", options.jobs, "parallel seed workers")->check(CLI::PositiveNumber);
        cmd->add_flag("--force", options.force, "rerun seeds already completed for this config");
    };

    auto* train = app.add_subcommand("train", "run the configured experiment across its seeds");
    add_common(train);

    auto* ablate = app.add_subcommand("ablate", "run the seven-variant ablation grid");
    add_common(ablate);

    auto* sweep = app.add_subcommand("sweep-lambda", "sweep the expressivity weight");
    add_common(sweep);
    std::vector<double> lambdas;
    sweep->add_option("--lambdas", lambdas, "lambda values, e.g. --lambdas 1,1.5,2,4")->delimiter(',');

    auto* verify = app.add_subcommand("verify", "check the coverage, entropy, NT-Xent and imitation bounds");
    celebi::VerifyOptions verify_options;
    verify->add_option("--grid", verify_options.grid_path, "grid spec file (seed, bound_scale, out)");
    verify->add_option("--seed", verify_options.seed, "verification seed");
    verify->add_option("--bound-scale", verify_options.bound_scale, "scale every bound (negative control)");
    verify->add_option("--out-csv", verify_options.out_csv, "write one result row per check");

    auto* report = app.add_subcommand("report", "merge metric reports from finished run directories");
    std::vector<std::string> run_dirs;
    std::string report_out = "report";
    report->add_option("dirs", run_dirs, "run directories")->required();
    report->add_option("--out", report_out, "report output directory");

    CLI11_PARSE(app, argc, argv);

    auto finalize_common = [&]() {
        if (!seed_list.empty()) {
            std::vector<std::uint64_t> seeds;
            for (const auto& s : seed_list) seeds.push_back(std::stoull(s));
            options.seeds = seeds;
        }
        if (!out_dir.empty()) options.out_dir = out_dir;
    };

    try {
        if (train->parsed()) {
            finalize_common();
            return celebi::cmd_train(options);
        }
        if (ablate->parsed()) {
            finalize_common();
            return celebi::cmd_ablate(options);
        }
        if (sweep->parsed()) {
            finalize_common();
            return celebi::cmd_sweep_lambda(options, lambdas);
        }
        if (verify->parsed()) return celebi::cmd_verify(verify_options);
        if (report->parsed()) return celebi::cmd_report(run_dirs, report_out);
    } catch (const celebi::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return celebi::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return celebi::kExitNumeric;
    }
    return celebi::kExitOk;
}
