#pragma once

#include <optional>
#include <string>
#include <vector>

#include "celebi/config.hpp"
#include "celebi/metrics.hpp"

namespace celebi {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitVerify = 4;

struct CliOptions {
    std::string config_path;
    std::vector<std::string> overrides;               // --set key=value
    std::optional<std::string> out_dir;               // --out (or CELEBI_OUT)
    std::optional<std::vector<std::uint64_t>> seeds;  // --seeds
    int jobs = 1;
    bool force = false;  // rerun seeds already marked done for this config
};

// config file + --set overrides + --seeds/--out substitutions + CELEBI_OUT
ExperimentConfig resolve_config(const CliOptions& options);

struct SeedRunOutput {
    std::uint64_t seed = 0;
    MetricReport report;
    std::vector<double> position_curve;
    bool numeric_abort = false;
    bool early_stopped = false;
    int generations_run = 0;
    std::string corpus_path;
    bool loaded_from_disk = false;  // rerun detected, outputs reused
};

// Runs every seed of one configuration into out_dir (run logs, corpora,
// metric reports, checkpoints, manifest). Seeds already completed for the
// same config hash are loaded back instead of rerun unless force is set.
std::vector<SeedRunOutput> run_config(const ExperimentConfig& config, const std::string& out_dir, int jobs,
                                      bool force = false);

int cmd_train(const CliOptions& options);
int cmd_ablate(const CliOptions& options);
int cmd_sweep_lambda(const CliOptions& options, std::vector<double> lambdas);

struct VerifyOptions {
    std::string grid_path;  // optional key=value file: seed, bound_scale, out
    std::uint64_t seed = 20240901;
    double bound_scale = 1.0;
    std::string out_csv;
};
int cmd_verify(VerifyOptions options);

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace celebi
