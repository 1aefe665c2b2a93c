#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "celebi/agents.hpp"
#include "celebi/training.hpp"

namespace celebi {

// One experiment: world, channel, agents, both phase configs, seeds and
// output. Parsed from a dotted key=value file; unknown keys are rejected.
struct ExperimentConfig {
    // world
    std::vector<int> factors{6, 6, 6, 6};
    std::vector<int> embed_dims{8, 8, 8, 8};
    std::uint64_t world_seed = 7;
    bool rotate = false;
    double train_fraction = 0.25;
    std::size_t eval_max = 512;

    // channel
    int vocab = 10;
    int length = 8;
    double temperature = 1.0;

    // agents
    int embedding = 32;
    int hidden = 64;
    SenderFeedback feedback = SenderFeedback::PrevSymbol;

    InteractionConfig interaction;
    ImitationConfig imitation;

    // run
    int generations = 30;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "runs/default";

    // metrics
    std::optional<double> epsilon;  // empty: plateau rule
    std::size_t max_pairs = 1'000'000;

    WorldConfig world_config() const;
    ChannelConfig channel_config() const;
    AgentConfig agent_config() const;
    MetricsConfig metrics_config() const;
    void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides = {});
void apply_override(ExperimentConfig& config, const std::string& key, const std::string& value);

// sorted key=value rendering of the effective config; hashing it identifies
// reruns
std::string canonical_config(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace celebi
