#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "celebi/agents.hpp"
#include "celebi/metrics.hpp"
#include "celebi/world.hpp"

namespace celebi {

struct EarlyStopConfig {
    double min_delta = 1e-3;
    int patience = 5;
    int start_epoch = 5;
};

// Tracks validation MSE of the final reconstruction; stops after `patience`
// epochs without an improvement of at least `min_delta`, monitoring only from
// `start_epoch` on.
class EarlyStopper {
  public:
    explicit EarlyStopper(const EarlyStopConfig& config) : config_(config) {}

    bool update(double val_mse) {
        ++epoch_;
        if (val_mse < best_ - config_.min_delta) {
            best_ = val_mse;
            bad_ = 0;
        } else if (epoch_ >= config_.start_epoch) {
            ++bad_;
        }
        return bad_ >= config_.patience;
    }

    double best() const { return best_; }

  private:
    EarlyStopConfig config_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_ = 0;
    int epoch_ = 0;
};

struct InteractionConfig {
    double lambda = 1.5;
    bool progressive = true;  // false: plain full-message reconstruction loss
    double learning_rate = 1e-3;
    int batch_size = 256;
    int epochs_per_generation = 1;
    EarlyStopConfig early_stop;
};

enum class ImitationMode { None, Message, FullState, FinalState };
enum class MessageRegularizer { None, Pdm, Koleo };

struct ImitationConfig {
    ImitationMode mode = ImitationMode::FinalState;
    MessageRegularizer regularizer = MessageRegularizer::None;
    double beta = 0.0;
    double learning_rate = 1e-3;
    int batch_size = 512;
};

// ---- losses ----

// (1/C) sum_i lambda^i * MSE(x, trace[i]); lambda >= 1. With progressive off,
// only the full-message reconstruction error.
Tensor interaction_loss(const std::vector<Tensor>& trace, const Tensor& x, double lambda, bool progressive = true);

// mean per-position cross-entropy of student rows against teacher symbols
// (teacher_symbols[t][i] is the symbol of sample i at position t)
Tensor message_imitation_loss(const std::vector<Tensor>& student_rows,
                              const std::vector<std::vector<int>>& teacher_symbols);

Tensor full_state_imitation_loss(const std::vector<Tensor>& teacher_trace, const std::vector<Tensor>& student_trace);
Tensor final_state_imitation_loss(const std::vector<Tensor>& teacher_trace, const std::vector<Tensor>& student_trace);

// mean pairwise per-position cosine similarity of batch messages (diagonal
// included); adding beta times this to the loss pushes messages apart
Tensor pdm_regularizer(const std::vector<Tensor>& message_rows);

// negated nearest-neighbour differential-entropy estimator on flattened
// messages; minimizing spreads the batch
Tensor koleo_regularizer(const std::vector<Tensor>& message_rows);

// value-level helpers for single messages (evaluation and tests)
double pdm_value(const std::vector<Message>& batch);
double koleo_value(const std::vector<Message>& batch);
double interaction_loss_value(const std::vector<double>& per_prefix_mse, double lambda, bool progressive = true);

// ---- world data ----

struct WorldConfig {
    FactorSpace space;
    std::vector<int> embed_dims;
    std::uint64_t seed = 0;
    bool rotate = false;
    double train_fraction = 0.5;
    std::size_t eval_max = 512;  // cap on the metric-evaluation subset
};

struct WorldData {
    GenXConfig genx_config;
    std::vector<FactorVector> train_factors;  // optimisation pool (val held out)
    std::vector<FactorVector> val_factors;    // 10% of the train split
    std::vector<FactorVector> eval_factors;   // metric corpus (test side)
    Tensor train_x;
    Tensor val_x;
    Tensor eval_x;
    int obs_dim = 0;
};

// Splits the lattice with the stream derived from (seed, "split"), holds out
// 10% of train for early stopping validation, and evaluates metrics on the
// test side (the train side when the test set is empty), capped at eval_max.
WorldData make_world_data(const WorldConfig& config, std::uint64_t run_seed);

// ---- generation loop ----

struct GenerationState {
    GenerationState(const WorldData& world, const ChannelConfig& channel, const AgentConfig& agent,
                    std::uint64_t seed);

    int generation = 0;
    Sender teacher;
    Receiver receiver;
    Sender student;
    AdamConfig teacher_adam;
    AdamConfig receiver_adam;
    AdamConfig student_adam;
};

struct ProtocolAudit {
    int imitation_phases = 0;
    int receiver_freeze_violations = 0;
    int teacher_freeze_violations = 0;
    int handoffs = 0;
    int handoff_mismatches = 0;
    int optimizer_state_violations = 0;

    bool clean() const {
        return receiver_freeze_violations == 0 && teacher_freeze_violations == 0 && handoff_mismatches == 0 &&
               optimizer_state_violations == 0;
    }
};

struct PhaseStats {
    double mean_loss = 0.0;
    double val_mse = 0.0;
    int batches = 0;
};

PhaseStats run_interaction_phase(GenerationState& gen, const WorldData& world, const InteractionConfig& config,
                                 double temperature, RngStream& rng);

PhaseStats run_imitation_phase(GenerationState& gen, const WorldData& world, const ImitationConfig& config,
                               double temperature, RngStream& rng, ProtocolAudit* audit);

// Copies student weights into the teacher slot bit-exactly and re-draws the
// student from a generation-derived seed. Optimizer states stay put.
void generation_handoff(GenerationState& gen, std::uint64_t run_seed, ProtocolAudit* audit);

struct RunLogRow {
    std::string run_id;
    std::uint64_t seed = 0;
    int generation = 0;
    std::string phase;
    int epoch = 0;
    double loss = 0.0;
    double topsim = 0.0;
    double useful_length = 0.0;
    double mse = 0.0;
    double seconds = 0.0;
};

struct RunLog {
    std::vector<RunLogRow> rows;
    void append(RunLogRow row);  // enforces a monotone epoch counter
};

inline constexpr const char* kRunLogHeader = "run_id,seed,generation,phase,epoch,loss,topsim,useful_length,mse,seconds";

struct MetricsConfig {
    std::optional<double> epsilon;  // empty: plateau rule on the loss curve
    std::size_t max_pairs = 1'000'000;
};

struct RunResult {
    RunLog log;
    ProtocolAudit audit;
    MessageCorpus corpus;                     // final evaluation corpus
    MetricReport report;                      // final metrics
    std::vector<double> position_curve;       // final mean per-prefix MSE
    int generations_run = 0;
    bool early_stopped = false;
    bool numeric_abort = false;               // rolled back to the last good generation
    std::unique_ptr<GenerationState> state;   // final (or last good) agents
};

// Alternating interaction/imitation over the given number of generations.
// Early stopping (validation MSE of the final reconstruction) halts the whole
// loop. With ImitationMode::None this reduces to plain training. A NaN or
// overflow during a phase rolls the agents back to the end of the previous
// generation and flags numeric_abort.
RunResult run_iterated_learning(const WorldData& world, const ChannelConfig& channel, const AgentConfig& agent,
                                const InteractionConfig& interaction, const ImitationConfig& imitation,
                                int generations, std::uint64_t seed, const MetricsConfig& metrics,
                                const std::string& run_id,
                                const std::function<void(const RunLogRow&)>& on_row = {});

}  // namespace celebi
