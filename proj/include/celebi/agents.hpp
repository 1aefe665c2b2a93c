#pragma once

#include <string>
#include <vector>

#include "celebi/ops.hpp"
#include "celebi/optim.hpp"
#include "celebi/rng.hpp"

namespace celebi {

struct ChannelConfig {
    int vocab = 15;
    int length = 10;
    double temperature = 1.0;
};

// What the sender feeds its recurrent cell at each step after the first.
enum class SenderFeedback { PrevSymbol, InputEncoding };

struct AgentConfig {
    int embedding = 64;
    int hidden = 256;
    SenderFeedback feedback = SenderFeedback::PrevSymbol;
};

enum class EncodeMode { Relaxed, Discrete };

// One message: C probability rows over the vocabulary. Relaxed rows live on
// the simplex; discrete rows are exact one-hots.
struct Message {
    int length = 0;
    int vocab = 0;
    std::vector<double> rows;  // length x vocab, row-major

    double at(int step, int symbol) const { return rows[static_cast<std::size_t>(step) * vocab + symbol]; }
};

// per-row argmax, ties broken by lowest index
std::vector<int> message_argmax(const Message& m);
Message message_from_symbols(const std::vector<int>& symbols, int vocab);

struct ReconstructionTrace {
    std::vector<std::vector<double>> reconstructions;  // C entries, obs dim each
    std::vector<double> prefix_mse;                    // filled against a target
};

class Sender {
  public:
    Sender(int obs_dim, const ChannelConfig& channel, const AgentConfig& agent, std::uint64_t init_seed);

    // Re-draws parameter values; Adam state and step counter are untouched.
    void init_weights(std::uint64_t seed);

    // Batched encode: C row tensors of shape [batch, vocab]. Relaxed mode
    // samples the Gumbel-Softmax channel; discrete mode takes the noise-free
    // argmax as exact one-hots.
    std::vector<Tensor> encode(const Tensor& x, double temperature, RngStream& rng, EncodeMode mode) const;

    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    const ChannelConfig& channel() const { return channel_; }
    int obs_dim() const { return obs_dim_; }

    void save(const std::string& path) const { store_.save(path); }
    void load(const std::string& path);

  private:
    void bind_handles();

    int obs_dim_;
    ChannelConfig channel_;
    AgentConfig agent_;
    ParameterStore store_;

    Tensor w_xh_, b_xh_;  // observation -> initial hidden
    LstmParams lstm_;
    Tensor sym_embed_;            // vocab -> embedding (previous-symbol feedback)
    Tensor start_;                // learned start token, [1, embedding]
    Tensor w_xe_, b_xe_;          // observation -> embedding (input-encoding feedback)
    Tensor head_w1_, head_b1_, head_w2_, head_b2_;  // hidden -> hidden -> vocab
};

class Receiver {
  public:
    Receiver(int obs_dim, const ChannelConfig& channel, const AgentConfig& agent, std::uint64_t init_seed);

    void init_weights(std::uint64_t seed);

    // One reconstruction per consumed row; entry i depends on rows 0..i only.
    std::vector<Tensor> decode_progressive(const std::vector<Tensor>& rows) const;

    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    int obs_dim() const { return obs_dim_; }

    void save(const std::string& path) const { store_.save(path); }
    void load(const std::string& path);

  private:
    void bind_handles();

    int obs_dim_;
    ChannelConfig channel_;
    AgentConfig agent_;
    ParameterStore store_;

    Tensor sym_embed_;  // vocab -> embedding
    LstmParams lstm_;
    Tensor head_w1_, head_b1_, head_w2_, head_b2_;  // hidden -> hidden -> obs dim
};

// Single-observation wrappers used by metrics and persistence.
Message sender_encode(const Sender& sender, const std::vector<double>& x, double temperature, RngStream& rng,
                      EncodeMode mode);
ReconstructionTrace receiver_decode_progressive(const Receiver& receiver, const Message& m);

// Fills trace.prefix_mse against a target observation.
void trace_errors(ReconstructionTrace& trace, const std::vector<double>& x);

// Batched noise-free evaluation through the discrete channel.
struct DiscreteEval {
    std::vector<std::vector<int>> symbols;       // per sample: C symbol indices
    std::vector<std::vector<double>> prefix_mse;  // per sample: C errors
};
DiscreteEval evaluate_discrete(const Sender& sender, const Receiver& receiver, const Tensor& x);

}  // namespace celebi
