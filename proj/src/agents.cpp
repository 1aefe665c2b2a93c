#include "celebi/agents.hpp"

#include <cmath>

namespace celebi {

namespace {

void fill_uniform(Tensor t, double bound, RngStream& rng) {
    for (auto& v : t.mutable_values()) v = rng.uniform(-bound, bound);
}

// noise-free exact one-hot rows from logits, ties to the lowest index
Tensor onehot_argmax(const Tensor& logits) {
    const std::size_t b = logits.shape()[0], v = logits.shape()[1];
    std::vector<double> out(b * v, 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = logits.data() + i * v;
        std::size_t best = 0;
        for (std::size_t j = 1; j < v; ++j)
            if (row[j] > row[best]) best = j;
        out[i * v + best] = 1.0;
    }
    return Tensor::from({b, v}, std::move(out), false);
}

}  // namespace

std::vector<int> message_argmax(const Message& m) {
    std::vector<int> out(m.length);
    for (int t = 0; t < m.length; ++t) {
        int best = 0;
        for (int j = 1; j < m.vocab; ++j)
            if (m.at(t, j) > m.at(t, best)) best = j;
        out[t] = best;
    }
    return out;
}

Message message_from_symbols(const std::vector<int>& symbols, int vocab) {
    Message m;
    m.length = static_cast<int>(symbols.size());
    m.vocab = vocab;
    m.rows.assign(static_cast<std::size_t>(m.length) * vocab, 0.0);
    for (int t = 0; t < m.length; ++t) {
        check(symbols[t] >= 0 && symbols[t] < vocab, "message_from_symbols: symbol out of range");
        m.rows[static_cast<std::size_t>(t) * vocab + symbols[t]] = 1.0;
    }
    return m;
}

Sender::Sender(int obs_dim, const ChannelConfig& channel, const AgentConfig& agent, std::uint64_t init_seed)
    : obs_dim_(obs_dim), channel_(channel), agent_(agent) {
    check(obs_dim >= 1 && channel.vocab >= 2 && channel.length >= 1, "Sender: bad dimensions");
    const auto e = static_cast<std::size_t>(agent_.embedding);
    const auto h = static_cast<std::size_t>(agent_.hidden);
    const auto v = static_cast<std::size_t>(channel_.vocab);
    const auto d = static_cast<std::size_t>(obs_dim_);

    store_.create("w_xh", {d, h});
    store_.create("b_xh", {h});
    store_.create("lstm_w_ih", {e, 4 * h});
    store_.create("lstm_w_hh", {h, 4 * h});
    store_.create("lstm_b", {4 * h});
    store_.create("sym_embed", {v, e});
    store_.create("start", {1, e});
    store_.create("w_xe", {d, e});
    store_.create("b_xe", {e});
    store_.create("head_w1", {h, h});
    store_.create("head_b1", {h});
    store_.create("head_w2", {h, v});
    store_.create("head_b2", {v});
    bind_handles();
    init_weights(init_seed);
}

void Sender::bind_handles() {
    w_xh_ = store_.get("w_xh");
    b_xh_ = store_.get("b_xh");
    lstm_ = {store_.get("lstm_w_ih"), store_.get("lstm_w_hh"), store_.get("lstm_b")};
    sym_embed_ = store_.get("sym_embed");
    start_ = store_.get("start");
    w_xe_ = store_.get("w_xe");
    b_xe_ = store_.get("b_xe");
    head_w1_ = store_.get("head_w1");
    head_b1_ = store_.get("head_b1");
    head_w2_ = store_.get("head_w2");
    head_b2_ = store_.get("head_b2");
}

void Sender::init_weights(std::uint64_t seed) {
    RngStream rng = RngStream::derive(seed, "sender-init");
    const double kx = 1.0 / std::sqrt(static_cast<double>(obs_dim_));
    const double ke = 1.0 / std::sqrt(static_cast<double>(agent_.embedding));
    const double kh = 1.0 / std::sqrt(static_cast<double>(agent_.hidden));
    fill_uniform(w_xh_, kx, rng);
    fill_uniform(b_xh_, kh, rng);
    fill_uniform(lstm_.w_ih, kh, rng);
    fill_uniform(lstm_.w_hh, kh, rng);
    fill_uniform(lstm_.bias, kh, rng);
    fill_uniform(sym_embed_, ke, rng);
    fill_uniform(start_, ke, rng);
    fill_uniform(w_xe_, kx, rng);
    fill_uniform(b_xe_, ke, rng);
    fill_uniform(head_w1_, kh, rng);
    fill_uniform(head_b1_, kh, rng);
    fill_uniform(head_w2_, kh, rng);
    fill_uniform(head_b2_, kh, rng);
}

void Sender::load(const std::string& path) {
    store_.load(path);
    bind_handles();
}

std::vector<Tensor> Sender::encode(const Tensor& x, double temperature, RngStream& rng, EncodeMode mode) const {
    check(x.shape().size() == 2 && x.shape()[1] == static_cast<std::size_t>(obs_dim_),
          "Sender::encode: observations must be [batch, obs_dim]");
    const std::size_t batch = x.shape()[0];
    const auto h = static_cast<std::size_t>(agent_.hidden);

    LstmState state{tanh_op(affine(x, w_xh_, b_xh_)), Tensor::zeros({batch, h})};
    Tensor input = agent_.feedback == SenderFeedback::PrevSymbol ? broadcast_row(start_, batch)
                                                                 : affine(x, w_xe_, b_xe_);
    std::vector<Tensor> rows;
    rows.reserve(channel_.length);
    for (int t = 0; t < channel_.length; ++t) {
        state = lstm_cell(input, state, lstm_);
        Tensor logits = affine(relu(affine(state.h, head_w1_, head_b1_)), head_w2_, head_b2_);
        Tensor row = mode == EncodeMode::Relaxed ? gumbel_softmax_sample(logits, temperature, rng)
                                                 : onehot_argmax(logits);
        rows.push_back(row);
        if (t + 1 < channel_.length && agent_.feedback == SenderFeedback::PrevSymbol)
            input = matmul(row, sym_embed_);
    }
    return rows;
}

Receiver::Receiver(int obs_dim, const ChannelConfig& channel, const AgentConfig& agent, std::uint64_t init_seed)
    : obs_dim_(obs_dim), channel_(channel), agent_(agent) {
    check(obs_dim >= 1 && channel.vocab >= 2 && channel.length >= 1, "Receiver: bad dimensions");
    const auto e = static_cast<std::size_t>(agent_.embedding);
    const auto h = static_cast<std::size_t>(agent_.hidden);
    const auto v = static_cast<std::size_t>(channel_.vocab);
    const auto d = static_cast<std::size_t>(obs_dim_);

    store_.create("sym_embed", {v, e});
    store_.create("lstm_w_ih", {e, 4 * h});
    store_.create("lstm_w_hh", {h, 4 * h});
    store_.create("lstm_b", {4 * h});
    store_.create("head_w1", {h, h});
    store_.create("head_b1", {h});
    store_.create("head_w2", {h, d});
    store_.create("head_b2", {d});
    bind_handles();
    init_weights(init_seed);
}

void Receiver::bind_handles() {
    sym_embed_ = store_.get("sym_embed");
    lstm_ = {store_.get("lstm_w_ih"), store_.get("lstm_w_hh"), store_.get("lstm_b")};
    head_w1_ = store_.get("head_w1");
    head_b1_ = store_.get("head_b1");
    head_w2_ = store_.get("head_w2");
    head_b2_ = store_.get("head_b2");
}

void Receiver::init_weights(std::uint64_t seed) {
    RngStream rng = RngStream::derive(seed, "receiver-init");
    const double ke = 1.0 / std::sqrt(static_cast<double>(agent_.embedding));
    const double kh = 1.0 / std::sqrt(static_cast<double>(agent_.hidden));
    fill_uniform(sym_embed_, ke, rng);
    fill_uniform(lstm_.w_ih, kh, rng);
    fill_uniform(lstm_.w_hh, kh, rng);
    fill_uniform(lstm_.bias, kh, rng);
    fill_uniform(head_w1_, kh, rng);
    fill_uniform(head_b1_, kh, rng);
    fill_uniform(head_w2_, kh, rng);
    fill_uniform(head_b2_, kh, rng);
}

void Receiver::load(const std::string& path) {
    store_.load(path);
    bind_handles();
}

std::vector<Tensor> Receiver::decode_progressive(const std::vector<Tensor>& rows) const {
    check(!rows.empty(), "Receiver::decode_progressive: empty message");
    const std::size_t batch = rows[0].shape()[0];
    const auto h = static_cast<std::size_t>(agent_.hidden);

    LstmState state{Tensor::zeros({batch, h}), Tensor::zeros({batch, h})};
    std::vector<Tensor> trace;
    trace.reserve(rows.size());
    for (const auto& row : rows) {
        check(row.shape()[0] == batch && row.shape()[1] == static_cast<std::size_t>(channel_.vocab),
              "Receiver::decode_progressive: row shape mismatch");
        state = lstm_cell(matmul(row, sym_embed_), state, lstm_);
        trace.push_back(affine(relu(affine(state.h, head_w1_, head_b1_)), head_w2_, head_b2_));
    }
    return trace;
}

Message sender_encode(const Sender& sender, const std::vector<double>& x, double temperature, RngStream& rng,
                      EncodeMode mode) {
    NoGradGuard eval;
    Tensor xb = Tensor::from({1, x.size()}, x, false);
    auto rows = sender.encode(xb, temperature, rng, mode);
    Message m;
    m.length = static_cast<int>(rows.size());
    m.vocab = static_cast<int>(rows[0].shape()[1]);
    m.rows.reserve(static_cast<std::size_t>(m.length) * m.vocab);
    for (const auto& row : rows) m.rows.insert(m.rows.end(), row.values().begin(), row.values().end());
    return m;
}

ReconstructionTrace receiver_decode_progressive(const Receiver& receiver, const Message& m) {
    NoGradGuard eval;
    std::vector<Tensor> rows;
    rows.reserve(m.length);
    for (int t = 0; t < m.length; ++t) {
        std::vector<double> row(m.rows.begin() + static_cast<std::ptrdiff_t>(t) * m.vocab,
                                m.rows.begin() + static_cast<std::ptrdiff_t>(t + 1) * m.vocab);
        rows.push_back(Tensor::from({1, static_cast<std::size_t>(m.vocab)}, std::move(row), false));
    }
    auto trace_tensors = receiver.decode_progressive(rows);
    ReconstructionTrace trace;
    trace.reconstructions.reserve(trace_tensors.size());
    for (const auto& t : trace_tensors) trace.reconstructions.push_back(t.values());
    return trace;
}

void trace_errors(ReconstructionTrace& trace, const std::vector<double>& x) {
    trace.prefix_mse.clear();
    for (const auto& recon : trace.reconstructions) {
        check(recon.size() == x.size(), "trace_errors: dimension mismatch");
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = recon[i] - x[i];
            acc += d * d;
        }
        trace.prefix_mse.push_back(acc / static_cast<double>(x.size()));
    }
}

DiscreteEval evaluate_discrete(const Sender& sender, const Receiver& receiver, const Tensor& x) {
    NoGradGuard eval;
    RngStream unused(0);
    auto rows = sender.encode(x, 1.0, unused, EncodeMode::Discrete);
    auto trace = receiver.decode_progressive(rows);

    const std::size_t batch = x.shape()[0];
    const std::size_t d = x.shape()[1];
    const std::size_t v = rows[0].shape()[1];
    DiscreteEval out;
    out.symbols.assign(batch, std::vector<int>(rows.size()));
    out.prefix_mse.assign(batch, std::vector<double>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        const double* rv = rows[t].data();
        const double* tv = trace[t].data();
        for (std::size_t i = 0; i < batch; ++i) {
            int best = 0;
            for (std::size_t j = 1; j < v; ++j)
                if (rv[i * v + j] > rv[i * v + best]) best = static_cast<int>(j);
            out.symbols[i][t] = best;
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = tv[i * d + j] - x.data()[i * d + j];
                acc += diff * diff;
            }
            out.prefix_mse[i][t] = acc / static_cast<double>(d);
        }
    }
    return out;
}

}  // namespace celebi
