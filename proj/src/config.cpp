#include "celebi/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "celebi/errors.hpp"
#include "celebi/rng.hpp"

namespace celebi {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: expected a boolean for '" + key + "', got '" + v + "'");
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: expected a number for '" + key + "', got '" + v + "'");
    }
}

long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: expected an integer for '" + key + "', got '" + v + "'");
    }
}

template <typename T>
std::vector<T> parse_list(const std::string& v, const std::string& key,
                          const std::function<T(const std::string&)>& one) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) throw ConfigError("config: empty list element in '" + key + "'");
        out.push_back(one(tok));
    }
    if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
    return out;
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

WorldConfig ExperimentConfig::world_config() const {
    WorldConfig w;
    w.space.cardinalities = factors;
    w.embed_dims = embed_dims;
    w.seed = world_seed;
    w.rotate = rotate;
    w.train_fraction = train_fraction;
    w.eval_max = eval_max;
    return w;
}

ChannelConfig ExperimentConfig::channel_config() const { return {vocab, length, temperature}; }

AgentConfig ExperimentConfig::agent_config() const { return {embedding, hidden, feedback}; }

MetricsConfig ExperimentConfig::metrics_config() const { return {epsilon, max_pairs}; }

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (factors.empty()) fail("world.factors must name at least one factor");
    for (int c : factors)
        if (c < 2) fail("world.factors entries must be at least 2");
    if (embed_dims.size() != factors.size()) fail("world.embed_dims must have one entry per factor");
    for (int d : embed_dims)
        if (d < 1) fail("world.embed_dims entries must be positive");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) fail("world.train_fraction must lie in (0,1]");
    if (eval_max < 3) fail("world.eval_max must be at least 3");
    if (vocab < 2) fail("channel.vocab must be at least 2");
    if (length < 1) fail("channel.length must be at least 1");
    if (!(temperature > 0.0)) fail("channel.temperature must be positive");
    if (embedding < 1 || hidden < 1) fail("agent sizes must be positive");
    if (interaction.lambda < 1.0) fail("interaction.lambda must be at least 1");
    if (!(interaction.learning_rate >= 0.0)) fail("interaction.lr must be non-negative");
    if (interaction.batch_size < 1) fail("interaction.batch must be positive");
    if (interaction.epochs_per_generation < 1) fail("interaction.epochs must be positive");
    if (interaction.early_stop.patience < 1) fail("interaction.early_patience must be positive");
    if (imitation.beta < 0.0) fail("imitation.beta must be non-negative");
    if (imitation.regularizer == MessageRegularizer::None && imitation.beta != 0.0)
        fail("imitation.beta must be 0 when imitation.regularizer is none");
    if (!(imitation.learning_rate >= 0.0)) fail("imitation.lr must be non-negative");
    if (imitation.batch_size < 1) fail("imitation.batch must be positive");
    if (generations < 1) fail("run.generations must be positive");
    if (seeds.empty()) fail("run.seeds must name at least one seed");
    if (out_dir.empty()) fail("run.out_dir must not be empty");
    if (epsilon && !(*epsilon > 0.0)) fail("metrics.epsilon must be positive or 'auto'");
    if (max_pairs < 1) fail("metrics.max_pairs must be positive");

    // the lattice and batch sizes must be compatible with the 10% validation carve
    FactorSpace space{factors};
    space.validate();
    const double lattice = static_cast<double>(space.size());
    if (train_fraction * lattice < 2.0) fail("world.train_fraction selects fewer than two observations");
}

void apply_override(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    auto as_int = [&](long long lo, long long hi) {
        long long x = parse_int(value, key);
        if (x < lo || x > hi) throw ConfigError("config: '" + key + "' out of range");
        return x;
    };

    if (key == "world.factors")
        c.factors = parse_list<int>(value, key, [&](const std::string& t) { return (int)parse_int(t, key); });
    else if (key == "world.embed_dims")
        c.embed_dims = parse_list<int>(value, key, [&](const std::string& t) { return (int)parse_int(t, key); });
    else if (key == "world.embed_dim")
        c.embed_dims.assign(c.factors.size(), (int)as_int(1, 1 << 16));
    else if (key == "world.seed")
        c.world_seed = (std::uint64_t)parse_int(value, key);
    else if (key == "world.rotate")
        c.rotate = parse_bool(value, key);
    else if (key == "world.train_fraction")
        c.train_fraction = parse_real(value, key);
    else if (key == "world.eval_max")
        c.eval_max = (std::size_t)as_int(1, 1'000'000);
    else if (key == "channel.vocab")
        c.vocab = (int)as_int(2, 1 << 16);
    else if (key == "channel.length")
        c.length = (int)as_int(1, 1 << 12);
    else if (key == "channel.temperature")
        c.temperature = parse_real(value, key);
    else if (key == "agent.embedding")
        c.embedding = (int)as_int(1, 1 << 16);
    else if (key == "agent.hidden")
        c.hidden = (int)as_int(1, 1 << 16);
    else if (key == "agent.feedback") {
        if (value == "prev_symbol")
            c.feedback = SenderFeedback::PrevSymbol;
        else if (value == "input_encoding")
            c.feedback = SenderFeedback::InputEncoding;
        else
            throw ConfigError("config: agent.feedback must be prev_symbol or input_encoding");
    } else if (key == "interaction.lambda")
        c.interaction.lambda = parse_real(value, key);
    else if (key == "interaction.progressive")
        c.interaction.progressive = parse_bool(value, key);
    else if (key == "interaction.lr")
        c.interaction.learning_rate = parse_real(value, key);
    else if (key == "interaction.batch")
        c.interaction.batch_size = (int)as_int(1, 1 << 20);
    else if (key == "interaction.epochs")
        c.interaction.epochs_per_generation = (int)as_int(1, 1 << 16);
    else if (key == "interaction.early_min_delta")
        c.interaction.early_stop.min_delta = parse_real(value, key);
    else if (key == "interaction.early_patience")
        c.interaction.early_stop.patience = (int)as_int(1, 1 << 16);
    else if (key == "interaction.early_start")
        c.interaction.early_stop.start_epoch = (int)as_int(0, 1 << 16);
    else if (key == "imitation.mode") {
        if (value == "none")
            c.imitation.mode = ImitationMode::None;
        else if (value == "message")
            c.imitation.mode = ImitationMode::Message;
        else if (value == "full_state")
            c.imitation.mode = ImitationMode::FullState;
        else if (value == "final_state")
            c.imitation.mode = ImitationMode::FinalState;
        else
            throw ConfigError("config: imitation.mode must be none|message|full_state|final_state");
    } else if (key == "imitation.regularizer") {
        if (value == "none")
            c.imitation.regularizer = MessageRegularizer::None;
        else if (value == "pdm")
            c.imitation.regularizer = MessageRegularizer::Pdm;
        else if (value == "koleo")
            c.imitation.regularizer = MessageRegularizer::Koleo;
        else
            throw ConfigError("config: imitation.regularizer must be none|pdm|koleo");
    } else if (key == "imitation.beta")
        c.imitation.beta = parse_real(value, key);
    else if (key == "imitation.lr")
        c.imitation.learning_rate = parse_real(value, key);
    else if (key == "imitation.batch")
        c.imitation.batch_size = (int)as_int(1, 1 << 20);
    else if (key == "run.generations")
        c.generations = (int)as_int(1, 1 << 20);
    else if (key == "run.seeds")
        c.seeds = parse_list<std::uint64_t>(value, key,
                                            [&](const std::string& t) { return (std::uint64_t)parse_int(t, key); });
    else if (key == "run.out_dir")
        c.out_dir = value;
    else if (key == "metrics.epsilon") {
        if (value == "auto")
            c.epsilon.reset();
        else
            c.epsilon = parse_real(value, key);
    } else if (key == "metrics.max_pairs")
        c.max_pairs = (std::size_t)as_int(1, 1LL << 40);
    else
        throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        apply_override(config, line.substr(0, eq), line.substr(eq + 1));
    }
    return config;
}

ExperimentConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig config = parse_config_text(buf.str());
    for (const auto& kv : overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("config: --set expects key=value, got '" + kv + "'");
        apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.validate();
    return config;
}

std::string canonical_config(const ExperimentConfig& c) {
    std::map<std::string, std::string> kv;
    auto list_int = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    kv["world.factors"] = list_int(c.factors);
    kv["world.embed_dims"] = list_int(c.embed_dims);
    kv["world.seed"] = std::to_string(c.world_seed);
    kv["world.rotate"] = c.rotate ? "true" : "false";
    kv["world.train_fraction"] = fmt_real(c.train_fraction);
    kv["world.eval_max"] = std::to_string(c.eval_max);
    kv["channel.vocab"] = std::to_string(c.vocab);
    kv["channel.length"] = std::to_string(c.length);
    kv["channel.temperature"] = fmt_real(c.temperature);
    kv["agent.embedding"] = std::to_string(c.embedding);
    kv["agent.hidden"] = std::to_string(c.hidden);
    kv["agent.feedback"] = c.feedback == SenderFeedback::PrevSymbol ? "prev_symbol" : "input_encoding";
    kv["interaction.lambda"] = fmt_real(c.interaction.lambda);
    kv["interaction.progressive"] = c.interaction.progressive ? "true" : "false";
    kv["interaction.lr"] = fmt_real(c.interaction.learning_rate);
    kv["interaction.batch"] = std::to_string(c.interaction.batch_size);
    kv["interaction.epochs"] = std::to_string(c.interaction.epochs_per_generation);
    kv["interaction.early_min_delta"] = fmt_real(c.interaction.early_stop.min_delta);
    kv["interaction.early_patience"] = std::to_string(c.interaction.early_stop.patience);
    kv["interaction.early_start"] = std::to_string(c.interaction.early_stop.start_epoch);
    switch (c.imitation.mode) {
        case ImitationMode::None: kv["imitation.mode"] = "none"; break;
        case ImitationMode::Message: kv["imitation.mode"] = "message"; break;
        case ImitationMode::FullState: kv["imitation.mode"] = "full_state"; break;
        case ImitationMode::FinalState: kv["imitation.mode"] = "final_state"; break;
    }
    switch (c.imitation.regularizer) {
        case MessageRegularizer::None: kv["imitation.regularizer"] = "none"; break;
        case MessageRegularizer::Pdm: kv["imitation.regularizer"] = "pdm"; break;
        case MessageRegularizer::Koleo: kv["imitation.regularizer"] = "koleo"; break;
    }
    kv["imitation.beta"] = fmt_real(c.imitation.beta);
    kv["imitation.lr"] = fmt_real(c.imitation.learning_rate);
    kv["imitation.batch"] = std::to_string(c.imitation.batch_size);
    kv["run.generations"] = std::to_string(c.generations);
    kv["run.seeds"] = list_int(c.seeds);
    kv["metrics.epsilon"] = c.epsilon ? fmt_real(*c.epsilon) : "auto";
    kv["metrics.max_pairs"] = std::to_string(c.max_pairs);
    // run.out_dir is intentionally excluded: moving outputs is not a rerun

    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a64(canonical_config(config)); }

}  // namespace celebi
