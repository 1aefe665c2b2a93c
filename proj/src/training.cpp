#include "celebi/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "celebi/errors.hpp"

namespace celebi {

namespace {

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
    const std::size_t d = x.shape()[1];
    std::vector<double> values;
    values.reserve(idx.size() * d);
    for (std::size_t i : idx)
        values.insert(values.end(), x.data() + i * d, x.data() + (i + 1) * d);
    return Tensor::from({idx.size(), d}, std::move(values), false);
}

std::vector<Tensor> messages_to_rows(const std::vector<Message>& batch) {
    check(!batch.empty(), "empty message batch");
    const int c = batch[0].length, v = batch[0].vocab;
    std::vector<Tensor> rows;
    rows.reserve(c);
    for (int t = 0; t < c; ++t) {
        std::vector<double> values;
        values.reserve(batch.size() * v);
        for (const auto& m : batch) {
            check(m.length == c && m.vocab == v, "message batch has mixed shapes");
            values.insert(values.end(), m.rows.begin() + static_cast<std::ptrdiff_t>(t) * v,
                          m.rows.begin() + static_cast<std::ptrdiff_t>(t + 1) * v);
        }
        rows.push_back(Tensor::from({batch.size(), static_cast<std::size_t>(v)}, std::move(values), false));
    }
    return rows;
}

double require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " encountered");
    return v;
}

double mean_final_discrete_mse(const Sender& sender, const Receiver& receiver, const Tensor& x) {
    auto eval = evaluate_discrete(sender, receiver, x);
    double acc = 0.0;
    for (const auto& mses : eval.prefix_mse) acc += mses.back();
    return acc / static_cast<double>(eval.prefix_mse.size());
}

}  // namespace

Tensor interaction_loss(const std::vector<Tensor>& trace, const Tensor& x, double lambda, bool progressive) {
    check(!trace.empty(), "interaction_loss: empty trace");
    if (lambda < 1.0) throw ShapeError("interaction_loss: lambda must be at least 1");
    if (!progressive) return mse(trace.back(), x);

    const int c = static_cast<int>(trace.size());
    Tensor total;
    double weight = 1.0;
    for (int i = 0; i < c; ++i) {
        weight *= lambda;  // lambda^(i+1), prefix positions are 1-based
        Tensor term = scale(mse(trace[i], x), weight);
        total = i == 0 ? term : add(total, term);
    }
    return scale(total, 1.0 / static_cast<double>(c));
}

Tensor message_imitation_loss(const std::vector<Tensor>& student_rows,
                              const std::vector<std::vector<int>>& teacher_symbols) {
    check(!student_rows.empty() && student_rows.size() == teacher_symbols.size(),
          "message_imitation_loss: row/target length mismatch");
    const int c = static_cast<int>(student_rows.size());
    Tensor total;
    for (int t = 0; t < c; ++t) {
        Tensor term = nll_rows(student_rows[t], teacher_symbols[t]);
        total = t == 0 ? term : add(total, term);
    }
    return scale(total, 1.0 / static_cast<double>(c));
}

Tensor full_state_imitation_loss(const std::vector<Tensor>& teacher_trace, const std::vector<Tensor>& student_trace) {
    check(!teacher_trace.empty() && teacher_trace.size() == student_trace.size(),
          "full_state_imitation_loss: trace lengths differ");
    const int c = static_cast<int>(teacher_trace.size());
    Tensor total;
    for (int i = 0; i < c; ++i) {
        Tensor term = mse(student_trace[i], teacher_trace[i]);
        total = i == 0 ? term : add(total, term);
    }
    return scale(total, 1.0 / static_cast<double>(c));
}

Tensor final_state_imitation_loss(const std::vector<Tensor>& teacher_trace, const std::vector<Tensor>& student_trace) {
    check(!teacher_trace.empty() && teacher_trace.size() == student_trace.size(),
          "final_state_imitation_loss: trace lengths differ");
    return mse(student_trace.back(), teacher_trace.back());
}

Tensor pdm_regularizer(const std::vector<Tensor>& message_rows) {
    check(!message_rows.empty(), "pdm_regularizer: empty message");
    Tensor total;
    for (std::size_t t = 0; t < message_rows.size(); ++t) {
        Tensor term = mean_pairwise_cosine(message_rows[t]);
        total = t == 0 ? term : add(total, term);
    }
    return scale(total, 1.0 / static_cast<double>(message_rows.size()));
}

Tensor koleo_regularizer(const std::vector<Tensor>& message_rows) {
    check(!message_rows.empty(), "koleo_regularizer: empty message");
    return koleo(hconcat(message_rows));
}

double pdm_value(const std::vector<Message>& batch) {
    NoGradGuard eval;
    return pdm_regularizer(messages_to_rows(batch)).scalar();
}

double koleo_value(const std::vector<Message>& batch) {
    NoGradGuard eval;
    return koleo_regularizer(messages_to_rows(batch)).scalar();
}

double interaction_loss_value(const std::vector<double>& per_prefix_mse, double lambda, bool progressive) {
    check(!per_prefix_mse.empty(), "interaction_loss_value: empty error list");
    if (lambda < 1.0) throw ShapeError("interaction_loss_value: lambda must be at least 1");
    if (!progressive) return per_prefix_mse.back();
    double acc = 0.0, weight = 1.0;
    for (double m : per_prefix_mse) {
        weight *= lambda;
        acc += weight * m;
    }
    return acc / static_cast<double>(per_prefix_mse.size());
}

WorldData make_world_data(const WorldConfig& config, std::uint64_t run_seed) {
    WorldData data;
    data.genx_config = {config.space, config.embed_dims, config.seed, config.rotate};
    GenX genx(data.genx_config);
    data.obs_dim = genx.dim();

    RngStream split_rng = RngStream::derive(run_seed, "split");
    DatasetSplit split = random_split(config.space, config.train_fraction, split_rng);

    // validation: 10% of the train split, held out from optimisation
    RngStream carve = RngStream::derive(run_seed, "val-carve");
    carve.shuffle(split.train);
    std::size_t val_size = split.train.size() / 10;
    if (val_size == 0) val_size = 1;
    check(split.train.size() > val_size, "make_world_data: train split too small for a validation carve");
    data.val_factors.assign(split.train.end() - static_cast<std::ptrdiff_t>(val_size), split.train.end());
    data.train_factors.assign(split.train.begin(), split.train.end() - static_cast<std::ptrdiff_t>(val_size));

    data.eval_factors = split.test.empty() ? data.train_factors : split.test;
    if (data.eval_factors.size() > config.eval_max) {
        RngStream pick = RngStream::derive(run_seed, "eval-subset");
        pick.partial_shuffle(data.eval_factors, config.eval_max);
        data.eval_factors.resize(config.eval_max);
    }

    data.train_x = genx.batch(data.train_factors);
    data.val_x = genx.batch(data.val_factors);
    data.eval_x = genx.batch(data.eval_factors);
    return data;
}

GenerationState::GenerationState(const WorldData& world, const ChannelConfig& channel, const AgentConfig& agent,
                                 std::uint64_t seed)
    : teacher(world.obs_dim, channel, agent, RngStream::derive(seed, "teacher-seed").next_u64()),
      receiver(world.obs_dim, channel, agent, RngStream::derive(seed, "receiver-seed").next_u64()),
      student(world.obs_dim, channel, agent, RngStream::derive(seed, "student-seed", 0).next_u64()) {}

PhaseStats run_interaction_phase(GenerationState& gen, const WorldData& world, const InteractionConfig& config,
                                 double temperature, RngStream& rng) {
    PhaseStats stats;
    const std::size_t n = world.train_factors.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    AdamConfig teacher_adam = gen.teacher_adam;
    AdamConfig receiver_adam = gen.receiver_adam;
    teacher_adam.learning_rate = config.learning_rate;
    receiver_adam.learning_rate = config.learning_rate;

    double loss_sum = 0.0;
    for (int epoch = 0; epoch < config.epochs_per_generation; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            Tape::active().reset();
            Tensor xb = gather_rows(world.train_x, idx);
            auto rows = gen.teacher.encode(xb, temperature, rng, EncodeMode::Relaxed);
            auto trace = gen.receiver.decode_progressive(rows);
            Tensor loss = interaction_loss(trace, xb, config.lambda, config.progressive);
            loss_sum += require_finite(loss.scalar(), "interaction loss");
            ++stats.batches;
            backward(loss);
            adam_step(gen.teacher.store(), teacher_adam);
            adam_step(gen.receiver.store(), receiver_adam);
        }
    }
    Tape::active().reset();
    stats.mean_loss = stats.batches ? loss_sum / stats.batches : 0.0;
    stats.val_mse = mean_final_discrete_mse(gen.teacher, gen.receiver, world.val_x);
    return stats;
}

PhaseStats run_imitation_phase(GenerationState& gen, const WorldData& world, const ImitationConfig& config,
                               double temperature, RngStream& rng, ProtocolAudit* audit) {
    check(config.mode != ImitationMode::None, "run_imitation_phase: mode is none");
    PhaseStats stats;
    const std::uint64_t receiver_sum = gen.receiver.store().checksum();
    const std::uint64_t teacher_sum = gen.teacher.store().checksum();

    // freeze scope: restored even when a numeric error unwinds the phase
    struct FreezeGuard {
        ParameterStore& a;
        ParameterStore& b;
        FreezeGuard(ParameterStore& a_, ParameterStore& b_) : a(a_), b(b_) {
            a.set_requires_grad(false);
            b.set_requires_grad(false);
        }
        ~FreezeGuard() {
            a.set_requires_grad(true);
            b.set_requires_grad(true);
        }
    } freeze(gen.receiver.store(), gen.teacher.store());

    AdamConfig student_adam = gen.student_adam;
    student_adam.learning_rate = config.learning_rate;

    const std::size_t n = world.train_factors.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t stop = std::min(n, start + config.batch_size);
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
        Tape::active().reset();
        Tensor xb = gather_rows(world.train_x, idx);

        std::vector<Tensor> teacher_rows;
        {
            NoGradGuard frozen;
            RngStream unused(0);
            teacher_rows = gen.teacher.encode(xb, temperature, unused, EncodeMode::Discrete);
        }
        auto student_rows = gen.student.encode(xb, temperature, rng, EncodeMode::Relaxed);

        Tensor loss;
        if (config.mode == ImitationMode::Message) {
            const std::size_t batch = idx.size();
            std::vector<std::vector<int>> targets(teacher_rows.size(), std::vector<int>(batch));
            for (std::size_t t = 0; t < teacher_rows.size(); ++t) {
                const double* rv = teacher_rows[t].data();
                const std::size_t v = teacher_rows[t].shape()[1];
                for (std::size_t i = 0; i < batch; ++i) {
                    int best = 0;
                    for (std::size_t j = 1; j < v; ++j)
                        if (rv[i * v + j] > rv[i * v + best]) best = static_cast<int>(j);
                    targets[t][i] = best;
                }
            }
            loss = message_imitation_loss(student_rows, targets);
        } else {
            std::vector<Tensor> teacher_trace;
            {
                NoGradGuard frozen;
                teacher_trace = gen.receiver.decode_progressive(teacher_rows);
            }
            auto student_trace = gen.receiver.decode_progressive(student_rows);
            loss = config.mode == ImitationMode::FullState
                       ? full_state_imitation_loss(teacher_trace, student_trace)
                       : final_state_imitation_loss(teacher_trace, student_trace);
        }
        if (config.regularizer == MessageRegularizer::Pdm)
            loss = add(loss, scale(pdm_regularizer(student_rows), config.beta));
        else if (config.regularizer == MessageRegularizer::Koleo)
            loss = add(loss, scale(koleo_regularizer(student_rows), config.beta));

        loss_sum += require_finite(loss.scalar(), "imitation loss");
        ++stats.batches;
        backward(loss);
        adam_step(gen.student.store(), student_adam);
    }
    Tape::active().reset();

    if (audit) {
        ++audit->imitation_phases;
        if (gen.receiver.store().checksum() != receiver_sum) ++audit->receiver_freeze_violations;
        if (gen.teacher.store().checksum() != teacher_sum) ++audit->teacher_freeze_violations;
    }
    if (gen.receiver.store().checksum() != receiver_sum)
        throw ProtocolError("imitation phase mutated the frozen receiver");
    if (gen.teacher.store().checksum() != teacher_sum)
        throw ProtocolError("imitation phase mutated the frozen teacher");

    stats.mean_loss = stats.batches ? loss_sum / stats.batches : 0.0;
    stats.val_mse = mean_final_discrete_mse(gen.student, gen.receiver, world.val_x);
    return stats;
}

void generation_handoff(GenerationState& gen, std::uint64_t run_seed, ProtocolAudit* audit) {
    const auto teacher_steps = gen.teacher.store().step_count();
    const auto student_steps = gen.student.store().step_count();
    const auto student_sum = gen.student.store().checksum();

    gen.student.store().copy_values_to(gen.teacher.store());
    gen.student.init_weights(RngStream::derive(run_seed, "student-seed", static_cast<std::uint64_t>(gen.generation) + 1)
                                 .next_u64());

    if (audit) {
        ++audit->handoffs;
        if (gen.teacher.store().checksum() != student_sum) ++audit->handoff_mismatches;
        // optimizer states are attached to their slots: the hand-off must not
        // advance, rewind or clone either step counter
        if (gen.teacher.store().step_count() != teacher_steps ||
            gen.student.store().step_count() != student_steps)
            ++audit->optimizer_state_violations;
    }
    gen.generation += 1;
}

void RunLog::append(RunLogRow row) {
    if (!rows.empty()) {
        const auto& prev = rows.back();
        check(row.epoch >= prev.epoch, "RunLog: epoch counter must be non-decreasing");
    }
    rows.push_back(std::move(row));
}

RunResult run_iterated_learning(const WorldData& world, const ChannelConfig& channel, const AgentConfig& agent,
                                const InteractionConfig& interaction, const ImitationConfig& imitation,
                                int generations, std::uint64_t seed, const MetricsConfig& metrics,
                                const std::string& run_id, const std::function<void(const RunLogRow&)>& on_row) {
    check(generations >= 1, "run_iterated_learning: need at least one generation");
    if (imitation.regularizer == MessageRegularizer::None)
        check(imitation.beta == 0.0, "run_iterated_learning: beta must be 0 without a regularizer");

    RunResult result;
    auto state = std::make_unique<GenerationState>(world, channel, agent, seed);
    GenerationState& gen = *state;
    RngStream interaction_rng = RngStream::derive(seed, "interaction");
    RngStream imitation_rng = RngStream::derive(seed, "imitation");
    EarlyStopper stopper(interaction.early_stop);

    auto teacher_snapshot = gen.teacher.store().snapshot_values();
    auto receiver_snapshot = gen.receiver.store().snapshot_values();
    auto student_snapshot = gen.student.store().snapshot_values();

    auto build_corpus = [&]() {
        MessageCorpus corpus;
        corpus.vocab = channel.vocab;
        corpus.length = channel.length;
        auto eval = evaluate_discrete(gen.teacher, gen.receiver, world.eval_x);
        corpus.records.reserve(world.eval_factors.size());
        for (std::size_t i = 0; i < world.eval_factors.size(); ++i)
            corpus.records.push_back({world.eval_factors[i], eval.symbols[i], eval.prefix_mse[i]});
        return corpus;
    };
    auto position_curve = [](const MessageCorpus& corpus) {
        std::vector<double> curve(corpus.length, 0.0);
        for (const auto& rec : corpus.records)
            for (int t = 0; t < corpus.length; ++t) curve[t] += rec.prefix_mse[t];
        for (auto& v : curve) v /= static_cast<double>(corpus.records.size());
        return curve;
    };
    auto epsilon_for = [&](const MessageCorpus& corpus) {
        if (metrics.epsilon) return *metrics.epsilon;
        return select_epsilon({position_curve(corpus)}).epsilon;
    };
    auto log_phase = [&](const std::string& phase, int generation_index, double loss, double seconds) {
        MessageCorpus corpus = build_corpus();
        const double eps = epsilon_for(corpus);
        RngStream ts_rng = RngStream::derive(seed, "topsim", static_cast<std::uint64_t>(result.log.rows.size()));
        MetricReport report = compute_metrics(corpus, eps, metrics.max_pairs, ts_rng);
        RunLogRow row;
        row.run_id = run_id;
        row.seed = seed;
        row.generation = generation_index;
        row.phase = phase;
        row.epoch = generation_index;
        row.loss = loss;
        row.topsim = report.topsim;
        row.useful_length = report.useful_length;
        row.mse = report.final_mse;
        row.seconds = seconds;
        if (on_row) on_row(row);
        result.log.append(std::move(row));
    };

    try {
        for (int g = 0; g < generations; ++g) {
            const auto t0 = std::chrono::steady_clock::now();
            PhaseStats istats = run_interaction_phase(gen, world, interaction, channel.temperature, interaction_rng);
            const double isecs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log_phase("interaction", g, istats.mean_loss, isecs);
            result.generations_run = g + 1;

            if (imitation.mode != ImitationMode::None) {
                const auto t1 = std::chrono::steady_clock::now();
                PhaseStats mstats =
                    run_imitation_phase(gen, world, imitation, channel.temperature, imitation_rng, &result.audit);
                generation_handoff(gen, seed, &result.audit);
                const double msecs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
                log_phase("imitation", g, mstats.mean_loss, msecs);
            } else {
                gen.generation += 1;
            }

            teacher_snapshot = gen.teacher.store().snapshot_values();
            receiver_snapshot = gen.receiver.store().snapshot_values();
            student_snapshot = gen.student.store().snapshot_values();

            if (stopper.update(istats.val_mse)) {
                result.early_stopped = true;
                break;
            }
        }
    } catch (const NumericError&) {
        gen.teacher.store().restore_values(teacher_snapshot);
        gen.receiver.store().restore_values(receiver_snapshot);
        gen.student.store().restore_values(student_snapshot);
        gen.teacher.store().zero_grad();
        gen.receiver.store().zero_grad();
        gen.student.store().zero_grad();
        Tape::active().reset();
        result.numeric_abort = true;
    }

    result.corpus = build_corpus();
    result.position_curve = position_curve(result.corpus);
    const double eps = epsilon_for(result.corpus);
    RngStream final_rng = RngStream::derive(seed, "topsim-final");
    result.report = compute_metrics(result.corpus, eps, metrics.max_pairs, final_rng);
    result.report.seed = seed;
    result.state = std::move(state);
    return result;
}

}  // namespace celebi
