#include "celebi/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "celebi/manifest.hpp"
#include "celebi/svgplot.hpp"
#include "celebi/theory.hpp"
#include "celebi/training.hpp"

namespace fs = std::filesystem;

namespace celebi {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

constexpr const char* kMetricsHeader =
    "run_id,seed,generation,topsim,topsim_degenerate,useful_length,final_mse,epsilon,corpus_size";

void write_metrics_csv(const std::string& path, const std::string& run_id, std::uint64_t seed, int generation,
                       const MetricReport& report) {
    std::ofstream out(path);
    check(out.good(), "cannot open '" + path + "'");
    out << kMetricsHeader << "\n";
    out << run_id << "," << seed << "," << generation << "," << fmt(report.topsim) << ","
        << (report.topsim_degenerate ? 1 : 0) << "," << fmt(report.useful_length) << "," << fmt(report.final_mse)
        << "," << fmt(report.epsilon) << "," << report.corpus_size << "\n";
}

bool read_metrics_csv(const std::string& path, MetricReport* report, int* generation) {
    std::ifstream in(path);
    if (!in.good()) return false;
    std::string header, line;
    if (!std::getline(in, header) || header != kMetricsHeader) return false;
    if (!std::getline(in, line)) return false;
    auto f = split_csv_line(line);
    if (f.size() != 9) return false;
    try {
        report->seed = std::stoull(f[1]);
        *generation = std::stoi(f[2]);
        report->topsim = std::stod(f[3]);
        report->topsim_degenerate = f[4] == "1";
        report->useful_length = std::stod(f[5]);
        report->final_mse = std::stod(f[6]);
        report->epsilon = std::stod(f[7]);
        report->corpus_size = std::stoull(f[8]);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

void write_positions_csv(const std::string& path, const std::vector<double>& curve) {
    std::ofstream out(path);
    check(out.good(), "cannot open '" + path + "'");
    out << "position,mean_mse\n";
    for (std::size_t i = 0; i < curve.size(); ++i) out << (i + 1) << "," << fmt(curve[i]) << "\n";
}

bool read_positions_csv(const std::string& path, std::vector<double>* curve) {
    std::ifstream in(path);
    if (!in.good()) return false;
    std::string line;
    if (!std::getline(in, line)) return false;
    curve->clear();
    while (std::getline(in, line)) {
        auto f = split_csv_line(line);
        if (f.size() != 2) return false;
        curve->push_back(std::stod(f[1]));
    }
    return !curve->empty();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// sample standard error of the mean
double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

ExperimentConfig resolve_config(const CliOptions& options) {
    if (options.config_path.empty()) throw ConfigError("config: --config PATH is required");
    ExperimentConfig config = load_config_file(options.config_path, options.overrides);
    if (options.seeds) config.seeds = *options.seeds;
    if (options.out_dir) {
        config.out_dir = *options.out_dir;
    } else if (const char* root = std::getenv("CELEBI_OUT"); root && *root) {
        config.out_dir = (fs::path(root) / fs::path(config.out_dir).filename()).string();
    }
    config.validate();
    return config;
}

std::vector<SeedRunOutput> run_config(const ExperimentConfig& config, const std::string& out_dir, int jobs,
                                      bool force) {
    config.validate();
    fs::create_directories(out_dir);
    const std::string hash = hash_hex(config_hash(config));
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();

    RunManifest manifest;
    bool rerun_detected = false;
    if (RunManifest::exists(manifest_path)) {
        RunManifest previous = RunManifest::load(manifest_path);
        if (previous.config_hash == hash) {
            rerun_detected = true;
            manifest = std::move(previous);
        }
    }
    if (!rerun_detected) {
        manifest.config_hash = hash;
        manifest.code_version = kCodeVersion;
        manifest.created_at = current_timestamp();
        manifest.seed_status.clear();
        manifest.outputs.clear();
    }
    for (auto seed : config.seeds) {
        const std::string key = std::to_string(seed);
        if (!manifest.seed_status.count(key) || force) manifest.seed_status[key] = "pending";
    }
    manifest.updated_at = current_timestamp();
    manifest.save(manifest_path);

    {
        std::ofstream cfg((fs::path(out_dir) / "config_used.txt").string());
        cfg << canonical_config(config);
    }

    std::mutex manifest_mutex;
    auto set_status = [&](std::uint64_t seed, const std::string& status) {
        std::lock_guard<std::mutex> lock(manifest_mutex);
        manifest.seed_status[std::to_string(seed)] = status;
        manifest.updated_at = current_timestamp();
        manifest.save(manifest_path);
    };
    auto add_output = [&](const std::string& path) {
        std::lock_guard<std::mutex> lock(manifest_mutex);
        if (std::find(manifest.outputs.begin(), manifest.outputs.end(), path) == manifest.outputs.end())
            manifest.outputs.push_back(path);
    };

    std::vector<SeedRunOutput> outputs(config.seeds.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::vector<std::string> hard_errors;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= config.seeds.size()) return;
            const std::uint64_t seed = config.seeds[i];
            const std::string tag = "_seed" + std::to_string(seed);
            SeedRunOutput out;
            out.seed = seed;
            out.corpus_path = (fs::path(out_dir) / ("corpus" + tag + ".tsv")).string();
            const std::string metrics_path = (fs::path(out_dir) / ("metrics" + tag + ".csv")).string();
            const std::string positions_path = (fs::path(out_dir) / ("positions" + tag + ".csv")).string();

            // rerun detection: reuse finished outputs for an identical config
            if (rerun_detected && !force && manifest.seed_status[std::to_string(seed)] == "done") {
                int generation = 0;
                if (read_metrics_csv(metrics_path, &out.report, &generation) &&
                    read_positions_csv(positions_path, &out.position_curve) && fs::exists(out.corpus_path)) {
                    out.loaded_from_disk = true;
                    out.generations_run = generation;
                    outputs[i] = std::move(out);
                    continue;
                }
            }

            set_status(seed, "running");
            try {
                WorldData world = make_world_data(config.world_config(), seed);
                const std::string run_id = hash + "-s" + std::to_string(seed);

                const std::string runlog_path = (fs::path(out_dir) / ("runlog" + tag + ".csv")).string();
                std::ofstream runlog(runlog_path);
                check(runlog.good(), "cannot open '" + runlog_path + "'");
                runlog << kRunLogHeader << "\n";
                auto on_row = [&](const RunLogRow& row) {
                    runlog << row.run_id << "," << row.seed << "," << row.generation << "," << row.phase << ","
                           << row.epoch << "," << fmt(row.loss) << "," << fmt(row.topsim) << ","
                           << fmt(row.useful_length) << "," << fmt(row.mse) << "," << fmt(row.seconds) << "\n";
                    runlog.flush();
                };

                RunResult result = run_iterated_learning(world, config.channel_config(), config.agent_config(),
                                                         config.interaction, config.imitation, config.generations,
                                                         seed, config.metrics_config(), run_id, on_row);

                save_corpus(result.corpus, out.corpus_path);
                write_metrics_csv(metrics_path, run_id, seed, result.generations_run - 1, result.report);
                write_positions_csv(positions_path, result.position_curve);
                result.state->teacher.save((fs::path(out_dir) / ("checkpoint_sender" + tag + ".txt")).string());
                result.state->receiver.save((fs::path(out_dir) / ("checkpoint_receiver" + tag + ".txt")).string());
                for (const char* f : {"runlog", "metrics", "positions", "corpus"})
                    add_output(std::string(f) + tag + (std::string(f) == "corpus" ? ".tsv" : ".csv"));

                out.report = result.report;
                out.position_curve = result.position_curve;
                out.numeric_abort = result.numeric_abort;
                out.early_stopped = result.early_stopped;
                out.generations_run = result.generations_run;
                if (!result.audit.clean()) throw ProtocolError("protocol audit reported violations");
                set_status(seed, result.numeric_abort ? "failed_numeric" : "done");
            } catch (const NumericError& e) {
                out.numeric_abort = true;
                set_status(seed, std::string("failed_numeric: ") + e.what());
            } catch (const std::exception& e) {
                set_status(seed, std::string("failed: ") + e.what());
                std::lock_guard<std::mutex> lock(error_mutex);
                hard_errors.push_back(e.what());
            }
            outputs[i] = std::move(out);
        }
    };

    const int thread_count = std::max(1, std::min<int>(jobs, static_cast<int>(config.seeds.size())));
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!hard_errors.empty()) throw std::runtime_error("run failed: " + hard_errors.front());
    return outputs;
}

int cmd_train(const CliOptions& options) {
    ExperimentConfig config;
    try {
        config = resolve_config(options);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    std::vector<SeedRunOutput> outputs;
    try {
        outputs = run_config(config, config.out_dir, options.jobs, options.force);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }

    bool numeric_abort = false;
    std::cout << "run directory: " << config.out_dir << "\n";
    std::cout << "seed,topsim,useful_length,final_mse,generations,status\n";
    for (const auto& out : outputs) {
        numeric_abort = numeric_abort || out.numeric_abort;
        std::cout << out.seed << "," << fmt(out.report.topsim) << "," << fmt(out.report.useful_length) << ","
                  << fmt(out.report.final_mse) << "," << out.generations_run << ","
                  << (out.numeric_abort ? "numeric_abort" : (out.loaded_from_disk ? "cached" : "ok")) << "\n";
    }
    return numeric_abort ? kExitNumeric : kExitOk;
}

namespace {

struct AblateVariant {
    std::string name;
    bool progressive;
    ImitationMode mode;
    MessageRegularizer regularizer;
};

const std::vector<AblateVariant>& ablate_variants() {
    static const std::vector<AblateVariant> kVariants = {
        {"baseline", false, ImitationMode::None, MessageRegularizer::None},
        {"pd", true, ImitationMode::None, MessageRegularizer::None},
        {"message_imitation", false, ImitationMode::Message, MessageRegularizer::None},
        {"full_state", false, ImitationMode::FullState, MessageRegularizer::None},
        {"fisi", false, ImitationMode::FinalState, MessageRegularizer::None},
        {"pd_fisi_koleo", true, ImitationMode::FinalState, MessageRegularizer::Koleo},
        {"pd_fisi_pdm", true, ImitationMode::FinalState, MessageRegularizer::Pdm},
    };
    return kVariants;
}

ExperimentConfig variant_config(const ExperimentConfig& base, const AblateVariant& variant) {
    ExperimentConfig c = base;
    c.interaction.progressive = variant.progressive;
    c.imitation.mode = variant.mode;
    c.imitation.regularizer = variant.regularizer;
    if (variant.regularizer == MessageRegularizer::None) c.imitation.beta = 0.0;
    return c;
}

struct VariantOutcome {
    std::string name;
    std::vector<double> topsim, useful_length, final_mse;
    std::vector<SeedRunOutput> runs;
};

// common threshold: plateau rule over the pooled final position curves
double pooled_epsilon(const std::vector<VariantOutcome>& outcomes) {
    std::vector<std::vector<double>> curves;
    for (const auto& v : outcomes)
        for (const auto& run : v.runs)
            if (!run.position_curve.empty()) curves.push_back(run.position_curve);
    return select_epsilon(curves).epsilon;
}

double mean_useful_length_at(const std::string& corpus_path, double epsilon) {
    MessageCorpus corpus = load_corpus(corpus_path);
    double acc = 0.0;
    for (const auto& rec : corpus.records) acc += useful_length(rec.prefix_mse, epsilon);
    return acc / static_cast<double>(corpus.records.size());
}

}  // namespace

int cmd_ablate(const CliOptions& options) {
    ExperimentConfig base;
    try {
        base = resolve_config(options);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    bool any_numeric = false;
    std::vector<VariantOutcome> outcomes;
    for (const auto& variant : ablate_variants()) {
        ExperimentConfig config = variant_config(base, variant);
        const std::string dir = (fs::path(base.out_dir) / variant.name).string();
        VariantOutcome outcome;
        outcome.name = variant.name;
        try {
            outcome.runs = run_config(config, dir, options.jobs, options.force);
        } catch (const std::exception& e) {
            std::cerr << "variant " << variant.name << " failed: " << e.what() << "\n";
            any_numeric = true;
            outcomes.push_back(std::move(outcome));
            continue;  // partial results retained
        }
        for (const auto& run : outcome.runs) {
            any_numeric = any_numeric || run.numeric_abort;
            outcome.topsim.push_back(run.report.topsim);
            outcome.final_mse.push_back(run.report.final_mse);
        }
        outcomes.push_back(std::move(outcome));
    }

    // useful length recomputed from the stored corpora at one shared epsilon
    const double eps = base.epsilon ? *base.epsilon : pooled_epsilon(outcomes);
    for (auto& outcome : outcomes)
        for (const auto& run : outcome.runs)
            if (fs::exists(run.corpus_path)) outcome.useful_length.push_back(mean_useful_length_at(run.corpus_path, eps));

    const std::string table_path = (fs::path(base.out_dir) / "ablate_results.csv").string();
    {
        std::ofstream out(table_path);
        out << "variant,topsim_mean,topsim_stderr,useful_length_mean,useful_length_stderr,"
               "final_mse_mean,final_mse_stderr,epsilon,seeds\n";
        for (const auto& o : outcomes) {
            out << o.name << "," << fmt(mean_of(o.topsim)) << "," << fmt(stderr_of(o.topsim)) << ","
                << fmt(mean_of(o.useful_length)) << "," << fmt(stderr_of(o.useful_length)) << ","
                << fmt(mean_of(o.final_mse)) << "," << fmt(stderr_of(o.final_mse)) << "," << fmt(eps) << ","
                << o.runs.size() << "\n";
        }
    }

    // pairwise permutation tests on per-seed metric vectors
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"pd", "baseline"},
        {"full_state", "fisi"},
        {"full_state", "message_imitation"},
        {"fisi", "message_imitation"},
        {"pd_fisi_koleo", "pd_fisi_pdm"},
    };
    auto find_outcome = [&](const std::string& name) -> const VariantOutcome* {
        for (const auto& o : outcomes)
            if (o.name == name) return &o;
        return nullptr;
    };
    const std::string annex_path = (fs::path(base.out_dir) / "significance_annex.csv").string();
    {
        std::ofstream out(annex_path);
        out << "metric,mode_a,mode_b,statistic,p_value\n";
        RngStream rng = RngStream::derive(config_hash(base), "ablate-permutation");
        for (const auto& [a, b] : pairs) {
            const VariantOutcome* oa = find_outcome(a);
            const VariantOutcome* ob = find_outcome(b);
            if (!oa || !ob) continue;
            struct MetricRef {
                const char* label;
                const std::vector<double>& a;
                const std::vector<double>& b;
            };
            const MetricRef metrics[] = {{"topsim", oa->topsim, ob->topsim},
                                         {"useful_length", oa->useful_length, ob->useful_length},
                                         {"final_mse", oa->final_mse, ob->final_mse}};
            for (const auto& m : metrics) {
                if (m.a.empty() || m.b.empty()) continue;
                auto r = permutation_test(m.a, m.b, 10'000, rng);
                out << m.label << "," << a << "," << b << "," << fmt(r.statistic) << "," << fmt(r.p_value) << "\n";
            }
        }
    }

    // human-readable table
    {
        std::ofstream out((fs::path(base.out_dir) / "ablate_table.md").string());
        out << "| variant | TopSim | useful length (eps=" << fmt(eps) << ") | final MSE |\n";
        out << "|---|---|---|---|\n";
        for (const auto& o : outcomes)
            out << "| " << o.name << " | " << fmt(mean_of(o.topsim)) << " +/- " << fmt(stderr_of(o.topsim)) << " | "
                << fmt(mean_of(o.useful_length)) << " +/- " << fmt(stderr_of(o.useful_length)) << " | "
                << fmt(mean_of(o.final_mse)) << " +/- " << fmt(stderr_of(o.final_mse)) << " |\n";
    }

    std::cout << "ablation table: " << table_path << "\n";
    std::cout << "significance annex: " << annex_path << "\n";
    return any_numeric ? kExitNumeric : kExitOk;
}

int cmd_sweep_lambda(const CliOptions& options, std::vector<double> lambdas) {
    ExperimentConfig base;
    try {
        base = resolve_config(options);
        if (lambdas.empty()) throw ConfigError("sweep-lambda: provide --lambdas l1,l2,...");
        for (double l : lambdas)
            if (l < 1.0) throw ConfigError("sweep-lambda: lambda values must be at least 1");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    struct LambdaOutcome {
        double lambda;
        std::vector<SeedRunOutput> runs;
        std::vector<double> topsim, final_mse, useful_length;
        std::vector<double> mean_curve;
    };
    bool any_numeric = false;
    std::vector<LambdaOutcome> outcomes;
    for (double lambda : lambdas) {
        ExperimentConfig config = base;
        config.interaction.progressive = true;
        config.interaction.lambda = lambda;
        std::ostringstream dir;
        dir << "lambda_" << lambda;
        LambdaOutcome outcome;
        outcome.lambda = lambda;
        try {
            outcome.runs = run_config(config, (fs::path(base.out_dir) / dir.str()).string(), options.jobs,
                                      options.force);
        } catch (const std::exception& e) {
            std::cerr << "lambda " << lambda << " failed: " << e.what() << "\n";
            any_numeric = true;
            continue;
        }
        for (const auto& run : outcome.runs) {
            any_numeric = any_numeric || run.numeric_abort;
            outcome.topsim.push_back(run.report.topsim);
            outcome.final_mse.push_back(run.report.final_mse);
            if (outcome.mean_curve.empty()) outcome.mean_curve.assign(run.position_curve.size(), 0.0);
            for (std::size_t i = 0; i < run.position_curve.size(); ++i)
                outcome.mean_curve[i] += run.position_curve[i] / static_cast<double>(outcome.runs.size());
        }
        outcomes.push_back(std::move(outcome));
    }

    // one epsilon across the sweep, from the pooled per-position curves
    std::vector<std::vector<double>> pooled;
    for (const auto& o : outcomes)
        for (const auto& run : o.runs)
            if (!run.position_curve.empty()) pooled.push_back(run.position_curve);
    if (pooled.empty()) {
        std::cerr << "error: sweep produced no usable runs\n";
        return kExitNumeric;
    }
    const double eps = base.epsilon ? *base.epsilon : select_epsilon(pooled).epsilon;
    for (auto& o : outcomes)
        for (const auto& run : o.runs)
            if (fs::exists(run.corpus_path)) o.useful_length.push_back(mean_useful_length_at(run.corpus_path, eps));

    const std::string csv_path = (fs::path(base.out_dir) / "sweep_results.csv").string();
    {
        std::ofstream out(csv_path);
        out << "lambda,topsim_mean,topsim_stderr,useful_length_mean,useful_length_stderr,"
               "final_mse_mean,final_mse_stderr,epsilon\n";
        for (const auto& o : outcomes)
            out << fmt(o.lambda) << "," << fmt(mean_of(o.topsim)) << "," << fmt(stderr_of(o.topsim)) << ","
                << fmt(mean_of(o.useful_length)) << "," << fmt(stderr_of(o.useful_length)) << ","
                << fmt(mean_of(o.final_mse)) << "," << fmt(stderr_of(o.final_mse)) << "," << fmt(eps) << "\n";
    }

    // three sweep panels plus the per-position loss curves per lambda
    auto panel = [&](const std::string& file, const std::string& title, auto pick, auto pick_err) {
        PlotSeries s;
        s.label = title;
        for (const auto& o : outcomes) {
            s.x.push_back(o.lambda);
            s.y.push_back(pick(o));
            s.yerr.push_back(pick_err(o));
        }
        write_svg_lineplot((fs::path(base.out_dir) / file).string(), title, "lambda", title, {s});
    };
    panel("sweep_useful_length.svg", "useful length", [](const LambdaOutcome& o) { return mean_of(o.useful_length); },
          [](const LambdaOutcome& o) { return stderr_of(o.useful_length); });
    panel("sweep_mse.svg", "reconstruction MSE", [](const LambdaOutcome& o) { return mean_of(o.final_mse); },
          [](const LambdaOutcome& o) { return stderr_of(o.final_mse); });
    panel("sweep_topsim.svg", "TopSim", [](const LambdaOutcome& o) { return mean_of(o.topsim); },
          [](const LambdaOutcome& o) { return stderr_of(o.topsim); });
    {
        std::vector<PlotSeries> series;
        for (const auto& o : outcomes) {
            PlotSeries s;
            std::ostringstream label;
            label << "lambda=" << o.lambda;
            s.label = label.str();
            for (std::size_t i = 0; i < o.mean_curve.size(); ++i) {
                s.x.push_back(static_cast<double>(i + 1));
                s.y.push_back(o.mean_curve[i]);
            }
            series.push_back(std::move(s));
        }
        write_svg_lineplot((fs::path(base.out_dir) / "positions_by_lambda.svg").string(),
                           "loss by message position", "position", "MSE", series);
    }
    std::cout << "sweep results: " << csv_path << "\n";
    return any_numeric ? kExitNumeric : kExitOk;
}

int cmd_verify(VerifyOptions options) {
    if (!options.grid_path.empty()) {
        std::ifstream in(options.grid_path);
        if (!in.good()) {
            std::cerr << "error: cannot open grid file '" << options.grid_path << "'\n";
            return kExitConfig;
        }
        std::string line;
        while (std::getline(in, line)) {
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq);
            std::string value = line.substr(eq + 1);
            key.erase(remove_if(key.begin(), key.end(), ::isspace), key.end());
            value.erase(remove_if(value.begin(), value.end(), ::isspace), value.end());
            try {
                if (key == "seed")
                    options.seed = std::stoull(value);
                else if (key == "bound_scale")
                    options.bound_scale = std::stod(value);
                else if (key == "out")
                    options.out_csv = value;
                else if (!key.empty()) {
                    std::cerr << "error: unknown grid key '" << key << "'\n";
                    return kExitConfig;
                }
            } catch (const std::exception&) {
                std::cerr << "error: bad grid value for '" << key << "'\n";
                return kExitConfig;
            }
        }
    }

    const auto results = run_default_verification(options.seed, options.bound_scale);
    std::ofstream csv;
    if (!options.out_csv.empty()) {
        csv.open(options.out_csv);
        csv << "name,parameters,empirical,stderr,bound,holds,samples,exact\n";
    }
    bool all_hold = true;
    for (const auto& r : results) {
        all_hold = all_hold && r.holds;
        std::cout << (r.holds ? "[ok]   " : "[FAIL] ") << r.name << " (" << r.parameters
                  << "): empirical=" << fmt(r.empirical)
                  << (r.exact ? "" : (" +/- " + fmt(r.stderr_))) << " bound=" << fmt(r.bound)
                  << " samples=" << r.samples << "\n";
        if (csv.is_open())
            csv << r.name << ",\"" << r.parameters << "\"," << fmt(r.empirical) << "," << fmt(r.stderr_) << ","
                << fmt(r.bound) << "," << (r.holds ? 1 : 0) << "," << r.samples << "," << (r.exact ? 1 : 0) << "\n";
    }
    std::cout << (all_hold ? "all checks hold\n" : "verification FAILED\n");
    return all_hold ? kExitOk : kExitVerify;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) {
        std::cerr << "error: report needs at least one run directory\n";
        return kExitConfig;
    }
    fs::create_directories(out_dir);

    struct DirSummary {
        std::string dir;
        std::vector<MetricReport> reports;
        std::vector<std::string> problems;
    };
    std::vector<DirSummary> summaries;
    for (const auto& dir : run_dirs) {
        DirSummary s;
        s.dir = dir;
        if (!fs::is_directory(dir)) {
            s.problems.push_back("missing directory");
            summaries.push_back(std::move(s));
            continue;
        }
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("metrics_seed", 0) != 0) continue;
            MetricReport report;
            int generation = 0;
            if (read_metrics_csv(entry.path().string(), &report, &generation))
                s.reports.push_back(report);
            else
                s.problems.push_back("corrupt " + name);
        }
        std::sort(s.reports.begin(), s.reports.end(),
                  [](const MetricReport& a, const MetricReport& b) { return a.seed < b.seed; });
        summaries.push_back(std::move(s));
    }

    const std::string csv_path = (fs::path(out_dir) / "report.csv").string();
    {
        std::ofstream out(csv_path);
        out << "run_dir,seed,topsim,useful_length,final_mse,epsilon\n";
        for (const auto& s : summaries)
            for (const auto& r : s.reports)
                out << s.dir << "," << r.seed << "," << fmt(r.topsim) << "," << fmt(r.useful_length) << ","
                    << fmt(r.final_mse) << "," << fmt(r.epsilon) << "\n";
    }
    {
        std::ofstream out((fs::path(out_dir) / "report.md").string());
        out << "| run dir | seeds | TopSim | useful length | final MSE |\n|---|---|---|---|---|\n";
        for (const auto& s : summaries) {
            std::vector<double> ts, ul, ms;
            for (const auto& r : s.reports) {
                ts.push_back(r.topsim);
                ul.push_back(r.useful_length);
                ms.push_back(r.final_mse);
            }
            out << "| " << s.dir << " | " << s.reports.size() << " | " << fmt(mean_of(ts)) << " +/- "
                << fmt(stderr_of(ts)) << " | " << fmt(mean_of(ul)) << " +/- " << fmt(stderr_of(ul)) << " | "
                << fmt(mean_of(ms)) << " +/- " << fmt(stderr_of(ms)) << " |\n";
            for (const auto& p : s.problems) out << "| " << s.dir << " (warning: " << p << ") | | | | |\n";
        }
    }
    for (const auto& s : summaries)
        for (const auto& p : s.problems) std::cerr << "warning: " << s.dir << ": " << p << "\n";
    std::cout << "report: " << csv_path << "\n";
    return kExitOk;
}

}  // namespace celebi
