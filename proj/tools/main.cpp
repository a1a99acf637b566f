#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cnnqoe/data.hpp"
#include "cnnqoe/eval.hpp"
#include "cnnqoe/format.hpp"
#include "cnnqoe/model.hpp"
#include "cnnqoe/model_io.hpp"
#include "cnnqoe/rng.hpp"
#include "cnnqoe/run_config.hpp"
#include "cnnqoe/training.hpp"

namespace fs = std::filesystem;
using namespace cnnqoe;

namespace {

std::string fmt(double v) { return format_double(v); }

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

fs::path default_stats_path(const fs::path& model_path) {
    fs::path p = model_path;
    p.replace_extension(".stats");
    return p;
}

// ---- shared flag plumbing ------------------------------------------------

// Raw flag storage; only values the user actually passed get applied on top
// of the config file (which itself sits on top of the defaults).
struct Flags {
    std::string config_path;
    std::string traces, out_dir, variant, optimizer, protocol;
    std::string model_path, stats_path, trace_path, out_file;
    int k = 0, l = 0, n = 0, window = 0, epochs = 0, batch_size = 0, patience = 0;
    int jobs = 0, contents = 0, patterns = 0, duration = 0, reps = 0, warmup = 0;
    double lr = 0.0, dropout = 0.0, val_fraction = 0.0, fraction = 0.0, noise_std = 0.0;
    std::uint64_t seed = 0;
    bool override_receptive_field = false;
    std::vector<int> grid_k, grid_l, grid_n;

    CLI::Option* config_opt = nullptr;
    CLI::Option* traces_opt = nullptr;
    CLI::Option* out_dir_opt = nullptr;
    CLI::Option* variant_opt = nullptr;
    CLI::Option* optimizer_opt = nullptr;
    CLI::Option* protocol_opt = nullptr;
    CLI::Option* k_opt = nullptr;
    CLI::Option* l_opt = nullptr;
    CLI::Option* n_opt = nullptr;
    CLI::Option* window_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* batch_opt = nullptr;
    CLI::Option* patience_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
    CLI::Option* contents_opt = nullptr;
    CLI::Option* patterns_opt = nullptr;
    CLI::Option* duration_opt = nullptr;
    CLI::Option* reps_opt = nullptr;
    CLI::Option* warmup_opt = nullptr;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* dropout_opt = nullptr;
    CLI::Option* val_fraction_opt = nullptr;
    CLI::Option* fraction_opt = nullptr;
    CLI::Option* noise_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* override_opt = nullptr;
    CLI::Option* grid_k_opt = nullptr;
    CLI::Option* grid_l_opt = nullptr;
    CLI::Option* grid_n_opt = nullptr;
};

void add_config_flag(CLI::App* cmd, Flags& f) {
    f.config_opt = cmd->add_option("--config", f.config_path,
                                   "Config file (flat key = value); flags override it");
}

void add_model_flags(CLI::App* cmd, Flags& f) {
    f.k_opt = cmd->add_option("--k", f.k, "Convolution filter width");
    f.l_opt = cmd->add_option("--l", f.l, "Residual block count");
    f.n_opt = cmd->add_option("--n", f.n, "Filters per hidden layer");
    f.variant_opt = cmd->add_option("--variant", f.variant, "proposed or original_tcn");
    f.dropout_opt = cmd->add_option("--dropout", f.dropout,
                                    "Spatial dropout probability (original_tcn)");
}

void add_train_flags(CLI::App* cmd, Flags& f) {
    f.window_opt = cmd->add_option("--window", f.window,
                                   "Training window length (0 = receptive field)");
    f.lr_opt = cmd->add_option("--learning-rate,--lr", f.lr, "Optimizer step size");
    f.epochs_opt = cmd->add_option("--epochs", f.epochs, "Training epochs");
    f.batch_opt = cmd->add_option("--batch-size", f.batch_size, "Minibatch size");
    f.seed_opt = cmd->add_option("--seed", f.seed, "Run seed");
    f.optimizer_opt = cmd->add_option("--optimizer", f.optimizer, "adam or sgd");
    f.patience_opt = cmd->add_option("--patience", f.patience,
                                     "Early-stop patience in epochs (0 = off)");
    f.val_fraction_opt = cmd->add_option("--val-fraction", f.val_fraction,
                                         "Share of traces held out for validation");
    f.override_opt = cmd->add_flag("--override-receptive-field", f.override_receptive_field,
                                   "Waive the receptive-field bound (warns instead)");
}

RunConfig resolve(const Flags& f) {
    RunConfig rc;
    if (f.config_opt && f.config_opt->count()) rc = read_run_config_file(f.config_path);
    const auto set_int = [](CLI::Option* opt, int value, int& into) {
        if (opt && opt->count()) into = value;
    };
    const auto set_double = [](CLI::Option* opt, double value, double& into) {
        if (opt && opt->count()) into = value;
    };
    const auto set_string = [](CLI::Option* opt, const std::string& value, std::string& into) {
        if (opt && opt->count()) into = value;
    };
    set_int(f.k_opt, f.k, rc.model.filter_width);
    set_int(f.l_opt, f.l, rc.model.num_blocks);
    set_int(f.n_opt, f.n, rc.model.filters);
    if (f.variant_opt && f.variant_opt->count()) rc.model.variant = variant_from_name(f.variant);
    set_double(f.dropout_opt, f.dropout, rc.model.dropout_p);
    set_int(f.window_opt, f.window, rc.window);
    set_double(f.lr_opt, f.lr, rc.train.learning_rate);
    set_int(f.epochs_opt, f.epochs, rc.train.epochs);
    set_int(f.batch_opt, f.batch_size, rc.train.batch_size);
    if (f.seed_opt && f.seed_opt->count()) rc.train.seed = f.seed;
    if (f.optimizer_opt && f.optimizer_opt->count()) {
        if (f.optimizer == "adam") rc.train.optimizer = OptimizerKind::adam;
        else if (f.optimizer == "sgd") rc.train.optimizer = OptimizerKind::sgd;
        else throw ConfigError("unknown optimizer '" + f.optimizer + "' (expected adam or sgd)");
    }
    if (f.patience_opt && f.patience_opt->count())
        rc.train.early_stop_patience = f.patience > 0 ? std::optional<int>(f.patience)
                                                      : std::nullopt;
    set_double(f.val_fraction_opt, f.val_fraction, rc.val_fraction);
    if (f.override_opt && f.override_opt->count()) rc.override_receptive_field = true;
    set_string(f.traces_opt, f.traces, rc.traces);
    set_string(f.out_dir_opt, f.out_dir, rc.out_dir);
    set_string(f.protocol_opt, f.protocol, rc.protocol);
    set_double(f.fraction_opt, f.fraction, rc.fraction);
    set_int(f.jobs_opt, f.jobs, rc.jobs);
    set_int(f.contents_opt, f.contents, rc.count_contents);
    set_int(f.patterns_opt, f.patterns, rc.count_patterns);
    set_int(f.duration_opt, f.duration, rc.duration);
    set_double(f.noise_opt, f.noise_std, rc.noise_std);
    set_int(f.reps_opt, f.reps, rc.reps);
    set_int(f.warmup_opt, f.warmup, rc.warmup);
    if (f.grid_k_opt && f.grid_k_opt->count()) rc.grid.filter_widths = f.grid_k;
    if (f.grid_l_opt && f.grid_l_opt->count()) rc.grid.block_counts = f.grid_l;
    if (f.grid_n_opt && f.grid_n_opt->count()) rc.grid.filter_counts = f.grid_n;
    return rc;
}

// Enforce config validity; overridable violations downgrade to warnings when
// the waiver is set.
void enforce_config(const ModelConfig& config, bool override_receptive_field) {
    std::string blocking;
    for (const auto& violation : validate_config(config)) {
        if (violation.overridable && override_receptive_field) {
            std::cerr << "warning: " << violation.message << " (waived)\n";
            continue;
        }
        if (!blocking.empty()) blocking += "; ";
        blocking += violation.message;
    }
    if (!blocking.empty()) throw ConfigError(blocking);
}

std::vector<QoETrace> require_traces(const RunConfig& rc) {
    if (rc.traces.empty())
        throw ConfigError("no traces given (use --traces PATH or 'traces = ...' in the config)");
    return load_traces(rc.traces);
}

// Deterministic validation holdout: shuffled by a derived seed, last share out.
void split_validation(const std::vector<QoETrace>& traces, double val_fraction,
                      std::uint64_t seed, std::vector<QoETrace>& train_out,
                      std::vector<QoETrace>& val_out) {
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must be in [0, 1)");
    std::vector<std::size_t> idx(traces.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t nval = 0;
    if (val_fraction > 0.0 && traces.size() >= 2) {
        auto rng = make_rng(seed, "val-split");
        std::shuffle(idx.begin(), idx.end(), rng);
        nval = std::min<std::size_t>(
            traces.size() - 1,
            std::max<std::size_t>(1, static_cast<std::size_t>(val_fraction *
                                                              static_cast<double>(traces.size()))));
    }
    const std::size_t ntrain = traces.size() - nval;
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + ntrain);
    std::vector<std::size_t> val_idx(idx.begin() + ntrain, idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    for (const auto i : train_idx) train_out.push_back(traces[i]);
    for (const auto i : val_idx) val_out.push_back(traces[i]);
}

std::vector<WindowSample> windows_over(const std::vector<QoETrace>& traces,
                                       const NormalizationStats& stats, int window) {
    std::vector<WindowSample> samples;
    for (const auto& trace : traces) {
        auto w = make_windows(trace, stats, window);
        samples.insert(samples.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
    }
    return samples;
}

void write_history_csv(const fs::path& path, const std::vector<EpochLoss>& history) {
    auto out = open_out(path);
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : history) {
        out << e.epoch << "," << fmt(e.train_loss) << ",";
        if (e.val_loss) out << fmt(*e.val_loss);
        out << "\n";
    }
}

struct LoadedModel {
    Model model;
    NormalizationStats stats;
};

LoadedModel load_model_and_stats(const Flags& f) {
    if (f.model_path.empty()) throw ConfigError("--model is required");
    LoadedModel lm{load_model(f.model_path), {}};
    const fs::path stats_path =
        f.stats_path.empty() ? default_stats_path(f.model_path) : fs::path(f.stats_path);
    lm.stats = read_stats_file(stats_path);
    return lm;
}

std::vector<Fold> folds_for(const std::string& protocol, const std::vector<QoETrace>& traces,
                            double fraction, std::uint64_t seed) {
    if (protocol == "all") {
        Fold fold;
        for (std::size_t i = 0; i < traces.size(); ++i) fold.test.push_back(i);
        return {fold};
    }
    SplitProtocol sp;
    sp.fraction = fraction;
    sp.seed = seed;
    if (protocol == "leave_one_out_excluding_content_and_pattern")
        sp.kind = SplitKind::leave_one_out_excluding_content_and_pattern;
    else if (protocol == "random_80_20")
        sp.kind = SplitKind::random_80_20;
    else if (protocol == "random_fraction_per_test")
        sp.kind = SplitKind::random_fraction_per_test;
    else
        throw ConfigError("unknown protocol '" + protocol + "'");
    return split(traces, sp);
}

// ---- commands --------------------------------------------------------------

int cmd_synth(const Flags& f) {
    const RunConfig rc = resolve(f);
    if (rc.count_contents < 1 || rc.count_patterns < 1)
        throw ConfigError("contents and patterns must be >= 1");
    if (rc.duration < 2) throw ConfigError("duration must be >= 2 seconds");
    const fs::path out_dir(rc.out_dir);
    fs::create_directories(out_dir);

    static constexpr double kLadder[] = {5.0, 15.0, 30.0, 50.0, 75.0};
    static constexpr int kLadderSize = 5;
    int written = 0;
    for (int c = 0; c < rc.count_contents; ++c) {
        for (int p = 0; p < rc.count_patterns; ++p) {
            char name[32];
            std::snprintf(name, sizeof(name), "trace_c%02d_p%02d", c, p);
            auto rng = make_rng(rc.train.seed, std::string("schedule-") + name);
            const auto draw = [&](int bound) {
                return static_cast<int>(rng() % static_cast<std::uint64_t>(bound));
            };

            SynthParams params;
            params.duration = rc.duration;
            params.noise_std = rc.noise_std;
            params.seed = derive_seed(rc.train.seed, std::string("noise-") + name);
            params.id = name;
            params.content_id = "c" + std::to_string(c);
            params.pattern_id = "p" + std::to_string(p);

            // quality: a per-content base level plus 1-3 switches at jittered times
            int level_index = (c + draw(2)) % kLadderSize;
            params.quality = {{0, kLadder[level_index]}};
            const int switches = 1 + draw(3);
            const int slot = rc.duration / (switches + 1);
            int previous = 0;
            for (int s = 0; s < switches; ++s) {
                int at = slot * (s + 1) + (slot > 3 ? draw(slot / 2) - slot / 4 : 0);
                at = std::max(previous + 1, at);
                if (at >= rc.duration) break;
                int next_index = draw(kLadderSize);
                if (next_index == level_index) next_index = (next_index + 1) % kLadderSize;
                level_index = next_index;
                params.quality.push_back({at, kLadder[level_index]});
                previous = at;
            }

            // stalls: pattern 0 is clean; others stall once or twice for 2-4 s
            const int stalls = p == 0 ? 0 : 1 + (p % 2);
            if (stalls > 0) {
                const int region = rc.duration / 2;
                const int base = rc.duration / 4;
                const int stall_slot = region / stalls;
                int prev_end = -2;
                for (int s = 0; s < stalls; ++s) {
                    int start = base + stall_slot * s +
                                (stall_slot > 6 ? draw(stall_slot / 3) : 0);
                    const int length = 2 + draw(3);
                    if (start <= prev_end + 1) start = prev_end + 2;
                    if (start + length > rc.duration) break;
                    params.rebuffers.push_back({start, length});
                    prev_end = start + length;
                }
            }

            write_trace_file(synth_trace(params), out_dir / (std::string(name) + ".csv"));
            ++written;
        }
    }
    std::cerr << "wrote " << written << " traces to " << out_dir.string() << "\n";
    return 0;
}

int cmd_train(const Flags& f) {
    const RunConfig rc = resolve(f);
    const auto traces = require_traces(rc);
    std::vector<QoETrace> train_traces, val_traces;
    split_validation(traces, rc.val_fraction, rc.train.seed, train_traces, val_traces);
    if (train_traces.empty()) throw ConfigError("no traces left to train on");

    enforce_config(rc.model, rc.override_receptive_field);
    const NormalizationStats stats = compute_stats(train_traces);
    auto init_rng = make_rng(rc.train.seed, "init");
    Model model = build_model(rc.model, init_rng, rc.override_receptive_field);

    const int window = rc.window > 0 ? rc.window : receptive_field(rc.model);
    const auto train_windows = windows_over(train_traces, stats, window);
    std::vector<WindowSample> val_windows;
    if (!val_traces.empty()) val_windows = windows_over(val_traces, stats, window);

    const fs::path out_dir(rc.out_dir);
    fs::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    try {
        result = train(model, train_windows, rc.train,
                       val_windows.empty() ? nullptr : &val_windows);
    } catch (const TrainingError& e) {
        write_history_csv(out_dir / "history.csv", e.history);
        throw;
    }
    const auto t1 = std::chrono::steady_clock::now();

    save_model(model, out_dir / "model.cqoe");
    write_stats_file(stats, out_dir / "model.stats");
    write_history_csv(out_dir / "history.csv", result.history);

    const auto& last = result.history.back();
    std::cout << "params=" << count_params(model) << "\n"
              << "receptive_field=" << receptive_field(model) << "\n"
              << "window=" << window << "\n"
              << "train_samples=" << train_windows.size() << "\n"
              << "val_samples=" << val_windows.size() << "\n"
              << "epochs_run=" << result.history.size() << "\n"
              << "final_train_loss=" << fmt(last.train_loss) << "\n";
    if (last.val_loss) std::cout << "final_val_loss=" << fmt(*last.val_loss) << "\n";
    std::cout << "train_seconds="
              << fmt(std::chrono::duration<double>(t1 - t0).count()) << "\n"
              << "model=" << (out_dir / "model.cqoe").string() << "\n";
    return 0;
}

int cmd_evaluate(const Flags& f) {
    const RunConfig rc = resolve(f);
    const LoadedModel lm = load_model_and_stats(f);
    const auto traces = require_traces(rc);
    const auto folds = folds_for(rc.protocol, traces, rc.fraction, rc.train.seed);
    const EvalReport report = evaluate(lm.model, folds, traces, lm.stats);

    const fs::path out_dir(rc.out_dir);
    fs::create_directories(out_dir / "predictions");
    {
        auto out = open_out(out_dir / "report.csv");
        out << "fold,trace,samples,pcc,srocc,rmse\n";
        for (const auto& row : report.rows) {
            out << row.fold << "," << row.trace_id << "," << row.samples << ",";
            if (row.pcc) out << fmt(*row.pcc);
            out << ",";
            if (row.srocc) out << fmt(*row.srocc);
            out << "," << fmt(row.rmse) << "\n";
        }
        out << "aggregate,,,";
        if (report.mean_pcc) out << fmt(*report.mean_pcc);
        out << ",";
        if (report.mean_srocc) out << fmt(*report.mean_srocc);
        out << "," << fmt(report.mean_rmse) << "\n";
    }
    for (const auto& row : report.rows) {
        const QoETrace* trace = nullptr;
        for (const auto& t : traces)
            if (t.id == row.trace_id) trace = &t;
        if (!trace) continue;
        const auto predictions = predict_trace(lm.model, *trace, lm.stats);
        auto out = open_out(out_dir / "predictions" / (row.trace_id + ".csv"));
        out << "t,qoe,prediction\n";
        for (std::size_t t = 0; t < predictions.size(); ++t)
            out << t << "," << fmt(trace->samples[t].qoe) << "," << fmt(predictions[t]) << "\n";
    }
    if (report.skipped > 0)
        std::cerr << "warning: skipped " << report.skipped << " test trace(s) shorter than 2 s\n";

    std::cout << "rows=" << report.rows.size() << "\n";
    if (report.mean_pcc) std::cout << "mean_pcc=" << fmt(*report.mean_pcc) << "\n";
    if (report.mean_srocc) std::cout << "mean_srocc=" << fmt(*report.mean_srocc) << "\n";
    std::cout << "mean_rmse=" << fmt(report.mean_rmse) << "\n"
              << "report=" << (out_dir / "report.csv").string() << "\n";
    return 0;
}

int cmd_predict(const Flags& f) {
    const LoadedModel lm = load_model_and_stats(f);
    if (f.trace_path.empty()) throw ConfigError("--trace is required");
    const QoETrace trace = parse_trace_file(f.trace_path);
    const auto predictions = predict_trace(lm.model, trace, lm.stats);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!f.out_file.empty()) {
        file = open_out(f.out_file);
        out = &file;
    }
    *out << "t,qoe,prediction\n";
    for (std::size_t t = 0; t < predictions.size(); ++t)
        *out << t << "," << fmt(trace.samples[t].qoe) << "," << fmt(predictions[t]) << "\n";
    return 0;
}

int cmd_bench(const Flags& f) {
    const RunConfig rc = resolve(f);
    if (rc.reps < 30)
        throw ParameterError("--reps must be at least 30 for stable latency statistics");
    if (f.model_path.empty()) throw ConfigError("--model is required");
    const Model model = load_model(f.model_path);
    const BenchReport report = bench_inference(model, rc.reps, rc.warmup);
    std::cout << "reps=" << report.reps << "\n"
              << "median_ms=" << fmt(report.latency.median_ms) << "\n"
              << "p95_ms=" << fmt(report.latency.p95_ms) << "\n"
              << "mean_ms=" << fmt(report.latency.mean_ms) << "\n"
              << "params=" << report.complexity.param_count << "\n"
              << "flops_per_step=" << report.complexity.flops_per_step << "\n"
              << "receptive_field=" << report.complexity.receptive_field << "\n"
              << "model_size_bytes=" << report.complexity.model_size_bytes << "\n";
    return 0;
}

int cmd_inspect(const Flags& f) {
    if (f.model_path.empty()) throw ConfigError("--model is required");
    const Model model = load_model(f.model_path);
    const auto& c = model.config;
    std::cout << "variant=" << variant_name(c.variant) << "\n"
              << "k=" << c.filter_width << "\n"
              << "l=" << c.num_blocks << "\n"
              << "n=" << c.filters << "\n"
              << "in_channels=" << c.in_channels << "\n"
              << "dropout=" << fmt(c.dropout_p) << "\n";

    const auto describe = [](const ConvLayer& layer) {
        const long long params = static_cast<long long>(layer.kernel.weights.size()) +
                                 static_cast<long long>(layer.kernel.bias.size()) +
                                 static_cast<long long>(layer.gain.size());
        std::cout << "layer " << layer.name << " in=" << layer.kernel.in_channels
                  << " out=" << layer.kernel.out_channels << " width=" << layer.kernel.width
                  << " dilation=" << layer.dilation
                  << (layer.weight_normed() ? " weight_norm" : "") << " params=" << params
                  << "\n";
    };
    if (model.input_conv) describe(*model.input_conv);
    for (const auto& block : model.blocks) {
        for (const auto& conv : block.convs) describe(conv);
        if (block.projection) describe(*block.projection);
    }
    describe(model.head);

    const ComplexityReport report = complexity_report(model);
    std::cout << "params=" << report.param_count << "\n"
              << "flops_per_step=" << report.flops_per_step << "\n"
              << "model_size_bytes=" << report.model_size_bytes << "\n"
              << "receptive_field=" << report.receptive_field << "\n"
              << "dilated_stack_receptive_field="
              << dilated_stack_receptive_field(c.filter_width, c.num_blocks) << "\n"
              << "note=receptive_field covers the assembled network; the dilated-stack figure"
                 " counts one convolution per level and is the one the recency bound checks\n";
    return 0;
}

int cmd_grid(const Flags& f) {
    const RunConfig rc = resolve(f);
    const auto traces = require_traces(rc);
    const double val_fraction = rc.val_fraction > 0.0 ? rc.val_fraction : 0.2;
    std::vector<QoETrace> train_traces, val_traces;
    split_validation(traces, val_fraction, rc.train.seed, train_traces, val_traces);
    if (train_traces.empty() || val_traces.empty())
        throw ConfigError("grid search needs both training and validation traces");

    const GridResult result =
        grid_search(rc.grid, train_traces, val_traces, rc.train, rc.model.variant,
                    rc.model.dropout_p, rc.model.in_channels, rc.jobs);

    for (const auto& skipped : result.skipped)
        std::cerr << "skipped k=" << skipped.config.filter_width
                  << " l=" << skipped.config.num_blocks << " n=" << skipped.config.filters << ": "
                  << skipped.reason << "\n";

    const fs::path out_dir(rc.out_dir);
    fs::create_directories(out_dir);
    {
        auto out = open_out(out_dir / "grid.csv");
        out << "rank,k,l,n,params,val_rmse\n";
        for (std::size_t i = 0; i < result.ranked.size(); ++i) {
            const auto& row = result.ranked[i];
            out << i + 1 << "," << row.config.filter_width << "," << row.config.num_blocks << ","
                << row.config.filters << "," << row.param_count << "," << fmt(row.val_rmse)
                << "\n";
        }
    }
    std::cout << "candidates=" << result.ranked.size() << "\n"
              << "skipped=" << result.skipped.size() << "\n"
              << "best_k=" << result.best.filter_width << "\n"
              << "best_l=" << result.best.num_blocks << "\n"
              << "best_n=" << result.best.filters << "\n"
              << "best_val_rmse=" << fmt(result.ranked.front().val_rmse) << "\n"
              << "grid=" << (out_dir / "grid.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous QoE prediction over streaming-session traces"};
    app.require_subcommand(1);

    Flags synth_flags, train_flags, eval_flags, predict_flags, bench_flags, inspect_flags,
        grid_flags;
    int exit_code = 0;

    {
        auto* cmd = app.add_subcommand("synth", "Generate a synthetic trace corpus");
        Flags& f = synth_flags;
        add_config_flag(cmd, f);
        f.out_dir_opt = cmd->add_option("--out", f.out_dir, "Output directory");
        f.seed_opt = cmd->add_option("--seed", f.seed, "Corpus seed");
        f.contents_opt = cmd->add_option("--contents", f.contents, "Distinct contents");
        f.patterns_opt = cmd->add_option("--patterns", f.patterns, "Distinct playout patterns");
        f.duration_opt = cmd->add_option("--duration", f.duration, "Seconds per trace");
        f.noise_opt = cmd->add_option("--noise-std", f.noise_std, "Distortion noise level");
        cmd->callback([&] { exit_code = cmd_synth(f); });
    }
    {
        auto* cmd = app.add_subcommand("train", "Train a model on traces");
        Flags& f = train_flags;
        add_config_flag(cmd, f);
        f.traces_opt = cmd->add_option("--traces", f.traces, "Trace file or directory");
        f.out_dir_opt = cmd->add_option("--out", f.out_dir, "Output directory");
        add_model_flags(cmd, f);
        add_train_flags(cmd, f);
        cmd->callback([&] { exit_code = cmd_train(f); });
    }
    {
        auto* cmd = app.add_subcommand("evaluate", "Evaluate a trained model over folds");
        Flags& f = eval_flags;
        add_config_flag(cmd, f);
        cmd->add_option("--model", f.model_path, "Trained model file")->required();
        cmd->add_option("--stats", f.stats_path, "Normalization stats file");
        f.traces_opt = cmd->add_option("--traces", f.traces, "Trace file or directory");
        f.protocol_opt = cmd->add_option(
            "--protocol", f.protocol,
            "all | leave_one_out_excluding_content_and_pattern | random_80_20 | "
            "random_fraction_per_test");
        f.fraction_opt = cmd->add_option("--fraction", f.fraction, "Train share for random splits");
        f.seed_opt = cmd->add_option("--seed", f.seed, "Split seed");
        f.out_dir_opt = cmd->add_option("--out", f.out_dir, "Output directory");
        cmd->callback([&] { exit_code = cmd_evaluate(f); });
    }
    {
        auto* cmd = app.add_subcommand("predict", "Per-second predictions for one trace");
        Flags& f = predict_flags;
        cmd->add_option("--model", f.model_path, "Trained model file")->required();
        cmd->add_option("--stats", f.stats_path, "Normalization stats file");
        cmd->add_option("--trace", f.trace_path, "Trace file")->required();
        cmd->add_option("--out", f.out_file, "Output CSV (default: stdout)");
        cmd->callback([&] { exit_code = cmd_predict(f); });
    }
    {
        auto* cmd = app.add_subcommand("bench", "Measure single-step inference latency");
        Flags& f = bench_flags;
        cmd->add_option("--model", f.model_path, "Trained model file")->required();
        f.reps_opt = cmd->add_option("--reps", f.reps, "Timed repetitions (>= 30)");
        f.warmup_opt = cmd->add_option("--warmup", f.warmup, "Untimed warmup repetitions");
        cmd->callback([&] { exit_code = cmd_bench(f); });
    }
    {
        auto* cmd = app.add_subcommand("inspect", "Describe a saved model");
        Flags& f = inspect_flags;
        cmd->add_option("--model", f.model_path, "Model file")->required();
        cmd->callback([&] { exit_code = cmd_inspect(f); });
    }
    {
        auto* cmd = app.add_subcommand("grid", "Width/depth/filters grid search");
        Flags& f = grid_flags;
        add_config_flag(cmd, f);
        f.traces_opt = cmd->add_option("--traces", f.traces, "Trace file or directory");
        f.out_dir_opt = cmd->add_option("--out", f.out_dir, "Output directory");
        f.variant_opt = cmd->add_option("--variant", f.variant, "proposed or original_tcn");
        f.dropout_opt = cmd->add_option("--dropout", f.dropout, "Dropout for original_tcn");
        f.grid_k_opt = cmd->add_option("--grid-k", f.grid_k, "Filter widths")->delimiter(',');
        f.grid_l_opt = cmd->add_option("--grid-l", f.grid_l, "Block counts")->delimiter(',');
        f.grid_n_opt = cmd->add_option("--grid-n", f.grid_n, "Filter counts")->delimiter(',');
        f.jobs_opt = cmd->add_option("--jobs", f.jobs, "Concurrent candidates");
        f.val_fraction_opt =
            cmd->add_option("--val-fraction", f.val_fraction, "Validation share (default 0.2)");
        f.lr_opt = cmd->add_option("--learning-rate,--lr", f.lr, "Optimizer step size");
        f.epochs_opt = cmd->add_option("--epochs", f.epochs, "Training epochs per candidate");
        f.batch_opt = cmd->add_option("--batch-size", f.batch_size, "Minibatch size");
        f.seed_opt = cmd->add_option("--seed", f.seed, "Run seed");
        f.patience_opt = cmd->add_option("--patience", f.patience, "Early-stop patience (0 = off)");
        cmd->callback([&] { exit_code = cmd_grid(f); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
