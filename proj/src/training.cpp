#include "cnnqoe/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "cnnqoe/rng.hpp"

namespace cnnqoe {

void validate(const TrainConfig& config) {
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate))
        throw ParameterError("learning rate must be finite and >= 0");
    if (config.epochs < 1) throw ParameterError("epochs must be >= 1");
    if (config.batch_size < 1) throw ParameterError("batch size must be >= 1");
    if (!(config.adam_beta1 >= 0.0 && config.adam_beta1 < 1.0))
        throw ParameterError("adam_beta1 must be in [0, 1)");
    if (!(config.adam_beta2 >= 0.0 && config.adam_beta2 < 1.0))
        throw ParameterError("adam_beta2 must be in [0, 1)");
    if (!(config.adam_epsilon > 0.0)) throw ParameterError("adam_epsilon must be > 0");
    if (config.early_stop_patience && *config.early_stop_patience < 1)
        throw ParameterError("early-stop patience must be >= 1");
}

std::vector<WindowSample> make_windows(const Series& features,
                                       const std::vector<double>& targets, int window_length) {
    if (window_length < 1) throw ParameterError("window length must be >= 1");
    if (targets.size() != static_cast<std::size_t>(features.length()))
        throw ShapeError("one target per time step required");
    const int T = features.length();
    const int C = features.channels();
    std::vector<WindowSample> samples;
    samples.reserve(T);
    for (int t = 0; t < T; ++t) {
        Series window(C, window_length);
        const int first = t - (window_length - 1);  // window covers [first, t]
        const int src0 = std::max(0, first);
        const int count = t - src0 + 1;
        for (int c = 0; c < C; ++c)
            std::memcpy(window.channel(c) + (src0 - first), features.channel(c) + src0,
                        static_cast<std::size_t>(count) * sizeof(double));
        samples.push_back({std::move(window), targets[t]});
    }
    return samples;
}

std::vector<WindowSample> make_windows(const QoETrace& trace, const NormalizationStats& stats,
                                       int window_length) {
    if (trace.samples.empty()) throw DataError("trace '" + trace.id + "' has no samples");
    const NormalizedTrace norm = normalize(trace, stats);
    return make_windows(norm.features, norm.targets, window_length);
}

MseResult mse_loss(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.size() != targets.size())
        throw ShapeError("predictions and targets must have the same length");
    if (predictions.empty()) throw ShapeError("need at least one prediction");
    MseResult result;
    result.dpred.resize(predictions.size());
    const double inv = 1.0 / static_cast<double>(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double diff = predictions[i] - targets[i];
        result.loss += diff * diff * inv;
        result.dpred[i] = 2.0 * diff * inv;
    }
    return result;
}

namespace {

void update_span(std::span<double> params, std::span<const double> grads, double* m, double* v,
                 long long step, const TrainConfig& config) {
    if (config.optimizer == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i)
            params[i] -= config.learning_rate * grads[i];
        return;
    }
    const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g;
        v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
    }
}

}  // namespace

void optimizer_step(OptimizerState& state, std::span<double> params,
                    std::span<const double> grads, const TrainConfig& config) {
    validate(config);
    if (params.size() != grads.size())
        throw ShapeError("parameter and gradient vectors must have the same length");
    for (double g : grads)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient");
    const bool needs_moments = config.optimizer == OptimizerKind::adam;
    if (needs_moments && state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (needs_moments && (state.m.size() != params.size() || state.v.size() != params.size()))
        throw ShapeError("optimizer state does not match the parameter count");
    ++state.step;
    update_span(params, grads, state.m.data(), state.v.data(), state.step, config);
}

namespace {

// Per-sample activations recorded by the training-mode forward pass.
struct BlockCache {
    Series input;
    Series pre1;                        // first conv pre-activation
    Series branch_in2;                  // input to the second conv (original_tcn)
    Series pre2;                        // second conv pre-activation (original_tcn)
    Series sum;                         // skip + branch, before the outer relu (original_tcn)
    std::vector<std::uint8_t> mask1, mask2;
    Kernel eff1, eff2;                  // effective kernels (weight-normed layers)
};

struct ForwardCache {
    Series input;
    Series input_pre;  // input conv pre-activation (proposed)
    std::vector<BlockCache> blocks;
    Series head_in;
};

const Kernel& effective(const ConvLayer& layer, Kernel& storage) {
    if (!layer.weight_normed()) return layer.kernel;
    storage = weight_norm_apply(layer.kernel, layer.gain);
    return storage;
}

double forward_train(const Model& model, const Series& window, std::mt19937_64& dropout_rng,
                     ForwardCache& cache) {
    cache.input = window;
    Series h = window;
    if (model.input_conv) {
        cache.input_pre = conv1d_dilated_causal(h, model.input_conv->kernel,
                                                model.input_conv->dilation);
        h = selu(cache.input_pre);
    }
    cache.blocks.clear();
    cache.blocks.resize(model.blocks.size());
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const ResidualBlock& block = model.blocks[b];
        BlockCache& bc = cache.blocks[b];
        bc.input = h;
        if (block.variant == Variant::proposed) {
            bc.pre1 = conv1d_dilated_causal(h, block.convs[0].kernel, block.convs[0].dilation);
            Series skip = block.projection
                              ? conv1d_dilated_causal(h, block.projection->kernel, 1)
                              : h;
            h = add(skip, selu(bc.pre1));
        } else {
            const bool use_dropout = block.dropout_p > 0.0;
            bc.pre1 = conv1d_dilated_causal(h, effective(block.convs[0], bc.eff1),
                                            block.convs[0].dilation);
            Series a1 = relu(bc.pre1);
            if (use_dropout) {
                bc.mask1 = spatial_dropout_mask(a1.channels(), block.dropout_p, dropout_rng);
                a1 = spatial_dropout_apply(a1, bc.mask1, block.dropout_p);
            }
            bc.branch_in2 = std::move(a1);
            bc.pre2 = conv1d_dilated_causal(bc.branch_in2, effective(block.convs[1], bc.eff2),
                                            block.convs[1].dilation);
            Series a2 = relu(bc.pre2);
            if (use_dropout) {
                bc.mask2 = spatial_dropout_mask(a2.channels(), block.dropout_p, dropout_rng);
                a2 = spatial_dropout_apply(a2, bc.mask2, block.dropout_p);
            }
            Series skip = block.projection
                              ? conv1d_dilated_causal(bc.input, block.projection->kernel, 1)
                              : bc.input;
            bc.sum = add(skip, a2);
            h = relu(bc.sum);
        }
    }
    cache.head_in = std::move(h);
    const Series y = conv1d_dilated_causal(cache.head_in, model.head.kernel, model.head.dilation);
    return y.at(0, y.length() - 1);
}

void accumulate(std::vector<double>& into, const std::vector<double>& from) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

// Add this conv's weight/bias gradients (weight-norm aware) and return dx.
Series backprop_conv(ConvLayer& layer, const Kernel& used_kernel, const Series& input,
                     const Series& dy) {
    ConvGradients g = conv1d_backward(input, used_kernel, layer.dilation, dy);
    if (layer.weight_normed()) {
        const WeightNormGradients wg =
            weight_norm_backward(layer.kernel, layer.gain, g.grad.weights);
        accumulate(layer.grad_weights, wg.ddirection);
        accumulate(layer.grad_gain, wg.dgain);
    } else {
        accumulate(layer.grad_weights, g.grad.weights);
    }
    accumulate(layer.grad_bias, g.grad.bias);
    return std::move(g.dx);
}

void backward(Model& model, const ForwardCache& cache, double dprediction) {
    Series dy(1, cache.head_in.length());
    dy.at(0, dy.length() - 1) = dprediction;
    Series dh = backprop_conv(model.head, model.head.kernel, cache.head_in, dy);

    for (std::size_t b = model.blocks.size(); b-- > 0;) {
        ResidualBlock& block = model.blocks[b];
        const BlockCache& bc = cache.blocks[b];
        if (block.variant == Variant::proposed) {
            const Series dpre = selu_backward(bc.pre1, dh);
            Series dx = backprop_conv(block.convs[0], block.convs[0].kernel, bc.input, dpre);
            if (block.projection)
                dx = add(dx, backprop_conv(*block.projection, block.projection->kernel, bc.input,
                                           dh));
            else
                dx = add(dx, dh);
            dh = std::move(dx);
        } else {
            const bool use_dropout = block.dropout_p > 0.0;
            const Series dsum = relu_backward(bc.sum, dh);
            Series da2 = use_dropout ? spatial_dropout_apply(dsum, bc.mask2, block.dropout_p)
                                     : dsum;
            const Series dpre2 = relu_backward(bc.pre2, da2);
            Series dbranch = backprop_conv(block.convs[1],
                                           block.convs[1].weight_normed() ? bc.eff2
                                                                          : block.convs[1].kernel,
                                           bc.branch_in2, dpre2);
            if (use_dropout) dbranch = spatial_dropout_apply(dbranch, bc.mask1, block.dropout_p);
            const Series dpre1 = relu_backward(bc.pre1, dbranch);
            Series dx = backprop_conv(block.convs[0],
                                      block.convs[0].weight_normed() ? bc.eff1
                                                                     : block.convs[0].kernel,
                                      bc.input, dpre1);
            if (block.projection)
                dx = add(dx, backprop_conv(*block.projection, block.projection->kernel, bc.input,
                                           dsum));
            else
                dx = add(dx, dsum);
            dh = std::move(dx);
        }
    }

    if (model.input_conv) {
        const Series dpre = selu_backward(cache.input_pre, dh);
        backprop_conv(*model.input_conv, model.input_conv->kernel, cache.input, dpre);
    }
}

void check_gradients(Model& model, const std::vector<EpochLoss>& history) {
    for (const auto& ref : param_refs(model))
        for (double g : *ref.grads)
            if (!std::isfinite(g))
                throw TrainingError("non-finite gradient in " + ref.name, history);
}

// Flattened Adam/SGD over every parameter buffer; one shared step counter.
struct ModelOptimizer {
    OptimizerState state;

    void step(Model& model, const TrainConfig& config) {
        auto refs = param_refs(model);
        if (config.optimizer == OptimizerKind::adam && state.m.empty()) {
            std::size_t total = 0;
            for (const auto& ref : refs) total += ref.values->size();
            state.m.assign(total, 0.0);
            state.v.assign(total, 0.0);
        }
        ++state.step;
        std::size_t offset = 0;
        for (const auto& ref : refs) {
            const std::size_t size = ref.values->size();
            update_span(std::span<double>(ref.values->data(), size),
                        std::span<const double>(ref.grads->data(), size),
                        state.m.empty() ? nullptr : state.m.data() + offset,
                        state.v.empty() ? nullptr : state.v.data() + offset, state.step, config);
            offset += size;
        }
    }
};

}  // namespace

TrainResult train(Model& model, const std::vector<WindowSample>& samples,
                  const TrainConfig& config, const std::vector<WindowSample>* validation) {
    validate(config);
    if (samples.empty()) throw DataError("no training samples");
    if (config.early_stop_patience && !validation)
        throw ParameterError("early stopping needs a validation set");

    auto shuffle_rng = make_rng(config.seed, "shuffle");
    auto dropout_rng = make_rng(config.seed, "dropout");
    ModelOptimizer optimizer;

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLoss> history;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    std::vector<ForwardCache> caches;
    std::vector<double> preds, targets;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double squared_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t count = std::min<std::size_t>(config.batch_size,
                                                            order.size() - start);
            zero_grads(model);
            caches.resize(count);
            preds.resize(count);
            targets.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const WindowSample& sample = samples[order[start + i]];
                preds[i] = forward_train(model, sample.window, dropout_rng, caches[i]);
                targets[i] = sample.target;
            }
            const MseResult batch = mse_loss(preds, targets);
            if (!std::isfinite(batch.loss))
                throw TrainingError("training diverged: non-finite loss in epoch " +
                                        std::to_string(epoch),
                                    history);
            for (std::size_t i = 0; i < count; ++i) backward(model, caches[i], batch.dpred[i]);
            check_gradients(model, history);
            optimizer.step(model, config);
            squared_sum += batch.loss * static_cast<double>(count);
        }
        EpochLoss entry;
        entry.epoch = epoch;
        entry.train_loss = squared_sum / static_cast<double>(samples.size());
        if (validation) entry.val_loss = evaluate_loss(model, *validation);
        history.push_back(entry);
        if (entry.val_loss) {
            if (*entry.val_loss < best_val) {
                best_val = *entry.val_loss;
                best_epoch = epoch;
            }
            if (config.early_stop_patience && epoch - best_epoch >= *config.early_stop_patience)
                break;
        }
    }
    return {std::move(history)};
}

double evaluate_loss(const Model& model, const std::vector<WindowSample>& samples) {
    if (samples.empty()) throw DataError("no samples to evaluate");
    double squared_sum = 0.0;
    for (const WindowSample& sample : samples) {
        const double diff = forward(model, sample.window) - sample.target;
        squared_sum += diff * diff;
    }
    return squared_sum / static_cast<double>(samples.size());
}

GridResult grid_search(const GridSpace& space, const std::vector<QoETrace>& train_traces,
                       const std::vector<QoETrace>& val_traces, const TrainConfig& config,
                       Variant variant, double dropout_p, int in_channels, int jobs) {
    validate(config);
    if (space.filter_widths.empty() || space.block_counts.empty() || space.filter_counts.empty())
        throw SearchError("grid has an empty axis");
    if (train_traces.empty() || val_traces.empty())
        throw DataError("grid search needs training and validation traces");
    if (jobs < 1) throw ParameterError("jobs must be >= 1");

    const NormalizationStats stats = compute_stats(train_traces);

    GridResult result;
    std::vector<ModelConfig> candidates;
    for (int width : space.filter_widths)
        for (int blocks : space.block_counts)
            for (int filters : space.filter_counts) {
                ModelConfig config_candidate;
                config_candidate.filter_width = width;
                config_candidate.num_blocks = blocks;
                config_candidate.filters = filters;
                config_candidate.in_channels = in_channels;
                config_candidate.variant = variant;
                if (variant == Variant::original_tcn) config_candidate.dropout_p = dropout_p;
                const auto violations = validate_config(config_candidate);
                if (!violations.empty()) {
                    result.skipped.push_back({config_candidate, violations.front().message});
                    continue;
                }
                candidates.push_back(config_candidate);
            }
    if (candidates.empty()) throw SearchError("every grid candidate is invalid");

    struct Outcome {
        bool trained = false;
        GridCandidate candidate;
        std::string failure;
    };
    std::vector<Outcome> outcomes(candidates.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= candidates.size()) return;
            try {
                const ModelConfig& candidate = candidates[i];
                const std::uint64_t seed = derive_seed(config.seed, "grid-" + std::to_string(i));
                auto init_rng = make_rng(seed, "init");
                Model model = build_model(candidate, init_rng);
                const int window = receptive_field(candidate);
                std::vector<WindowSample> train_windows;
                for (const auto& trace : train_traces) {
                    auto w = make_windows(trace, stats, window);
                    train_windows.insert(train_windows.end(),
                                         std::make_move_iterator(w.begin()),
                                         std::make_move_iterator(w.end()));
                }
                std::vector<WindowSample> val_windows;
                for (const auto& trace : val_traces) {
                    auto w = make_windows(trace, stats, window);
                    val_windows.insert(val_windows.end(), std::make_move_iterator(w.begin()),
                                       std::make_move_iterator(w.end()));
                }
                TrainConfig candidate_config = config;
                candidate_config.seed = seed;
                try {
                    train(model, train_windows, candidate_config, &val_windows);
                    outcomes[i].trained = true;
                    outcomes[i].candidate = {candidate,
                                             std::sqrt(evaluate_loss(model, val_windows)),
                                             count_params(model)};
                } catch (const TrainingError& e) {
                    outcomes[i].failure = e.what();
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (jobs == 1 || candidates.size() == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        const std::size_t n = std::min<std::size_t>(jobs, candidates.size());
        threads.reserve(n);
        for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (outcomes[i].trained)
            result.ranked.push_back(outcomes[i].candidate);
        else
            result.skipped.push_back({candidates[i], outcomes[i].failure});
    }
    if (result.ranked.empty()) throw SearchError("every grid candidate failed to train");

    std::stable_sort(result.ranked.begin(), result.ranked.end(),
                     [](const GridCandidate& a, const GridCandidate& b) {
                         if (a.val_rmse != b.val_rmse) return a.val_rmse < b.val_rmse;
                         if (a.param_count != b.param_count) return a.param_count < b.param_count;
                         if (a.config.num_blocks != b.config.num_blocks)
                             return a.config.num_blocks < b.config.num_blocks;
                         return a.config.filter_width < b.config.filter_width;
                     });
    result.best = result.ranked.front().config;
    return result;
}

}  // namespace cnnqoe
