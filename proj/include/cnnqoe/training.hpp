#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cnnqoe/data.hpp"
#include "cnnqoe/model.hpp"

namespace cnnqoe {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::optional<int> early_stop_patience;  // epochs without val improvement
};

// Throws ParameterError on out-of-range fields. A zero learning rate is legal
// (training becomes a no-op) so optimizer behaviour can be pinned down.
void validate(const TrainConfig& config);

// One training example: the feature window ending at some second, and that
// second's normalized score.
struct WindowSample {
    Series window;
    double target = 0.0;
};

// One sample per time step; steps earlier than the window reads as zeros.
std::vector<WindowSample> make_windows(const Series& features,
                                       const std::vector<double>& targets, int window_length);
std::vector<WindowSample> make_windows(const QoETrace& trace, const NormalizationStats& stats,
                                       int window_length);

struct MseResult {
    double loss = 0.0;
    std::vector<double> dpred;  // dL/dprediction, per element
};

MseResult mse_loss(const std::vector<double>& predictions, const std::vector<double>& targets);

// First/second-moment buffers for Adam; step counts applied updates.
struct OptimizerState {
    long long step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

// One update over a flat parameter vector. Buffers are sized on first use and
// must keep their size afterwards. Non-finite gradients are an error.
void optimizer_step(OptimizerState& state, std::span<double> params,
                    std::span<const double> grads, const TrainConfig& config);

struct EpochLoss {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

// Divergence or a non-finite gradient; carries the finite history so far and
// the layer that produced the bad gradient, when known.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what, std::vector<EpochLoss> history_so_far = {})
        : std::runtime_error(what), history(std::move(history_so_far)) {}
    std::vector<EpochLoss> history;
};

struct TrainResult {
    std::vector<EpochLoss> history;
};

// Minibatch gradient descent on the mean squared error over the samples,
// mutating the model in place. Shuffling, dropout, and initialization draw
// from streams derived from config.seed, so identical inputs give identical
// models. With a validation set and early_stop_patience, stops after that
// many epochs without a new best validation loss (last weights kept).
TrainResult train(Model& model, const std::vector<WindowSample>& samples,
                  const TrainConfig& config,
                  const std::vector<WindowSample>* validation = nullptr);

// Mean squared error of inference-mode predictions over samples.
double evaluate_loss(const Model& model, const std::vector<WindowSample>& samples);

struct GridSpace {
    std::vector<int> filter_widths = {2, 3};
    std::vector<int> block_counts = {2, 3, 4};
    std::vector<int> filter_counts = {16, 32, 64};
};

struct GridCandidate {
    ModelConfig config;
    double val_rmse = 0.0;  // normalized scale
    long long param_count = 0;
};

struct SkippedCandidate {
    ModelConfig config;
    std::string reason;
};

struct GridResult {
    std::vector<GridCandidate> ranked;  // best first
    std::vector<SkippedCandidate> skipped;
    ModelConfig best;
};

// Train one model per valid (width, blocks, filters) combination and rank by
// validation RMSE; ties fall to fewer parameters, then fewer blocks, then a
// narrower filter. Candidates violating the receptive-field bound are skipped.
// Each candidate trains from its own derived seed, so results do not depend on
// `jobs` (the number of worker threads).
GridResult grid_search(const GridSpace& space, const std::vector<QoETrace>& train_traces,
                       const std::vector<QoETrace>& val_traces, const TrainConfig& config,
                       Variant variant, double dropout_p = 0.0,
                       int in_channels = kFeatureChannels, int jobs = 1);

}  // namespace cnnqoe
