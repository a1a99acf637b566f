#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cnnqoe/numerics.hpp"
#include "cnnqoe/series.hpp"

namespace cnnqoe {

enum class Variant : std::uint8_t { proposed = 0, original_tcn = 1 };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    int filter_width = 2;   // taps per convolution (k)
    int num_blocks = 3;     // residual blocks (L)
    int filters = 32;       // channels per hidden layer (n)
    int in_channels = 4;    // input feature channels
    Variant variant = Variant::proposed;
    double dropout_p = 0.0;  // original_tcn only

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One convolution, optionally weight-normalized. For weight-normalized layers
// `kernel.weights` holds the direction v and `gain` the per-channel g; plain
// layers leave `gain` empty and use `kernel` directly.
struct ConvLayer {
    std::string name;
    Kernel kernel;
    std::vector<double> gain;
    int dilation = 1;

    // accumulated training gradients, laid out like the parameters above
    std::vector<double> grad_weights;
    std::vector<double> grad_bias;
    std::vector<double> grad_gain;

    bool weight_normed() const { return !gain.empty(); }
    Kernel effective_kernel() const {
        return weight_normed() ? weight_norm_apply(kernel, gain) : kernel;
    }
    Series apply(const Series& x) const {
        return weight_normed()
                   ? conv1d_dilated_causal(x, weight_norm_apply(kernel, gain), dilation)
                   : conv1d_dilated_causal(x, kernel, dilation);
    }
};

struct ResidualBlock {
    Variant variant = Variant::proposed;
    std::vector<ConvLayer> convs;           // 1 conv (proposed) or 2 (original_tcn)
    std::optional<ConvLayer> projection;    // 1x1 skip projection when channels differ
    double dropout_p = 0.0;                 // original_tcn only
};

struct Model {
    ModelConfig config;
    std::optional<ConvLayer> input_conv;  // proposed variant only
    std::vector<ResidualBlock> blocks;
    ConvLayer head;                       // 1x1 readout to a single channel
};

// Block dilations 1, 2, 4, ..., 2^(num_blocks-1).
std::vector<int> dilation_schedule(int num_blocks);

// Span of a plain stack of num_layers dilated convolutions with that schedule:
// 1 + (width-1) * (2^num_layers - 1). This is the figure the recency bound
// below is checked against.
int dilated_stack_receptive_field(int filter_width, int num_layers);

// Exact span of the assembled network (input conv / double convs included).
int receptive_field(const ModelConfig& config);
int receptive_field(const Model& model);

inline constexpr int kMaxReceptiveField = 20;  // QoE recency horizon, in steps

struct ConfigViolation {
    std::string message;
    bool overridable = false;  // only the receptive-field bound may be waived
};

std::vector<ConfigViolation> validate_config(const ModelConfig& config);

// Build and initialize a model. Weights ~ N(0, 1/fan_in); weight-normalized
// layers store the draw as direction with gain = per-channel norm, so initial
// effective weights equal the draw. Throws ConfigError on violations;
// allow_oversized_field waives only the receptive-field bound.
Model build_model(const ModelConfig& config, std::mt19937_64& rng,
                  bool allow_oversized_field = false);

// Structure without initialization (all parameters zero); used by the loader.
Model model_skeleton(const ModelConfig& config);

// Inference-mode block application (dropout is identity).
Series residual_block_forward(const ResidualBlock& block, const Series& x);

// Inference-mode prediction: the head output at the final time step.
double forward(const Model& model, const Series& window);

// Mutable view of every trainable parameter buffer, in a fixed order shared by
// the optimizer, serialization, and gradient checks.
struct ParamRef {
    std::string name;
    std::vector<double>* values;
    std::vector<double>* grads;
};
std::vector<ParamRef> param_refs(Model& model);
std::vector<const std::vector<double>*> param_buffers(const Model& model);
void zero_grads(Model& model);

long long count_params(const Model& model);

// Multiply-accumulates of one prediction, times two; convolutions only.
long long count_flops(const Model& model);

struct ComplexityReport {
    long long param_count = 0;
    long long flops_per_step = 0;
    int receptive_field = 0;
    long long model_size_bytes = 0;
};

ComplexityReport complexity_report(const Model& model);

}  // namespace cnnqoe
