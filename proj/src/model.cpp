#include "cnnqoe/model.hpp"

#include <cmath>
#include <string>

#include "cnnqoe/model_io.hpp"

namespace cnnqoe {

std::string variant_name(Variant v) {
    return v == Variant::proposed ? "proposed" : "original_tcn";
}

Variant variant_from_name(const std::string& name) {
    if (name == "proposed") return Variant::proposed;
    if (name == "original_tcn") return Variant::original_tcn;
    throw ParameterError("unknown variant '" + name + "' (expected proposed or original_tcn)");
}

std::vector<int> dilation_schedule(int num_blocks) {
    if (num_blocks < 1) throw ParameterError("need at least one block");
    if (num_blocks > 30) throw ParameterError("dilation schedule overflows past 30 blocks");
    std::vector<int> d(num_blocks);
    for (int l = 0; l < num_blocks; ++l) d[l] = 1 << l;
    return d;
}

int dilated_stack_receptive_field(int filter_width, int num_layers) {
    if (filter_width < 1) throw ParameterError("filter width must be >= 1");
    if (num_layers < 1 || num_layers > 30) throw ParameterError("layer count out of range");
    return 1 + (filter_width - 1) * ((1 << num_layers) - 1);
}

int receptive_field(const ModelConfig& config) {
    if (config.filter_width < 1 || config.num_blocks < 1 || config.num_blocks > 30)
        throw ParameterError("filter width and block count must be positive");
    const int spread = (1 << config.num_blocks) - 1;  // sum of block dilations
    if (config.variant == Variant::proposed)
        return 1 + (config.filter_width - 1) * (spread + 1);  // + input conv at dilation 1
    return 1 + 2 * (config.filter_width - 1) * spread;        // two convs per block
}

int receptive_field(const Model& model) {
    int span = 1;
    if (model.input_conv)
        span += (model.input_conv->kernel.width - 1) * model.input_conv->dilation;
    for (const auto& block : model.blocks)
        for (const auto& conv : block.convs) span += (conv.kernel.width - 1) * conv.dilation;
    span += (model.head.kernel.width - 1) * model.head.dilation;
    return span;
}

std::vector<ConfigViolation> validate_config(const ModelConfig& config) {
    std::vector<ConfigViolation> v;
    if (config.filter_width < 1) v.push_back({"filter width must be >= 1", false});
    if (config.num_blocks < 1) v.push_back({"block count must be >= 1", false});
    if (config.num_blocks > 30) v.push_back({"block count must be <= 30", false});
    if (config.filters < 1) v.push_back({"filter count must be >= 1", false});
    if (config.in_channels < 1) v.push_back({"input channel count must be >= 1", false});
    if (config.variant == Variant::original_tcn) {
        if (!(config.dropout_p >= 0.0 && config.dropout_p < 1.0))
            v.push_back({"dropout probability must be in [0, 1)", false});
    } else if (config.dropout_p != 0.0) {
        v.push_back({"dropout applies to the original_tcn variant only", false});
    }
    if (config.filter_width >= 1 && config.num_blocks >= 1 && config.num_blocks <= 30) {
        const int r = dilated_stack_receptive_field(config.filter_width, config.num_blocks);
        if (r > kMaxReceptiveField)
            v.push_back({"receptive field r=" + std::to_string(r) + " exceeds the " +
                             std::to_string(kMaxReceptiveField) + "-step recency horizon",
                         true});
    }
    return v;
}

namespace {

ConvLayer make_layer(std::string name, int out_channels, int in_channels, int width, int dilation,
                     bool weight_normed) {
    ConvLayer layer;
    layer.name = std::move(name);
    layer.kernel = Kernel::zeros(out_channels, in_channels, width);
    layer.dilation = dilation;
    if (weight_normed) layer.gain.assign(out_channels, 0.0);
    return layer;
}

void init_layer(ConvLayer& layer, std::mt19937_64& rng) {
    const double stddev =
        std::sqrt(1.0 / (static_cast<double>(layer.kernel.in_channels) * layer.kernel.width));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& w : layer.kernel.weights) w = dist(rng);
    if (layer.weight_normed()) {
        // gain = per-channel norm of the draw, so effective weights start equal to it
        const std::size_t slice =
            static_cast<std::size_t>(layer.kernel.in_channels) * layer.kernel.width;
        for (int o = 0; o < layer.kernel.out_channels; ++o) {
            double s = 0.0;
            for (std::size_t j = 0; j < slice; ++j) {
                const double w = layer.kernel.weights[o * slice + j];
                s += w * w;
            }
            layer.gain[o] = std::sqrt(s);
        }
    }
}

}  // namespace

Model model_skeleton(const ModelConfig& config) {
    Model m;
    m.config = config;
    const auto dilations = dilation_schedule(config.num_blocks);
    if (config.variant == Variant::proposed) {
        m.input_conv =
            make_layer("input_conv", config.filters, config.in_channels, config.filter_width, 1,
                       false);
        for (int l = 0; l < config.num_blocks; ++l) {
            ResidualBlock block;
            block.variant = Variant::proposed;
            block.convs.push_back(make_layer("block" + std::to_string(l + 1) + ".conv1",
                                             config.filters, config.filters, config.filter_width,
                                             dilations[l], false));
            m.blocks.push_back(std::move(block));
        }
    } else {
        int in = config.in_channels;
        for (int l = 0; l < config.num_blocks; ++l) {
            const std::string prefix = "block" + std::to_string(l + 1);
            ResidualBlock block;
            block.variant = Variant::original_tcn;
            block.dropout_p = config.dropout_p;
            block.convs.push_back(make_layer(prefix + ".conv1", config.filters, in,
                                             config.filter_width, dilations[l], true));
            block.convs.push_back(make_layer(prefix + ".conv2", config.filters, config.filters,
                                             config.filter_width, dilations[l], true));
            if (in != config.filters)
                block.projection =
                    make_layer(prefix + ".projection", config.filters, in, 1, 1, false);
            m.blocks.push_back(std::move(block));
            in = config.filters;
        }
    }
    m.head = make_layer("head", 1, config.filters, 1, 1, false);
    return m;
}

Model build_model(const ModelConfig& config, std::mt19937_64& rng, bool allow_oversized_field) {
    std::string blocking;
    for (const auto& violation : validate_config(config)) {
        if (violation.overridable && allow_oversized_field) continue;
        if (!blocking.empty()) blocking += "; ";
        blocking += violation.message;
    }
    if (!blocking.empty()) throw ConfigError(blocking);

    Model m = model_skeleton(config);
    if (m.input_conv) init_layer(*m.input_conv, rng);
    for (auto& block : m.blocks) {
        for (auto& conv : block.convs) init_layer(conv, rng);
        if (block.projection) init_layer(*block.projection, rng);
    }
    init_layer(m.head, rng);
    return m;
}

Series residual_block_forward(const ResidualBlock& block, const Series& x) {
    if (block.convs.empty()) throw ShapeError("residual block has no convolutions");
    if (block.variant == Variant::proposed) {
        Series f = selu(block.convs[0].apply(x));
        const Series skip = block.projection ? block.projection->apply(x) : x;
        return add(skip, f);
    }
    if (block.convs.size() != 2)
        throw ShapeError("original_tcn block needs exactly two convolutions");
    Series h = relu(block.convs[0].apply(x));
    h = relu(block.convs[1].apply(h));
    const Series skip = block.projection ? block.projection->apply(x) : x;
    return relu(add(skip, h));
}

double forward(const Model& model, const Series& window) {
    if (window.channels() != model.config.in_channels)
        throw ShapeError("window has " + std::to_string(window.channels()) +
                         " channels, model expects " + std::to_string(model.config.in_channels));
    Series h = window;
    if (model.input_conv) h = selu(model.input_conv->apply(h));
    for (const auto& block : model.blocks) h = residual_block_forward(block, h);
    const Series y = model.head.apply(h);
    return y.at(0, y.length() - 1);
}

namespace {

void layer_refs(ConvLayer& layer, std::vector<ParamRef>& out) {
    out.push_back({layer.name + ".weights", &layer.kernel.weights, &layer.grad_weights});
    if (layer.weight_normed()) out.push_back({layer.name + ".gain", &layer.gain, &layer.grad_gain});
    out.push_back({layer.name + ".bias", &layer.kernel.bias, &layer.grad_bias});
}

template <typename ModelT, typename Fn>
void for_each_layer(ModelT& model, Fn&& fn) {
    if (model.input_conv) fn(*model.input_conv);
    for (auto& block : model.blocks) {
        for (auto& conv : block.convs) fn(conv);
        if (block.projection) fn(*block.projection);
    }
    fn(model.head);
}

}  // namespace

std::vector<ParamRef> param_refs(Model& model) {
    std::vector<ParamRef> refs;
    for_each_layer(model, [&](ConvLayer& layer) { layer_refs(layer, refs); });
    return refs;
}

std::vector<const std::vector<double>*> param_buffers(const Model& model) {
    std::vector<const std::vector<double>*> buffers;
    for_each_layer(model, [&](const ConvLayer& layer) {
        buffers.push_back(&layer.kernel.weights);
        if (layer.weight_normed()) buffers.push_back(&layer.gain);
        buffers.push_back(&layer.kernel.bias);
    });
    return buffers;
}

void zero_grads(Model& model) {
    for_each_layer(model, [](ConvLayer& layer) {
        layer.grad_weights.assign(layer.kernel.weights.size(), 0.0);
        layer.grad_bias.assign(layer.kernel.bias.size(), 0.0);
        layer.grad_gain.assign(layer.gain.size(), 0.0);
    });
}

long long count_params(const Model& model) {
    long long n = 0;
    for (const auto* buffer : param_buffers(model)) n += static_cast<long long>(buffer->size());
    return n;
}

long long count_flops(const Model& model) {
    long long macs = 0;
    for_each_layer(model, [&](const ConvLayer& layer) {
        macs += static_cast<long long>(layer.kernel.out_channels) * layer.kernel.in_channels *
                layer.kernel.width;
    });
    return 2 * macs;
}

ComplexityReport complexity_report(const Model& model) {
    ComplexityReport report;
    report.param_count = count_params(model);
    report.flops_per_step = count_flops(model);
    report.receptive_field = receptive_field(model);
    report.model_size_bytes = model_file_size(report.param_count);
    return report;
}

}  // namespace cnnqoe
