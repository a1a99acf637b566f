#include "cnnqoe/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cnnqoe/rng.hpp"

namespace cnnqoe {

Series add(const Series& a, const Series& b) {
    if (a.channels() != b.channels() || a.length() != b.length())
        throw ShapeError("elementwise add needs matching shapes");
    Series out = a;
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
    return out;
}

namespace {

void check_conv_args(const Series& x, const Kernel& kernel, int dilation) {
    if (dilation < 1) throw ParameterError("dilation must be >= 1");
    if (kernel.in_channels != x.channels())
        throw ShapeError("kernel expects " + std::to_string(kernel.in_channels) +
                         " input channels, series has " + std::to_string(x.channels()));
    if (kernel.weights.size() !=
        static_cast<std::size_t>(kernel.out_channels) * kernel.in_channels * kernel.width)
        throw ShapeError("kernel weight buffer does not match its dimensions");
    if (kernel.bias.size() != static_cast<std::size_t>(kernel.out_channels))
        throw ShapeError("kernel bias buffer does not match out_channels");
}

}  // namespace

Series conv1d_dilated_causal(const Series& x, const Kernel& kernel, int dilation) {
    check_conv_args(x, kernel, dilation);
    const int T = x.length();
    Series y(kernel.out_channels, T);
    for (int o = 0; o < kernel.out_channels; ++o) {
        double* yrow = y.channel(o);
        std::fill(yrow, yrow + T, kernel.bias[o]);
        for (int c = 0; c < kernel.in_channels; ++c) {
            const double* xrow = x.channel(c);
            for (int i = 0; i < kernel.width; ++i) {
                const double w = kernel.w(o, c, i);
                const int shift = i * dilation;
                for (int t = shift; t < T; ++t) yrow[t] += w * xrow[t - shift];
            }
        }
    }
    return y;
}

ConvGradients conv1d_backward(const Series& x, const Kernel& kernel, int dilation,
                              const Series& dy) {
    check_conv_args(x, kernel, dilation);
    if (dy.channels() != kernel.out_channels || dy.length() != x.length())
        throw ShapeError("upstream gradient shape does not match the convolution output");
    const int T = x.length();
    ConvGradients g{Series(x.channels(), T), Kernel::zeros(kernel.out_channels, kernel.in_channels, kernel.width)};
    for (int o = 0; o < kernel.out_channels; ++o) {
        const double* dyrow = dy.channel(o);
        double db = 0.0;
        for (int t = 0; t < T; ++t) db += dyrow[t];
        g.grad.bias[o] = db;
        for (int c = 0; c < kernel.in_channels; ++c) {
            const double* xrow = x.channel(c);
            double* dxrow = g.dx.channel(c);
            for (int i = 0; i < kernel.width; ++i) {
                const int shift = i * dilation;
                double dw = 0.0;
                for (int t = shift; t < T; ++t) dw += dyrow[t] * xrow[t - shift];
                g.grad.w(o, c, i) = dw;
                const double w = kernel.w(o, c, i);
                for (int t = shift; t < T; ++t) dxrow[t - shift] += w * dyrow[t];
            }
        }
    }
    return g;
}

double selu(double x, SeluConstants c) {
    return x > 0.0 ? c.lambda * x : c.lambda * c.alpha * std::expm1(x);
}

Series selu(const Series& x, SeluConstants c) {
    Series y = x;
    for (double& v : y.values()) v = selu(v, c);
    return y;
}

double selu_backward(double x, double dy, SeluConstants c) {
    return dy * (x > 0.0 ? c.lambda : c.lambda * c.alpha * std::exp(x));
}

Series selu_backward(const Series& x, const Series& dy, SeluConstants c) {
    if (x.channels() != dy.channels() || x.length() != dy.length())
        throw ShapeError("activation gradient needs matching shapes");
    Series dx = dy;
    const auto& xv = x.values();
    auto& dv = dx.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = selu_backward(xv[i], dv[i], c);
    return dx;
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

Series relu(const Series& x) {
    Series y = x;
    for (double& v : y.values()) v = relu(v);
    return y;
}

Series relu_backward(const Series& x, const Series& dy) {
    if (x.channels() != dy.channels() || x.length() != dy.length())
        throw ShapeError("activation gradient needs matching shapes");
    Series dx = dy;
    const auto& xv = x.values();
    auto& dv = dx.values();
    for (std::size_t i = 0; i < dv.size(); ++i)
        if (xv[i] <= 0.0) dv[i] = 0.0;
    return dx;
}

namespace {

std::vector<double> channel_norms(const Kernel& v) {
    const std::size_t slice = static_cast<std::size_t>(v.in_channels) * v.width;
    std::vector<double> norms(v.out_channels);
    for (int o = 0; o < v.out_channels; ++o) {
        double s = 0.0;
        for (std::size_t j = 0; j < slice; ++j) {
            const double w = v.weights[o * slice + j];
            s += w * w;
        }
        const double n = std::sqrt(s);
        if (!(n > 0.0) || !std::isfinite(n))
            throw NumericError("weight normalization needs a finite, non-zero direction slice");
        norms[o] = n;
    }
    return norms;
}

}  // namespace

Kernel weight_norm_apply(const Kernel& direction, const std::vector<double>& gain) {
    if (gain.size() != static_cast<std::size_t>(direction.out_channels))
        throw ShapeError("one gain per output channel required");
    const auto norms = channel_norms(direction);
    Kernel w = direction;
    const std::size_t slice = static_cast<std::size_t>(w.in_channels) * w.width;
    for (int o = 0; o < w.out_channels; ++o) {
        const double scale = gain[o] / norms[o];
        for (std::size_t j = 0; j < slice; ++j) w.weights[o * slice + j] *= scale;
    }
    return w;
}

WeightNormGradients weight_norm_backward(const Kernel& direction, const std::vector<double>& gain,
                                         const std::vector<double>& dweights) {
    if (gain.size() != static_cast<std::size_t>(direction.out_channels))
        throw ShapeError("one gain per output channel required");
    if (dweights.size() != direction.weights.size())
        throw ShapeError("effective-weight gradient must match the direction layout");
    const auto norms = channel_norms(direction);
    WeightNormGradients g;
    g.ddirection.assign(direction.weights.size(), 0.0);
    g.dgain.assign(gain.size(), 0.0);
    const std::size_t slice = static_cast<std::size_t>(direction.in_channels) * direction.width;
    for (int o = 0; o < direction.out_channels; ++o) {
        const double inv = 1.0 / norms[o];
        double dg = 0.0;  // dL/dg[o] = dW[o] . v_hat[o]
        for (std::size_t j = 0; j < slice; ++j)
            dg += dweights[o * slice + j] * direction.weights[o * slice + j] * inv;
        g.dgain[o] = dg;
        const double scale = gain[o] * inv;
        for (std::size_t j = 0; j < slice; ++j) {
            const double vhat = direction.weights[o * slice + j] * inv;
            g.ddirection[o * slice + j] = scale * (dweights[o * slice + j] - vhat * dg);
        }
    }
    return g;
}

std::vector<std::uint8_t> spatial_dropout_mask(int channels, double p, std::mt19937_64& rng) {
    if (channels < 1) throw ShapeError("need at least one channel");
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("drop probability must be in [0, 1)");
    std::vector<std::uint8_t> mask(channels);
    for (int c = 0; c < channels; ++c) mask[c] = uniform01(rng) < p ? 0 : 1;
    return mask;
}

Series spatial_dropout_apply(const Series& x, const std::vector<std::uint8_t>& mask, double p) {
    if (mask.size() != static_cast<std::size_t>(x.channels()))
        throw ShapeError("one mask entry per channel required");
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("drop probability must be in [0, 1)");
    Series y = x;
    const double scale = 1.0 / (1.0 - p);
    for (int c = 0; c < y.channels(); ++c) {
        double* row = y.channel(c);
        if (mask[c])
            for (int t = 0; t < y.length(); ++t) row[t] *= scale;
        else
            std::fill(row, row + y.length(), 0.0);
    }
    return y;
}

Series spatial_dropout(const Series& x, double p, bool training, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ParameterError("drop probability must be in [0, 1)");
    if (!training || p == 0.0) return x;
    const auto mask = spatial_dropout_mask(x.channels(), p, rng);
    return spatial_dropout_apply(x, mask, p);
}

}  // namespace cnnqoe
