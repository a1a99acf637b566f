#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cnnqoe/series.hpp"

namespace cnnqoe {

// Causal dilated convolution. Output has the kernel's out_channels and the
// input's length; positions before the start read as zeros, so
//   y[o][t] = bias[o] + sum_{c,i} w[o][c][i] * x[c][t - dilation*i]
// with out-of-range terms dropped. Tap 0 multiplies the current sample.
Series conv1d_dilated_causal(const Series& x, const Kernel& kernel, int dilation);

struct ConvGradients {
    Series dx;    // gradient w.r.t. the input
    Kernel grad;  // gradient w.r.t. weights (.weights) and bias (.bias)
};

// Gradients of conv1d_dilated_causal given upstream dy (same shape as the output).
ConvGradients conv1d_backward(const Series& x, const Kernel& kernel, int dilation,
                              const Series& dy);

double selu(double x, SeluConstants c = {});
Series selu(const Series& x, SeluConstants c = {});

// dL/dx given pre-activation x and upstream dL/dy. At x == 0 the negative-side
// derivative lambda*alpha is used.
double selu_backward(double x, double dy, SeluConstants c = {});
Series selu_backward(const Series& x, const Series& dy, SeluConstants c = {});

double relu(double x);
Series relu(const Series& x);
Series relu_backward(const Series& x, const Series& dy);

// Effective weights w[o] = gain[o] * v[o] / ||v[o]||, norm taken over each
// output channel's slice. Bias passes through untouched.
Kernel weight_norm_apply(const Kernel& direction, const std::vector<double>& gain);

struct WeightNormGradients {
    std::vector<double> ddirection;  // same layout as Kernel::weights
    std::vector<double> dgain;
};

// Gradients w.r.t. direction and gain given dL/dw (effective-weight gradient,
// Kernel::weights layout).
WeightNormGradients weight_norm_backward(const Kernel& direction, const std::vector<double>& gain,
                                         const std::vector<double>& dweights);

// One keep/drop decision per channel; 1 = keep. Consumes channels draws.
std::vector<std::uint8_t> spatial_dropout_mask(int channels, double p, std::mt19937_64& rng);

// Zero dropped channels and scale kept ones by 1/(1-p).
Series spatial_dropout_apply(const Series& x, const std::vector<std::uint8_t>& mask, double p);

// Whole-channel dropout. Identity when not training or p == 0 (no draws consumed).
Series spatial_dropout(const Series& x, double p, bool training, std::mt19937_64& rng);

}  // namespace cnnqoe
