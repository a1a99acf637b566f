#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cnnqoe/errors.hpp"

namespace cnnqoe {

// Multichannel time series stored channel-major: values[c * length + t].
class Series {
  public:
    Series() = default;

    Series(int channels, int length)
        : channels_(channels), length_(length) {
        check_shape();
        values_.assign(static_cast<std::size_t>(channels_) * length_, 0.0);
    }

    Series(int channels, int length, std::vector<double> values)
        : channels_(channels), length_(length), values_(std::move(values)) {
        check_shape();
        if (values_.size() != static_cast<std::size_t>(channels_) * length_)
            throw ShapeError("series needs " + std::to_string(channels_) + "x" +
                             std::to_string(length_) + " values, got " +
                             std::to_string(values_.size()));
        for (double v : values_)
            if (!std::isfinite(v)) throw NumericError("series contains a non-finite value");
    }

    int channels() const { return channels_; }
    int length() const { return length_; }

    double at(int c, int t) const { return values_[idx(c, t)]; }
    double& at(int c, int t) { return values_[idx(c, t)]; }

    const double* channel(int c) const { return values_.data() + static_cast<std::size_t>(c) * length_; }
    double* channel(int c) { return values_.data() + static_cast<std::size_t>(c) * length_; }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Series& a, const Series& b) {
        return a.channels_ == b.channels_ && a.length_ == b.length_ && a.values_ == b.values_;
    }

  private:
    void check_shape() const {
        if (channels_ < 1 || length_ < 1)
            throw ShapeError("series needs at least one channel and one time step");
    }
    std::size_t idx(int c, int t) const { return static_cast<std::size_t>(c) * length_ + t; }

    int channels_ = 0;
    int length_ = 0;
    std::vector<double> values_;
};

// Elementwise sum; shapes must match.
Series add(const Series& a, const Series& b);

// Convolution filter bank: weights[(o * in_channels + c) * width + i], bias[o].
// Tap i multiplies the sample dilation*i steps in the past; tap 0 is the current sample.
struct Kernel {
    int out_channels = 0;
    int in_channels = 0;
    int width = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    static Kernel zeros(int out_channels, int in_channels, int width) {
        if (out_channels < 1 || in_channels < 1 || width < 1)
            throw ShapeError("kernel dimensions must be positive");
        Kernel k;
        k.out_channels = out_channels;
        k.in_channels = in_channels;
        k.width = width;
        k.weights.assign(static_cast<std::size_t>(out_channels) * in_channels * width, 0.0);
        k.bias.assign(static_cast<std::size_t>(out_channels), 0.0);
        return k;
    }

    double w(int o, int c, int i) const { return weights[widx(o, c, i)]; }
    double& w(int o, int c, int i) { return weights[widx(o, c, i)]; }

    std::size_t weight_count() const { return weights.size(); }

  private:
    std::size_t widx(int o, int c, int i) const {
        return (static_cast<std::size_t>(o) * in_channels + c) * width + i;
    }
};

// Scaled exponential-linear activation constants.
struct SeluConstants {
    double alpha = 1.67733;
    double lambda = 1.0507;
};

}  // namespace cnnqoe
