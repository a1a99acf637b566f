#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cnnqoe/numerics.hpp"
#include "cnnqoe/rng.hpp"
#include "support.hpp"

using namespace cnnqoe;
using testsupport::finite_difference;
using testsupport::random_kernel;
using testsupport::random_series;
using testsupport::rel_err;

namespace {

Kernel single_tap_kernel(std::vector<double> taps) {
    Kernel k = Kernel::zeros(1, 1, static_cast<int>(taps.size()));
    k.weights = std::move(taps);
    return k;
}

}  // namespace

TEST_CASE("causal convolution: hand-checked sums") {
    const Series x(1, 5, {1, 2, 3, 4, 5});
    const Kernel k = single_tap_kernel({1, 1});  // current sample + one step back

    const Series y1 = conv1d_dilated_causal(x, k, 1);
    const std::vector<double> want1 = {1, 3, 5, 7, 9};
    CHECK(y1.values() == want1);

    const Series y2 = conv1d_dilated_causal(x, k, 2);
    const std::vector<double> want2 = {1, 2, 4, 6, 8};
    CHECK(y2.values() == want2);
}

TEST_CASE("causal convolution: tap 0 weights the newest sample") {
    const Series x(1, 4, {10, 0, 0, 0});
    Kernel k = single_tap_kernel({2, 5});
    const Series y = conv1d_dilated_causal(x, k, 1);
    CHECK(y.at(0, 0) == 20);  // 2 * x[0]
    CHECK(y.at(0, 1) == 50);  // 5 * x[0]
    CHECK(y.at(0, 2) == 0);
}

TEST_CASE("causal convolution: output length equals input length") {
    std::mt19937_64 rng(7);
    for (int dilation : {1, 2, 4, 8}) {
        const Series x = random_series(3, 11, rng);
        const Kernel k = random_kernel(2, 3, 3, rng);
        const Series y = conv1d_dilated_causal(x, k, dilation);
        CHECK(y.channels() == 2);
        CHECK(y.length() == x.length());
        CHECK(y.all_finite());
    }
}

TEST_CASE("causal convolution: future samples cannot affect the present") {
    std::mt19937_64 rng(11);
    const Series x = random_series(2, 16, rng);
    const Kernel k = random_kernel(3, 2, 2, rng);
    for (int dilation : {1, 2, 4}) {
        const Series y = conv1d_dilated_causal(x, k, dilation);
        for (int t = 0; t < x.length() - 1; ++t) {
            Series poked = x;
            for (int u = t + 1; u < x.length(); ++u)
                for (int c = 0; c < x.channels(); ++c) poked.at(c, u) += 10.0 + u;
            const Series y2 = conv1d_dilated_causal(poked, k, dilation);
            for (int o = 0; o < y.channels(); ++o) CHECK(y.at(o, t) == y2.at(o, t));
        }
    }
}

TEST_CASE("causal convolution: linear in the input when bias is zero") {
    std::mt19937_64 rng(13);
    const Series x1 = random_series(2, 9, rng);
    const Series x2 = random_series(2, 9, rng);
    Kernel k = random_kernel(2, 2, 2, rng);
    k.bias.assign(k.bias.size(), 0.0);
    Series mix(2, 9);
    for (std::size_t i = 0; i < mix.values().size(); ++i)
        mix.values()[i] = 2.0 * x1.values()[i] - 3.0 * x2.values()[i];
    const Series y_mix = conv1d_dilated_causal(mix, k, 2);
    const Series y1 = conv1d_dilated_causal(x1, k, 2);
    const Series y2 = conv1d_dilated_causal(x2, k, 2);
    for (std::size_t i = 0; i < y_mix.values().size(); ++i)
        CHECK(rel_err(y_mix.values()[i], 2.0 * y1.values()[i] - 3.0 * y2.values()[i]) < 1e-12);
}

TEST_CASE("causal convolution: argument validation") {
    const Series x(2, 4);
    const Kernel k = Kernel::zeros(1, 2, 2);
    CHECK_THROWS_AS(conv1d_dilated_causal(x, k, 0), ParameterError);
    CHECK_THROWS_AS(conv1d_dilated_causal(x, k, -1), ParameterError);
    const Kernel wrong = Kernel::zeros(1, 3, 2);
    CHECK_THROWS_AS(conv1d_dilated_causal(x, wrong, 1), ShapeError);
}

TEST_CASE("convolution backward matches finite differences") {
    std::mt19937_64 rng(17);
    Series x = random_series(2, 7, rng, 0.8);
    Kernel k = random_kernel(2, 2, 2, rng, 0.8);
    const Series dy = random_series(2, 7, rng, 0.5);
    const int dilation = 2;

    // scalar objective: sum(dy * conv(x))
    const auto objective = [&] {
        const Series y = conv1d_dilated_causal(x, k, dilation);
        double s = 0.0;
        for (std::size_t i = 0; i < y.values().size(); ++i) s += dy.values()[i] * y.values()[i];
        return s;
    };
    const ConvGradients g = conv1d_backward(x, k, dilation, dy);

    for (std::size_t i = 0; i < x.values().size(); ++i)
        CHECK(rel_err(g.dx.values()[i], finite_difference(objective, x.values()[i])) < 1e-6);
    for (std::size_t i = 0; i < k.weights.size(); ++i)
        CHECK(rel_err(g.grad.weights[i], finite_difference(objective, k.weights[i])) < 1e-6);
    for (std::size_t i = 0; i < k.bias.size(); ++i)
        CHECK(rel_err(g.grad.bias[i], finite_difference(objective, k.bias[i])) < 1e-6);
}

TEST_CASE("convolution backward rejects mismatched upstream shape") {
    const Series x(1, 4);
    const Kernel k = Kernel::zeros(1, 1, 2);
    CHECK_THROWS_AS(conv1d_backward(x, k, 1, Series(2, 4)), ShapeError);
    CHECK_THROWS_AS(conv1d_backward(x, k, 1, Series(1, 5)), ShapeError);
}

TEST_CASE("selu: fixed values from the activation constants") {
    const SeluConstants c;
    CHECK(selu(0.0) == 0.0);
    CHECK(selu(1.0) == doctest::Approx(1.0507).epsilon(1e-12));
    CHECK(selu(2.5) == doctest::Approx(2.5 * 1.0507).epsilon(1e-12));
    // negative side: lambda * alpha * (e^x - 1)
    CHECK(selu(-1.0) == doctest::Approx(c.lambda * c.alpha * std::expm1(-1.0)).epsilon(1e-12));
    CHECK(selu(-1.0) == doctest::Approx(-1.1140309).epsilon(1e-6));
    CHECK(selu(-1e9) == doctest::Approx(-c.lambda * c.alpha).epsilon(1e-12));  // saturates
}

TEST_CASE("selu: continuous at zero and monotone") {
    CHECK(std::abs(selu(1e-12) - selu(-1e-12)) < 1e-11);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> dist(-4.0, 4.0);
    for (int i = 0; i < 200; ++i) {
        const double a = dist(rng);
        const double b = dist(rng);
        if (a < b) CHECK(selu(a) < selu(b));
        if (a > b) CHECK(selu(a) > selu(b));
    }
}

TEST_CASE("selu backward matches finite differences away from the kink") {
    for (double x : {-3.0, -1.0, -0.25, 0.2, 0.75, 2.0, 5.0}) {
        double slot = x;
        const auto objective = [&] { return selu(slot); };
        const double fd = finite_difference(objective, slot, 1e-7);
        CHECK(rel_err(selu_backward(x, 1.0), fd) < 1e-6);
    }
    // at exactly zero the negative-side slope applies
    const SeluConstants c;
    CHECK(selu_backward(0.0, 1.0) == doctest::Approx(c.lambda * c.alpha).epsilon(1e-12));
    CHECK(selu_backward(-2.0, 3.0) == doctest::Approx(3.0 * selu_backward(-2.0, 1.0)));
}

TEST_CASE("selu on series applies elementwise") {
    const Series x(2, 2, {1.0, -1.0, 0.0, 2.0});
    const Series y = selu(x);
    CHECK(y.at(0, 0) == doctest::Approx(selu(1.0)));
    CHECK(y.at(0, 1) == doctest::Approx(selu(-1.0)));
    CHECK(y.at(1, 0) == 0.0);
    CHECK(y.at(1, 1) == doctest::Approx(selu(2.0)));
}

TEST_CASE("relu and its backward mask") {
    const Series x(1, 4, {-1.0, 0.0, 2.0, -0.5});
    const Series y = relu(x);
    CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0, 0.0});
    const Series dy(1, 4, {1.0, 1.0, 1.0, 1.0});
    const Series dx = relu_backward(x, dy);
    CHECK(dx.values() == std::vector<double>{0.0, 0.0, 1.0, 0.0});
}

TEST_CASE("weight normalization: effective channel norms equal the gains") {
    std::mt19937_64 rng(23);
    const Kernel v = random_kernel(3, 2, 2, rng);
    const std::vector<double> gain = {0.5, 2.0, 1.25};
    const Kernel w = weight_norm_apply(v, gain);
    const std::size_t slice = static_cast<std::size_t>(v.in_channels) * v.width;
    for (int o = 0; o < 3; ++o) {
        double s = 0.0;
        for (std::size_t j = 0; j < slice; ++j) s += w.weights[o * slice + j] * w.weights[o * slice + j];
        CHECK(std::sqrt(s) == doctest::Approx(gain[o]).epsilon(1e-12));
    }
    CHECK(w.bias == v.bias);
}

TEST_CASE("weight normalization: gain equal to the direction norm is the identity") {
    std::mt19937_64 rng(29);
    const Kernel v = random_kernel(2, 3, 2, rng);
    const std::size_t slice = static_cast<std::size_t>(v.in_channels) * v.width;
    std::vector<double> gain(2);
    for (int o = 0; o < 2; ++o) {
        double s = 0.0;
        for (std::size_t j = 0; j < slice; ++j) s += v.weights[o * slice + j] * v.weights[o * slice + j];
        gain[o] = std::sqrt(s);
    }
    const Kernel w = weight_norm_apply(v, gain);
    for (std::size_t i = 0; i < w.weights.size(); ++i)
        CHECK(rel_err(w.weights[i], v.weights[i]) < 1e-12);
}

TEST_CASE("weight normalization: scaling a direction slice leaves the weights unchanged") {
    std::mt19937_64 rng(31);
    Kernel v = random_kernel(1, 2, 3, rng);
    const std::vector<double> gain = {1.7};
    const Kernel w1 = weight_norm_apply(v, gain);
    for (double& x : v.weights) x *= 4.0;
    const Kernel w2 = weight_norm_apply(v, gain);
    for (std::size_t i = 0; i < w1.weights.size(); ++i)
        CHECK(rel_err(w1.weights[i], w2.weights[i]) < 1e-12);
}

TEST_CASE("weight normalization: zero-norm direction is rejected") {
    const Kernel v = Kernel::zeros(1, 1, 2);
    CHECK_THROWS_AS(weight_norm_apply(v, {1.0}), NumericError);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(weight_norm_apply(random_kernel(2, 1, 1, rng), {1.0}),
                    ShapeError);  // gain size mismatch
}

TEST_CASE("weight normalization backward matches finite differences") {
    std::mt19937_64 rng(37);
    Kernel v = random_kernel(2, 2, 2, rng, 0.9);
    std::vector<double> gain = {1.3, 0.7};
    std::vector<double> dw(v.weights.size());
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& d : dw) d = dist(rng);

    const auto objective = [&] {
        const Kernel w = weight_norm_apply(v, gain);
        double s = 0.0;
        for (std::size_t i = 0; i < w.weights.size(); ++i) s += dw[i] * w.weights[i];
        return s;
    };
    const WeightNormGradients g = weight_norm_backward(v, gain, dw);
    for (std::size_t i = 0; i < v.weights.size(); ++i)
        CHECK(rel_err(g.ddirection[i], finite_difference(objective, v.weights[i])) < 1e-5);
    for (std::size_t i = 0; i < gain.size(); ++i)
        CHECK(rel_err(g.dgain[i], finite_difference(objective, gain[i])) < 1e-6);
}

TEST_CASE("spatial dropout: identity when not training or p == 0") {
    std::mt19937_64 rng(41);
    const Series x = random_series(4, 6, rng);
    auto r1 = make_rng(1, "dropout");
    CHECK(spatial_dropout(x, 0.5, false, r1) == x);
    CHECK(spatial_dropout(x, 0.0, true, r1) == x);
}

TEST_CASE("spatial dropout: whole channels drop and survivors rescale") {
    std::mt19937_64 rng(43);
    const Series x = random_series(8, 5, rng, 2.0);
    auto dropout_rng = make_rng(99, "dropout");
    const double p = 0.5;
    const auto mask = spatial_dropout_mask(8, p, dropout_rng);
    const Series y = spatial_dropout_apply(x, mask, p);
    for (int c = 0; c < 8; ++c)
        for (int t = 0; t < 5; ++t) {
            if (mask[c])
                CHECK(y.at(c, t) == doctest::Approx(x.at(c, t) / (1.0 - p)));
            else
                CHECK(y.at(c, t) == 0.0);
        }
}

TEST_CASE("spatial dropout: mask draw is reproducible for a fixed seed") {
    auto r1 = make_rng(7, "dropout");
    auto r2 = make_rng(7, "dropout");
    const auto m1 = spatial_dropout_mask(64, 0.3, r1);
    const auto m2 = spatial_dropout_mask(64, 0.3, r2);
    CHECK(m1 == m2);
    auto r3 = make_rng(8, "dropout");
    const auto m3 = spatial_dropout_mask(64, 0.3, r3);
    CHECK(m1 != m3);  // different seed, different channels (overwhelmingly likely)
}

TEST_CASE("spatial dropout: probability bounds") {
    const Series x(2, 2);
    auto rng = make_rng(1, "dropout");
    CHECK_THROWS_AS(spatial_dropout(x, 1.0, true, rng), ParameterError);
    CHECK_THROWS_AS(spatial_dropout(x, -0.1, true, rng), ParameterError);
}

TEST_CASE("derived seeds separate named streams") {
    CHECK(derive_seed(42, "init") == derive_seed(42, "init"));
    CHECK(derive_seed(42, "init") != derive_seed(42, "shuffle"));
    CHECK(derive_seed(42, "init") != derive_seed(43, "init"));
    auto rng = make_rng(5, "x");
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
}

TEST_CASE("series construction validates shape and finiteness") {
    CHECK_THROWS_AS(Series(0, 3), ShapeError);
    CHECK_THROWS_AS(Series(1, 0), ShapeError);
    CHECK_THROWS_AS(Series(1, 2, {1.0}), ShapeError);
    CHECK_THROWS_AS(Series(1, 2, {1.0, std::numeric_limits<double>::infinity()}), NumericError);
    const Series s(2, 3);
    CHECK(s.values() == std::vector<double>(6, 0.0));
}

TEST_CASE("elementwise add requires matching shapes") {
    CHECK_THROWS_AS(add(Series(1, 2), Series(2, 2)), ShapeError);
    const Series a(1, 2, {1, 2});
    const Series b(1, 2, {10, 20});
    CHECK(add(a, b).values() == std::vector<double>{11, 22});
}
