#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cnnqoe/eval.hpp"
#include "cnnqoe/model_io.hpp"
#include "cnnqoe/rng.hpp"

using namespace cnnqoe;

namespace {

// routes the newest normalized stsq sample to the output, scaled by lambda
Model passthrough_model() {
    ModelConfig c;
    c.filter_width = 2;
    c.num_blocks = 2;
    c.filters = 3;
    c.in_channels = 4;
    Model m = model_skeleton(c);
    m.input_conv->kernel.w(0, 0, 0) = 1.0;
    m.head.kernel.w(0, 0, 0) = 1.0;
    return m;
}

QoETrace plain_trace(std::string id, std::vector<double> stsq, std::vector<double> qoe) {
    QoETrace t;
    t.id = std::move(id);
    t.content_id = "c0";
    t.pattern_id = "p0";
    for (std::size_t i = 0; i < stsq.size(); ++i)
        t.samples.push_back({stsq[i], 0, 0, static_cast<long long>(i), qoe[i]});
    return t;
}

}  // namespace

TEST_CASE("pearson correlation") {
    CHECK(pcc({1.0, 2.0, 3.0}, {1.0, 4.0, 9.0}) ==
          doctest::Approx(0.989743318610787).epsilon(1e-12));  // 4*sqrt(3)/7
    CHECK(pcc({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}) == doctest::Approx(-1.0));
    CHECK(pcc({1.0, 2.0, 3.0}, {5.0, 7.0, 9.0}) == doctest::Approx(1.0));
    CHECK(pcc({1.0, 2.0, 3.0, 4.0}, {1.0, -1.0, 1.0, -1.0}) ==
          doctest::Approx(-0.4472135954999579).epsilon(1e-12));  // -1/sqrt(5)

    CHECK_THROWS_AS(pcc({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), NumericError);
    CHECK_THROWS_AS(pcc({1.0, 2.0, 3.0}, {7.0, 7.0, 7.0}), NumericError);
    CHECK_THROWS_AS(pcc({1.0, 2.0}, {1.0}), ShapeError);
    CHECK_THROWS_AS(pcc({1.0}, {1.0}), ParameterError);
}

TEST_CASE("average ranks share ties") {
    CHECK(average_ranks({10.0, 20.0, 20.0, 5.0}) == std::vector<double>{2.0, 3.5, 3.5, 1.0});
    CHECK(average_ranks({3.0, 1.0, 2.0}) == std::vector<double>{3.0, 1.0, 2.0});
    CHECK(average_ranks({7.0, 7.0, 7.0}) == std::vector<double>{2.0, 2.0, 2.0});
    CHECK(average_ranks({4.0}) == std::vector<double>{1.0});
    CHECK(average_ranks({1.0, 1.0, 2.0, 2.0, 2.0, 3.0}) ==
          std::vector<double>{1.5, 1.5, 4.0, 4.0, 4.0, 6.0});
}

TEST_CASE("spearman correlation ranks before correlating") {
    // no ties: agrees with 1 - 6*sum(d^2)/(n(n^2-1))
    CHECK(srocc({1.0, 2.0, 3.0, 4.0, 5.0}, {1.0, 3.0, 2.0, 5.0, 4.0}) == doctest::Approx(0.8));
    // any monotone map is perfect
    CHECK(srocc({1.0, 2.0, 3.0, 4.0}, {1.0, 8.0, 27.0, 64.0}) == doctest::Approx(1.0));
    CHECK(srocc({1.0, 2.0, 3.0}, {9.0, 4.0, 1.0}) == doctest::Approx(-1.0));
    // ties use average ranks on both sides
    CHECK(srocc({1.0, 2.0, 2.0, 3.0}, {10.0, 20.0, 20.0, 40.0}) == doctest::Approx(1.0));
    CHECK(srocc({1.0, 2.0, 2.0, 3.0}, {10.0, 25.0, 20.0, 40.0}) ==
          doctest::Approx(pcc({1.0, 2.5, 2.5, 4.0}, {1.0, 3.0, 2.0, 4.0})));

    CHECK_THROWS_AS(srocc({1.0, 1.0}, {1.0, 2.0}), NumericError);
    CHECK_THROWS_AS(srocc({1.0, 2.0}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("root mean squared error") {
    CHECK(rmse({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
    CHECK(rmse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(rmse({5.0}, {2.0}) == doctest::Approx(3.0));
    CHECK_THROWS_AS(rmse({}, {}), ParameterError);
    CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("trace predictions come back in native score units") {
    const QoETrace trace =
        plain_trace("u", {0.0, 10.0, 20.0, 40.0}, {20.0, 30.0, 40.0, 50.0});
    const NormalizationStats stats = compute_stats({trace});
    const Model model = passthrough_model();

    const auto predicted = predict_trace(model, trace, stats);
    REQUIRE(predicted.size() == 4);
    const SeluConstants k;
    for (int t = 0; t < 4; ++t) {
        const double norm_stsq = trace.samples[t].stsq / 40.0;
        CHECK(predicted[t] ==
              doctest::Approx(denormalize_qoe(k.lambda * norm_stsq, stats)).epsilon(1e-12));
    }
    // this model only reads the newest step, so any window length agrees
    CHECK(predict_trace(model, trace, stats, 3) == predicted);
    CHECK(predict_trace(model, trace, stats, 12) == predicted);
}

TEST_CASE("evaluation walks every fold's test traces") {
    const std::vector<QoETrace> traces = {
        plain_trace("a", {0.0, 10.0, 30.0}, {90.0, 70.0, 50.0}),
        plain_trace("b", {5.0, 25.0, 15.0}, {80.0, 40.0, 60.0}),
        plain_trace("c", {40.0, 20.0, 10.0}, {10.0, 50.0, 70.0}),
    };
    const NormalizationStats stats = compute_stats(traces);
    const Model model = passthrough_model();

    std::vector<Fold> folds(2);
    folds[0].train = {2};
    folds[0].test = {0, 1};
    folds[1].train = {0, 1};
    folds[1].test = {2};

    const EvalReport report = evaluate(model, folds, traces, stats);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.skipped == 0);
    CHECK(report.rows[0].trace_id == "a");
    CHECK(report.rows[0].fold == 0);
    CHECK(report.rows[1].trace_id == "b");
    CHECK(report.rows[2].trace_id == "c");
    CHECK(report.rows[2].fold == 1);

    double rmse_sum = 0.0, pcc_sum = 0.0, srocc_sum = 0.0;
    for (const auto& row : report.rows) {
        CHECK(row.samples == 3);
        CHECK(row.rmse > 0.0);
        REQUIRE(row.pcc.has_value());
        REQUIRE(row.srocc.has_value());
        rmse_sum += row.rmse;
        pcc_sum += *row.pcc;
        srocc_sum += *row.srocc;

        // rows agree with the metric functions applied directly
        const QoETrace& trace = traces[row.trace_id == "a" ? 0 : row.trace_id == "b" ? 1 : 2];
        std::vector<double> truth;
        for (const auto& s : trace.samples) truth.push_back(s.qoe);
        const auto predicted = predict_trace(model, trace, stats);
        CHECK(row.rmse == doctest::Approx(rmse(predicted, truth)).epsilon(1e-15));
        CHECK(*row.pcc == doctest::Approx(pcc(predicted, truth)).epsilon(1e-15));
        CHECK(*row.srocc == doctest::Approx(srocc(predicted, truth)).epsilon(1e-15));
    }
    CHECK(report.mean_rmse == doctest::Approx(rmse_sum / 3.0).epsilon(1e-15));
    CHECK(*report.mean_pcc == doctest::Approx(pcc_sum / 3.0).epsilon(1e-15));
    CHECK(*report.mean_srocc == doctest::Approx(srocc_sum / 3.0).epsilon(1e-15));

    // predictions rise with distortion here, so the correlations are negative
    CHECK(*report.rows[0].pcc < 0.0);
}

TEST_CASE("evaluation skips traces shorter than two seconds") {
    QoETrace stub;
    stub.id = "stub";
    stub.samples.push_back({1.0, 0, 0, 0, 50.0});
    const QoETrace full = plain_trace("full", {0.0, 10.0, 30.0}, {90.0, 70.0, 50.0});
    const std::vector<QoETrace> traces = {stub, full};
    const NormalizationStats stats = compute_stats({full});
    const Model model = passthrough_model();

    std::vector<Fold> folds(1);
    folds[0].test = {0, 1};
    const EvalReport report = evaluate(model, folds, traces, stats);
    CHECK(report.rows.size() == 1);
    CHECK(report.rows[0].trace_id == "full");
    CHECK(report.skipped == 1);

    std::vector<Fold> only_stub(1);
    only_stub[0].test = {0};
    CHECK_THROWS_AS(evaluate(model, only_stub, traces, stats), DataError);
    CHECK_THROWS_AS(evaluate(model, {}, traces, stats), DataError);

    std::vector<Fold> bad(1);
    bad[0].test = {9};
    CHECK_THROWS_AS(evaluate(model, bad, traces, stats), DataError);
}

TEST_CASE("undefined correlations are left out of the aggregates") {
    // all-zero model: constant predictions, so correlations never exist
    ModelConfig c;
    c.filter_width = 2;
    c.num_blocks = 1;
    c.filters = 2;
    c.in_channels = 4;
    const Model constant = model_skeleton(c);

    const QoETrace varied = plain_trace("v", {0.0, 10.0, 30.0}, {90.0, 70.0, 50.0});
    const NormalizationStats stats = compute_stats({varied});
    std::vector<Fold> folds(1);
    folds[0].test = {0};

    const EvalReport flat = evaluate(constant, folds, {varied}, stats);
    REQUIRE(flat.rows.size() == 1);
    CHECK_FALSE(flat.rows[0].pcc.has_value());
    CHECK_FALSE(flat.rows[0].srocc.has_value());
    CHECK_FALSE(flat.mean_pcc.has_value());
    CHECK_FALSE(flat.mean_srocc.has_value());
    CHECK(flat.mean_rmse > 0.0);  // the error is still real

    // constant ground truth with varying predictions: same absence
    const QoETrace flat_truth = plain_trace("f", {0.0, 10.0, 30.0}, {50.0, 50.0, 50.0});
    const EvalReport report =
        evaluate(passthrough_model(), folds, {flat_truth}, compute_stats({varied}));
    REQUIRE(report.rows.size() == 1);
    CHECK_FALSE(report.rows[0].pcc.has_value());

    // one defined row is enough to produce an aggregate
    std::vector<Fold> both(1);
    both[0].test = {0, 1};
    const EvalReport mixed =
        evaluate(passthrough_model(), both, {flat_truth, varied}, compute_stats({varied}));
    REQUIRE(mixed.rows.size() == 2);
    CHECK_FALSE(mixed.rows[0].pcc.has_value());
    REQUIRE(mixed.rows[1].pcc.has_value());
    CHECK(*mixed.mean_pcc == *mixed.rows[1].pcc);
    CHECK(mixed.mean_rmse ==
          doctest::Approx(0.5 * (mixed.rows[0].rmse + mixed.rows[1].rmse)).epsilon(1e-15));
}

TEST_CASE("inference benchmark") {
    ModelConfig c;
    c.filter_width = 2;
    c.num_blocks = 1;
    c.filters = 2;
    c.in_channels = 4;
    auto rng = make_rng(1, "init");
    const Model model = build_model(c, rng);

    const BenchReport report = bench_inference(model, 50, 5);
    CHECK(report.reps == 50);
    CHECK(report.latency.mean_ms > 0.0);
    CHECK(report.latency.median_ms >= 0.0);
    CHECK(report.latency.p95_ms >= report.latency.median_ms);
    CHECK(report.complexity.param_count == count_params(model));
    CHECK(report.complexity.flops_per_step == count_flops(model));
    CHECK(report.complexity.receptive_field == receptive_field(model));
    CHECK(report.complexity.model_size_bytes == model_file_size(count_params(model)));

    CHECK_THROWS_AS(bench_inference(model, 29), ParameterError);
    CHECK_THROWS_AS(bench_inference(model, 50, -1), ParameterError);
}
