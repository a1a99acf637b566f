#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cnnqoe/data.hpp"
#include "cnnqoe/model.hpp"

namespace cnnqoe {

// Pearson correlation. Throws NumericError when either vector is constant.
double pcc(const std::vector<double>& a, const std::vector<double>& b);

// Spearman rank correlation: Pearson over average ranks, so ties are exact.
double srocc(const std::vector<double>& a, const std::vector<double>& b);

double rmse(const std::vector<double>& a, const std::vector<double>& b);

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(const std::vector<double>& values);

// Per-second predictions for a whole trace, in the trace's native score units.
std::vector<double> predict_trace(const Model& model, const QoETrace& trace,
                                  const NormalizationStats& stats, int window_length = 0);

// One evaluated test trace. Correlations are absent when undefined (constant
// predictions or constant ground truth).
struct TraceEval {
    std::size_t fold = 0;
    std::string trace_id;
    int samples = 0;
    std::optional<double> pcc;
    std::optional<double> srocc;
    double rmse = 0.0;
};

struct EvalReport {
    std::vector<TraceEval> rows;
    std::optional<double> mean_pcc;    // over rows where defined
    std::optional<double> mean_srocc;
    double mean_rmse = 0.0;            // unweighted over rows
    int skipped = 0;                   // test traces too short to correlate
};

// Apply the model to every fold's test traces. Traces shorter than two
// seconds are skipped (counted), since no correlation or meaningful error
// exists for them.
EvalReport evaluate(const Model& model, const std::vector<Fold>& folds,
                    const std::vector<QoETrace>& traces, const NormalizationStats& stats);

struct LatencyStats {
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

struct BenchReport {
    LatencyStats latency;
    ComplexityReport complexity;
    int reps = 0;
};

// Wall-clock latency of single-window inference over `reps` timed runs after
// `warmup` untimed ones. At least 30 reps are required for stable order
// statistics.
BenchReport bench_inference(const Model& model, int reps = 1000, int warmup = 100);

}  // namespace cnnqoe
