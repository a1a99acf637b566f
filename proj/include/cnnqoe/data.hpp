#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cnnqoe/series.hpp"

namespace cnnqoe {

// One second of playback: spatio-temporal distortion (larger = worse), a
// rebuffering flag, the cumulative rebuffer count, seconds since the last
// impairment, and the subjective quality score.
struct TraceSample {
    double stsq = 0.0;
    int pi = 0;
    long long nr = 0;
    long long tr = 0;
    double qoe = 0.0;

    friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

struct QoETrace {
    std::string id;
    std::string content_id;
    std::string pattern_id;
    double qoe_min = 0.0;
    double qoe_max = 100.0;
    std::vector<TraceSample> samples;

    int length() const { return static_cast<int>(samples.size()); }

    friend bool operator==(const QoETrace&, const QoETrace&) = default;
};

// Enforce the cross-sample rules (tr counter, pi/nr coupling, qoe range).
// Throws DataError naming the first offending sample index.
void validate_trace(const QoETrace& trace);

// Text form: '# key=value' metadata lines (id, content, pattern, qoe_min,
// qoe_max), a 't,stsq,pi,nr,tr,qoe' header, then one row per second.
QoETrace parse_trace(const std::string& text);
QoETrace parse_trace_file(const std::filesystem::path& path);

// Canonical form: round-trips exactly (shortest float spelling, LF endings).
std::string write_trace(const QoETrace& trace);
void write_trace_file(const QoETrace& trace, const std::filesystem::path& path);

// All *.csv files under a directory (sorted by filename), or the single file.
std::vector<QoETrace> load_traces(const std::filesystem::path& path);

struct FeatureRange {
    double min = 0.0;
    double max = 1.0;

    friend bool operator==(const FeatureRange&, const FeatureRange&) = default;
};

struct NormalizationStats {
    FeatureRange stsq;
    FeatureRange nr;
    FeatureRange tr;
    FeatureRange qoe;  // the declared score range, shared by every trace

    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

// Min/max over all samples of all traces; a degenerate range (max == min) is
// widened to one unit so scaling stays defined. Mixed declared score ranges
// are an error.
NormalizationStats compute_stats(const std::vector<QoETrace>& traces);

struct NormalizedTrace {
    Series features;             // channels: 0 stsq, 1 pi, 2 nr, 3 tr; each in [0, 1]
    std::vector<double> targets; // qoe scaled to [0, 1]
    int clamped = 0;             // samples outside the stats range, clamped
};

inline constexpr int kFeatureChannels = 4;

NormalizedTrace normalize(const QoETrace& trace, const NormalizationStats& stats);

double normalize_qoe(double qoe, const NormalizationStats& stats);
double denormalize_qoe(double y, const NormalizationStats& stats);

void write_stats_file(const NormalizationStats& stats, const std::filesystem::path& path);
NormalizationStats read_stats_file(const std::filesystem::path& path);

enum class SplitKind {
    leave_one_out_excluding_content_and_pattern,
    random_80_20,
    random_fraction_per_test,
};

struct SplitProtocol {
    SplitKind kind = SplitKind::random_80_20;
    double fraction = 0.8;  // train share (random_80_20) or per-test train share
    std::uint64_t seed = 0;
};

// Indices into the trace list this fold trains and tests on.
struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

std::vector<Fold> split(const std::vector<QoETrace>& traces, const SplitProtocol& protocol);

struct RebufferEvent {
    int start = 0;   // first stalled second
    int length = 1;  // stalled seconds
};

struct QualitySegment {
    int start = 0;        // first second the level applies to
    double stsq_level = 0.0;
};

struct SynthParams {
    int duration = 120;
    std::vector<QualitySegment> quality = {{0, 10.0}};
    std::vector<RebufferEvent> rebuffers;
    double noise_std = 2.0;
    std::uint64_t seed = 0;
    double qoe_min = 0.0;
    double qoe_max = 100.0;
    std::string id = "synth";
    std::string content_id = "c0";
    std::string pattern_id = "p0";
};

// Deterministic synthetic session. The score is a pure function of the
// features: per-second quality q = 1 - min(stsq,100)/100 smoothed by an
// exponential moving average (weight 0.6 on the past), minus a stall penalty
// 0.5 * max(0, 1 - s/15) where s counts seconds since the stall's last
// second (0 while stalled); the result is clamped to [0,1] and scaled into
// the declared score range.
QoETrace synth_trace(const SynthParams& params);

}  // namespace cnnqoe
