#include "cnnqoe/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

#include "cnnqoe/format.hpp"
#include "cnnqoe/rng.hpp"

namespace cnnqoe {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

namespace {

constexpr std::string_view kHeader = "t,stsq,pi,nr,tr,qoe";

// First broken sample rule, as (sample index, description).
std::optional<std::pair<int, std::string>> first_violation(const QoETrace& trace) {
    for (int t = 0; t < trace.length(); ++t) {
        const TraceSample& s = trace.samples[t];
        if (!std::isfinite(s.stsq) || s.stsq < 0.0)
            return {{t, "stsq must be a finite value >= 0"}};
        if (s.pi != 0 && s.pi != 1) return {{t, "pi must be 0 or 1"}};
        if (s.nr < 0) return {{t, "nr must be >= 0"}};
        if (s.tr < 0) return {{t, "tr must be >= 0"}};
        if (!std::isfinite(s.qoe) || s.qoe < trace.qoe_min || s.qoe > trace.qoe_max)
            return {{t, "qoe outside the declared range"}};
        if (s.pi == 1 && s.tr != 0) return {{t, "tr must be 0 while rebuffering"}};
        if (t == 0) {
            if (s.tr != 0) return {{t, "tr must start at 0"}};
            if (s.nr != s.pi) return {{t, "nr must start at 0, or 1 when rebuffering starts the trace"}};
        } else {
            const TraceSample& prev = trace.samples[t - 1];
            if (s.tr != 0 && s.tr != prev.tr + 1)
                return {{t, "tr must reset to 0 or increase by 1"}};
            const long long edge = (s.pi == 1 && prev.pi == 0) ? 1 : 0;
            if (s.nr != prev.nr + edge)
                return {{t, edge ? "nr must increment when rebuffering begins"
                                 : "nr may only change when rebuffering begins"}};
        }
    }
    return std::nullopt;
}

}  // namespace

void validate_trace(const QoETrace& trace) {
    if (!std::isfinite(trace.qoe_min) || !std::isfinite(trace.qoe_max) ||
        !(trace.qoe_min < trace.qoe_max))
        throw DataError("trace '" + trace.id + "' declares an empty score range");
    if (trace.samples.empty()) throw DataError("trace '" + trace.id + "' has no samples");
    if (const auto v = first_violation(trace))
        throw DataError("trace '" + trace.id + "', sample " + std::to_string(v->first) + ": " +
                        v->second);
}

QoETrace parse_trace(const std::string& text) {
    QoETrace trace;
    trace.qoe_min = trace.qoe_max = 0.0;  // must come from metadata

    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            std::string line = text.substr(start, end - start);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(std::move(line));
            start = end + 1;
        }
        while (!lines.empty() && lines.back().empty()) lines.pop_back();
    }

    std::map<std::string, std::string, std::less<>> meta;
    std::size_t ln = 0;
    for (; ln < lines.size(); ++ln) {
        const std::string& line = lines[ln];
        if (line.empty()) continue;
        if (line[0] != '#') break;
        std::string_view body(line);
        body.remove_prefix(1);
        while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(ln + 1, "metadata must look like '# key=value'");
        const std::string key(body.substr(0, eq));
        const std::string value(body.substr(eq + 1));
        if (key != "id" && key != "content" && key != "pattern" && key != "qoe_min" &&
            key != "qoe_max")
            throw ParseError(ln + 1, "unknown metadata key '" + key + "'");
        if (!meta.emplace(key, value).second)
            throw ParseError(ln + 1, "duplicate metadata key '" + key + "'");
    }

    if (ln >= lines.size()) throw ParseError(lines.size() + 1, "missing column header");
    const std::size_t header_line = ln + 1;
    if (lines[ln] != kHeader)
        throw ParseError(header_line, "expected header '" + std::string(kHeader) + "'");

    for (const char* key : {"qoe_min", "qoe_max"})
        if (!meta.count(key))
            throw ParseError(header_line, std::string("missing '") + key + "' metadata");
    if (auto it = meta.find("id"); it != meta.end()) trace.id = it->second;
    if (auto it = meta.find("content"); it != meta.end()) trace.content_id = it->second;
    if (auto it = meta.find("pattern"); it != meta.end()) trace.pattern_id = it->second;
    const auto qmin = parse_double(meta.at("qoe_min"));
    const auto qmax = parse_double(meta.at("qoe_max"));
    if (!qmin || !qmax || !std::isfinite(*qmin) || !std::isfinite(*qmax) || !(*qmin < *qmax))
        throw ParseError(header_line, "qoe_min/qoe_max must declare a non-empty range");
    trace.qoe_min = *qmin;
    trace.qoe_max = *qmax;

    for (std::size_t row = header_line; row < lines.size(); ++row) {
        const std::string& line = lines[row];
        const std::size_t line_no = row + 1;
        if (line.empty()) throw ParseError(line_no, "blank line inside the sample table");
        std::vector<std::string_view> fields;
        {
            std::string_view rest(line);
            while (true) {
                const auto comma = rest.find(',');
                fields.push_back(rest.substr(0, comma));
                if (comma == std::string_view::npos) break;
                rest.remove_prefix(comma + 1);
            }
        }
        if (fields.size() != 6) throw ParseError(line_no, "expected 6 comma-separated fields");
        const auto t = parse_int(fields[0]);
        const auto stsq = parse_double(fields[1]);
        const auto pi = parse_int(fields[2]);
        const auto nr = parse_int(fields[3]);
        const auto tr = parse_int(fields[4]);
        const auto qoe = parse_double(fields[5]);
        if (!t || !stsq || !pi || !nr || !tr || !qoe)
            throw ParseError(line_no, "malformed numeric field");
        if (*t != static_cast<long long>(trace.samples.size()))
            throw ParseError(line_no, "time index must count up from 0");
        if (*pi != 0 && *pi != 1) throw ParseError(line_no, "pi must be 0 or 1");
        trace.samples.push_back({*stsq, static_cast<int>(*pi), *nr, *tr, *qoe});
    }

    if (trace.samples.empty())
        throw ParseError(lines.size() + 1, "trace has no samples");
    if (const auto v = first_violation(trace))
        throw ParseError(header_line + 1 + static_cast<std::size_t>(v->first), v->second);
    return trace;
}

QoETrace parse_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        QoETrace trace = parse_trace(buf.str());
        if (trace.id.empty()) trace.id = path.stem().string();
        return trace;
    } catch (const ParseError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string write_trace(const QoETrace& trace) {
    std::string out;
    out += "# id=" + trace.id + "\n";
    out += "# content=" + trace.content_id + "\n";
    out += "# pattern=" + trace.pattern_id + "\n";
    out += "# qoe_min=" + format_double(trace.qoe_min) + "\n";
    out += "# qoe_max=" + format_double(trace.qoe_max) + "\n";
    out += std::string(kHeader) + "\n";
    for (int t = 0; t < trace.length(); ++t) {
        const TraceSample& s = trace.samples[t];
        out += std::to_string(t) + "," + format_double(s.stsq) + "," + std::to_string(s.pi) + "," +
               std::to_string(s.nr) + "," + std::to_string(s.tr) + "," + format_double(s.qoe) +
               "\n";
    }
    return out;
}

void write_trace_file(const QoETrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << write_trace(trace);
    if (!out) throw DataError("failed writing " + path.string());
}

std::vector<QoETrace> load_traces(const std::filesystem::path& path) {
    std::vector<QoETrace> traces;
    if (std::filesystem::is_directory(path)) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) traces.push_back(parse_trace_file(file));
    } else if (std::filesystem::is_regular_file(path)) {
        traces.push_back(parse_trace_file(path));
    } else {
        throw DataError("no such file or directory: " + path.string());
    }
    if (traces.empty()) throw DataError("no .csv traces under " + path.string());
    return traces;
}

NormalizationStats compute_stats(const std::vector<QoETrace>& traces) {
    if (traces.empty()) throw DataError("cannot compute statistics over zero traces");
    NormalizationStats stats;
    stats.qoe = {traces.front().qoe_min, traces.front().qoe_max};
    bool first = true;
    for (const auto& trace : traces) {
        validate_trace(trace);
        if (FeatureRange{trace.qoe_min, trace.qoe_max} != stats.qoe)
            throw DataError("traces declare different score ranges");
        for (const TraceSample& s : trace.samples) {
            const double nr = static_cast<double>(s.nr);
            const double tr = static_cast<double>(s.tr);
            if (first) {
                stats.stsq = {s.stsq, s.stsq};
                stats.nr = {nr, nr};
                stats.tr = {tr, tr};
                first = false;
            } else {
                stats.stsq.min = std::min(stats.stsq.min, s.stsq);
                stats.stsq.max = std::max(stats.stsq.max, s.stsq);
                stats.nr.min = std::min(stats.nr.min, nr);
                stats.nr.max = std::max(stats.nr.max, nr);
                stats.tr.min = std::min(stats.tr.min, tr);
                stats.tr.max = std::max(stats.tr.max, tr);
            }
        }
    }
    // a flat feature still needs a non-zero denominator
    for (FeatureRange* r : {&stats.stsq, &stats.nr, &stats.tr})
        if (r->max == r->min) r->max = r->min + 1.0;
    return stats;
}

namespace {

double scale01(double x, const FeatureRange& r, int& clamped) {
    if (x < r.min) {
        ++clamped;
        x = r.min;
    } else if (x > r.max) {
        ++clamped;
        x = r.max;
    }
    return (x - r.min) / (r.max - r.min);
}

}  // namespace

NormalizedTrace normalize(const QoETrace& trace, const NormalizationStats& stats) {
    validate_trace(trace);
    const int T = trace.length();
    NormalizedTrace out{Series(kFeatureChannels, T), std::vector<double>(T), 0};
    for (int t = 0; t < T; ++t) {
        const TraceSample& s = trace.samples[t];
        out.features.at(0, t) = scale01(s.stsq, stats.stsq, out.clamped);
        out.features.at(1, t) = static_cast<double>(s.pi);
        out.features.at(2, t) = scale01(static_cast<double>(s.nr), stats.nr, out.clamped);
        out.features.at(3, t) = scale01(static_cast<double>(s.tr), stats.tr, out.clamped);
        out.targets[t] = scale01(s.qoe, stats.qoe, out.clamped);
    }
    return out;
}

double normalize_qoe(double qoe, const NormalizationStats& stats) {
    return (qoe - stats.qoe.min) / (stats.qoe.max - stats.qoe.min);
}

double denormalize_qoe(double y, const NormalizationStats& stats) {
    return stats.qoe.min + y * (stats.qoe.max - stats.qoe.min);
}

void write_stats_file(const NormalizationStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << "stsq_min=" << format_double(stats.stsq.min) << "\n"
        << "stsq_max=" << format_double(stats.stsq.max) << "\n"
        << "nr_min=" << format_double(stats.nr.min) << "\n"
        << "nr_max=" << format_double(stats.nr.max) << "\n"
        << "tr_min=" << format_double(stats.tr.min) << "\n"
        << "tr_max=" << format_double(stats.tr.max) << "\n"
        << "qoe_min=" << format_double(stats.qoe.min) << "\n"
        << "qoe_max=" << format_double(stats.qoe.max) << "\n";
    if (!out) throw DataError("failed writing " + path.string());
}

NormalizationStats read_stats_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::map<std::string, double> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path.string() + " line " + std::to_string(line_no) +
                            ": expected key=value");
        const auto value = parse_double(std::string_view(line).substr(eq + 1));
        if (!value)
            throw DataError(path.string() + " line " + std::to_string(line_no) +
                            ": malformed value");
        if (!kv.emplace(line.substr(0, eq), *value).second)
            throw DataError(path.string() + " line " + std::to_string(line_no) +
                            ": duplicate key");
    }
    NormalizationStats stats;
    const auto get = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw DataError(path.string() + ": missing key '" + key + "'");
        return it->second;
    };
    stats.stsq = {get("stsq_min"), get("stsq_max")};
    stats.nr = {get("nr_min"), get("nr_max")};
    stats.tr = {get("tr_min"), get("tr_max")};
    stats.qoe = {get("qoe_min"), get("qoe_max")};
    if (kv.size() != 8) throw DataError(path.string() + ": unknown keys present");
    for (const auto& [name, r] :
         {std::pair<const char*, FeatureRange>{"stsq", stats.stsq},
          {"nr", stats.nr},
          {"tr", stats.tr},
          {"qoe", stats.qoe}})
        if (!(r.min < r.max))
            throw DataError(path.string() + ": " + name + " range is empty");
    return stats;
}

std::vector<Fold> split(const std::vector<QoETrace>& traces, const SplitProtocol& protocol) {
    const std::size_t n = traces.size();
    if (n < 2) throw SplitError("need at least two traces to split");

    std::vector<Fold> folds;
    switch (protocol.kind) {
        case SplitKind::leave_one_out_excluding_content_and_pattern: {
            for (const auto& trace : traces)
                if (trace.content_id.empty() || trace.pattern_id.empty())
                    throw SplitError("trace '" + trace.id +
                                     "' lacks content/pattern metadata required by leave-one-out");
            for (std::size_t i = 0; i < n; ++i) {
                Fold fold;
                fold.test.push_back(i);
                for (std::size_t j = 0; j < n; ++j)
                    if (j != i && traces[j].content_id != traces[i].content_id &&
                        traces[j].pattern_id != traces[i].pattern_id)
                        fold.train.push_back(j);
                if (fold.train.empty())
                    throw SplitError("trace '" + traces[i].id +
                                     "' leaves no training traces after exclusions");
                folds.push_back(std::move(fold));
            }
            break;
        }
        case SplitKind::random_80_20: {
            if (!(protocol.fraction > 0.0 && protocol.fraction < 1.0))
                throw SplitError("train fraction must be in (0, 1)");
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            std::mt19937_64 rng(protocol.seed);
            std::shuffle(idx.begin(), idx.end(), rng);
            const auto ntrain = static_cast<std::size_t>(
                std::floor(protocol.fraction * static_cast<double>(n)));
            if (ntrain < 1 || ntrain >= n)
                throw SplitError("train fraction leaves an empty train or test set");
            Fold fold;
            fold.train.assign(idx.begin(), idx.begin() + ntrain);
            fold.test.assign(idx.begin() + ntrain, idx.end());
            std::sort(fold.train.begin(), fold.train.end());
            std::sort(fold.test.begin(), fold.test.end());
            folds.push_back(std::move(fold));
            break;
        }
        case SplitKind::random_fraction_per_test: {
            if (!(protocol.fraction > 0.0 && protocol.fraction <= 1.0))
                throw SplitError("train fraction must be in (0, 1]");
            const auto ntrain = static_cast<std::size_t>(
                std::floor(protocol.fraction * static_cast<double>(n - 1)));
            if (ntrain < 1) throw SplitError("train fraction leaves an empty train set");
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<std::size_t> pool;
                pool.reserve(n - 1);
                for (std::size_t j = 0; j < n; ++j)
                    if (j != i) pool.push_back(j);
                auto rng = make_rng(protocol.seed, "fold-" + std::to_string(i));
                std::shuffle(pool.begin(), pool.end(), rng);
                Fold fold;
                fold.test.push_back(i);
                fold.train.assign(pool.begin(), pool.begin() + ntrain);
                std::sort(fold.train.begin(), fold.train.end());
                folds.push_back(std::move(fold));
            }
            break;
        }
    }
    return folds;
}

QoETrace synth_trace(const SynthParams& params) {
    if (params.duration < 1) throw ParameterError("duration must be >= 1 second");
    if (!(params.noise_std >= 0.0) || !std::isfinite(params.noise_std))
        throw ParameterError("noise_std must be finite and >= 0");
    if (!(params.qoe_min < params.qoe_max))
        throw ParameterError("qoe_min must be below qoe_max");
    if (params.quality.empty() || params.quality.front().start != 0)
        throw ParameterError("quality schedule must start at second 0");
    for (std::size_t i = 0; i < params.quality.size(); ++i) {
        const auto& seg = params.quality[i];
        if (seg.stsq_level < 0.0 || !std::isfinite(seg.stsq_level))
            throw ParameterError("quality levels must be finite and >= 0");
        if (seg.start >= params.duration)
            throw ParameterError("quality segment starts past the end of the trace");
        if (i > 0 && seg.start <= params.quality[i - 1].start)
            throw ParameterError("quality segments must have increasing start times");
    }
    auto rebuffers = params.rebuffers;
    std::sort(rebuffers.begin(), rebuffers.end(),
              [](const RebufferEvent& a, const RebufferEvent& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < rebuffers.size(); ++i) {
        const auto& ev = rebuffers[i];
        if (ev.start < 0 || ev.length < 1 || ev.start + ev.length > params.duration)
            throw ParameterError("rebuffer event falls outside the trace");
        if (i > 0 && ev.start <= rebuffers[i - 1].start + rebuffers[i - 1].length)
            throw ParameterError("rebuffer events must be separated by at least one second");
    }

    const int T = params.duration;
    std::vector<double> level(T);
    {
        std::size_t seg = 0;
        for (int t = 0; t < T; ++t) {
            while (seg + 1 < params.quality.size() && params.quality[seg + 1].start <= t) ++seg;
            level[t] = params.quality[seg].stsq_level;
        }
    }

    auto rng = make_rng(params.seed, "synth");
    std::normal_distribution<double> noise(0.0, 1.0);

    QoETrace trace;
    trace.id = params.id;
    trace.content_id = params.content_id;
    trace.pattern_id = params.pattern_id;
    trace.qoe_min = params.qoe_min;
    trace.qoe_max = params.qoe_max;
    trace.samples.resize(T);

    constexpr double kDistortionScale = 100.0;  // stsq value treated as total loss of quality
    constexpr double kSmoothing = 0.6;          // EWMA weight on the running impression
    constexpr double kStallPenalty = 0.5;
    constexpr double kRecoverySeconds = 15.0;

    long long stalls_so_far = 0;
    int last_stall_second = -1;
    double impression = 0.0;
    std::size_t next_event = 0;
    for (int t = 0; t < T; ++t) {
        TraceSample& s = trace.samples[t];
        while (next_event < rebuffers.size() &&
               t >= rebuffers[next_event].start + rebuffers[next_event].length)
            ++next_event;
        const bool stalled = next_event < rebuffers.size() && t >= rebuffers[next_event].start &&
                             t < rebuffers[next_event].start + rebuffers[next_event].length;
        const bool stall_began = stalled && t == rebuffers[next_event].start;
        if (stall_began) ++stalls_so_far;
        if (stalled) last_stall_second = t;

        s.pi = stalled ? 1 : 0;
        s.nr = stalls_so_far;
        double stsq = level[t];
        if (params.noise_std > 0.0) stsq += params.noise_std * noise(rng);
        s.stsq = std::max(0.0, stsq);

        const bool switched = t > 0 && level[t] != level[t - 1];
        const bool impaired = stalled || switched;
        s.tr = (t == 0 || impaired) ? 0 : trace.samples[t - 1].tr + 1;

        const double q = 1.0 - std::min(s.stsq, kDistortionScale) / kDistortionScale;
        impression = t == 0 ? q : kSmoothing * impression + (1.0 - kSmoothing) * q;
        double penalty = 0.0;
        if (last_stall_second >= 0) {
            const double since = static_cast<double>(t - last_stall_second);
            penalty = kStallPenalty * std::max(0.0, 1.0 - since / kRecoverySeconds);
        }
        const double score = std::clamp(impression - penalty, 0.0, 1.0);
        s.qoe = params.qoe_min + score * (params.qoe_max - params.qoe_min);
    }

    validate_trace(trace);
    return trace;
}

}  // namespace cnnqoe
