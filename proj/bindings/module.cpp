#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "cnnqoe/data.hpp"
#include "cnnqoe/eval.hpp"
#include "cnnqoe/model.hpp"
#include "cnnqoe/model_io.hpp"
#include "cnnqoe/numerics.hpp"
#include "cnnqoe/rng.hpp"
#include "cnnqoe/training.hpp"

namespace py = pybind11;
using namespace cnnqoe;

namespace {

Series series_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D (channels, length) array");
    Series s(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(s.values().data(), a.data(), sizeof(double) * s.values().size());
    return s;
}

py::array_t<double> array_from_series(const Series& s) {
    py::array_t<double> a({s.channels(), s.length()});
    std::memcpy(a.mutable_data(), s.values().data(), sizeof(double) * s.values().size());
    return a;
}

Kernel kernel_from_arrays(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& weights,
    const py::array_t<double, py::array::c_style | py::array::forcecast>& bias) {
    if (weights.ndim() != 3) throw ShapeError("expected a 3-D (out, in, width) weight array");
    if (bias.ndim() != 1 || bias.shape(0) != weights.shape(0))
        throw ShapeError("expected one bias per output channel");
    Kernel k = Kernel::zeros(static_cast<int>(weights.shape(0)),
                             static_cast<int>(weights.shape(1)),
                             static_cast<int>(weights.shape(2)));
    std::memcpy(k.weights.data(), weights.data(), sizeof(double) * k.weights.size());
    std::memcpy(k.bias.data(), bias.data(), sizeof(double) * k.bias.size());
    return k;
}

py::array_t<double> array_from_weights(const Kernel& k) {
    py::array_t<double> a({k.out_channels, k.in_channels, k.width});
    std::memcpy(a.mutable_data(), k.weights.data(), sizeof(double) * k.weights.size());
    return a;
}

py::array_t<double> array_from_vector(const std::vector<double>& v) {
    py::array_t<double> a({static_cast<py::ssize_t>(v.size())},
                          {static_cast<py::ssize_t>(sizeof(double))});
    std::memcpy(a.mutable_data(), v.data(), sizeof(double) * v.size());
    return a;
}

SplitKind split_kind_from_name(const std::string& name) {
    if (name == "leave_one_out_excluding_content_and_pattern")
        return SplitKind::leave_one_out_excluding_content_and_pattern;
    if (name == "random_80_20") return SplitKind::random_80_20;
    if (name == "random_fraction_per_test") return SplitKind::random_fraction_per_test;
    throw ParameterError("unknown split protocol '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_cnnqoe, m) {
    m.doc() = "Continuous QoE prediction: causal convolutions, training, metrics";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "TraceParseError", PyExc_ValueError);
    py::register_exception<SplitError>(m, "SplitError", PyExc_ValueError);
    py::register_exception<SearchError>(m, "SearchError", PyExc_ValueError);
    py::register_exception<LoadError>(m, "ModelLoadError", PyExc_ValueError);
    py::register_exception<TrainingError>(m, "DivergenceError", PyExc_ArithmeticError);

    // ---- numerics ----------------------------------------------------------
    m.def("selu", [](double x) { return selu(x); }, py::arg("x"));
    m.def(
        "selu",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
            return array_from_series(selu(series_from_array(x)));
        },
        py::arg("x"));
    m.def(
        "selu_backward", [](double x, double dy) { return selu_backward(x, dy); }, py::arg("x"),
        py::arg("dy"));
    m.def(
        "conv1d_dilated_causal",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& weights,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& bias,
           int dilation) {
            return array_from_series(conv1d_dilated_causal(
                series_from_array(x), kernel_from_arrays(weights, bias), dilation));
        },
        py::arg("x"), py::arg("weights"), py::arg("bias"), py::arg("dilation") = 1);
    m.def(
        "conv1d_backward",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& weights,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& bias,
           int dilation,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& dy) {
            const ConvGradients g = conv1d_backward(
                series_from_array(x), kernel_from_arrays(weights, bias), dilation,
                series_from_array(dy));
            return py::make_tuple(array_from_series(g.dx), array_from_weights(g.grad),
                                  array_from_vector(g.grad.bias));
        },
        py::arg("x"), py::arg("weights"), py::arg("bias"), py::arg("dilation"), py::arg("dy"));
    m.def(
        "weight_norm_apply",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& direction,
           const std::vector<double>& gain) {
            py::array_t<double> zero_bias(static_cast<py::ssize_t>(direction.shape(0)));
            std::memset(zero_bias.mutable_data(), 0, sizeof(double) * direction.shape(0));
            return array_from_weights(
                weight_norm_apply(kernel_from_arrays(direction, zero_bias), gain));
        },
        py::arg("direction"), py::arg("gain"));
    m.def(
        "spatial_dropout",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, double p,
           bool training, std::uint64_t seed) {
            auto rng = make_rng(seed, "dropout");
            return array_from_series(spatial_dropout(series_from_array(x), p, training, rng));
        },
        py::arg("x"), py::arg("p"), py::arg("training"), py::arg("seed") = 0);
    m.def("dilation_schedule", &dilation_schedule, py::arg("num_blocks"));
    m.def("dilated_stack_receptive_field", &dilated_stack_receptive_field,
          py::arg("filter_width"), py::arg("num_layers"));

    // ---- model -------------------------------------------------------------
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](int k, int l, int n, int in_channels, const std::string& variant,
                         double dropout) {
                 ModelConfig c;
                 c.filter_width = k;
                 c.num_blocks = l;
                 c.filters = n;
                 c.in_channels = in_channels;
                 c.variant = variant_from_name(variant);
                 c.dropout_p = dropout;
                 return c;
             }),
             py::arg("k") = 2, py::arg("l") = 3, py::arg("n") = 32, py::arg("in_channels") = 4,
             py::arg("variant") = "proposed", py::arg("dropout") = 0.0)
        .def_readwrite("k", &ModelConfig::filter_width)
        .def_readwrite("l", &ModelConfig::num_blocks)
        .def_readwrite("n", &ModelConfig::filters)
        .def_readwrite("in_channels", &ModelConfig::in_channels)
        .def_readwrite("dropout", &ModelConfig::dropout_p)
        .def_property(
            "variant", [](const ModelConfig& c) { return variant_name(c.variant); },
            [](ModelConfig& c, const std::string& v) { c.variant = variant_from_name(v); })
        .def("__repr__", [](const ModelConfig& c) {
            return "ModelConfig(k=" + std::to_string(c.filter_width) +
                   ", l=" + std::to_string(c.num_blocks) + ", n=" + std::to_string(c.filters) +
                   ", in_channels=" + std::to_string(c.in_channels) + ", variant='" +
                   variant_name(c.variant) + "')";
        });

    m.def(
        "validate_config",
        [](const ModelConfig& c) {
            std::vector<std::string> messages;
            for (const auto& v : validate_config(c)) messages.push_back(v.message);
            return messages;
        },
        py::arg("config"));
    m.def("receptive_field", [](const ModelConfig& c) { return receptive_field(c); },
          py::arg("config"));

    py::class_<Model>(m, "Model")
        .def_property_readonly("config", [](const Model& m_) { return m_.config; })
        .def(
            "forward",
            [](const Model& m_,
               const py::array_t<double, py::array::c_style | py::array::forcecast>& window) {
                return forward(m_, series_from_array(window));
            },
            py::arg("window"))
        .def("save", [](const Model& m_, const std::string& path) { save_model(m_, path); },
             py::arg("path"))
        .def_static("load", [](const std::string& path) { return load_model(path); },
                    py::arg("path"))
        .def_property_readonly("param_count", &count_params)
        .def_property_readonly("flops_per_step", &count_flops)
        .def_property_readonly("receptive_field",
                               [](const Model& m_) { return receptive_field(m_); })
        .def("complexity", [](const Model& m_) {
            const ComplexityReport r = complexity_report(m_);
            py::dict d;
            d["param_count"] = r.param_count;
            d["flops_per_step"] = r.flops_per_step;
            d["receptive_field"] = r.receptive_field;
            d["model_size_bytes"] = r.model_size_bytes;
            return d;
        });

    m.def(
        "build_model",
        [](const ModelConfig& config, std::uint64_t seed, bool allow_oversized_field) {
            auto rng = make_rng(seed, "init");
            return build_model(config, rng, allow_oversized_field);
        },
        py::arg("config"), py::arg("seed") = 0, py::arg("allow_oversized_field") = false);

    // ---- data ---------------------------------------------------------------
    py::class_<QoETrace>(m, "Trace")
        .def_readwrite("id", &QoETrace::id)
        .def_readwrite("content", &QoETrace::content_id)
        .def_readwrite("pattern", &QoETrace::pattern_id)
        .def_readonly("qoe_min", &QoETrace::qoe_min)
        .def_readonly("qoe_max", &QoETrace::qoe_max)
        .def("__len__", &QoETrace::length)
        .def_property_readonly("stsq",
                               [](const QoETrace& t) {
                                   std::vector<double> v;
                                   for (const auto& s : t.samples) v.push_back(s.stsq);
                                   return array_from_vector(v);
                               })
        .def_property_readonly("pi",
                               [](const QoETrace& t) {
                                   std::vector<double> v;
                                   for (const auto& s : t.samples)
                                       v.push_back(static_cast<double>(s.pi));
                                   return array_from_vector(v);
                               })
        .def_property_readonly("nr",
                               [](const QoETrace& t) {
                                   std::vector<double> v;
                                   for (const auto& s : t.samples)
                                       v.push_back(static_cast<double>(s.nr));
                                   return array_from_vector(v);
                               })
        .def_property_readonly("tr",
                               [](const QoETrace& t) {
                                   std::vector<double> v;
                                   for (const auto& s : t.samples)
                                       v.push_back(static_cast<double>(s.tr));
                                   return array_from_vector(v);
                               })
        .def_property_readonly("qoe",
                               [](const QoETrace& t) {
                                   std::vector<double> v;
                                   for (const auto& s : t.samples) v.push_back(s.qoe);
                                   return array_from_vector(v);
                               })
        .def("to_csv", &write_trace)
        .def_static("from_csv", &parse_trace, py::arg("text"))
        .def_static("from_file",
                    [](const std::string& path) { return parse_trace_file(path); },
                    py::arg("path"))
        .def("save", [](const QoETrace& t, const std::string& path) { write_trace_file(t, path); },
             py::arg("path"))
        .def("__repr__", [](const QoETrace& t) {
            return "Trace(id='" + t.id + "', seconds=" + std::to_string(t.length()) + ")";
        });

    m.def(
        "synth_trace",
        [](int duration, const std::vector<std::pair<int, double>>& quality,
           const std::vector<std::pair<int, int>>& rebuffers, double noise_std,
           std::uint64_t seed, double qoe_min, double qoe_max, const std::string& id,
           const std::string& content, const std::string& pattern) {
            SynthParams p;
            p.duration = duration;
            p.quality.clear();
            for (const auto& [start, level] : quality) p.quality.push_back({start, level});
            for (const auto& [start, length] : rebuffers) p.rebuffers.push_back({start, length});
            p.noise_std = noise_std;
            p.seed = seed;
            p.qoe_min = qoe_min;
            p.qoe_max = qoe_max;
            p.id = id;
            p.content_id = content;
            p.pattern_id = pattern;
            return synth_trace(p);
        },
        py::arg("duration") = 120,
        py::arg("quality") = std::vector<std::pair<int, double>>{{0, 10.0}},
        py::arg("rebuffers") = std::vector<std::pair<int, int>>{}, py::arg("noise_std") = 2.0,
        py::arg("seed") = 0, py::arg("qoe_min") = 0.0, py::arg("qoe_max") = 100.0,
        py::arg("id") = "synth", py::arg("content") = "c0", py::arg("pattern") = "p0");

    py::class_<NormalizationStats>(m, "NormalizationStats")
        .def("__repr__", [](const NormalizationStats& s) {
            return "NormalizationStats(stsq=[" + std::to_string(s.stsq.min) + ", " +
                   std::to_string(s.stsq.max) + "], qoe=[" + std::to_string(s.qoe.min) + ", " +
                   std::to_string(s.qoe.max) + "])";
        });

    m.def("compute_stats", &compute_stats, py::arg("traces"));
    m.def(
        "normalize",
        [](const QoETrace& trace, const NormalizationStats& stats) {
            const NormalizedTrace n = normalize(trace, stats);
            return py::make_tuple(array_from_series(n.features), array_from_vector(n.targets),
                                  n.clamped);
        },
        py::arg("trace"), py::arg("stats"));
    m.def(
        "split",
        [](const std::vector<QoETrace>& traces, const std::string& kind, double fraction,
           std::uint64_t seed) {
            SplitProtocol p;
            p.kind = split_kind_from_name(kind);
            p.fraction = fraction;
            p.seed = seed;
            std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
            for (const auto& fold : split(traces, p)) out.emplace_back(fold.train, fold.test);
            return out;
        },
        py::arg("traces"), py::arg("kind"), py::arg("fraction") = 0.8, py::arg("seed") = 0);

    // ---- training & metrics --------------------------------------------------
    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](double learning_rate, int epochs, int batch_size, std::uint64_t seed,
                         const std::string& optimizer, std::optional<int> patience) {
                 TrainConfig c;
                 c.learning_rate = learning_rate;
                 c.epochs = epochs;
                 c.batch_size = batch_size;
                 c.seed = seed;
                 if (optimizer == "adam") c.optimizer = OptimizerKind::adam;
                 else if (optimizer == "sgd") c.optimizer = OptimizerKind::sgd;
                 else throw ParameterError("unknown optimizer '" + optimizer + "'");
                 c.early_stop_patience = patience;
                 return c;
             }),
             py::arg("learning_rate") = 1e-3, py::arg("epochs") = 100, py::arg("batch_size") = 32,
             py::arg("seed") = 0, py::arg("optimizer") = "adam",
             py::arg("patience") = std::nullopt)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("seed", &TrainConfig::seed);

    m.def(
        "make_windows",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& features,
           const std::vector<double>& targets, int window_length) {
            std::vector<std::pair<py::array_t<double>, double>> out;
            for (const auto& sample :
                 make_windows(series_from_array(features), targets, window_length))
                out.emplace_back(array_from_series(sample.window), sample.target);
            return out;
        },
        py::arg("features"), py::arg("targets"), py::arg("window_length"));
    m.def(
        "train",
        [](Model& model, const std::vector<QoETrace>& traces, const NormalizationStats& stats,
           int window_length, const TrainConfig& config) {
            std::vector<WindowSample> samples;
            for (const auto& trace : traces) {
                auto w = make_windows(trace, stats,
                                      window_length > 0 ? window_length
                                                        : receptive_field(model.config));
                samples.insert(samples.end(), std::make_move_iterator(w.begin()),
                               std::make_move_iterator(w.end()));
            }
            const TrainResult result = train(model, samples, config);
            std::vector<std::pair<int, double>> history;
            for (const auto& e : result.history) history.emplace_back(e.epoch, e.train_loss);
            return history;
        },
        py::arg("model"), py::arg("traces"), py::arg("stats"), py::arg("window_length") = 0,
        py::arg("config") = TrainConfig{});

    m.def(
        "predict_trace",
        [](const Model& model, const QoETrace& trace, const NormalizationStats& stats) {
            return array_from_vector(predict_trace(model, trace, stats));
        },
        py::arg("model"), py::arg("trace"), py::arg("stats"));

    m.def("pcc", &pcc, py::arg("a"), py::arg("b"));
    m.def("srocc", &srocc, py::arg("a"), py::arg("b"));
    m.def("rmse", &rmse, py::arg("a"), py::arg("b"));
    m.def("average_ranks", [](const std::vector<double>& v) {
        return array_from_vector(average_ranks(v));
    }, py::arg("values"));
}
