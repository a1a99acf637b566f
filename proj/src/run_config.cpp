#include "cnnqoe/run_config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cnnqoe/format.hpp"

namespace cnnqoe {

namespace {

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return std::string(s);
}

int to_int(const std::string& key, const std::string& value) {
    const auto v = parse_int(value);
    if (!v || *v < -(1ll << 31) || *v > (1ll << 31))
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    return static_cast<int>(*v);
}

double to_double(const std::string& key, const std::string& value) {
    const auto v = parse_double(value);
    if (!v) throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    return *v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::string_view rest(value);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string item = trim(rest.substr(0, comma));
        if (item.empty())
            throw ConfigError("config key '" + key + "': empty list entry");
        out.push_back(to_int(key, item));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

const std::map<std::string, std::function<void(RunConfig&, const std::string&, const std::string&)>,
               std::less<>>&
schema() {
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter, std::less<>> s = {
        {"k", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.filter_width = to_int(k, v); }},
        {"l", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.num_blocks = to_int(k, v); }},
        {"n", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.filters = to_int(k, v); }},
        {"in_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.in_channels = to_int(k, v); }},
        {"variant", [](RunConfig& c, const std::string&, const std::string& v) { c.model.variant = variant_from_name(v); }},
        {"dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.model.dropout_p = to_double(k, v); }},
        {"window", [](RunConfig& c, const std::string& k, const std::string& v) { c.window = to_int(k, v); }},
        {"override_receptive_field", [](RunConfig& c, const std::string& k, const std::string& v) { c.override_receptive_field = to_bool(k, v); }},
        {"learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = to_double(k, v); }},
        {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = to_int(k, v); }},
        {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_int(k, v); }},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
             const auto n = parse_int(v);
             if (!n || *n < 0) throw ConfigError("config key '" + k + "': expected a seed >= 0");
             c.train.seed = static_cast<std::uint64_t>(*n);
         }},
        {"optimizer", [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "adam") c.train.optimizer = OptimizerKind::adam;
             else if (v == "sgd") c.train.optimizer = OptimizerKind::sgd;
             else throw ConfigError("config key '" + k + "': expected adam or sgd, got '" + v + "'");
         }},
        {"adam_beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_beta1 = to_double(k, v); }},
        {"adam_beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_beta2 = to_double(k, v); }},
        {"adam_epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.adam_epsilon = to_double(k, v); }},
        {"patience", [](RunConfig& c, const std::string& k, const std::string& v) {
             const int p = to_int(k, v);
             c.train.early_stop_patience = p > 0 ? std::optional<int>(p) : std::nullopt;
         }},
        {"val_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.val_fraction = to_double(k, v); }},
        {"traces", [](RunConfig& c, const std::string&, const std::string& v) { c.traces = v; }},
        {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
        {"protocol", [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v != "all" && v != "leave_one_out_excluding_content_and_pattern" &&
                 v != "random_80_20" && v != "random_fraction_per_test")
                 throw ConfigError("config key '" + k + "': unknown protocol '" + v + "'");
             c.protocol = v;
         }},
        {"fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.fraction = to_double(k, v); }},
        {"jobs", [](RunConfig& c, const std::string& k, const std::string& v) { c.jobs = to_int(k, v); }},
        {"grid_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.filter_widths = to_int_list(k, v); }},
        {"grid_l", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.block_counts = to_int_list(k, v); }},
        {"grid_n", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.filter_counts = to_int_list(k, v); }},
        {"contents", [](RunConfig& c, const std::string& k, const std::string& v) { c.count_contents = to_int(k, v); }},
        {"patterns", [](RunConfig& c, const std::string& k, const std::string& v) { c.count_patterns = to_int(k, v); }},
        {"duration", [](RunConfig& c, const std::string& k, const std::string& v) { c.duration = to_int(k, v); }},
        {"noise_std", [](RunConfig& c, const std::string& k, const std::string& v) { c.noise_std = to_double(k, v); }},
        {"reps", [](RunConfig& c, const std::string& k, const std::string& v) { c.reps = to_int(k, v); }},
        {"warmup", [](RunConfig& c, const std::string& k, const std::string& v) { c.warmup = to_int(k, v); }},
    };
    return s;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        const std::string value = trim(std::string_view(stripped).substr(eq + 1));
        const auto& setters = schema();
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                              "'");
        it->second(config, key, value);
    }
    return config;
}

RunConfig read_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

}  // namespace cnnqoe
