#pragma once

#include <optional>
#include <string>

#include "cnnqoe/data.hpp"
#include "cnnqoe/model.hpp"
#include "cnnqoe/training.hpp"

namespace cnnqoe {

// Everything a command run can be told, from defaults, a config file, and
// command-line flags (that order, later wins).
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    int window = 0;  // 0 = the model's receptive field
    bool override_receptive_field = false;
    double val_fraction = 0.0;

    std::string traces;
    std::string out_dir = "out";
    std::string protocol = "all";  // all | leave_one_out_excluding_content_and_pattern |
                                   // random_80_20 | random_fraction_per_test
    double fraction = 0.8;
    int jobs = 1;

    GridSpace grid;

    // synth
    int count_contents = 6;
    int count_patterns = 6;
    int duration = 120;
    double noise_std = 2.0;

    // bench
    int reps = 1000;
    int warmup = 100;
};

// Flat `key = value` lines; '#' starts a comment; unknown keys are an error.
RunConfig parse_run_config(const std::string& text);
RunConfig read_run_config_file(const std::string& path);

}  // namespace cnnqoe
