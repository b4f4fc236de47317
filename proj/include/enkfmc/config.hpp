#pragma once

#include <stdexcept>
#include <string>

#include "enkfmc/harness.hpp"

namespace enkfmc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All documented defaults applied; equals parsing an empty file.
ExperimentConfig default_config();

// Flat key-value format with [section] headers, '#' comment lines and blank
// lines. Unknown sections/keys and out-of-range values are errors carrying
// the line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical rendering of a resolved config: re-parsing it yields the same
// config, and re-rendering that reproduces the bytes exactly.
std::string render_config(const ExperimentConfig& cfg);

}  // namespace enkfmc
