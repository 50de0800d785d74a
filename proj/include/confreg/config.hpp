#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "confreg/loss.hpp"
#include "confreg/net.hpp"
#include "confreg/opt.hpp"

namespace confreg {

// Run settings from a TOML-style file:
//
//   preset = "small-motion"     # optional, top level
//   strict = true               # unknown keys are errors (default)
//   [net]    num_layers hidden_units omega encoder fourier_features fourier_sigma seed
//   [loss]   lambda window_n ncc_mode variance_eps
//   [energy] a1 a2 a3 a4 alpha eps_det
//   [train]  epochs points_per_epoch learning_rate adam_beta1 adam_beta2 adam_eps
//            seed deterministic log_every
//
// Precedence: built-in defaults < preset < explicit keys (< CLI flags, applied by the caller).
struct RunConfig {
    NetConfig net;
    LossConfig loss;
    TrainConfig train;
    std::string preset;
    // One line per key left at its built-in or preset value, e.g. "net.omega = 32 (default)".
    std::vector<std::string> defaults_applied;
    // Non-fatal notes, e.g. unknown keys when strict = false.
    std::vector<std::string> warnings;
};

// Names accepted by apply_preset: "large-motion", "small-motion".
void apply_preset(RunConfig& cfg, std::string_view name);

RunConfig parse_config(std::string_view text, const std::string& origin = "<config>");
RunConfig read_config(const std::filesystem::path& path);

// Built-in defaults, with every key reported in defaults_applied.
RunConfig default_config();

} // namespace confreg
