#pragma once

// Experiment configuration file (YAML, schema version 1).
//
//   version: 1
//   seed: 0                 # base seed; component seeds derive from it unless given
//   reservoir: {dims: [10, 10, 10], lambda: 6, w_scale: 0.01,
//               c_table: {EE: 0.6, EI: 1, II: 0.2, IE: 0.8},
//               w_table: {EE: 3, EI: 2, II: -1, IE: -4},
//               input_size: 512, ei_ratio: 0.8, input_density: 0.1, primary_ratio: 0.5}
//   neuron: {v_th: 0.1, v_rest: 0, v_spike: 1, tau_m: 5, r_m: 10, tau_ref: 1, dt: 1}
//   encoder: {window: 50, rate_gain: 1}
//   readout: {window: 5, out_channels: 64, kernel: 3, pool: 2, dropout: 0.5,
//             epochs: 500, batch_size: 16, learning_rate: 0.01, decay_every: 100, decay_factor: 0.5}
//   mask: true
//   dataset: {task: patterns, train: 200, test: 100, classes: 3, windows: 1,
//             active_fraction: 0.25, rate_low: 0, rate_high: 0.3, noise: 0.03}
//   output_dir: runs/default
//
// Every key is optional; omitted keys keep the defaults shown. Unknown keys are errors.

#include "plsm/lif.hpp"
#include "plsm/readout.hpp"
#include "plsm/reservoir.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace plsm {

inline constexpr int kConfigVersion = 1;

struct DatasetSpec {
    std::string task = "patterns";  ///< "patterns" or "staged"
    std::size_t train_sequences = 200;
    std::size_t test_sequences = 100;
    std::size_t classes = 3;  ///< fixed at 3 for "staged"
    std::size_t windows = 1;  ///< feature vectors per sequence
    double active_fraction = 0.25;  ///< share of inputs driven at rate_high by each class prototype
    double rate_low = 0.0;
    double rate_high = 0.3;
    double noise = 0.03;  ///< per-feature Gaussian jitter (std. dev.)
    std::uint64_t seed = 0;

    void validate() const;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    BuildConfig reservoir;
    LifParams neuron;
    std::size_t encoder_window = 50;  ///< tau_enc
    double rate_gain = 1.0;  ///< firing probability = min(1, rate_gain * feature)
    std::uint64_t encoder_seed = 0;
    ReadoutConfig readout;  ///< in_channels/dims/classes are derived, see finalize()
    std::size_t readout_window = 5;  ///< w; tau_enc / w channels per cube
    TrainConfig training;
    bool mask = true;
    DatasetSpec dataset;
    std::filesystem::path output_dir = "runs/default";

    /// Sets the derived fields (readout channels/dims/classes) and checks cross-field
    /// consistency. Throws ConfigError.
    void finalize();

    /// tau_enc / w.
    std::size_t channels() const { return encoder_window / readout_window; }
};

/// Defaults with component seeds derived from `seed`.
ExperimentConfig default_config(std::uint64_t seed = 0);

/// Parses YAML text. Errors carry the offending line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Re-derives every component seed from a new base seed (the CLI --seed flag).
void reseed(ExperimentConfig& cfg, std::uint64_t seed);

/// Writes the fully resolved configuration back as YAML (for run directories).
std::string to_yaml(const ExperimentConfig& cfg);

}  // namespace plsm
