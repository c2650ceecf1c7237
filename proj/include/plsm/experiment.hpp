#pragma once

// Synthetic sequence datasets and the end-to-end pipeline
//
//   features --encode--> input spikes --liquid--> raster --windowed_cube--> readout
//
// A sequence is V feature vectors with one label each. Every vector is encoded
// into tau_enc steps, so a sequence drives the liquid for V * tau_enc steps; the
// liquid is reset at the start of each sequence but not between its windows.
// Each window's raster becomes one readout sample.

#include "plsm/config.hpp"
#include "plsm/readout.hpp"
#include "plsm/reservoir.hpp"
#include "plsm/spike_train.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace plsm {

struct Sequence {
    std::size_t features = 0;       ///< values per window
    std::vector<double> values;     ///< [window][feature], each in [0, 1]
    std::vector<std::uint32_t> labels;  ///< one per window

    std::size_t windows() const noexcept { return labels.size(); }
    std::span<const double> window(std::size_t v) const { return {values.data() + v * features, features}; }

    friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct Dataset {
    std::string task;
    std::size_t input_size = 0;
    std::size_t classes = 0;
    std::vector<Sequence> train;
    std::vector<Sequence> test;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Task "patterns": each class owns a random prototype (a subset of inputs at
/// rate_high, the rest at rate_low); every window of a sequence is a jittered copy
/// of its class prototype. Classes are balanced (sequence i has class i mod K).
///
/// Task "staged": three phase prototypes; each sequence walks 0 -> 1 -> 2 with
/// change points drawn uniformly so that every phase lasts at least one window.
///
/// Throws ValidationError for an unknown task or invalid spec.
Dataset generate_dataset(const DatasetSpec& spec, std::size_t input_size);

// Binary file: "PLSMDATA" magic, u32 version (1), task string, u64 input size,
// u64 classes, then the train and test splits (u64 count; per sequence u64
// features, u32 label array, f64 value array).
void write_dataset(std::ostream& os, const Dataset& data);
Dataset read_dataset(std::istream& is);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

enum class Split : std::uint64_t { train = 1, test = 2 };

/// Seed of the input-spike streams for one dataset split.
std::uint64_t encoding_seed(const ExperimentConfig& cfg, Split split);

/// Liquid activity of one sequence, one tau_enc-step raster per window.
struct SequenceActivity {
    std::vector<SpikeTrain> windows;
    std::vector<std::uint32_t> labels;
};

/// Runs every sequence through encoder and liquid. Sequence i draws its input
/// spikes from Rng(derive_seed(seed, i)), so results do not depend on order.
std::vector<SequenceActivity> simulate(const ReservoirTopology& topo, const ExperimentConfig& cfg,
                                       std::span<const Sequence> sequences, std::uint64_t seed);

/// Readout samples for window length w, grouped per sequence.
std::vector<std::vector<LabeledCube>> to_cubes(std::span<const SequenceActivity> activity, const GridDims& dims,
                                               std::size_t w);

std::vector<LabeledCube> flatten(const std::vector<std::vector<LabeledCube>>& grouped);

/// Mean firing rate of every neuron over each window (the classic LSM readout),
/// flattened to one row per window.
void mean_rate_features(std::span<const SequenceActivity> activity, std::vector<std::vector<double>>& x,
                        std::vector<std::size_t>& y);

struct EvalReport {
    std::size_t samples = 0;
    double accuracy = 0.0;           ///< with the mask when it was requested, else without
    double accuracy_unmasked = 0.0;
    double accuracy_masked = -1.0;   ///< -1 when the mask does not apply
    std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted], for `accuracy`
    std::size_t monotone_sequences = 0;  ///< predicted label sequences that never decrease
    std::size_t sequences = 0;
};

/// Predicts every window; with `mask` the semantic mask runs along each sequence.
EvalReport evaluate(const ReadoutModel& model, const std::vector<std::vector<LabeledCube>>& grouped, bool mask);

/// Simulates `sequences` (encoded with the split's seed) and evaluates `model` on them.
EvalReport evaluate_sequences(const ReservoirTopology& topo, const ExperimentConfig& cfg, const ReadoutModel& model,
                              std::span<const Sequence> sequences, Split split, bool mask);

struct BaselineReport {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct RunReport {
    std::size_t liquid_spikes_train = 0;
    double liquid_rate = 0.0;  ///< mean firing probability per neuron and step over the training split
    TrainResult training;
    double train_accuracy = 0.0;
    EvalReport test;
    BaselineReport baseline;
};

/// Simulates both splits, trains the readout and evaluates it together with the
/// mean-rate logistic baseline. `model` receives the trained readout.
RunReport run_experiment(const ReservoirTopology& topo, const Dataset& data, const ExperimentConfig& cfg,
                         ReadoutModel& model);

/// Same as run_experiment on precomputed activity (used by sweeps to share liquid runs).
RunReport run_on_activity(std::span<const SequenceActivity> train, std::span<const SequenceActivity> test,
                          const ExperimentConfig& cfg, ReadoutModel& model);

struct SweepPoint {
    std::size_t channels = 0;  ///< T / w
    std::size_t out_channels = 0;
    double test_accuracy = 0.0;
    double test_accuracy_unmasked = 0.0;
};

/// Accuracy per (T/w, C_out) pair; the liquid runs once and is shared by all points.
std::vector<SweepPoint> run_sweep(const ReservoirTopology& topo, const Dataset& data, const ExperimentConfig& cfg,
                                  std::span<const std::size_t> channels, std::span<const std::size_t> out_channels);

/// Deterministic JSON renderings (fixed key order, shortest round-trip numbers).
std::string to_json(const EvalReport& report);
std::string to_json(const RunReport& report);
std::string to_json(std::span<const SweepPoint> sweep);

}  // namespace plsm
