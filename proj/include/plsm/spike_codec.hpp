#pragma once

// Poisson (per-step Bernoulli) rate coding of normalized feature vectors.

#include "plsm/random.hpp"
#include "plsm/spike_train.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace plsm {

struct EncoderConfig {
    std::size_t window = 50;  ///< encoding window, timesteps per feature vector
    /// Maps a normalized feature in [0,1] to a per-step firing probability. Identity when empty.
    std::function<double(double)> rate_scale;
    std::uint64_t seed = 0;

    void validate() const;
    double probability(double feature) const;
};

/// D x window raster; neuron d fires independently each step with probability rate_scale(features[d]).
/// Throws ValidationError if a feature lies outside [0, 1] or is non-finite.
SpikeTrain encode(std::span<const double> features, const EncoderConfig& cfg, Rng& rng);

/// As above with a fresh generator seeded from cfg.seed.
SpikeTrain encode(std::span<const double> features, const EncoderConfig& cfg);

/// Mean spike count per timestep for each neuron (lane 0 of a batched train).
std::vector<double> rate_summary(const SpikeTrain& train);

}  // namespace plsm
