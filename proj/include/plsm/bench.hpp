#pragma once

// Scalar vs. vectorized LIF layer timing.
//
// For every (L, B) both implementations get identical random currents; their
// rasters must match before anything is timed. Reported times are medians over
// the repetitions that follow warm-up, with the interquartile range as spread.

#include "plsm/lif.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace plsm {

struct BenchSpec {
    std::vector<std::size_t> neuron_counts{10, 32, 100, 316, 1000, 3162, 5000};
    std::vector<std::size_t> batch_sizes{1, 8, 32, 128};
    std::size_t train_length = 100;
    std::size_t repetitions = 5;
    std::size_t warmup = 1;
    std::uint64_t seed = 0;
    LifParams params{};
    double max_current = 0.05;  ///< currents drawn uniformly from [0, max_current]

    void validate() const;
};

struct BenchRow {
    std::string impl;  ///< "scalar" or "vectorized"
    std::size_t neurons = 0;
    std::size_t batch = 0;
    std::size_t steps = 0;
    double median_ns = 0.0;
    double iqr_ns = 0.0;
    std::size_t reps = 0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::map<std::string, std::string> metadata;

    const BenchRow& find(const std::string& impl, std::size_t neurons, std::size_t batch) const;
    /// scalar median / vectorized median for one configuration.
    double speedup(std::size_t neurons, std::size_t batch) const;
};

/// Times both implementations over the spec grid.
/// Throws RuntimeFailure with a diff report if the rasters disagree.
BenchResult run_bench(const BenchSpec& spec);

/// Empty string when the rasters match, else a short report of the first mismatches.
std::string raster_diff(const SpikeTrain& expected, const SpikeTrain& actual, std::size_t max_lines = 10);

/// Median and interquartile range (linear interpolation between order statistics).
/// Throws ValidationError on an empty sample.
std::pair<double, double> median_iqr(std::vector<double> samples);

// "# key: value" metadata lines, then "impl,L,B,T,median_ns,iqr_ns,reps".
void write_bench_csv(std::ostream& os, const BenchResult& result);

/// Host/build description for result headers.
std::map<std::string, std::string> bench_metadata(std::uint64_t seed);

}  // namespace plsm
