#pragma once

// Liquid layer runtime: delayed recurrent input + external input -> LIF update.
//
// Per step t:
//   recurrent = row sums of W_L (.) pop()      (spikes emitted at t - delay)
//   I_L(t)    = recurrent + W_LI * input(t)
//   N(t)      = LIF update with I_L(t)
//   push N(t); append to the activation log

#include "plsm/delay_line.hpp"
#include "plsm/lif.hpp"
#include "plsm/reservoir.hpp"
#include "plsm/spike_train.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace plsm {

class LiquidState {
public:
    LiquidState(std::shared_ptr<const ReservoirTopology> topology, const LifParams& params, std::size_t batch = 1);

    const ReservoirTopology& topology() const noexcept { return *topology_; }
    const LifParams& params() const noexcept { return params_; }
    const LayerState& layer() const noexcept { return layer_; }
    const DelayBuffer& buffer() const noexcept { return buffer_; }
    std::size_t batch() const noexcept { return batch_; }
    std::size_t steps() const noexcept { return steps_; }

    /// Advances one step. `input` holds input_size x batch entries (batch innermost), each
    /// an input-layer spike (0/1) or, for the double overload, an input current.
    /// Returns N(t), neurons x batch; valid until the next call.
    std::span<const double> step(std::span<const std::uint8_t> input);
    std::span<const double> step(std::span<const double> input);

    /// Runs every step of `inputs` (input_size x T x batch) and returns the
    /// neurons x T x batch raster of those steps. The log keeps accumulating.
    SpikeTrain run_sequence(const SpikeTrain& inputs);

    /// Everything recorded since construction or the last reset.
    SpikeTrain activation_log() const;

    /// Voltages to rest, counters and buffer zeroed, log cleared. Topology is untouched.
    void reset();

private:
    void advance(std::span<const double> input_current);

    std::shared_ptr<const ReservoirTopology> topology_;
    LifParams params_;
    std::size_t batch_;
    LayerState layer_;
    DelayBuffer buffer_;
    std::vector<double> current_;
    std::vector<double> input_current_;
    std::vector<double> output_;
    std::vector<std::uint8_t> log_;
    std::size_t steps_ = 0;
};

}  // namespace plsm
