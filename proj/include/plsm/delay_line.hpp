#pragma once

// Synaptic delay buffer.
//
// Semantically a queue of L x L signal matrices: each step the broadcast of N(t)
// (column j carries the output of source j) enters the queue, and pop() returns,
// for every connection (i, j), the signal pushed delay(i, j) steps earlier.
//
// Because every column of a pushed matrix is the same broadcast vector, a slot
// only needs to hold N(t) itself; the static mask (delay(i, j) == age) is kept as
// per-connection delays taken from the topology. Slots form a ring of depth t_max.

#include "plsm/reservoir.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace plsm {

class DelayBuffer {
public:
    DelayBuffer() = default;
    DelayBuffer(std::shared_ptr<const ReservoirTopology> topology, std::size_t batch = 1);

    std::size_t neurons() const noexcept { return neurons_; }
    std::size_t batch() const noexcept { return batch_; }
    std::uint32_t depth() const noexcept { return depth_; }
    std::uint64_t time() const noexcept { return time_; }

    /// Enqueue the layer output N(t) (neurons x batch, batch innermost) and advance time.
    /// Throws ValidationError on a size mismatch.
    void push(std::span<const double> n_t);

    /// Dense pE for the current step: row-major [target][source][lane].
    /// Nonzero only where a connection exists and its signal is due now.
    std::vector<double> pop() const;

    /// Row sums of W_L (.) pE without materializing pE: out[target * batch + lane].
    void recurrent_current(std::span<double> out) const;

    /// mask(i, j, age) == 1 iff (i, j) is connected and delay(i, j) == age + 1.
    bool mask(std::size_t target, std::size_t source, std::uint32_t age) const;

    /// Zero every slot and rewind time.
    void reset();

private:
    std::span<const double> slot_for_delay(std::uint32_t delay) const;

    std::shared_ptr<const ReservoirTopology> topology_;
    std::size_t neurons_ = 0;
    std::size_t batch_ = 1;
    std::uint32_t depth_ = 1;
    std::uint64_t time_ = 0;
    std::vector<double> slots_;  ///< depth x neurons x batch
};

}  // namespace plsm
