#pragma once

// Leaky integrate-and-fire dynamics.
//
// Two implementations of the same update:
//  - scalar_step: per-neuron, branching reference. It is the oracle.
//  - parallel_step: whole-layer update built only from elementwise arithmetic,
//    comparisons and selects, so the compiler can vectorize it across neurons
//    and batch lanes.
// Both evaluate the floating-point expressions in the same order and are
// required to agree bit for bit.

#include "plsm/spike_train.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace plsm {

struct LifParams {
    double v_th = 0.1;
    double v_rest = 0.0;
    double v_spike = 1.0;
    double tau_m = 5.0;
    double r_m = 10.0;
    std::int32_t tau_ref = 1;  ///< refractory period in whole steps
    double dt = 1.0;

    /// Throws ValidationError unless v_th > v_rest, tau_m, r_m, dt > 0, tau_ref >= 0, all finite.
    void validate() const;

    friend bool operator==(const LifParams&, const LifParams&) = default;
};

/// State of a single neuron for the scalar reference.
struct NeuronState {
    double v = 0.0;
    std::int32_t counter = 0;
    bool refracting = false;

    friend bool operator==(const NeuronState&, const NeuronState&) = default;
};

struct ScalarStepResult {
    NeuronState state;
    double output = 0.0;  ///< v_spike on a spike step, else 0
    bool spiked = false;
};

/// One timestep of one neuron. Throws ValidationError on non-finite state or current.
ScalarStepResult scalar_step(const NeuronState& state, const LifParams& params, double current);

/// Voltages and refraction counters of L neurons, optionally for B independent lanes.
/// Element (neuron, lane) lives at neuron * B + lane.
class LayerState {
public:
    LayerState() = default;
    LayerState(std::size_t neurons, std::size_t batch, const LifParams& params);

    std::size_t neurons() const noexcept { return neurons_; }
    std::size_t batch() const noexcept { return batch_; }
    std::size_t size() const noexcept { return v_.size(); }

    std::span<double> v() noexcept { return v_; }
    std::span<const double> v() const noexcept { return v_; }
    std::span<std::int32_t> counters() noexcept { return counters_; }
    std::span<const std::int32_t> counters() const noexcept { return counters_; }

    double v(std::size_t neuron, std::size_t lane) const { return v_[neuron * batch_ + lane]; }
    std::int32_t counter(std::size_t neuron, std::size_t lane) const { return counters_[neuron * batch_ + lane]; }

    NeuronState neuron(std::size_t neuron, std::size_t lane = 0) const;
    void set_neuron(std::size_t neuron, std::size_t lane, const NeuronState& s);

    /// Voltages to v_rest, counters to zero.
    void reset(const LifParams& params);

    friend bool operator==(const LayerState&, const LayerState&) = default;

private:
    std::size_t neurons_ = 0;
    std::size_t batch_ = 0;
    std::vector<double> v_;
    std::vector<std::int32_t> counters_;
};

/// Input currents over time, laid out like LayerState per step (time-major).
class CurrentSequence {
public:
    CurrentSequence() = default;
    CurrentSequence(std::size_t neurons, std::size_t steps, std::size_t batch = 1)
        : neurons_(neurons), steps_(steps), batch_(batch), data_(neurons * steps * batch, 0.0)
    {}

    std::size_t neurons() const noexcept { return neurons_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t batch() const noexcept { return batch_; }

    double& at(std::size_t neuron, std::size_t t, std::size_t b = 0) { return data_[(t * neurons_ + neuron) * batch_ + b]; }
    double at(std::size_t neuron, std::size_t t, std::size_t b = 0) const
    {
        return data_[(t * neurons_ + neuron) * batch_ + b];
    }

    std::span<double> step(std::size_t t) { return {data_.data() + t * neurons_ * batch_, neurons_ * batch_}; }
    std::span<const double> step(std::size_t t) const { return {data_.data() + t * neurons_ * batch_, neurons_ * batch_}; }

    std::span<double> raw() noexcept { return data_; }
    std::span<const double> raw() const noexcept { return data_; }

    /// Spikes scaled by `gain` become currents.
    static CurrentSequence from_spikes(const SpikeTrain& train, double gain = 1.0);

private:
    std::size_t neurons_ = 0;
    std::size_t steps_ = 0;
    std::size_t batch_ = 0;
    std::vector<double> data_;
};

/// Advances every neuron of `state` by one step. `current` and `output` have state.size()
/// elements; output receives N(t), each entry 0 or v_spike.
/// Throws ValidationError on shape mismatch or non-finite current.
void parallel_step(LayerState& state, const LifParams& params, std::span<const double> current,
                   std::span<double> output);

std::vector<double> parallel_step(LayerState& state, const LifParams& params, std::span<const double> current);

/// Folds parallel_step over all timesteps; returns the binary output raster.
SpikeTrain run_spike_train(LayerState& state, const LifParams& params, const CurrentSequence& input);

/// Same contract as run_spike_train, computed neuron by neuron with scalar_step.
SpikeTrain run_spike_train_scalar(LayerState& state, const LifParams& params, const CurrentSequence& input);

namespace detail {

/// Unchecked kernel: no shape or finiteness validation.
void lif_update(std::span<double> v, std::span<std::int32_t> counters, std::span<const double> current,
                std::span<double> output, const LifParams& params) noexcept;

/// Same update, writing spike flags (0/1) instead of voltages.
void lif_update(std::span<double> v, std::span<std::int32_t> counters, std::span<const double> current,
                std::span<std::uint8_t> spikes, const LifParams& params) noexcept;

void check_finite(std::span<const double> values, const char* what);

}  // namespace detail

}  // namespace plsm
