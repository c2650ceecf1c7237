#include "plsm/lif.hpp"

#include "plsm/errors.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace plsm {

void LifParams::validate() const
{
    for (double x : {v_th, v_rest, v_spike, tau_m, r_m, dt}) {
        if (!std::isfinite(x)) throw ValidationError("LIF parameters must be finite");
    }
    if (!(v_th > v_rest)) throw ValidationError("v_th must exceed v_rest");
    if (!(tau_m > 0.0)) throw ValidationError("tau_m must be positive");
    if (!(r_m > 0.0)) throw ValidationError("r_m must be positive");
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (tau_ref < 0) throw ValidationError("tau_ref must be non-negative");
}

ScalarStepResult scalar_step(const NeuronState& state, const LifParams& params, double current)
{
    if (!std::isfinite(state.v) || !std::isfinite(current)) throw ValidationError("non-finite neuron input");

    ScalarStepResult r{state, 0.0};
    NeuronState& s = r.state;
    if (!s.refracting) {
        s.v = s.v + ((-s.v + params.v_rest + current * params.r_m) / params.tau_m) * params.dt;
        if (s.v >= params.v_th) {
            s.v = params.v_spike;
            s.refracting = params.tau_ref > 0;
            s.counter = params.tau_ref;
            r.output = params.v_spike;
            r.spiked = true;
        }
    } else {
        s.v = params.v_rest;
        s.counter = s.counter - 1;
        if (s.counter == 0) s.refracting = false;
    }
    return r;
}

LayerState::LayerState(std::size_t neurons, std::size_t batch, const LifParams& params)
    : neurons_(neurons), batch_(batch), v_(neurons * batch, params.v_rest), counters_(neurons * batch, 0)
{
    if (neurons == 0 || batch == 0) throw ValidationError("layer needs at least one neuron and one lane");
}

NeuronState LayerState::neuron(std::size_t neuron, std::size_t lane) const
{
    const auto k = neuron * batch_ + lane;
    return {v_.at(k), counters_.at(k), counters_.at(k) != 0};
}

void LayerState::set_neuron(std::size_t neuron, std::size_t lane, const NeuronState& s)
{
    const auto k = neuron * batch_ + lane;
    v_.at(k) = s.v;
    counters_.at(k) = s.refracting ? s.counter : 0;
}

void LayerState::reset(const LifParams& params)
{
    std::fill(v_.begin(), v_.end(), params.v_rest);
    std::fill(counters_.begin(), counters_.end(), 0);
}

CurrentSequence CurrentSequence::from_spikes(const SpikeTrain& train, double gain)
{
    CurrentSequence seq(train.neurons(), train.steps(), train.batch());
    auto src = train.raw();
    auto dst = seq.raw();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? gain : 0.0;
    return seq;
}

namespace detail {

namespace {

// One fused pass over the layer. Each statement is a whole-vector operation
// applied to element i; the only conditionals are selects, which vectorize to
// compare + blend. The order of floating-point operations matches scalar_step.
template <typename Out, typename Emit>
inline void lif_kernel(double* __restrict v, std::int32_t* __restrict rc, const double* __restrict cur,
                       Out* __restrict out, std::size_t n, const LifParams& p, Emit emit) noexcept
{
    const double v_rest = p.v_rest;
    const double v_th = p.v_th;
    const double v_spike = p.v_spike;
    const double r_m = p.r_m;
    const double tau_m = p.tau_m;
    const double dt = p.dt;
    const std::int32_t tau_ref = p.tau_ref;

    for (std::size_t i = 0; i < n; ++i) {
        const double dv = (-v[i] + v_rest + cur[i] * r_m) / tau_m;
        const double v_int = v[i] + dv * dt;
        const std::int32_t rf = rc[i] != 0 ? 1 : 0;  // refraction flag
        const double rf_d = static_cast<double>(rf);
        const double v_bar = (1.0 - rf_d) * v_int + rf_d * v_rest;
        const std::int32_t s = v_bar >= v_th ? 1 : 0;  // spike flag
        const double s_d = static_cast<double>(s);
        const double n_t = s_d * v_spike;
        const std::int32_t rc_bar = rc[i] - rf;
        v[i] = (1.0 - s_d) * v_bar + n_t;
        rc[i] = s * tau_ref + rc_bar;
        out[i] = emit(s, n_t);
    }
}

}  // namespace

void lif_update(std::span<double> v, std::span<std::int32_t> counters, std::span<const double> current,
                std::span<double> output, const LifParams& params) noexcept
{
    lif_kernel(v.data(), counters.data(), current.data(), output.data(), v.size(), params,
               [](std::int32_t, double n_t) { return n_t; });
}

void lif_update(std::span<double> v, std::span<std::int32_t> counters, std::span<const double> current,
                std::span<std::uint8_t> spikes, const LifParams& params) noexcept
{
    lif_kernel(v.data(), counters.data(), current.data(), spikes.data(), v.size(), params,
               [](std::int32_t s, double) { return static_cast<std::uint8_t>(s); });
}

void check_finite(std::span<const double> values, const char* what)
{
    // Exponent-bits test instead of std::isfinite so the scan vectorizes.
    std::uint64_t bad = 0;
    for (double x : values) bad |= ((std::bit_cast<std::uint64_t>(x) >> 52) & 0x7ff) == 0x7ff;
    if (bad) throw ValidationError(std::string("non-finite value in ") + what);
}

}  // namespace detail

void parallel_step(LayerState& state, const LifParams& params, std::span<const double> current,
                   std::span<double> output)
{
    if (current.size() != state.size() || output.size() != state.size()) {
        throw ValidationError("current/output size " + std::to_string(current.size()) + "/" +
                              std::to_string(output.size()) + " does not match layer size " +
                              std::to_string(state.size()));
    }
    detail::check_finite(current, "input current");
    detail::lif_update(state.v(), state.counters(), current, output, params);
}

std::vector<double> parallel_step(LayerState& state, const LifParams& params, std::span<const double> current)
{
    std::vector<double> out(state.size());
    parallel_step(state, params, current, out);
    return out;
}

namespace {

void check_sequence(const LayerState& state, const CurrentSequence& input)
{
    if (input.steps() == 0) throw ValidationError("input sequence must have at least one step");
    if (input.neurons() != state.neurons() || input.batch() != state.batch()) {
        throw ValidationError("input sequence shape does not match layer state");
    }
    detail::check_finite(input.raw(), "input current sequence");
}

}  // namespace

SpikeTrain run_spike_train(LayerState& state, const LifParams& params, const CurrentSequence& input)
{
    check_sequence(state, input);
    SpikeTrain raster(state.neurons(), input.steps(), state.batch());
    for (std::size_t t = 0; t < input.steps(); ++t) {
        detail::lif_update(state.v(), state.counters(), input.step(t), raster.step(t), params);
    }
    return raster;
}

SpikeTrain run_spike_train_scalar(LayerState& state, const LifParams& params, const CurrentSequence& input)
{
    check_sequence(state, input);
    const std::size_t lanes = state.batch();
    std::vector<NeuronState> neurons(state.size());
    for (std::size_t n = 0; n < state.neurons(); ++n) {
        for (std::size_t b = 0; b < lanes; ++b) neurons[n * lanes + b] = state.neuron(n, b);
    }

    SpikeTrain raster(state.neurons(), input.steps(), lanes);
    for (std::size_t t = 0; t < input.steps(); ++t) {
        auto cur = input.step(t);
        auto out = raster.step(t);
        for (std::size_t k = 0; k < neurons.size(); ++k) {
            const auto r = scalar_step(neurons[k], params, cur[k]);
            neurons[k] = r.state;
            out[k] = r.spiked ? 1 : 0;
        }
    }

    for (std::size_t n = 0; n < state.neurons(); ++n) {
        for (std::size_t b = 0; b < lanes; ++b) state.set_neuron(n, b, neurons[n * lanes + b]);
    }
    return raster;
}

}  // namespace plsm
