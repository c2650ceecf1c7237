#include "plsm/liquid.hpp"

#include "plsm/errors.hpp"

#include <algorithm>

namespace plsm {

LiquidState::LiquidState(std::shared_ptr<const ReservoirTopology> topology, const LifParams& params, std::size_t batch)
    : topology_(std::move(topology)), params_(params), batch_(batch)
{
    if (!topology_) throw ValidationError("liquid needs a topology");
    params_.validate();
    layer_ = LayerState(topology_->neurons(), batch_, params_);
    buffer_ = DelayBuffer(topology_, batch_);
    current_.assign(layer_.size(), 0.0);
    input_current_.assign(layer_.size(), 0.0);
    output_.assign(layer_.size(), 0.0);
}

std::span<const double> LiquidState::step(std::span<const std::uint8_t> input)
{
    const auto& topo = *topology_;
    if (input.size() != topo.input_size() * batch_) throw ValidationError("input vector does not match input_size x batch");

    const auto& w = topo.w_li;
    for (std::size_t i = 0; i < topo.neurons(); ++i) {
        for (std::size_t b = 0; b < batch_; ++b) {
            double acc = 0.0;
            for (auto k = w.offsets[i]; k < w.offsets[i + 1]; ++k) {
                if (input[w.cols[k] * batch_ + b]) acc += w.values[k];
            }
            input_current_[i * batch_ + b] = acc;
        }
    }
    advance(input_current_);
    return output_;
}

std::span<const double> LiquidState::step(std::span<const double> input)
{
    const auto& topo = *topology_;
    if (input.size() != topo.input_size() * batch_) throw ValidationError("input vector does not match input_size x batch");
    detail::check_finite(input, "liquid input");

    const auto& w = topo.w_li;
    for (std::size_t i = 0; i < topo.neurons(); ++i) {
        for (std::size_t b = 0; b < batch_; ++b) {
            double acc = 0.0;
            for (auto k = w.offsets[i]; k < w.offsets[i + 1]; ++k) acc += w.values[k] * input[w.cols[k] * batch_ + b];
            input_current_[i * batch_ + b] = acc;
        }
    }
    advance(input_current_);
    return output_;
}

void LiquidState::advance(std::span<const double> input_current)
{
    buffer_.recurrent_current(current_);
    for (std::size_t k = 0; k < current_.size(); ++k) current_[k] = current_[k] + input_current[k];
    detail::lif_update(layer_.v(), layer_.counters(), current_, output_, params_);
    buffer_.push(output_);
    for (double n : output_) log_.push_back(n != 0.0 ? 1 : 0);
    ++steps_;
}

SpikeTrain LiquidState::run_sequence(const SpikeTrain& inputs)
{
    if (inputs.steps() == 0) throw ValidationError("input sequence must have at least one step");
    if (inputs.neurons() != topology_->input_size() || inputs.batch() != batch_) {
        throw ValidationError("input raster shape does not match liquid");
    }
    SpikeTrain out(topology_->neurons(), inputs.steps(), batch_);
    for (std::size_t t = 0; t < inputs.steps(); ++t) {
        const auto n_t = step(inputs.step(t));
        auto dst = out.step(t);
        for (std::size_t k = 0; k < n_t.size(); ++k) dst[k] = n_t[k] != 0.0 ? 1 : 0;
    }
    return out;
}

SpikeTrain LiquidState::activation_log() const
{
    SpikeTrain out(topology_->neurons(), steps_, batch_);
    std::copy(log_.begin(), log_.end(), out.raw().begin());
    return out;
}

void LiquidState::reset()
{
    layer_.reset(params_);
    buffer_.reset();
    log_.clear();
    steps_ = 0;
}

}  // namespace plsm
