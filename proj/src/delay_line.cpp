#include "plsm/delay_line.hpp"

#include "plsm/errors.hpp"

#include <algorithm>

namespace plsm {

DelayBuffer::DelayBuffer(std::shared_ptr<const ReservoirTopology> topology, std::size_t batch)
    : topology_(std::move(topology)), batch_(batch)
{
    if (!topology_) throw ValidationError("delay buffer needs a topology");
    if (batch_ == 0) throw ValidationError("batch must be at least 1");
    neurons_ = topology_->neurons();
    depth_ = std::max<std::uint32_t>(1, topology_->t_max);
    slots_.assign(static_cast<std::size_t>(depth_) * neurons_ * batch_, 0.0);
}

std::span<const double> DelayBuffer::slot_for_delay(std::uint32_t delay) const
{
    // Signal pushed at time_ - delay. Never-written slots are still zero.
    const auto slot = (time_ + depth_ - delay) % depth_;
    const std::size_t stride = neurons_ * batch_;
    return {slots_.data() + slot * stride, stride};
}

void DelayBuffer::push(std::span<const double> n_t)
{
    const std::size_t stride = neurons_ * batch_;
    if (n_t.size() != stride) throw ValidationError("pushed vector does not match neurons x batch");
    std::copy(n_t.begin(), n_t.end(), slots_.begin() + static_cast<std::ptrdiff_t>((time_ % depth_) * stride));
    ++time_;
}

std::vector<double> DelayBuffer::pop() const
{
    std::vector<double> pe(neurons_ * neurons_ * batch_, 0.0);
    const auto& w = topology_->w_l;
    for (std::size_t i = 0; i < neurons_; ++i) {
        for (auto k = w.offsets[i]; k < w.offsets[i + 1]; ++k) {
            const std::size_t j = w.cols[k];
            const auto src = slot_for_delay(topology_->delays[k]);
            for (std::size_t b = 0; b < batch_; ++b) pe[(i * neurons_ + j) * batch_ + b] = src[j * batch_ + b];
        }
    }
    return pe;
}

void DelayBuffer::recurrent_current(std::span<double> out) const
{
    if (out.size() != neurons_ * batch_) throw ValidationError("current buffer does not match neurons x batch");
    std::vector<const double*> by_delay(depth_ + 1, nullptr);
    for (std::uint32_t d = 1; d <= depth_; ++d) by_delay[d] = slot_for_delay(d).data();

    const auto& w = topology_->w_l;
    const auto* delays = topology_->delays.data();
    if (batch_ == 1) {
        for (std::size_t i = 0; i < neurons_; ++i) {
            double acc = 0.0;
            for (auto k = w.offsets[i]; k < w.offsets[i + 1]; ++k) acc += w.values[k] * by_delay[delays[k]][w.cols[k]];
            out[i] = acc;
        }
        return;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < neurons_; ++i) {
        double* dst = out.data() + i * batch_;
        for (auto k = w.offsets[i]; k < w.offsets[i + 1]; ++k) {
            const double wk = w.values[k];
            const double* src = by_delay[delays[k]] + static_cast<std::size_t>(w.cols[k]) * batch_;
            for (std::size_t b = 0; b < batch_; ++b) dst[b] += wk * src[b];
        }
    }
}

bool DelayBuffer::mask(std::size_t target, std::size_t source, std::uint32_t age) const
{
    const auto d = topology_->delay(target, source);
    return d != 0 && d == age + 1;
}

void DelayBuffer::reset()
{
    std::fill(slots_.begin(), slots_.end(), 0.0);
    time_ = 0;
}

}  // namespace plsm
