#pragma once

// Binary spike rasters (neurons x timesteps x batch).
//
// Storage is time-major: all neurons of step t are contiguous, batch innermost,
// so a simulator can append one step at a time. `at(n, t, b)` hides the layout.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace plsm {

class SpikeTrain {
public:
    SpikeTrain() = default;
    SpikeTrain(std::size_t neurons, std::size_t steps, std::size_t batch = 1);

    std::size_t neurons() const noexcept { return neurons_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t batch() const noexcept { return batch_; }
    bool empty() const noexcept { return data_.empty(); }

    std::uint8_t at(std::size_t neuron, std::size_t t, std::size_t b = 0) const
    {
        return data_[index(neuron, t, b)];
    }
    void set(std::size_t neuron, std::size_t t, std::uint8_t spike) { data_[index(neuron, t, 0)] = spike; }
    void set(std::size_t neuron, std::size_t t, std::size_t b, std::uint8_t spike) { data_[index(neuron, t, b)] = spike; }

    /// One timestep: neurons x batch, batch innermost.
    std::span<std::uint8_t> step(std::size_t t) { return {data_.data() + t * neurons_ * batch_, neurons_ * batch_}; }
    std::span<const std::uint8_t> step(std::size_t t) const
    {
        return {data_.data() + t * neurons_ * batch_, neurons_ * batch_};
    }

    std::span<const std::uint8_t> raw() const noexcept { return data_; }
    std::span<std::uint8_t> raw() noexcept { return data_; }

    std::size_t spike_count() const;

    /// Column range [first, first + count) of timesteps.
    SpikeTrain slice_steps(std::size_t first, std::size_t count) const;

    /// Single batch lane as an unbatched train.
    SpikeTrain lane(std::size_t b) const;

    friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;

private:
    std::size_t index(std::size_t neuron, std::size_t t, std::size_t b) const noexcept
    {
        return (t * neurons_ + neuron) * batch_ + b;
    }

    std::size_t neurons_ = 0;
    std::size_t steps_ = 0;
    std::size_t batch_ = 0;
    std::vector<std::uint8_t> data_;
};

// Dense binary layout, little-endian:
//   "PLSMSPK\0"  8-byte magic
//   u32          format version (1)
//   u64 x 3      neurons, steps, batch
//   u64          payload length = neurons * steps * batch
//   u8[...]      spikes, time-major, batch innermost, each 0 or 1
void write_binary(std::ostream& os, const SpikeTrain& train);
SpikeTrain read_binary(std::istream& is);

// CSV: header "batch,neuron,t0,...,t{T-1}", then one row per (batch, neuron).
void write_csv(std::ostream& os, const SpikeTrain& train);
SpikeTrain read_csv(std::istream& is);

void save(const std::filesystem::path& path, const SpikeTrain& train);
SpikeTrain load(const std::filesystem::path& path);

}  // namespace plsm
