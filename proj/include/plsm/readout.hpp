#pragma once

// Spatio-temporal readout.
//
// The liquid raster is averaged over windows of w steps and each window's
// activity is folded back onto the reservoir grid, giving a (T/w) x X x Y x Z
// cube. Windows are stacked as input channels of one 3-D convolution:
//
//   cube -> conv3d (k^3, valid) -> ReLU -> dropout -> max-pool (p^3 cells) -> dense -> softmax
//
// Inputs are standardized per element with statistics frozen from the training
// set (identity until fitted). Only the head's weights are trained; gradients
// are derived by hand (no autodiff).

#include "plsm/random.hpp"
#include "plsm/spike_train.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace plsm {

using GridDims = std::array<std::size_t, 3>;

/// Mean window activity laid out [channel][x][y][z], values in [0, 1].
struct FeatureCube {
    std::size_t channels = 0;
    GridDims dims{};
    std::size_t window = 0;
    std::vector<double> values;

    std::size_t volume() const noexcept { return dims[0] * dims[1] * dims[2]; }
    double at(std::size_t c, std::size_t x, std::size_t y, std::size_t z) const
    {
        return values[((c * dims[0] + x) * dims[1] + y) * dims[2] + z];
    }

    friend bool operator==(const FeatureCube&, const FeatureCube&) = default;
};

/// Averages `raster` (lane `lane`) over consecutive windows of `window` steps.
/// Neuron n maps to grid cell n = (x * Y + y) * Z + z.
/// Throws ValidationError unless neurons == X*Y*Z and steps % window == 0.
FeatureCube windowed_cube(const SpikeTrain& raster, const GridDims& dims, std::size_t window, std::size_t lane = 0);

struct LabeledCube {
    FeatureCube cube;
    std::size_t label = 0;
};

struct ReadoutConfig {
    std::size_t in_channels = 1;  ///< T / w
    GridDims dims{10, 10, 10};
    std::size_t out_channels = 64;  ///< C_out
    std::size_t kernel = 3;
    std::size_t pool = 2;  ///< pooling window edge; 0 pools each channel globally
    double dropout = 0.5;
    std::size_t classes = 3;

    void validate() const;
    GridDims conv_dims() const;
    GridDims pooled_dims() const;
    std::size_t pooled_size() const;  ///< features entering the dense layer
    std::size_t parameter_count() const;

    friend bool operator==(const ReadoutConfig&, const ReadoutConfig&) = default;
};

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardTrace {
    std::vector<double> input;    ///< model input after normalization
    std::vector<double> pre;      ///< conv output before ReLU, [c][flat grid position]
    std::vector<double> dropped;  ///< after ReLU and dropout
    std::vector<double> keep;     ///< dropout scale per element (0 or 1/(1-rate)); empty in inference
    std::vector<double> pooled;
    std::vector<std::uint32_t> argmax;  ///< flat grid position selected by each pooled feature
    std::vector<double> logits;
    std::vector<double> probs;
};

class ReadoutModel {
public:
    ReadoutModel() = default;
    /// Random initialization: He-uniform conv kernels, Glorot-uniform dense weights, zero biases.
    ReadoutModel(const ReadoutConfig& config, std::uint64_t seed);

    const ReadoutConfig& config() const noexcept { return config_; }

    /// All trainable parameters: conv weights | conv bias | dense weights | dense bias.
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    std::span<double> conv_weights() noexcept;  ///< [out][in][kx][ky][kz]
    std::span<double> conv_bias() noexcept;
    std::span<double> dense_weights() noexcept;  ///< [class][pooled feature]
    std::span<double> dense_bias() noexcept;

    /// Per-element input standardization x' = (x - shift) * scale; both empty restores identity.
    void set_input_normalization(std::vector<double> shift, std::vector<double> scale);
    /// Shift = training mean, scale = 1 / standard deviation (0 for constant elements).
    void fit_input_normalization(std::span<const LabeledCube> data);
    std::span<const double> input_shift() const noexcept { return input_shift_; }
    std::span<const double> input_scale() const noexcept { return input_scale_; }

    /// Class probabilities in inference mode (no dropout).
    std::vector<double> forward(const FeatureCube& cube) const;

    /// Forward pass that records intermediates. Dropout is applied when `dropout_rng` is given.
    ForwardTrace forward_trace(const FeatureCube& cube, Rng* dropout_rng = nullptr) const;

    /// Adds d(loss)/d(params) for cross-entropy against `label` into `grad` (size parameter_count()).
    void backward(const FeatureCube& cube, const ForwardTrace& trace, std::size_t label, std::span<double> grad) const;

    friend bool operator==(const ReadoutModel&, const ReadoutModel&) = default;

private:
    void check_input(const FeatureCube& cube) const;
    std::size_t conv_w_size() const;

    ReadoutConfig config_;
    std::vector<double> params_;
    std::vector<double> input_shift_;
    std::vector<double> input_scale_;
};

/// Cross-entropy -sum y_i log p_i with log clamped at 1e-12.
double loss(std::span<const double> probs, std::span<const double> target);
double loss(std::span<const double> probs, std::size_t label);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 16;
    double learning_rate = 0.01;
    std::size_t decay_every = 100;  ///< step decay period in epochs; 0 disables
    double decay_factor = 0.5;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> loss_curve;  ///< mean training loss per epoch
    std::vector<double> lr_curve;
};

/// Mini-batch gradient descent over the readout parameters only.
/// Throws RuntimeFailure if the loss becomes non-finite.
TrainResult train(ReadoutModel& model, std::span<const LabeledCube> data, const TrainConfig& cfg);

/// Fraction of samples whose argmax prediction matches the label.
double accuracy(const ReadoutModel& model, std::span<const LabeledCube> data);

// Checkpoint: "PLSMRDOT" magic, u32 version (1), ReadoutConfig fields, then three
// u64-length-prefixed binary64 arrays: parameters, input shift, input scale
// (the last two empty when no normalization is set). Little-endian.
void write_model(std::ostream& os, const ReadoutModel& model);
ReadoutModel read_model(std::istream& is);
void save_model(const std::filesystem::path& path, const ReadoutModel& model);
ReadoutModel load_model(const std::filesystem::path& path);

/// CSV "epoch,loss,learning_rate".
void write_loss_curve(std::ostream& os, const TrainResult& result);

}  // namespace plsm
