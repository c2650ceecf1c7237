#include "plsm/readout.hpp"

#include "plsm/binary_io.hpp"
#include "plsm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

namespace plsm {

namespace {
constexpr std::string_view kMagic{"PLSMRDOT", 8};
constexpr std::uint32_t kVersion = 1;
constexpr double kLogFloor = 1e-12;
constexpr double kMinStdDev = 1e-12;
}  // namespace

FeatureCube windowed_cube(const SpikeTrain& raster, const GridDims& dims, std::size_t window, std::size_t lane)
{
    const std::size_t volume = dims[0] * dims[1] * dims[2];
    if (raster.neurons() != volume) {
        throw ValidationError("raster has " + std::to_string(raster.neurons()) + " neurons, grid holds " +
                              std::to_string(volume));
    }
    if (window == 0 || raster.steps() == 0 || raster.steps() % window != 0) {
        throw ValidationError("steps (" + std::to_string(raster.steps()) + ") must be a positive multiple of window (" +
                              std::to_string(window) + ")");
    }
    if (lane >= raster.batch()) throw ValidationError("lane out of range");

    FeatureCube cube;
    cube.channels = raster.steps() / window;
    cube.dims = dims;
    cube.window = window;
    cube.values.assign(cube.channels * volume, 0.0);
    for (std::size_t c = 0; c < cube.channels; ++c) {
        double* dst = cube.values.data() + c * volume;
        for (std::size_t t = c * window; t < (c + 1) * window; ++t) {
            for (std::size_t n = 0; n < volume; ++n) dst[n] += raster.at(n, t, lane);
        }
        for (std::size_t n = 0; n < volume; ++n) dst[n] /= static_cast<double>(window);
    }
    return cube;
}

void ReadoutConfig::validate() const
{
    if (in_channels == 0 || out_channels == 0 || classes == 0) throw ValidationError("readout sizes must be positive");
    if (kernel == 0) throw ValidationError("kernel must be positive");
    for (auto d : dims) {
        if (d < kernel) throw ValidationError("grid smaller than the convolution kernel");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
    if (pool != 0) {
        for (auto d : conv_dims()) {
            if (d < pool) throw ValidationError("pool window larger than the convolution output");
        }
    }
}

GridDims ReadoutConfig::conv_dims() const
{
    return {dims[0] - kernel + 1, dims[1] - kernel + 1, dims[2] - kernel + 1};
}

GridDims ReadoutConfig::pooled_dims() const
{
    if (pool == 0) return {1, 1, 1};
    const auto o = conv_dims();
    return {o[0] / pool, o[1] / pool, o[2] / pool};
}

std::size_t ReadoutConfig::pooled_size() const
{
    const auto p = pooled_dims();
    return out_channels * p[0] * p[1] * p[2];
}

std::size_t ReadoutConfig::parameter_count() const
{
    return out_channels * in_channels * kernel * kernel * kernel + out_channels + classes * pooled_size() + classes;
}

ReadoutModel::ReadoutModel(const ReadoutConfig& config, std::uint64_t seed) : config_(config)
{
    config_.validate();
    params_.assign(config_.parameter_count(), 0.0);
    Rng rng(seed);
    const double fan_in = static_cast<double>(config_.in_channels * config_.kernel * config_.kernel * config_.kernel);
    const double conv_a = std::sqrt(6.0 / fan_in);
    for (auto& w : conv_weights()) w = rng.uniform(-conv_a, conv_a);
    const double dense_a = std::sqrt(6.0 / static_cast<double>(config_.pooled_size() + config_.classes));
    for (auto& w : dense_weights()) w = rng.uniform(-dense_a, dense_a);
}

void ReadoutModel::set_input_normalization(std::vector<double> shift, std::vector<double> scale)
{
    const std::size_t n = config_.in_channels * config_.dims[0] * config_.dims[1] * config_.dims[2];
    if (shift.empty() && scale.empty()) {
        input_shift_.clear();
        input_scale_.clear();
        return;
    }
    if (shift.size() != n || scale.size() != n) throw ValidationError("normalization size does not match the input");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(shift[i]) || !std::isfinite(scale[i])) throw ValidationError("non-finite normalization");
    }
    input_shift_ = std::move(shift);
    input_scale_ = std::move(scale);
}

void ReadoutModel::fit_input_normalization(std::span<const LabeledCube> data)
{
    if (data.empty()) throw ValidationError("cannot fit normalization on an empty set");
    for (const auto& s : data) check_input(s.cube);
    const std::size_t n = data.front().cube.values.size();
    const double count = static_cast<double>(data.size());
    std::vector<double> mean(n, 0.0), scale(n, 0.0);
    for (const auto& s : data)
        for (std::size_t i = 0; i < n; ++i) mean[i] += s.cube.values[i];
    for (auto& m : mean) m /= count;
    for (const auto& s : data)
        for (std::size_t i = 0; i < n; ++i) scale[i] += (s.cube.values[i] - mean[i]) * (s.cube.values[i] - mean[i]);
    for (auto& v : scale) {
        const double sd = std::sqrt(v / count);
        v = sd > kMinStdDev ? 1.0 / sd : 0.0;
    }
    set_input_normalization(std::move(mean), std::move(scale));
}

std::size_t ReadoutModel::conv_w_size() const
{
    const auto k = config_.kernel;
    return config_.out_channels * config_.in_channels * k * k * k;
}

std::span<double> ReadoutModel::conv_weights() noexcept { return {params_.data(), conv_w_size()}; }

std::span<double> ReadoutModel::conv_bias() noexcept
{
    return {params_.data() + conv_w_size(), config_.out_channels};
}

std::span<double> ReadoutModel::dense_weights() noexcept
{
    return {params_.data() + conv_w_size() + config_.out_channels, config_.classes * config_.pooled_size()};
}

std::span<double> ReadoutModel::dense_bias() noexcept
{
    return {params_.data() + params_.size() - config_.classes, config_.classes};
}

void ReadoutModel::check_input(const FeatureCube& cube) const
{
    if (cube.channels != config_.in_channels || cube.dims != config_.dims ||
        cube.values.size() != cube.channels * cube.volume()) {
        throw ValidationError("feature cube shape does not match readout model");
    }
}

namespace {

// Flat-grid geometry shared by forward and backward.
//
// The convolution is evaluated at every flat position p of the input grid whose
// receptive field stays inside the buffer; only positions whose (x, y, z) lie in
// the valid output box are used afterwards. This turns each kernel tap into one
// contiguous multiply-add sweep.
struct Geometry {
    std::size_t volume;
    std::size_t span;  ///< number of flat positions swept per tap
    std::vector<std::size_t> tap_offset;
    std::vector<std::uint32_t> valid;  ///< flat positions of valid outputs
    std::vector<std::vector<std::uint32_t>> cells;  ///< valid positions per pooling cell

    explicit Geometry(const ReadoutConfig& cfg)
    {
        const auto& d = cfg.dims;
        const auto k = cfg.kernel;
        volume = d[0] * d[1] * d[2];
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) {
                for (std::size_t c = 0; c < k; ++c) tap_offset.push_back((a * d[1] + b) * d[2] + c);
            }
        }
        span = volume - tap_offset.back();

        const auto o = cfg.conv_dims();
        const auto pd = cfg.pooled_dims();
        cells.resize(pd[0] * pd[1] * pd[2]);
        for (std::size_t x = 0; x < o[0]; ++x) {
            for (std::size_t y = 0; y < o[1]; ++y) {
                for (std::size_t z = 0; z < o[2]; ++z) {
                    const auto p = static_cast<std::uint32_t>((x * d[1] + y) * d[2] + z);
                    valid.push_back(p);
                    if (cfg.pool == 0) {
                        cells[0].push_back(p);
                    } else {
                        const auto cx = x / cfg.pool, cy = y / cfg.pool, cz = z / cfg.pool;
                        if (cx < pd[0] && cy < pd[1] && cz < pd[2]) cells[(cx * pd[1] + cy) * pd[2] + cz].push_back(p);
                    }
                }
            }
        }
    }
};

}  // namespace

ForwardTrace ReadoutModel::forward_trace(const FeatureCube& cube, Rng* dropout_rng) const
{
    check_input(cube);
    const Geometry g(config_);
    const auto& cfg = config_;
    const std::size_t taps = g.tap_offset.size();
    const double* w = params_.data();
    const double* bias = params_.data() + conv_w_size();

    ForwardTrace tr;
    tr.input = cube.values;
    if (!input_shift_.empty()) {
        for (std::size_t i = 0; i < tr.input.size(); ++i) tr.input[i] = (tr.input[i] - input_shift_[i]) * input_scale_[i];
    }
    tr.pre.assign(cfg.out_channels * g.volume, 0.0);
    for (std::size_t co = 0; co < cfg.out_channels; ++co) {
        double* acc = tr.pre.data() + co * g.volume;
        std::fill_n(acc, g.span, bias[co]);
        for (std::size_t ci = 0; ci < cfg.in_channels; ++ci) {
            const double* in = tr.input.data() + ci * g.volume;
            const double* wk = w + (co * cfg.in_channels + ci) * taps;
            for (std::size_t t = 0; t < taps; ++t) {
                const double wt = wk[t];
                const double* src = in + g.tap_offset[t];
                for (std::size_t p = 0; p < g.span; ++p) acc[p] += wt * src[p];
            }
        }
    }

    tr.dropped.assign(tr.pre.size(), 0.0);
    if (dropout_rng && cfg.dropout > 0.0) {
        tr.keep.assign(tr.pre.size(), 0.0);
        const double scale = 1.0 / (1.0 - cfg.dropout);
        for (std::size_t co = 0; co < cfg.out_channels; ++co) {
            for (auto p : g.valid) {
                const auto k = co * g.volume + p;
                tr.keep[k] = dropout_rng->bernoulli(cfg.dropout) ? 0.0 : scale;
                tr.dropped[k] = std::max(tr.pre[k], 0.0) * tr.keep[k];
            }
        }
    } else {
        for (std::size_t co = 0; co < cfg.out_channels; ++co) {
            for (auto p : g.valid) {
                const auto k = co * g.volume + p;
                tr.dropped[k] = std::max(tr.pre[k], 0.0);
            }
        }
    }

    const std::size_t n_cells = g.cells.size();
    tr.pooled.assign(cfg.out_channels * n_cells, 0.0);
    tr.argmax.assign(tr.pooled.size(), 0);
    for (std::size_t co = 0; co < cfg.out_channels; ++co) {
        const double* a = tr.dropped.data() + co * g.volume;
        for (std::size_t cell = 0; cell < n_cells; ++cell) {
            const auto& members = g.cells[cell];
            std::uint32_t best = members.front();
            for (auto p : members) {
                if (a[p] > a[best]) best = p;
            }
            tr.pooled[co * n_cells + cell] = a[best];
            tr.argmax[co * n_cells + cell] = best;
        }
    }

    const std::size_t features = tr.pooled.size();
    const double* dw = params_.data() + conv_w_size() + cfg.out_channels;
    const double* db = params_.data() + params_.size() - cfg.classes;
    tr.logits.assign(cfg.classes, 0.0);
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        double z = db[k];
        for (std::size_t f = 0; f < features; ++f) z += dw[k * features + f] * tr.pooled[f];
        tr.logits[k] = z;
    }
    tr.probs = softmax(tr.logits);
    return tr;
}

std::vector<double> ReadoutModel::forward(const FeatureCube& cube) const { return forward_trace(cube, nullptr).probs; }

void ReadoutModel::backward(const FeatureCube& cube, const ForwardTrace& tr, std::size_t label,
                            std::span<double> grad) const
{
    const auto& cfg = config_;
    if (label >= cfg.classes) throw ValidationError("label out of range");
    if (grad.size() != params_.size()) throw ValidationError("gradient buffer size mismatch");
    check_input(cube);
    if (tr.input.size() != cube.values.size()) throw ValidationError("trace does not belong to this input");
    const Geometry g(config_);
    const std::size_t taps = g.tap_offset.size();
    const std::size_t features = tr.pooled.size();
    const std::size_t n_cells = g.cells.size();

    double* g_conv_w = grad.data();
    double* g_conv_b = grad.data() + conv_w_size();
    double* g_dense_w = g_conv_b + cfg.out_channels;
    double* g_dense_b = grad.data() + grad.size() - cfg.classes;
    const double* dense_w = params_.data() + conv_w_size() + cfg.out_channels;

    // softmax + cross-entropy
    std::vector<double> d_logit(cfg.classes);
    for (std::size_t k = 0; k < cfg.classes; ++k) d_logit[k] = tr.probs[k] - (k == label ? 1.0 : 0.0);

    std::vector<double> d_pooled(features, 0.0);
    for (std::size_t k = 0; k < cfg.classes; ++k) {
        g_dense_b[k] += d_logit[k];
        for (std::size_t f = 0; f < features; ++f) {
            g_dense_w[k * features + f] += d_logit[k] * tr.pooled[f];
            d_pooled[f] += dense_w[k * features + f] * d_logit[k];
        }
    }

    // Each pooled feature routes its gradient to one conv output position.
    for (std::size_t co = 0; co < cfg.out_channels; ++co) {
        for (std::size_t cell = 0; cell < n_cells; ++cell) {
            const auto f = co * n_cells + cell;
            const auto p = tr.argmax[f];
            const auto k = co * g.volume + p;
            const double keep = tr.keep.empty() ? 1.0 : tr.keep[k];
            const double d_pre = tr.pre[k] > 0.0 ? d_pooled[f] * keep : 0.0;
            if (d_pre == 0.0) continue;
            g_conv_b[co] += d_pre;
            for (std::size_t ci = 0; ci < cfg.in_channels; ++ci) {
                const double* in = tr.input.data() + ci * g.volume + p;
                double* gw = g_conv_w + (co * cfg.in_channels + ci) * taps;
                for (std::size_t t = 0; t < taps; ++t) gw[t] += d_pre * in[g.tap_offset[t]];
            }
        }
    }
}

double loss(std::span<const double> probs, std::span<const double> target)
{
    if (probs.size() != target.size()) throw ValidationError("probability and target sizes differ");
    double l = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (target[i] != 0.0) l -= target[i] * std::log(std::max(probs[i], kLogFloor));
    }
    return l;
}

double loss(std::span<const double> probs, std::size_t label)
{
    if (label >= probs.size()) throw ValidationError("label out of range");
    return -std::log(std::max(probs[label], kLogFloor));
}

std::vector<double> softmax(std::span<const double> logits)
{
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - m);
    for (auto& x : p) x /= sum;
    return p;
}

std::size_t argmax(std::span<const double> values)
{
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

TrainResult train(ReadoutModel& model, std::span<const LabeledCube> data, const TrainConfig& cfg)
{
    if (data.empty()) throw ValidationError("training set is empty");
    if (cfg.batch_size == 0) throw ValidationError("batch size must be positive");
    if (!(cfg.learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");
    for (const auto& s : data) {
        if (s.label >= model.config().classes) throw ValidationError("label out of range");
    }

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    std::vector<double> grad(model.parameters().size());
    auto params = model.parameters();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::size_t decays = cfg.decay_every ? epoch / cfg.decay_every : 0;
        const double lr = cfg.learning_rate * std::pow(cfg.decay_factor, static_cast<double>(decays));
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(cfg.seed, epoch, 1));
        shuffle_rng.shuffle(order);
        Rng dropout_rng(derive_seed(cfg.seed, epoch, 2));

        std::vector<double> sample_loss(data.size());
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                const auto& sample = data[order[k]];
                const auto tr = model.forward_trace(sample.cube, &dropout_rng);
                const double l = loss(tr.probs, sample.label);
                if (!std::isfinite(l)) {
                    throw RuntimeFailure("non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                                         std::to_string(order[k]));
                }
                sample_loss[order[k]] = l;
                model.backward(sample.cube, tr, sample.label, grad);
            }
            const double step = lr / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step * grad[i];
        }
        // summed in dataset order so the value does not depend on the shuffle
        const double epoch_loss =
            std::accumulate(sample_loss.begin(), sample_loss.end(), 0.0) / static_cast<double>(data.size());
        if (!std::isfinite(epoch_loss)) throw RuntimeFailure("non-finite loss at epoch " + std::to_string(epoch));
        result.loss_curve.push_back(epoch_loss);
        result.lr_curve.push_back(lr);
    }
    return result;
}

double accuracy(const ReadoutModel& model, std::span<const LabeledCube> data)
{
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& s : data) hits += argmax(model.forward(s.cube)) == s.label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

void write_model(std::ostream& os, const ReadoutModel& model)
{
    io::Writer w(os);
    const auto& c = model.config();
    w.magic(kMagic);
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint64_t>(c.in_channels);
    for (auto d : c.dims) w.put<std::uint64_t>(d);
    w.put<std::uint64_t>(c.out_channels);
    w.put<std::uint64_t>(c.kernel);
    w.put<std::uint64_t>(c.pool);
    w.put<double>(c.dropout);
    w.put<std::uint64_t>(c.classes);
    w.array<double>(model.parameters());
    w.array<double>(model.input_shift());
    w.array<double>(model.input_scale());
    w.check();
}

ReadoutModel read_model(std::istream& is)
{
    io::Reader r(is);
    r.expect_magic(kMagic);
    if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
        throw FormatError("unsupported readout checkpoint version " + std::to_string(v));
    }
    ReadoutConfig c;
    c.in_channels = r.get<std::uint64_t>();
    for (auto& d : c.dims) d = r.get<std::uint64_t>();
    c.out_channels = r.get<std::uint64_t>();
    c.kernel = r.get<std::uint64_t>();
    c.pool = r.get<std::uint64_t>();
    c.dropout = r.get<double>();
    c.classes = r.get<std::uint64_t>();
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("stored readout config invalid: ") + e.what());
    }
    ReadoutModel model(c, 0);
    const auto params = r.array<double>();
    if (params.size() != model.parameters().size()) throw FormatError("parameter count mismatch");
    std::copy(params.begin(), params.end(), model.parameters().begin());
    auto shift = r.array<double>();
    auto scale = r.array<double>();
    try {
        model.set_input_normalization(std::move(shift), std::move(scale));
    } catch (const ValidationError& e) {
        throw FormatError(std::string("stored normalization invalid: ") + e.what());
    }
    return model;
}

void save_model(const std::filesystem::path& path, const ReadoutModel& model)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string());
    write_model(os, model);
}

ReadoutModel load_model(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_model(is);
}

void write_loss_curve(std::ostream& os, const TrainResult& result)
{
    os << "epoch,loss,learning_rate\n";
    os.precision(17);
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
        os << e << ',' << result.loss_curve[e] << ',' << result.lr_curve[e] << '\n';
    }
}

}  // namespace plsm
