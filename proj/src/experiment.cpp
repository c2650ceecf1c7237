#include "plsm/experiment.hpp"

#include "plsm/baseline.hpp"
#include "plsm/binary_io.hpp"
#include "plsm/errors.hpp"
#include "plsm/liquid.hpp"
#include "plsm/random.hpp"
#include "plsm/semantic_mask.hpp"
#include "plsm/spike_codec.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

namespace plsm {

namespace {

constexpr std::string_view kMagic{"PLSMDATA", 8};
constexpr std::uint32_t kVersion = 1;


std::vector<std::vector<double>> prototypes(const DatasetSpec& spec, std::size_t classes, std::size_t input_size)
{
    Rng rng(derive_seed(spec.seed, 0));
    const auto active = static_cast<std::size_t>(
        std::max(1.0, std::round(spec.active_fraction * static_cast<double>(input_size))));
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < classes; ++k) {
        std::vector<double> p(input_size, spec.rate_low);
        for (auto i : rng.sample_without_replacement(input_size, std::min(active, input_size))) p[i] = spec.rate_high;
        out.push_back(std::move(p));
    }
    return out;
}

void jitter_into(std::vector<double>& dst, const std::vector<double>& proto, double noise, Rng& rng)
{
    for (double p : proto) dst.push_back(std::clamp(p + noise * rng.normal(), 0.0, 1.0));
}

std::vector<Sequence> make_split(const DatasetSpec& spec, const std::vector<std::vector<double>>& protos,
                                 std::size_t input_size, std::uint64_t split, std::size_t count)
{
    std::vector<Sequence> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(spec.seed, split, i));
        Sequence& s = out[i];
        s.features = input_size;
        const std::size_t v_count = spec.windows;
        if (spec.task == "patterns") {
            s.labels.assign(v_count, static_cast<std::uint32_t>(i % spec.classes));
        } else {
            // change points c1 < c2 inside (0, V): every phase lasts at least one window
            const std::size_t c1 = 1 + rng.below(v_count - 2);
            const std::size_t c2 = c1 + 1 + rng.below(v_count - 1 - c1);
            for (std::size_t v = 0; v < v_count; ++v) s.labels.push_back(v < c1 ? 0 : v < c2 ? 1 : 2);
        }
        s.values.reserve(v_count * input_size);
        for (std::size_t v = 0; v < v_count; ++v) jitter_into(s.values, protos[s.labels[v]], spec.noise, rng);
    }
    return out;
}

void write_split(io::Writer& w, const std::vector<Sequence>& split)
{
    w.put<std::uint64_t>(split.size());
    for (const auto& s : split) {
        w.put<std::uint64_t>(s.features);
        w.array(std::span<const std::uint32_t>(s.labels));
        w.array(std::span<const double>(s.values));
    }
}

std::vector<Sequence> read_split(io::Reader& r)
{
    const auto n = r.get<std::uint64_t>();
    if (n > (1ull << 32)) throw FormatError("dataset: implausible sequence count");
    std::vector<Sequence> out(n);
    for (auto& s : out) {
        s.features = r.get<std::uint64_t>();
        s.labels = r.array<std::uint32_t>();
        s.values = r.array<double>();
        if (s.values.size() != s.labels.size() * s.features) throw FormatError("dataset: sequence size mismatch");
    }
    return out;
}

std::vector<std::vector<double>> standardized(std::vector<std::vector<double>> x, const std::vector<double>& mean,
                                              const std::vector<double>& scale)
{
    for (auto& row : x) {
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) * scale[j];
    }
    return x;
}

BaselineReport logistic_baseline(std::span<const SequenceActivity> train, std::span<const SequenceActivity> test,
                                 std::size_t classes)
{
    std::vector<std::vector<double>> xtr, xte;
    std::vector<std::size_t> ytr, yte;
    mean_rate_features(train, xtr, ytr);
    mean_rate_features(test, xte, yte);
    const std::size_t f = xtr.front().size();

    // z-score with training statistics; constant features are left at zero
    std::vector<double> mean(f, 0.0), scale(f, 0.0);
    for (const auto& row : xtr)
        for (std::size_t j = 0; j < f; ++j) mean[j] += row[j];
    for (auto& m : mean) m /= static_cast<double>(xtr.size());
    for (const auto& row : xtr)
        for (std::size_t j = 0; j < f; ++j) scale[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
    for (auto& s : scale) {
        const double sd = std::sqrt(s / static_cast<double>(xtr.size()));
        s = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    const auto ztr = standardized(std::move(xtr), mean, scale);
    const auto zte = standardized(std::move(xte), mean, scale);

    LogisticBaseline model(f, classes);
    model.fit(ztr, ytr, LogisticConfig{});
    return {model.accuracy(ztr, ytr), model.accuracy(zte, yte)};
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec, std::size_t input_size)
{
    spec.validate();
    if (input_size == 0) throw ValidationError("input size must be positive");
    Dataset d;
    d.task = spec.task;
    d.input_size = input_size;
    d.classes = spec.classes;
    const auto protos = prototypes(spec, spec.classes, input_size);
    d.train = make_split(spec, protos, input_size, 1, spec.train_sequences);
    d.test = make_split(spec, protos, input_size, 2, spec.test_sequences);
    return d;
}

void write_dataset(std::ostream& os, const Dataset& data)
{
    io::Writer w(os);
    w.magic(kMagic);
    w.put<std::uint32_t>(kVersion);
    w.string(data.task);
    w.put<std::uint64_t>(data.input_size);
    w.put<std::uint64_t>(data.classes);
    write_split(w, data.train);
    write_split(w, data.test);
    w.check();
}

Dataset read_dataset(std::istream& is)
{
    io::Reader r(is);
    r.expect_magic(kMagic);
    if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
        throw FormatError("dataset: unsupported version " + std::to_string(v));
    }
    Dataset d;
    d.task = r.string();
    d.input_size = r.get<std::uint64_t>();
    d.classes = r.get<std::uint64_t>();
    d.train = read_split(r);
    d.test = read_split(r);
    for (const auto* split : {&d.train, &d.test}) {
        for (const auto& s : *split) {
            if (s.features != d.input_size) throw FormatError("dataset: feature count mismatch");
            for (auto l : s.labels) {
                if (l >= d.classes) throw FormatError("dataset: label out of range");
            }
        }
    }
    return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot write " + path.string());
    write_dataset(os, data);
}

Dataset load_dataset(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot read " + path.string());
    return read_dataset(is);
}

std::uint64_t encoding_seed(const ExperimentConfig& cfg, Split split)
{
    return derive_seed(cfg.encoder_seed, static_cast<std::uint64_t>(split));
}

std::vector<SequenceActivity> simulate(const ReservoirTopology& topo, const ExperimentConfig& cfg,
                                       std::span<const Sequence> sequences, std::uint64_t seed)
{
    // non-owning: `topo` outlives the liquid
    std::shared_ptr<const ReservoirTopology> view(std::shared_ptr<void>{}, &topo);
    LiquidState liquid(view, cfg.neuron);

    EncoderConfig enc;
    enc.window = cfg.encoder_window;
    if (cfg.rate_gain != 1.0) {
        const double gain = cfg.rate_gain;
        enc.rate_scale = [gain](double f) { return std::min(1.0, gain * f); };
    }

    std::vector<SequenceActivity> out(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const auto& s = sequences[i];
        if (s.features != topo.input_size()) {
            throw ValidationError("sequence has " + std::to_string(s.features) + " features, the liquid expects " +
                                  std::to_string(topo.input_size()));
        }
        liquid.reset();
        Rng rng(derive_seed(seed, i));
        for (std::size_t v = 0; v < s.windows(); ++v) {
            out[i].windows.push_back(liquid.run_sequence(encode(s.window(v), enc, rng)));
        }
        out[i].labels = s.labels;
    }
    return out;
}

std::vector<std::vector<LabeledCube>> to_cubes(std::span<const SequenceActivity> activity, const GridDims& dims,
                                               std::size_t w)
{
    std::vector<std::vector<LabeledCube>> out(activity.size());
    for (std::size_t i = 0; i < activity.size(); ++i) {
        for (std::size_t v = 0; v < activity[i].windows.size(); ++v) {
            out[i].push_back({windowed_cube(activity[i].windows[v], dims, w), activity[i].labels[v]});
        }
    }
    return out;
}

std::vector<LabeledCube> flatten(const std::vector<std::vector<LabeledCube>>& grouped)
{
    std::vector<LabeledCube> out;
    for (const auto& g : grouped) out.insert(out.end(), g.begin(), g.end());
    return out;
}

void mean_rate_features(std::span<const SequenceActivity> activity, std::vector<std::vector<double>>& x,
                        std::vector<std::size_t>& y)
{
    x.clear();
    y.clear();
    for (const auto& a : activity) {
        for (std::size_t v = 0; v < a.windows.size(); ++v) {
            const auto& r = a.windows[v];
            std::vector<double> row(r.neurons(), 0.0);
            for (std::size_t t = 0; t < r.steps(); ++t)
                for (std::size_t n = 0; n < r.neurons(); ++n) row[n] += r.at(n, t);
            for (auto& e : row) e /= static_cast<double>(r.steps());
            x.push_back(std::move(row));
            y.push_back(a.labels[v]);
        }
    }
}

EvalReport evaluate(const ReadoutModel& model, const std::vector<std::vector<LabeledCube>>& grouped, bool mask)
{
    const std::size_t k = model.config().classes;
    const bool masked = mask && k == kSemanticClasses;
    EvalReport rep;
    rep.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t hits_plain = 0, hits_masked = 0;
    for (const auto& seq : grouped) {
        MaskState state;
        std::vector<std::size_t> reported;
        for (const auto& s : seq) {
            const auto probs = model.forward(s.cube);
            const auto plain = argmax(probs);
            hits_plain += plain == s.label ? 1 : 0;
            std::size_t pred = plain;
            if (masked) {
                auto r = plsm::apply(state, probs);
                state = r.state;
                pred = r.label;
                hits_masked += pred == s.label ? 1 : 0;
            }
            ++rep.confusion[s.label][pred];
            reported.push_back(pred);
            ++rep.samples;
        }
        rep.monotone_sequences += std::is_sorted(reported.begin(), reported.end()) ? 1 : 0;
        ++rep.sequences;
    }
    if (rep.samples == 0) throw ValidationError("nothing to evaluate");
    const double n = static_cast<double>(rep.samples);
    rep.accuracy_unmasked = static_cast<double>(hits_plain) / n;
    if (masked) rep.accuracy_masked = static_cast<double>(hits_masked) / n;
    rep.accuracy = masked ? rep.accuracy_masked : rep.accuracy_unmasked;
    return rep;
}

EvalReport evaluate_sequences(const ReservoirTopology& topo, const ExperimentConfig& cfg, const ReadoutModel& model,
                              std::span<const Sequence> sequences, Split split, bool mask)
{
    if (model.config().in_channels != cfg.channels() || model.config().dims != cfg.readout.dims) {
        throw ValidationError("model expects " + std::to_string(model.config().in_channels) +
                              " channels; the configuration produces " + std::to_string(cfg.channels()));
    }
    const auto activity = simulate(topo, cfg, sequences, encoding_seed(cfg, split));
    return evaluate(model, to_cubes(activity, cfg.readout.dims, cfg.readout_window), mask);
}

RunReport run_on_activity(std::span<const SequenceActivity> train, std::span<const SequenceActivity> test,
                          const ExperimentConfig& cfg, ReadoutModel& model)
{
    if (train.empty() || test.empty()) throw ValidationError("both splits must be nonempty");
    RunReport rep;
    std::size_t steps = 0;
    for (const auto& a : train) {
        for (const auto& r : a.windows) {
            rep.liquid_spikes_train += r.spike_count();
            steps += r.steps() * r.neurons();
        }
    }
    rep.liquid_rate = static_cast<double>(rep.liquid_spikes_train) / static_cast<double>(steps);

    const auto train_cubes = to_cubes(train, cfg.readout.dims, cfg.readout_window);
    const auto test_cubes = to_cubes(test, cfg.readout.dims, cfg.readout_window);
    const auto flat_train = flatten(train_cubes);

    model = ReadoutModel(cfg.readout, derive_seed(cfg.training.seed, 0));
    model.fit_input_normalization(flat_train);
    rep.training = plsm::train(model, flat_train, cfg.training);
    rep.train_accuracy = accuracy(model, flat_train);
    rep.test = evaluate(model, test_cubes, cfg.mask);
    rep.baseline = logistic_baseline(train, test, cfg.readout.classes);
    return rep;
}

RunReport run_experiment(const ReservoirTopology& topo, const Dataset& data, const ExperimentConfig& cfg,
                         ReadoutModel& model)
{
    if (data.classes != cfg.readout.classes) throw ValidationError("dataset and readout disagree on class count");
    const auto train = simulate(topo, cfg, data.train, encoding_seed(cfg, Split::train));
    const auto test = simulate(topo, cfg, data.test, encoding_seed(cfg, Split::test));
    return run_on_activity(train, test, cfg, model);
}

std::vector<SweepPoint> run_sweep(const ReservoirTopology& topo, const Dataset& data, const ExperimentConfig& cfg,
                                  std::span<const std::size_t> channels, std::span<const std::size_t> out_channels)
{
    // validate every point before the expensive part
    std::vector<ExperimentConfig> points;
    for (auto c : channels) {
        for (auto co : out_channels) {
            auto p = cfg;
            if (c == 0 || cfg.encoder_window % c != 0) {
                throw ConfigError("T/w = " + std::to_string(c) + " does not divide encoder.window = " +
                                  std::to_string(cfg.encoder_window));
            }
            p.readout_window = cfg.encoder_window / c;
            p.readout.out_channels = co;
            p.finalize();
            points.push_back(std::move(p));
        }
    }
    const auto train = simulate(topo, cfg, data.train, encoding_seed(cfg, Split::train));
    const auto test = simulate(topo, cfg, data.test, encoding_seed(cfg, Split::test));
    std::vector<SweepPoint> out;
    for (const auto& p : points) {
        ReadoutModel model;
        const auto rep = run_on_activity(train, test, p, model);
        out.push_back({p.channels(), p.readout.out_channels, rep.test.accuracy, rep.test.accuracy_unmasked});
    }
    return out;
}

namespace {

nlohmann::ordered_json eval_json(const EvalReport& r)
{
    nlohmann::ordered_json j;
    j["samples"] = r.samples;
    j["sequences"] = r.sequences;
    j["accuracy"] = r.accuracy;
    j["accuracy_unmasked"] = r.accuracy_unmasked;
    if (r.accuracy_masked >= 0.0) j["accuracy_masked"] = r.accuracy_masked;
    j["monotone_sequences"] = r.monotone_sequences;
    j["confusion"] = r.confusion;
    return j;
}

}  // namespace

std::string to_json(const EvalReport& report)
{
    return eval_json(report).dump(2) + "\n";
}

std::string to_json(const RunReport& r)
{
    nlohmann::ordered_json j;
    j["liquid"] = {{"train_spikes", r.liquid_spikes_train}, {"mean_rate", r.liquid_rate}};
    j["train"] = {{"accuracy", r.train_accuracy},
                  {"final_loss", r.training.loss_curve.empty() ? 0.0 : r.training.loss_curve.back()},
                  {"loss_curve", r.training.loss_curve}};
    j["test"] = eval_json(r.test);
    j["baseline"] = {{"model", "mean-rate logistic regression"},
                     {"train_accuracy", r.baseline.train_accuracy},
                     {"test_accuracy", r.baseline.test_accuracy}};
    return j.dump(2) + "\n";
}

std::string to_json(std::span<const SweepPoint> sweep)
{
    auto j = nlohmann::ordered_json::array();
    for (const auto& p : sweep) {
        j.push_back({{"channels", p.channels},
                     {"out_channels", p.out_channels},
                     {"test_accuracy", p.test_accuracy},
                     {"test_accuracy_unmasked", p.test_accuracy_unmasked}});
    }
    return j.dump(2) + "\n";
}

}  // namespace plsm
