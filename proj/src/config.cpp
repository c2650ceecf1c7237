#include "plsm/config.hpp"

#include "plsm/errors.hpp"
#include "plsm/random.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace plsm {

namespace {

enum SeedStream : std::uint64_t { kReservoirSeed = 1, kEncoderSeed = 2, kReadoutSeed = 3, kDatasetSeed = 4 };

int line_of(const YAML::Node& n)
{
    return n.Mark().is_null() ? 0 : n.Mark().line + 1;
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key)
{
    if (!n.IsScalar()) throw ConfigError("'" + key + "' must be a scalar", line_of(n));
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("'" + key + "' has an invalid value '" + n.Scalar() + "'", line_of(n));
    }
}

std::size_t count(const YAML::Node& n, const std::string& key)
{
    const auto v = scalar<long long>(n, key);
    if (v < 0) throw ConfigError("'" + key + "' must be non-negative", line_of(n));
    return static_cast<std::size_t>(v);
}

// Walks a mapping, dispatching known keys and rejecting the rest.
class Section {
public:
    Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name))
    {
        if (!node_.IsMap()) throw ConfigError("'" + name_ + "' must be a mapping", line_of(node_));
    }

    template <class F>
    Section& on(const std::string& key, F&& f)
    {
        known_.insert(key);
        if (const auto v = node_[key]) f(v, qualified(key));
        return *this;
    }

    void done() const
    {
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!known_.count(key)) throw ConfigError("unknown key '" + qualified(key) + "'", line_of(kv.first));
        }
    }

private:
    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const YAML::Node& node_;
    std::string name_;
    std::set<std::string> known_;
};

template <class T>
auto set(T& field)
{
    return [&field](const YAML::Node& n, const std::string& key) { field = scalar<T>(n, key); };
}

auto set_count(std::size_t& field)
{
    return [&field](const YAML::Node& n, const std::string& key) { field = count(n, key); };
}

auto set_pair_table(std::array<double, 4>& table)
{
    return [&table](const YAML::Node& n, const std::string& key) {
        Section s(n, key);
        for (auto t : kPairTypes) s.on(std::string(to_string(t)), set(table[static_cast<std::size_t>(t)]));
        s.done();
    };
}

// Wraps a component validate() so its message is attributed to the section's line.
template <class F>
void check(const YAML::Node& at, F&& f)
{
    try {
        f();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what(), at ? line_of(at) : 0);
    }
}

}  // namespace

void DatasetSpec::validate() const
{
    if (task != "patterns" && task != "staged") throw ValidationError("unknown task '" + task + "'");
    if (train_sequences == 0 || test_sequences == 0) throw ValidationError("dataset needs train and test sequences");
    if (classes < 2) throw ValidationError("dataset needs at least two classes");
    if (task == "staged" && classes != 3) throw ValidationError("the staged task has exactly 3 classes");
    if (task == "staged" && windows < 3) throw ValidationError("staged sequences need at least 3 windows");
    if (windows == 0) throw ValidationError("sequences need at least one window");
    if (!(active_fraction > 0.0 && active_fraction <= 1.0)) throw ValidationError("active_fraction must be in (0, 1]");
    if (!(rate_low >= 0.0 && rate_low <= 1.0 && rate_high >= 0.0 && rate_high <= 1.0))
        throw ValidationError("rates must be in [0, 1]");
    if (!(noise >= 0.0)) throw ValidationError("noise must be non-negative");
}

void ExperimentConfig::finalize()
{
    if (encoder_window == 0) throw ConfigError("encoder.window must be positive");
    if (readout_window == 0 || encoder_window % readout_window != 0) {
        throw ConfigError("readout.window (" + std::to_string(readout_window) + ") must divide encoder.window (" +
                          std::to_string(encoder_window) + ")");
    }
    if (!(rate_gain >= 0.0)) throw ConfigError("encoder.rate_gain must be non-negative");
    readout.in_channels = channels();
    readout.dims = {static_cast<std::size_t>(reservoir.dims[0]), static_cast<std::size_t>(reservoir.dims[1]),
                    static_cast<std::size_t>(reservoir.dims[2])};
    readout.classes = dataset.classes;
    if (mask && dataset.classes != 3) throw ConfigError("the semantic mask needs exactly 3 classes");
    try {
        reservoir.validate();
        neuron.validate();
        readout.validate();
        dataset.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig default_config(std::uint64_t seed)
{
    ExperimentConfig cfg;
    reseed(cfg, seed);
    cfg.finalize();
    return cfg;
}

void reseed(ExperimentConfig& cfg, std::uint64_t seed)
{
    cfg.seed = seed;
    cfg.reservoir.seed = derive_seed(seed, kReservoirSeed);
    cfg.encoder_seed = derive_seed(seed, kEncoderSeed);
    cfg.training.seed = derive_seed(seed, kReadoutSeed);
    cfg.dataset.seed = derive_seed(seed, kDatasetSeed);
}

ExperimentConfig parse_config(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(e.msg, e.mark.line + 1);
    }
    ExperimentConfig cfg;
    if (root.IsNull()) {
        reseed(cfg, 0);
        cfg.finalize();
        return cfg;
    }

    if (!root.IsMap()) throw ConfigError("configuration must be a mapping", line_of(root));
    if (!root["version"]) throw ConfigError("missing 'version'", 1);
    const auto version = scalar<int>(root["version"], "version");
    if (version != kConfigVersion) {
        throw ConfigError("unsupported config version " + std::to_string(version), line_of(root["version"]));
    }
    reseed(cfg, root["seed"] ? scalar<std::uint64_t>(root["seed"], "seed") : 0);

    Section top(root, "");
    top.on("version", [](const YAML::Node&, const std::string&) {})
        .on("seed", [](const YAML::Node&, const std::string&) {})
        .on("reservoir",
            [&](const YAML::Node& n, const std::string& name) {
                auto& r = cfg.reservoir;
                Section(n, name)
                    .on("dims",
                        [&](const YAML::Node& d, const std::string& key) {
                            if (!d.IsSequence() || d.size() != 3)
                                throw ConfigError("'" + key + "' must be a list of three integers", line_of(d));
                            for (std::size_t i = 0; i < 3; ++i) r.dims[i] = scalar<std::int32_t>(d[i], key);
                        })
                    .on("c_table", set_pair_table(r.c_table))
                    .on("w_table", set_pair_table(r.w_table))
                    .on("lambda", set(r.lambda))
                    .on("w_scale", set(r.w_scale))
                    .on("input_size", set_count(r.input_size))
                    .on("ei_ratio", set(r.ei_ratio))
                    .on("input_density", set(r.input_density))
                    .on("primary_ratio", set(r.primary_ratio))
                    .on("seed", set(r.seed))
                    .done();
                check(n, [&] { r.validate(); });
            })
        .on("neuron",
            [&](const YAML::Node& n, const std::string& name) {
                auto& p = cfg.neuron;
                Section(n, name)
                    .on("v_th", set(p.v_th))
                    .on("v_rest", set(p.v_rest))
                    .on("v_spike", set(p.v_spike))
                    .on("tau_m", set(p.tau_m))
                    .on("r_m", set(p.r_m))
                    .on("tau_ref",
                        [&](const YAML::Node& v, const std::string& key) {
                            // whole steps; "1.0" is accepted as 1
                            const auto x = scalar<double>(v, key);
                            if (x != std::floor(x) || std::abs(x) > 1e9)
                                throw ConfigError("'" + key + "' must be a whole number of steps", line_of(v));
                            p.tau_ref = static_cast<std::int32_t>(x);
                        })
                    .on("dt", set(p.dt))
                    .done();
                check(n, [&] { p.validate(); });
            })
        .on("encoder",
            [&](const YAML::Node& n, const std::string& name) {
                Section(n, name)
                    .on("window", set_count(cfg.encoder_window))
                    .on("rate_gain", set(cfg.rate_gain))
                    .on("seed", set(cfg.encoder_seed))
                    .done();
            })
        .on("readout",
            [&](const YAML::Node& n, const std::string& name) {
                auto& r = cfg.readout;
                auto& t = cfg.training;
                Section(n, name)
                    .on("window", set_count(cfg.readout_window))
                    .on("out_channels", set_count(r.out_channels))
                    .on("kernel", set_count(r.kernel))
                    .on("pool", set_count(r.pool))
                    .on("dropout", set(r.dropout))
                    .on("epochs", set_count(t.epochs))
                    .on("batch_size", set_count(t.batch_size))
                    .on("learning_rate", set(t.learning_rate))
                    .on("decay_every", set_count(t.decay_every))
                    .on("decay_factor", set(t.decay_factor))
                    .on("seed", set(t.seed))
                    .done();
                if (t.batch_size == 0) throw ConfigError("'readout.batch_size' must be positive", line_of(n));
                if (!(t.learning_rate >= 0.0))
                    throw ConfigError("'readout.learning_rate' must be non-negative", line_of(n));
            })
        .on("mask", set(cfg.mask))
        .on("dataset",
            [&](const YAML::Node& n, const std::string& name) {
                auto& d = cfg.dataset;
                Section(n, name)
                    .on("task", set(d.task))
                    .on("train", set_count(d.train_sequences))
                    .on("test", set_count(d.test_sequences))
                    .on("classes", set_count(d.classes))
                    .on("windows", set_count(d.windows))
                    .on("active_fraction", set(d.active_fraction))
                    .on("rate_low", set(d.rate_low))
                    .on("rate_high", set(d.rate_high))
                    .on("noise", set(d.noise))
                    .on("seed", set(d.seed))
                    .done();
                check(n, [&] { d.validate(); });
            })
        .on("output_dir",
            [&](const YAML::Node& n, const std::string& key) { cfg.output_dir = scalar<std::string>(n, key); })
        .done();

    cfg.finalize();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_yaml(const ExperimentConfig& cfg)
{
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    auto table = [&](const std::array<double, 4>& t) {
        out << YAML::Flow << YAML::BeginMap;
        for (auto p : kPairTypes) out << YAML::Key << std::string(to_string(p)) << YAML::Value << t[static_cast<std::size_t>(p)];
        out << YAML::EndMap;
    };
    const auto& r = cfg.reservoir;
    out << YAML::BeginMap;
    out << YAML::Key << "version" << YAML::Value << kConfigVersion;
    out << YAML::Key << "seed" << YAML::Value << cfg.seed;

    out << YAML::Key << "reservoir" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dims" << YAML::Value << YAML::Flow << YAML::BeginSeq << r.dims[0] << r.dims[1] << r.dims[2]
        << YAML::EndSeq;
    out << YAML::Key << "c_table" << YAML::Value;
    table(r.c_table);
    out << YAML::Key << "w_table" << YAML::Value;
    table(r.w_table);
    out << YAML::Key << "lambda" << YAML::Value << r.lambda;
    out << YAML::Key << "w_scale" << YAML::Value << r.w_scale;
    out << YAML::Key << "input_size" << YAML::Value << r.input_size;
    out << YAML::Key << "ei_ratio" << YAML::Value << r.ei_ratio;
    out << YAML::Key << "input_density" << YAML::Value << r.input_density;
    out << YAML::Key << "primary_ratio" << YAML::Value << r.primary_ratio;
    out << YAML::Key << "seed" << YAML::Value << r.seed;
    out << YAML::EndMap;

    const auto& p = cfg.neuron;
    out << YAML::Key << "neuron" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "v_th" << YAML::Value << p.v_th;
    out << YAML::Key << "v_rest" << YAML::Value << p.v_rest;
    out << YAML::Key << "v_spike" << YAML::Value << p.v_spike;
    out << YAML::Key << "tau_m" << YAML::Value << p.tau_m;
    out << YAML::Key << "r_m" << YAML::Value << p.r_m;
    out << YAML::Key << "tau_ref" << YAML::Value << p.tau_ref;
    out << YAML::Key << "dt" << YAML::Value << p.dt;
    out << YAML::EndMap;

    out << YAML::Key << "encoder" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "window" << YAML::Value << cfg.encoder_window;
    out << YAML::Key << "rate_gain" << YAML::Value << cfg.rate_gain;
    out << YAML::Key << "seed" << YAML::Value << cfg.encoder_seed;
    out << YAML::EndMap;

    const auto& ro = cfg.readout;
    const auto& t = cfg.training;
    out << YAML::Key << "readout" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "window" << YAML::Value << cfg.readout_window;
    out << YAML::Key << "out_channels" << YAML::Value << ro.out_channels;
    out << YAML::Key << "kernel" << YAML::Value << ro.kernel;
    out << YAML::Key << "pool" << YAML::Value << ro.pool;
    out << YAML::Key << "dropout" << YAML::Value << ro.dropout;
    out << YAML::Key << "epochs" << YAML::Value << t.epochs;
    out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
    out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
    out << YAML::Key << "decay_every" << YAML::Value << t.decay_every;
    out << YAML::Key << "decay_factor" << YAML::Value << t.decay_factor;
    out << YAML::Key << "seed" << YAML::Value << t.seed;
    out << YAML::EndMap;

    out << YAML::Key << "mask" << YAML::Value << cfg.mask;

    const auto& d = cfg.dataset;
    out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "task" << YAML::Value << d.task;
    out << YAML::Key << "train" << YAML::Value << d.train_sequences;
    out << YAML::Key << "test" << YAML::Value << d.test_sequences;
    out << YAML::Key << "classes" << YAML::Value << d.classes;
    out << YAML::Key << "windows" << YAML::Value << d.windows;
    out << YAML::Key << "active_fraction" << YAML::Value << d.active_fraction;
    out << YAML::Key << "rate_low" << YAML::Value << d.rate_low;
    out << YAML::Key << "rate_high" << YAML::Value << d.rate_high;
    out << YAML::Key << "noise" << YAML::Value << d.noise;
    out << YAML::Key << "seed" << YAML::Value << d.seed;
    out << YAML::EndMap;

    out << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir.string();
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace plsm
