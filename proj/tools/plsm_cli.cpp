// plsm: build liquids, generate datasets, train/evaluate readouts, benchmark kernels.

#include "plsm/bench.hpp"
#include "plsm/config.hpp"
#include "plsm/errors.hpp"
#include "plsm/experiment.hpp"
#include "plsm/readout.hpp"
#include "plsm/reservoir.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace plsm;

namespace {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfig = 2, kValidation = 3, kFormat = 4, kRuntime = 5 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("-c,--config", c.config, "experiment configuration (YAML); defaults when omitted")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "base seed; re-derives every component seed");
    cmd->add_option("-o,--out", c.out, "run directory (overrides output_dir)");
}

ExperimentConfig resolve(const Common& c)
{
    auto cfg = c.config.empty() ? default_config() : load_config(c.config);
    if (c.seed) reseed(cfg, *c.seed);
    if (!c.out.empty()) cfg.output_dir = c.out;
    cfg.finalize();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream os(path);
    os << text;
    if (!os) throw FormatError("cannot write " + path.string());
}

// Every run directory holds the resolved config and a manifest of what was written.
class RunDir {
public:
    RunDir(const ExperimentConfig& cfg, std::string command) : dir_(cfg.output_dir), command_(std::move(command))
    {
        fs::create_directories(dir_);
        write_text(dir_ / "config.yaml", to_yaml(cfg));
        files_.push_back("config.yaml");
        seed_ = cfg.seed;
    }

    fs::path file(const std::string& name)
    {
        files_.push_back(name);
        return dir_ / name;
    }

    void finish(const nlohmann::ordered_json& extra = {}) const
    {
        nlohmann::ordered_json m;
        m["command"] = command_;
        m["seed"] = seed_;
        m["files"] = files_;
        for (const auto& [k, v] : extra.items()) m[k] = v;
        write_text(dir_ / "manifest.json", m.dump(2) + "\n");
        std::cout << "run directory: " << dir_.string() << "\n";
    }

private:
    fs::path dir_;
    std::string command_;
    std::uint64_t seed_ = 0;
    std::vector<std::string> files_;
};

void print_stats(const ReservoirTopology& topo)
{
    const auto s = summarize(topo);
    std::cout << "neurons: " << s.neurons << " (excitatory " << s.excitatory << ", primary " << s.primary << ")\n";
    std::size_t total = 0;
    for (auto t : kPairTypes) {
        const auto n = s.connections_by_type[static_cast<std::size_t>(t)];
        total += n;
        std::cout << "connections " << to_string(t) << ": " << n << "\n";
    }
    std::cout << "connections total: " << total << "\n";
    std::cout << "input connections: " << s.input_connections << "\n";
    std::cout << "max delay: " << topo.t_max << "\n";
    std::cout << "delay histogram:";
    for (const auto& [d, n] : s.delay_histogram) std::cout << ' ' << d << ':' << n;
    std::cout << "\n";
}

ReservoirTopology topology_for(const ExperimentConfig& cfg, const std::string& path)
{
    if (path.empty()) return build(cfg.reservoir);
    auto topo = load_topology(path);
    if (topo.input_size() != cfg.reservoir.input_size || topo.config.dims != cfg.reservoir.dims) {
        throw ValidationError("topology " + path + " does not match the configured grid/input size");
    }
    return topo;
}

Dataset dataset_for(const ExperimentConfig& cfg, const std::string& path)
{
    if (path.empty()) return generate_dataset(cfg.dataset, cfg.reservoir.input_size);
    auto data = load_dataset(path);
    if (data.input_size != cfg.reservoir.input_size) {
        throw ValidationError("dataset " + path + " has " + std::to_string(data.input_size) +
                              " features, the liquid expects " + std::to_string(cfg.reservoir.input_size));
    }
    if (data.classes != cfg.dataset.classes) throw ValidationError("dataset class count differs from the config");
    return data;
}

bool parse_mask(const std::string& v)
{
    if (v == "on") return true;
    if (v == "off") return false;
    throw ValidationError("--mask expects on or off");
}

void apply_readout_flags(ExperimentConfig& cfg, std::optional<std::size_t> tw, std::optional<std::size_t> c_out,
                         std::optional<std::size_t> epochs, const std::string& mask)
{
    if (tw) {
        if (*tw == 0 || cfg.encoder_window % *tw != 0) {
            throw ConfigError("--tw " + std::to_string(*tw) + " does not divide encoder.window " +
                              std::to_string(cfg.encoder_window));
        }
        cfg.readout_window = cfg.encoder_window / *tw;
    }
    if (c_out) cfg.readout.out_channels = *c_out;
    if (epochs) cfg.training.epochs = *epochs;
    if (!mask.empty()) cfg.mask = parse_mask(mask);
    cfg.finalize();
}

int run(int argc, char** argv)
{
    CLI::App app{"Parallelized liquid state machine toolkit"};
    app.require_subcommand(1);

    Common build_opts;
    auto* build_cmd = app.add_subcommand("build", "build a liquid topology and print its statistics");
    add_common(build_cmd, build_opts);

    Common data_opts;
    std::string task;
    auto* data_cmd = app.add_subcommand("gen-data", "generate a synthetic sequence dataset");
    add_common(data_cmd, data_opts);
    data_cmd->add_option("--task", task, "patterns or staged (overrides dataset.task)");

    Common train_opts;
    std::string train_topo, train_data, train_mask;
    std::optional<std::size_t> tw, c_out, epochs;
    auto* train_cmd = app.add_subcommand("train", "train the readout and report train/test metrics");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--topology", train_topo, "topology file (built from the config when omitted)");
    train_cmd->add_option("--data", train_data, "dataset file (generated from the config when omitted)");
    train_cmd->add_option("--mask", train_mask, "semantic mask during evaluation: on|off");
    train_cmd->add_option("--tw", tw, "T/w: time windows stacked as readout channels");
    train_cmd->add_option("--c-out", c_out, "convolution output channels");
    train_cmd->add_option("--epochs", epochs, "training epochs");

    Common eval_opts;
    std::string eval_topo, eval_data, eval_model, eval_mask, split = "test";
    std::optional<std::size_t> eval_tw;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained readout");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--model", eval_model, "readout checkpoint")->required();
    eval_cmd->add_option("--topology", eval_topo, "topology file")->required();
    eval_cmd->add_option("--data", eval_data, "dataset file")->required();
    eval_cmd->add_option("--mask", eval_mask, "semantic mask: on|off");
    eval_cmd->add_option("--tw", eval_tw, "T/w used when the model was trained");
    eval_cmd->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

    Common sweep_opts;
    std::vector<std::size_t> sweep_tw{1, 10}, sweep_cout{64};
    auto* sweep_cmd = app.add_subcommand("sweep", "accuracy over T/w and C_out (one liquid run shared)");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--tw", sweep_tw, "T/w values")->delimiter(',');
    sweep_cmd->add_option("--c-out", sweep_cout, "C_out values")->delimiter(',');

    Common bench_opts;
    BenchSpec spec;
    auto* bench_cmd = app.add_subcommand("bench", "time scalar vs vectorized LIF layers, write CSV");
    add_common(bench_cmd, bench_opts);
    bench_cmd->add_option("--neurons", spec.neuron_counts, "layer sizes")->delimiter(',');
    bench_cmd->add_option("--batches", spec.batch_sizes, "batch sizes")->delimiter(',');
    bench_cmd->add_option("--steps", spec.train_length, "time steps per run");
    bench_cmd->add_option("--reps", spec.repetitions, "timed repetitions (>= 3)");
    bench_cmd->add_option("--warmup", spec.warmup, "untimed warm-up runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    if (build_cmd->parsed()) {
        const auto cfg = resolve(build_opts);
        const auto topo = build(cfg.reservoir);
        RunDir run(cfg, "build");
        save_topology(run.file("topology.plsm"), topo);
        print_stats(topo);
        run.finish();
    } else if (data_cmd->parsed()) {
        auto cfg = resolve(data_opts);
        if (!task.empty()) {
            cfg.dataset.task = task;
            cfg.finalize();
        }
        const auto data = generate_dataset(cfg.dataset, cfg.reservoir.input_size);
        RunDir run(cfg, "gen-data");
        save_dataset(run.file("dataset.plsm"), data);
        std::cout << "task " << data.task << ": " << data.train.size() << " train / " << data.test.size()
                  << " test sequences, " << cfg.dataset.windows << " windows each\n";
        run.finish();
    } else if (train_cmd->parsed()) {
        auto cfg = resolve(train_opts);
        apply_readout_flags(cfg, tw, c_out, epochs, train_mask);
        const auto topo = topology_for(cfg, train_topo);
        const auto data = dataset_for(cfg, train_data);
        RunDir run(cfg, "train");
        ReadoutModel model;
        const auto report = run_experiment(topo, data, cfg, model);
        if (train_topo.empty()) save_topology(run.file("topology.plsm"), topo);
        if (train_data.empty()) save_dataset(run.file("dataset.plsm"), data);
        save_model(run.file("model.plsm"), model);
        {
            std::ofstream os(run.file("loss_curve.csv"));
            write_loss_curve(os, report.training);
        }
        write_text(run.file("report.json"), to_json(report));
        std::cout << "train accuracy " << report.train_accuracy << ", test accuracy " << report.test.accuracy
                  << " (unmasked " << report.test.accuracy_unmasked << "), baseline test accuracy "
                  << report.baseline.test_accuracy << "\n";
        run.finish();
    } else if (eval_cmd->parsed()) {
        auto cfg = resolve(eval_opts);
        apply_readout_flags(cfg, eval_tw, std::nullopt, std::nullopt, eval_mask);
        const auto topo = topology_for(cfg, eval_topo);
        const auto data = dataset_for(cfg, eval_data);
        const auto model = load_model(eval_model);
        const bool on_test = split == "test";
        const auto report = evaluate_sequences(topo, cfg, model, on_test ? data.test : data.train,
                                               on_test ? Split::test : Split::train, cfg.mask);
        RunDir run(cfg, "eval");
        write_text(run.file("eval_report.json"), to_json(report));
        std::cout << split << " accuracy " << report.accuracy << " (unmasked " << report.accuracy_unmasked
                  << "), monotone sequences " << report.monotone_sequences << "/" << report.sequences << "\n";
        run.finish({{"mask", cfg.mask}, {"split", split}});
    } else if (sweep_cmd->parsed()) {
        const auto cfg = resolve(sweep_opts);
        const auto topo = build(cfg.reservoir);
        const auto data = generate_dataset(cfg.dataset, cfg.reservoir.input_size);
        const auto points = run_sweep(topo, data, cfg, sweep_tw, sweep_cout);
        RunDir run(cfg, "sweep");
        write_text(run.file("sweep.json"), to_json(points));
        for (const auto& p : points) {
            std::cout << "T/w " << p.channels << ", C_out " << p.out_channels << ": test accuracy " << p.test_accuracy
                      << "\n";
        }
        run.finish();
    } else if (bench_cmd->parsed()) {
        const auto cfg = resolve(bench_opts);
        spec.seed = cfg.seed;
        spec.params = cfg.neuron;
        const auto result = run_bench(spec);
        RunDir run(cfg, "bench");
        {
            std::ofstream os(run.file("bench.csv"));
            write_bench_csv(os, result);
        }
        write_bench_csv(std::cout, result);
        run.finish();
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidation;
    } catch (const FormatError& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return kFormat;
    } catch (const RuntimeFailure& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUnexpected;
    }
}
