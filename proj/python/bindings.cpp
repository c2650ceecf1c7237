// Python bindings. Arrays cross the boundary as NumPy arrays with time as the
// leading axis: rasters and currents are (T, N) or (T, N, B).

#include "plsm/bench.hpp"
#include "plsm/config.hpp"
#include "plsm/errors.hpp"
#include "plsm/experiment.hpp"
#include "plsm/lif.hpp"
#include "plsm/liquid.hpp"
#include "plsm/readout.hpp"
#include "plsm/reservoir.hpp"
#include "plsm/semantic_mask.hpp"
#include "plsm/spike_codec.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <memory>

namespace py = pybind11;
using namespace plsm;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

py::array_t<std::uint8_t> to_numpy(const SpikeTrain& s)
{
    std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(s.steps()), static_cast<py::ssize_t>(s.neurons())};
    if (s.batch() != 1) shape.push_back(static_cast<py::ssize_t>(s.batch()));
    py::array_t<std::uint8_t> out(shape);
    std::copy(s.raw().begin(), s.raw().end(), out.mutable_data());
    return out;
}

SpikeTrain spikes_from_numpy(const ByteArray& a)
{
    if (a.ndim() != 2 && a.ndim() != 3) throw ValidationError("spike array must have shape (T, N) or (T, N, B)");
    SpikeTrain s(a.shape(1), a.shape(0), a.ndim() == 3 ? a.shape(2) : 1);
    const auto* src = a.data();
    for (std::size_t i = 0; i < s.raw().size(); ++i) s.raw()[i] = src[i] ? 1 : 0;
    return s;
}

CurrentSequence currents_from_numpy(const DoubleArray& a)
{
    if (a.ndim() != 2 && a.ndim() != 3) throw ValidationError("current array must have shape (T, N) or (T, N, B)");
    CurrentSequence c(a.shape(1), a.shape(0), a.ndim() == 3 ? a.shape(2) : 1);
    std::copy(a.data(), a.data() + a.size(), c.raw().begin());
    return c;
}

py::array_t<double> dense(const std::vector<double>& values, std::size_t rows, std::size_t cols)
{
    py::array_t<double> out({rows, cols});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

FeatureCube cube_from_numpy(const DoubleArray& a)
{
    if (a.ndim() != 4) throw ValidationError("cube must have shape (channels, X, Y, Z)");
    FeatureCube c;
    c.channels = a.shape(0);
    c.dims = {static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(2)),
              static_cast<std::size_t>(a.shape(3))};
    c.values.assign(a.data(), a.data() + a.size());
    return c;
}

py::array_t<double> cube_to_numpy(const FeatureCube& c)
{
    py::array_t<double> out({c.channels, c.dims[0], c.dims[1], c.dims[2]});
    std::copy(c.values.begin(), c.values.end(), out.mutable_data());
    return out;
}

py::object json_loads(const std::string& text)
{
    return py::module_::import("json").attr("loads")(text);
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Parallelized liquid state machine core";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
    py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

    py::class_<LifParams>(m, "LifParams")
        .def(py::init<>())
        .def_readwrite("v_th", &LifParams::v_th)
        .def_readwrite("v_rest", &LifParams::v_rest)
        .def_readwrite("v_spike", &LifParams::v_spike)
        .def_readwrite("tau_m", &LifParams::tau_m)
        .def_readwrite("r_m", &LifParams::r_m)
        .def_readwrite("tau_ref", &LifParams::tau_ref)
        .def_readwrite("dt", &LifParams::dt)
        .def("validate", &LifParams::validate);

    m.def(
        "run_lif",
        [](const DoubleArray& currents, const LifParams& params, bool vectorized) {
            params.validate();
            const auto input = currents_from_numpy(currents);
            LayerState state(input.neurons(), input.batch(), params);
            return to_numpy(vectorized ? run_spike_train(state, params, input)
                                       : run_spike_train_scalar(state, params, input));
        },
        py::arg("currents"), py::arg("params") = LifParams{}, py::arg("vectorized") = true,
        "Simulates a LIF layer from rest; currents (T, N[, B]) -> spike raster of the same shape.");

    m.def(
        "encode",
        [](const DoubleArray& features, std::size_t window, std::uint64_t seed) {
            EncoderConfig cfg;
            cfg.window = window;
            cfg.seed = seed;
            std::span<const double> f(features.data(), static_cast<std::size_t>(features.size()));
            return to_numpy(encode(f, cfg));
        },
        py::arg("features"), py::arg("window") = 50, py::arg("seed") = 0,
        "Poisson rate coding; features in [0, 1] -> (window, D) spike raster.");

    py::class_<BuildConfig>(m, "BuildConfig")
        .def(py::init<>())
        .def_readwrite("dims", &BuildConfig::dims)
        .def_readwrite("c_table", &BuildConfig::c_table)
        .def_readwrite("lambda_", &BuildConfig::lambda)
        .def_readwrite("w_table", &BuildConfig::w_table)
        .def_readwrite("w_scale", &BuildConfig::w_scale)
        .def_readwrite("input_size", &BuildConfig::input_size)
        .def_readwrite("ei_ratio", &BuildConfig::ei_ratio)
        .def_readwrite("input_density", &BuildConfig::input_density)
        .def_readwrite("primary_ratio", &BuildConfig::primary_ratio)
        .def_readwrite("seed", &BuildConfig::seed)
        .def("validate", &BuildConfig::validate);

    m.def("connection_probability", [](const std::string& pair, double distance, const BuildConfig& cfg) {
        return connection_probability(parse_pair_type(pair), distance, cfg);
    });

    py::class_<ReservoirTopology, std::shared_ptr<ReservoirTopology>>(m, "Topology")
        .def_property_readonly("neurons", &ReservoirTopology::neurons)
        .def_property_readonly("input_size", &ReservoirTopology::input_size)
        .def_readonly("t_max", &ReservoirTopology::t_max)
        .def_readonly("config", &ReservoirTopology::config)
        .def_property_readonly("positions",
                               [](const ReservoirTopology& t) {
                                   py::array_t<std::int32_t> out({t.neurons(), std::size_t{3}});
                                   auto* dst = out.mutable_data();
                                   for (const auto& p : t.positions) dst = std::copy(p.begin(), p.end(), dst);
                                   return out;
                               })
        .def_property_readonly("is_excitatory",
                               [](const ReservoirTopology& t) {
                                   py::array_t<bool> out(t.neurons());
                                   std::copy(t.is_excitatory.begin(), t.is_excitatory.end(), out.mutable_data());
                                   return out;
                               })
        .def_property_readonly("is_primary",
                               [](const ReservoirTopology& t) {
                                   py::array_t<bool> out(t.neurons());
                                   std::copy(t.is_primary.begin(), t.is_primary.end(), out.mutable_data());
                                   return out;
                               })
        .def("w_l", [](const ReservoirTopology& t) { return dense(t.dense_w_l(), t.neurons(), t.neurons()); },
             "Dense recurrent weights, [target, source].")
        .def("delays",
             [](const ReservoirTopology& t) {
                 const auto d = t.dense_delays();
                 py::array_t<std::uint32_t> out({t.neurons(), t.neurons()});
                 std::copy(d.begin(), d.end(), out.mutable_data());
                 return out;
             })
        .def("w_li", [](const ReservoirTopology& t) { return dense(t.dense_w_li(), t.neurons(), t.input_size()); })
        .def("summary",
             [](const ReservoirTopology& t) {
                 const auto s = summarize(t);
                 py::dict d;
                 d["neurons"] = s.neurons;
                 d["excitatory"] = s.excitatory;
                 d["primary"] = s.primary;
                 py::dict by_type;
                 for (auto p : kPairTypes) by_type[py::str(std::string(to_string(p)))] = s.connections_by_type[static_cast<std::size_t>(p)];
                 d["connections"] = by_type;
                 d["delay_histogram"] = s.delay_histogram;
                 d["input_connections"] = s.input_connections;
                 return d;
             })
        .def("save", [](const ReservoirTopology& t, const std::filesystem::path& p) { save_topology(p, t); });

    m.def("build", [](const BuildConfig& cfg) { return std::make_shared<ReservoirTopology>(build(cfg)); });
    m.def("load_topology", [](const std::filesystem::path& p) { return std::make_shared<ReservoirTopology>(load_topology(p)); });

    py::class_<LiquidState>(m, "Liquid")
        .def(py::init([](std::shared_ptr<ReservoirTopology> topo, const LifParams& params, std::size_t batch) {
                 return std::make_unique<LiquidState>(std::move(topo), params, batch);
             }),
             py::arg("topology"), py::arg("params") = LifParams{}, py::arg("batch") = 1)
        .def("run", [](LiquidState& l, const ByteArray& inputs) { return to_numpy(l.run_sequence(spikes_from_numpy(inputs))); },
             "Input spikes (T, input_size[, B]) -> liquid raster (T, neurons[, B]); state carries over.")
        .def("reset", &LiquidState::reset)
        .def_property_readonly("steps", &LiquidState::steps);

    m.def(
        "windowed_cube",
        [](const ByteArray& raster, const GridDims& dims, std::size_t window) {
            return cube_to_numpy(windowed_cube(spikes_from_numpy(raster), dims, window));
        },
        py::arg("raster"), py::arg("dims"), py::arg("window"), "Raster (T, N) -> (T/w, X, Y, Z) window means.");

    py::class_<ReadoutConfig>(m, "ReadoutConfig")
        .def(py::init<>())
        .def_readwrite("in_channels", &ReadoutConfig::in_channels)
        .def_readwrite("dims", &ReadoutConfig::dims)
        .def_readwrite("out_channels", &ReadoutConfig::out_channels)
        .def_readwrite("kernel", &ReadoutConfig::kernel)
        .def_readwrite("pool", &ReadoutConfig::pool)
        .def_readwrite("dropout", &ReadoutConfig::dropout)
        .def_readwrite("classes", &ReadoutConfig::classes)
        .def_property_readonly("parameter_count", &ReadoutConfig::parameter_count);

    py::class_<ReadoutModel>(m, "ReadoutModel")
        .def(py::init<const ReadoutConfig&, std::uint64_t>(), py::arg("config"), py::arg("seed") = 0)
        .def_property_readonly("config", &ReadoutModel::config)
        .def_property(
            "parameters",
            [](const ReadoutModel& r) {
                const auto p = r.parameters();
                return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
            },
            [](ReadoutModel& r, const DoubleArray& a) {
                if (static_cast<std::size_t>(a.size()) != r.parameters().size())
                    throw ValidationError("parameter vector has the wrong length");
                std::copy(a.data(), a.data() + a.size(), r.parameters().begin());
            })
        .def("forward", [](const ReadoutModel& r, const DoubleArray& cube) { return r.forward(cube_from_numpy(cube)); })
        .def("train",
             [](ReadoutModel& r, const std::vector<DoubleArray>& cubes, const std::vector<std::size_t>& labels,
                std::size_t epochs, double lr, std::size_t batch_size, std::uint64_t seed, bool normalize) {
                 if (cubes.size() != labels.size()) throw ValidationError("cubes and labels differ in length");
                 std::vector<LabeledCube> data;
                 for (std::size_t i = 0; i < cubes.size(); ++i) data.push_back({cube_from_numpy(cubes[i]), labels[i]});
                 if (normalize) r.fit_input_normalization(data);
                 TrainConfig tc;
                 tc.epochs = epochs;
                 tc.learning_rate = lr;
                 tc.batch_size = batch_size;
                 tc.seed = seed;
                 return train(r, data, tc).loss_curve;
             },
             py::arg("cubes"), py::arg("labels"), py::arg("epochs") = 100, py::arg("learning_rate") = 0.01,
             py::arg("batch_size") = 16, py::arg("seed") = 0, py::arg("normalize") = true,
             "Mini-batch gradient descent; returns the per-epoch mean training loss.")
        .def("save", [](const ReadoutModel& r, const std::filesystem::path& p) { save_model(p, r); });
    m.def("load_model", &load_model);

    m.def("softmax", [](const std::vector<double>& z) { return softmax(z); });
    m.def("cross_entropy", [](const std::vector<double>& p, std::size_t label) { return loss(p, label); });

    m.def("mask_for", [](std::optional<std::size_t> last) {
        const auto mask = mask_for(last);
        return std::vector<int>(mask.begin(), mask.end());
    });
    m.def("decode_sequence", [](const std::vector<std::array<double, kSemanticClasses>>& probs) {
        return decode_sequence(probs);
    }, "Monotone label decoding of per-window class probabilities.");

    m.def(
        "run_bench",
        [](const std::vector<std::size_t>& neurons, const std::vector<std::size_t>& batches, std::size_t steps,
           std::size_t reps, std::uint64_t seed) {
            BenchSpec spec;
            spec.neuron_counts = neurons;
            spec.batch_sizes = batches;
            spec.train_length = steps;
            spec.repetitions = reps;
            spec.seed = seed;
            const auto result = run_bench(spec);
            py::list rows;
            for (const auto& r : result.rows) {
                py::dict d;
                d["impl"] = r.impl;
                d["L"] = r.neurons;
                d["B"] = r.batch;
                d["T"] = r.steps;
                d["median_ns"] = r.median_ns;
                d["iqr_ns"] = r.iqr_ns;
                d["reps"] = r.reps;
                rows.append(d);
            }
            return rows;
        },
        py::arg("neurons"), py::arg("batches") = std::vector<std::size_t>{1}, py::arg("steps") = 100,
        py::arg("reps") = 5, py::arg("seed") = 0);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def("to_yaml", [](const ExperimentConfig& c) { return to_yaml(c); })
        .def_property_readonly("reservoir", [](const ExperimentConfig& c) { return c.reservoir; });
    m.def("default_config", &default_config, py::arg("seed") = 0);
    m.def("parse_config", &parse_config);
    m.def("load_config", &load_config);

    m.def(
        "run_experiment",
        [](const ExperimentConfig& cfg) {
            const auto topo = build(cfg.reservoir);
            const auto data = generate_dataset(cfg.dataset, cfg.reservoir.input_size);
            ReadoutModel model;
            return json_loads(to_json(run_experiment(topo, data, cfg, model)));
        },
        "Builds the liquid, generates the configured dataset, trains and evaluates; returns the report.");
}
