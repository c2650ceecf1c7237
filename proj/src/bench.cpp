#include "plsm/bench.hpp"

#include "plsm/errors.hpp"
#include "plsm/random.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef PLSM_BUILD_FLAGS
#define PLSM_BUILD_FLAGS "unknown"
#endif

namespace plsm {

void BenchSpec::validate() const
{
    if (neuron_counts.empty() || batch_sizes.empty()) throw ValidationError("bench needs neuron counts and batch sizes");
    for (auto n : neuron_counts) {
        if (n < 1) throw ValidationError("neuron counts must be at least 1");
    }
    for (auto b : batch_sizes) {
        if (b < 1) throw ValidationError("batch sizes must be at least 1");
    }
    if (train_length < 1) throw ValidationError("train length must be at least 1");
    if (repetitions < 3) throw ValidationError("at least 3 repetitions are required");
    params.validate();
}

const BenchRow& BenchResult::find(const std::string& impl, std::size_t neurons, std::size_t batch) const
{
    for (const auto& r : rows) {
        if (r.impl == impl && r.neurons == neurons && r.batch == batch) return r;
    }
    throw ValidationError("no bench row for " + impl + " L=" + std::to_string(neurons) + " B=" + std::to_string(batch));
}

double BenchResult::speedup(std::size_t neurons, std::size_t batch) const
{
    return find("scalar", neurons, batch).median_ns / find("vectorized", neurons, batch).median_ns;
}

std::pair<double, double> median_iqr(std::vector<double> samples)
{
    if (samples.empty()) throw ValidationError("no timing samples");
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(samples.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, samples.size() - 1);
        return samples[lo] + (pos - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
    };
    return {quantile(0.5), quantile(0.75) - quantile(0.25)};
}

std::string raster_diff(const SpikeTrain& expected, const SpikeTrain& actual, std::size_t max_lines)
{
    std::ostringstream os;
    if (expected.neurons() != actual.neurons() || expected.steps() != actual.steps() ||
        expected.batch() != actual.batch()) {
        os << "shape mismatch: " << expected.neurons() << 'x' << expected.steps() << 'x' << expected.batch() << " vs "
           << actual.neurons() << 'x' << actual.steps() << 'x' << actual.batch();
        return os.str();
    }
    std::size_t mismatches = 0;
    for (std::size_t t = 0; t < expected.steps(); ++t) {
        for (std::size_t n = 0; n < expected.neurons(); ++n) {
            for (std::size_t b = 0; b < expected.batch(); ++b) {
                if (expected.at(n, t, b) == actual.at(n, t, b)) continue;
                if (mismatches < max_lines) {
                    os << "neuron " << n << " step " << t << " lane " << b << ": expected "
                       << int(expected.at(n, t, b)) << ", got " << int(actual.at(n, t, b)) << '\n';
                }
                ++mismatches;
            }
        }
    }
    if (mismatches) os << mismatches << " mismatching entries";
    return os.str();
}

std::map<std::string, std::string> bench_metadata(std::uint64_t seed)
{
    std::map<std::string, std::string> meta;
    std::string cpu = "unknown";
    if (std::ifstream info("/proc/cpuinfo"); info) {
        for (std::string line; std::getline(info, line);) {
            if (line.rfind("model name", 0) == 0) {
                cpu = line.substr(line.find(':') + 2);
                break;
            }
        }
    }
    meta["hardware"] = cpu;
    meta["hardware_threads"] = std::to_string(std::thread::hardware_concurrency());
    meta["kernel_threads"] = "1";
    meta["seed"] = std::to_string(seed);
    meta["compiler"] = __VERSION__;
    meta["build_flags"] = PLSM_BUILD_FLAGS;
    return meta;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Run>
std::vector<double> time_runs(std::size_t warmup, std::size_t reps, Run&& run)
{
    for (std::size_t i = 0; i < warmup; ++i) run();
    std::vector<double> ns;
    ns.reserve(reps);
    for (std::size_t i = 0; i < reps; ++i) {
        const auto start = Clock::now();
        run();
        const auto stop = Clock::now();
        ns.push_back(std::chrono::duration<double, std::nano>(stop - start).count());
    }
    return ns;
}

}  // namespace

BenchResult run_bench(const BenchSpec& spec)
{
    spec.validate();
    BenchResult result;
    result.metadata = bench_metadata(spec.seed);

    for (auto neurons : spec.neuron_counts) {
        for (auto batch : spec.batch_sizes) {
            Rng rng(derive_seed(spec.seed, neurons, batch));
            CurrentSequence input(neurons, spec.train_length, batch);
            for (auto& x : input.raw()) x = rng.uniform(0.0, spec.max_current);

            // correctness gate
            LayerState ref_state(neurons, batch, spec.params);
            LayerState vec_state(neurons, batch, spec.params);
            const auto expected = run_spike_train_scalar(ref_state, spec.params, input);
            const auto actual = run_spike_train(vec_state, spec.params, input);
            if (const auto diff = raster_diff(expected, actual); !diff.empty() || !(ref_state == vec_state)) {
                throw RuntimeFailure("vectorized raster diverges from scalar reference at L=" + std::to_string(neurons) +
                                     " B=" + std::to_string(batch) + "\n" +
                                     (diff.empty() ? std::string("final layer states differ") : diff));
            }

            SpikeTrain sink;
            auto scalar = time_runs(spec.warmup, spec.repetitions, [&] {
                LayerState s(neurons, batch, spec.params);
                sink = run_spike_train_scalar(s, spec.params, input);
            });
            auto vectorized = time_runs(spec.warmup, spec.repetitions, [&] {
                LayerState s(neurons, batch, spec.params);
                sink = run_spike_train(s, spec.params, input);
            });

            for (auto& [name, samples] : {std::pair{"scalar", &scalar}, std::pair{"vectorized", &vectorized}}) {
                const auto [median, iqr] = median_iqr(*samples);
                result.rows.push_back({name, neurons, batch, spec.train_length, median, iqr, spec.repetitions});
            }
        }
    }
    return result;
}

void write_bench_csv(std::ostream& os, const BenchResult& result)
{
    for (const auto& [k, v] : result.metadata) os << "# " << k << ": " << v << '\n';
    os << "impl,L,B,T,median_ns,iqr_ns,reps\n";
    os.setf(std::ios::fixed);
    os.precision(1);
    for (const auto& r : result.rows) {
        os << r.impl << ',' << r.neurons << ',' << r.batch << ',' << r.steps << ',' << r.median_ns << ',' << r.iqr_ns
           << ',' << r.reps << '\n';
    }
}

}  // namespace plsm
