#include "plsm/spike_train.hpp"

#include "plsm/binary_io.hpp"
#include "plsm/errors.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace plsm {

namespace {
constexpr std::string_view kMagic{"PLSMSPK\0", 8};
constexpr std::uint32_t kVersion = 1;
}  // namespace

SpikeTrain::SpikeTrain(std::size_t neurons, std::size_t steps, std::size_t batch)
    : neurons_(neurons), steps_(steps), batch_(batch), data_(neurons * steps * batch, 0)
{
    if (batch == 0) throw ValidationError("spike train batch must be at least 1");
}

std::size_t SpikeTrain::spike_count() const
{
    return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](std::uint8_t s) { return s != 0; }));
}

SpikeTrain SpikeTrain::slice_steps(std::size_t first, std::size_t count) const
{
    if (first + count > steps_) throw ValidationError("step slice out of range");
    SpikeTrain out(neurons_, count, batch_);
    const std::size_t stride = neurons_ * batch_;
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * stride), count * stride, out.data_.begin());
    return out;
}

SpikeTrain SpikeTrain::lane(std::size_t b) const
{
    if (b >= batch_) throw ValidationError("lane out of range");
    SpikeTrain out(neurons_, steps_, 1);
    for (std::size_t t = 0; t < steps_; ++t) {
        for (std::size_t n = 0; n < neurons_; ++n) out.set(n, t, at(n, t, b));
    }
    return out;
}

void write_binary(std::ostream& os, const SpikeTrain& train)
{
    io::Writer w(os);
    w.magic(kMagic);
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint64_t>(train.neurons());
    w.put<std::uint64_t>(train.steps());
    w.put<std::uint64_t>(train.batch());
    w.array(train.raw());
    w.check();
}

SpikeTrain read_binary(std::istream& is)
{
    io::Reader r(is);
    r.expect_magic(kMagic);
    if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
        throw FormatError("unsupported spike raster version " + std::to_string(v));
    }
    const auto neurons = r.get<std::uint64_t>();
    const auto steps = r.get<std::uint64_t>();
    const auto batch = r.get<std::uint64_t>();
    auto payload = r.array<std::uint8_t>();
    if (batch == 0 || payload.size() != neurons * steps * batch) throw FormatError("spike raster payload size mismatch");
    if (std::any_of(payload.begin(), payload.end(), [](std::uint8_t s) { return s > 1; })) {
        throw FormatError("spike raster entries must be 0 or 1");
    }
    SpikeTrain train(neurons, steps, batch);
    std::copy(payload.begin(), payload.end(), train.raw().begin());
    return train;
}

void write_csv(std::ostream& os, const SpikeTrain& train)
{
    os << "batch,neuron";
    for (std::size_t t = 0; t < train.steps(); ++t) os << ",t" << t;
    os << '\n';
    for (std::size_t b = 0; b < train.batch(); ++b) {
        for (std::size_t n = 0; n < train.neurons(); ++n) {
            os << b << ',' << n;
            for (std::size_t t = 0; t < train.steps(); ++t) os << ',' << static_cast<int>(train.at(n, t, b));
            os << '\n';
        }
    }
}

SpikeTrain read_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty spike CSV");
    const auto steps = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 1;

    struct Row {
        std::size_t b, n;
        std::vector<std::uint8_t> spikes;
    };
    std::vector<Row> rows;
    std::size_t max_b = 0, max_n = 0;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        Row row{};
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != steps + 2) throw FormatError("spike CSV line " + std::to_string(line_no) + ": wrong column count");
        try {
            row.b = std::stoul(cells[0]);
            row.n = std::stoul(cells[1]);
        } catch (const std::exception&) {
            throw FormatError("spike CSV line " + std::to_string(line_no) + ": bad index");
        }
        for (std::size_t t = 0; t < steps; ++t) {
            if (cells[t + 2] != "0" && cells[t + 2] != "1") {
                throw FormatError("spike CSV line " + std::to_string(line_no) + ": entries must be 0 or 1");
            }
            row.spikes.push_back(cells[t + 2] == "1" ? 1 : 0);
        }
        max_b = std::max(max_b, row.b);
        max_n = std::max(max_n, row.n);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("spike CSV has no rows");
    SpikeTrain train(max_n + 1, steps, max_b + 1);
    if (rows.size() != train.neurons() * train.batch()) throw FormatError("spike CSV rows do not cover every neuron");
    for (const auto& row : rows) {
        for (std::size_t t = 0; t < steps; ++t) train.set(row.n, t, row.b, row.spikes[t]);
    }
    return train;
}

void save(const std::filesystem::path& path, const SpikeTrain& train)
{
    if (path.extension() == ".csv") {
        std::ofstream os(path);
        if (!os) throw FormatError("cannot open " + path.string());
        write_csv(os, train);
    } else {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw FormatError("cannot open " + path.string());
        write_binary(os, train);
    }
}

SpikeTrain load(const std::filesystem::path& path)
{
    if (path.extension() == ".csv") {
        std::ifstream is(path);
        if (!is) throw FormatError("cannot open " + path.string());
        return read_csv(is);
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_binary(is);
}

}  // namespace plsm
