#include "plsm/reservoir.hpp"

#include "plsm/binary_io.hpp"
#include "plsm/errors.hpp"
#include "plsm/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace plsm {

namespace {
constexpr std::string_view kMagic{"PLSMTOPO", 8};
constexpr std::uint32_t kVersion = 1;

bool in_unit(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }
}  // namespace

std::string_view to_string(PairType t)
{
    switch (t) {
    case PairType::EE: return "EE";
    case PairType::EI: return "EI";
    case PairType::II: return "II";
    case PairType::IE: return "IE";
    }
    throw ValidationError("unknown neuron type pair");
}

PairType parse_pair_type(std::string_view name)
{
    for (auto t : kPairTypes) {
        if (to_string(t) == name) return t;
    }
    throw ValidationError("unknown neuron type pair '" + std::string(name) + "'");
}

void BuildConfig::validate() const
{
    for (auto d : dims) {
        if (d <= 0) throw ValidationError("grid dimensions must be positive");
    }
    for (double c : c_table) {
        if (!in_unit(c)) throw ValidationError("connection probability ceilings must lie in [0, 1]");
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive");
    if (!(w_scale >= 0.0) || !std::isfinite(w_scale)) throw ValidationError("w_scale must be non-negative");
    for (auto t : kPairTypes) {
        const double w = this->w(t);
        if (!std::isfinite(w)) throw ValidationError("synaptic weights must be finite");
        const bool excitatory_source = t == PairType::EE || t == PairType::EI;
        if (excitatory_source ? w < 0.0 : w > 0.0) {
            throw ValidationError("weight for " + std::string(to_string(t)) + " has the wrong sign for its source type");
        }
    }
    if (input_size == 0) throw ValidationError("input_size must be positive");
    if (!in_unit(ei_ratio)) throw ValidationError("ei_ratio must lie in [0, 1]");
    if (!in_unit(input_density)) throw ValidationError("input_density must lie in [0, 1]");
    if (!in_unit(primary_ratio)) throw ValidationError("primary_ratio must lie in [0, 1]");
}

double euclidean(const GridPos& a, const GridPos& b) noexcept
{
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::uint32_t quantize_delay(double distance) noexcept
{
    return static_cast<std::uint32_t>(std::max(1L, std::lround(distance)));
}

double connection_probability(PairType type, double distance, const BuildConfig& cfg)
{
    const auto k = static_cast<std::size_t>(type);
    if (k >= 4) throw ValidationError("unknown neuron type pair");
    if (!(distance >= 0.0)) throw ValidationError("distance must be non-negative");
    const double x = distance / cfg.lambda;
    return std::clamp(cfg.c_table[k] * std::exp(-(x * x)), 0.0, 1.0);
}

std::vector<double> distance_matrix(std::span<const GridPos> positions)
{
    const std::size_t n = positions.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            d[i * n + j] = d[j * n + i] = euclidean(positions[i], positions[j]);
        }
    }
    return d;
}

std::size_t ReservoirTopology::index_of(const GridPos& p) const
{
    const auto& dm = config.dims;
    for (int a = 0; a < 3; ++a) {
        if (p[a] < 0 || p[a] >= dm[a]) throw ValidationError("grid position out of range");
    }
    return (static_cast<std::size_t>(p[0]) * dm[1] + p[1]) * dm[2] + p[2];
}

namespace {

// Position of `col` within row `row`, or npos.
std::size_t find_in_row(const SparseRows& m, std::size_t row, std::size_t col)
{
    if (row >= m.rows()) throw ValidationError("row index out of range");
    const auto begin = m.cols.begin() + static_cast<std::ptrdiff_t>(m.offsets[row]);
    const auto end = m.cols.begin() + static_cast<std::ptrdiff_t>(m.offsets[row + 1]);
    const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(col));
    if (it == end || *it != col) return static_cast<std::size_t>(-1);
    return static_cast<std::size_t>(it - m.cols.begin());
}

}  // namespace

double ReservoirTopology::weight(std::size_t target, std::size_t source) const
{
    const auto k = find_in_row(w_l, target, source);
    return k == static_cast<std::size_t>(-1) ? 0.0 : w_l.values[k];
}

std::uint32_t ReservoirTopology::delay(std::size_t target, std::size_t source) const
{
    const auto k = find_in_row(w_l, target, source);
    return k == static_cast<std::size_t>(-1) ? 0 : delays[k];
}

double ReservoirTopology::input_weight(std::size_t target, std::size_t input) const
{
    const auto k = find_in_row(w_li, target, input);
    return k == static_cast<std::size_t>(-1) ? 0.0 : w_li.values[k];
}

std::vector<double> ReservoirTopology::dense_w_l() const
{
    const std::size_t n = neurons();
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto k = w_l.offsets[i]; k < w_l.offsets[i + 1]; ++k) dense[i * n + w_l.cols[k]] = w_l.values[k];
    }
    return dense;
}

std::vector<std::uint32_t> ReservoirTopology::dense_delays() const
{
    const std::size_t n = neurons();
    std::vector<std::uint32_t> dense(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto k = w_l.offsets[i]; k < w_l.offsets[i + 1]; ++k) dense[i * n + w_l.cols[k]] = delays[k];
    }
    return dense;
}

std::vector<double> ReservoirTopology::dense_w_li() const
{
    const std::size_t n = neurons();
    const std::size_t m = input_size();
    std::vector<double> dense(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto k = w_li.offsets[i]; k < w_li.offsets[i + 1]; ++k) dense[i * m + w_li.cols[k]] = w_li.values[k];
    }
    return dense;
}

ReservoirTopology ReservoirTopology::without_recurrence() const
{
    ReservoirTopology out = *this;
    out.w_l.offsets.assign(neurons() + 1, 0);
    out.w_l.cols.clear();
    out.w_l.values.clear();
    out.delays.clear();
    out.t_max = 0;
    return out;
}

ReservoirTopology build(const BuildConfig& cfg)
{
    cfg.validate();
    const std::size_t n = cfg.neurons();
    ReservoirTopology topo;
    topo.config = cfg;

    topo.positions.reserve(n);
    for (std::int32_t x = 0; x < cfg.dims[0]; ++x) {
        for (std::int32_t y = 0; y < cfg.dims[1]; ++y) {
            for (std::int32_t z = 0; z < cfg.dims[2]; ++z) topo.positions.push_back({x, y, z});
        }
    }

    // Independent streams so changing one stage's consumption leaves the others intact.
    Rng type_rng(derive_seed(cfg.seed, 1));
    Rng wire_rng(derive_seed(cfg.seed, 2));
    Rng input_rng(derive_seed(cfg.seed, 3));

    const auto n_exc = static_cast<std::size_t>(std::llround(cfg.ei_ratio * static_cast<double>(n)));
    topo.is_excitatory.assign(n, 0);
    const auto excitatory = type_rng.sample_without_replacement(n, n_exc);
    for (auto i : excitatory) topo.is_excitatory[i] = 1;

    const auto n_primary = static_cast<std::size_t>(std::llround(cfg.primary_ratio * static_cast<double>(n_exc)));
    topo.is_primary.assign(n, 0);
    for (auto k : type_rng.sample_without_replacement(excitatory.size(), n_primary)) topo.is_primary[excitatory[k]] = 1;

    topo.w_l.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto type = pair_type(topo.is_excitatory[j] != 0, topo.is_excitatory[i] != 0);
            const double dist = euclidean(topo.positions[i], topo.positions[j]);
            const double p = connection_probability(type, dist, cfg);
            if (wire_rng.uniform() < p) {
                topo.w_l.cols.push_back(static_cast<std::uint32_t>(j));
                topo.w_l.values.push_back(cfg.w(type) * cfg.w_scale);
                const auto d = quantize_delay(dist);
                topo.delays.push_back(d);
                topo.t_max = std::max(topo.t_max, d);
            }
        }
        topo.w_l.offsets[i + 1] = topo.w_l.cols.size();
    }

    const auto fan_in = static_cast<std::size_t>(std::llround(cfg.input_density * static_cast<double>(cfg.input_size)));
    const double input_w = std::abs(cfg.w(PairType::EE)) * cfg.w_scale;
    topo.w_li.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (topo.is_primary[i]) {
            for (auto k : input_rng.sample_without_replacement(cfg.input_size, fan_in)) {
                topo.w_li.cols.push_back(static_cast<std::uint32_t>(k));
                topo.w_li.values.push_back(input_w);
            }
        }
        topo.w_li.offsets[i + 1] = topo.w_li.cols.size();
    }
    return topo;
}

TopologyStats summarize(const ReservoirTopology& topo)
{
    TopologyStats s;
    s.neurons = topo.neurons();
    for (std::size_t i = 0; i < s.neurons; ++i) {
        s.excitatory += topo.is_excitatory[i];
        s.primary += topo.is_primary[i];
        for (auto k = topo.w_l.offsets[i]; k < topo.w_l.offsets[i + 1]; ++k) {
            const auto j = topo.w_l.cols[k];
            const auto t = pair_type(topo.is_excitatory[j] != 0, topo.is_excitatory[i] != 0);
            ++s.connections_by_type[static_cast<std::size_t>(t)];
            ++s.delay_histogram[topo.delays[k]];
        }
    }
    s.input_connections = topo.w_li.nnz();
    return s;
}

namespace {

void write_rows(io::Writer& w, const SparseRows& m)
{
    w.array<std::uint64_t>(m.offsets);
    w.array<std::uint32_t>(m.cols);
    w.array<double>(m.values);
}

SparseRows read_rows(io::Reader& r, std::size_t rows, std::size_t cols)
{
    SparseRows m;
    m.offsets = r.array<std::uint64_t>();
    m.cols = r.array<std::uint32_t>();
    m.values = r.array<double>();
    if (m.offsets.size() != rows + 1 || m.offsets.front() != 0 || m.offsets.back() != m.cols.size() ||
        m.values.size() != m.cols.size()) {
        throw FormatError("corrupt sparse matrix");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (m.offsets[i] > m.offsets[i + 1]) throw FormatError("corrupt sparse matrix offsets");
    }
    for (auto c : m.cols) {
        if (c >= cols) throw FormatError("sparse column index out of range");
    }
    return m;
}

}  // namespace

void write_topology(std::ostream& os, const ReservoirTopology& topo)
{
    io::Writer w(os);
    w.magic(kMagic);
    w.put<std::uint32_t>(kVersion);
    const auto& c = topo.config;
    for (auto d : c.dims) w.put<std::int32_t>(d);
    for (auto x : c.c_table) w.put<double>(x);
    w.put<double>(c.lambda);
    for (auto x : c.w_table) w.put<double>(x);
    w.put<double>(c.w_scale);
    w.put<std::uint64_t>(c.input_size);
    w.put<double>(c.ei_ratio);
    w.put<double>(c.input_density);
    w.put<double>(c.primary_ratio);
    w.put<std::uint64_t>(c.seed);

    w.put<std::uint64_t>(topo.neurons());
    for (const auto& p : topo.positions) {
        for (auto x : p) w.put<std::int32_t>(x);
    }
    w.array<std::uint8_t>(topo.is_excitatory);
    w.array<std::uint8_t>(topo.is_primary);
    write_rows(w, topo.w_l);
    w.array<std::uint32_t>(topo.delays);
    write_rows(w, topo.w_li);
    w.put<std::uint32_t>(topo.t_max);
    w.check();
}

ReservoirTopology read_topology(std::istream& is)
{
    io::Reader r(is);
    r.expect_magic(kMagic);
    if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
        throw FormatError("unsupported topology version " + std::to_string(v));
    }
    ReservoirTopology topo;
    auto& c = topo.config;
    for (auto& d : c.dims) d = r.get<std::int32_t>();
    for (auto& x : c.c_table) x = r.get<double>();
    c.lambda = r.get<double>();
    for (auto& x : c.w_table) x = r.get<double>();
    c.w_scale = r.get<double>();
    c.input_size = r.get<std::uint64_t>();
    c.ei_ratio = r.get<double>();
    c.input_density = r.get<double>();
    c.primary_ratio = r.get<double>();
    c.seed = r.get<std::uint64_t>();
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw FormatError(std::string("stored config invalid: ") + e.what());
    }

    const auto n = r.get<std::uint64_t>();
    if (n != c.neurons()) throw FormatError("neuron count does not match grid dimensions");
    topo.positions.resize(n);
    for (auto& p : topo.positions) {
        for (auto& x : p) x = r.get<std::int32_t>();
    }
    topo.is_excitatory = r.array<std::uint8_t>();
    topo.is_primary = r.array<std::uint8_t>();
    if (topo.is_excitatory.size() != n || topo.is_primary.size() != n) throw FormatError("flag vector size mismatch");
    topo.w_l = read_rows(r, n, n);
    topo.delays = r.array<std::uint32_t>();
    if (topo.delays.size() != topo.w_l.nnz()) throw FormatError("delay vector size mismatch");
    topo.w_li = read_rows(r, n, c.input_size);
    topo.t_max = r.get<std::uint32_t>();
    for (auto d : topo.delays) {
        if (d < 1 || d > topo.t_max) throw FormatError("delay out of range");
    }
    return topo;
}

void save_topology(const std::filesystem::path& path, const ReservoirTopology& topo)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string());
    write_topology(os, topo);
}

ReservoirTopology load_topology(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path.string());
    return read_topology(is);
}

}  // namespace plsm
