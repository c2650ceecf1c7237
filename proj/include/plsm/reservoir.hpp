#pragma once

// Liquid construction: neurons on a 3-D integer grid, excitatory/inhibitory
// labels, primary (input-receiving) neurons, distance-dependent recurrent
// wiring and integer synaptic delays of one step per unit distance.
//
// Weight convention: w_l(target, source). A spike from `source` adds
// w_l(target, source) to the current of `target` once the delay has elapsed.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace plsm {

/// Ordered (source, target) neuron-type pair. Table order is EE, EI, II, IE.
enum class PairType : std::uint8_t { EE = 0, EI = 1, II = 2, IE = 3 };

constexpr std::array<PairType, 4> kPairTypes{PairType::EE, PairType::EI, PairType::II, PairType::IE};

std::string_view to_string(PairType t);
PairType parse_pair_type(std::string_view name);

constexpr PairType pair_type(bool source_excitatory, bool target_excitatory) noexcept
{
    if (source_excitatory) return target_excitatory ? PairType::EE : PairType::EI;
    return target_excitatory ? PairType::IE : PairType::II;
}

struct BuildConfig {
    std::array<std::int32_t, 3> dims{10, 10, 10};
    std::array<double, 4> c_table{0.6, 1.0, 0.2, 0.8};  ///< max connection probability per PairType
    double lambda = 6.0;
    std::array<double, 4> w_table{3.0, 2.0, -1.0, -4.0};  ///< signed weights per PairType
    double w_scale = 0.01;
    std::size_t input_size = 512;
    double ei_ratio = 0.8;
    double input_density = 0.1;
    double primary_ratio = 0.5;
    std::uint64_t seed = 0;

    std::size_t neurons() const noexcept
    {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
    }
    double c(PairType t) const { return c_table[static_cast<std::size_t>(t)]; }
    double w(PairType t) const { return w_table[static_cast<std::size_t>(t)]; }

    /// Throws ValidationError on out-of-range probabilities, non-positive dims or lambda,
    /// or weights whose sign disagrees with the source type.
    void validate() const;

    friend bool operator==(const BuildConfig&, const BuildConfig&) = default;
};

using GridPos = std::array<std::int32_t, 3>;

/// Compressed rows indexed by target neuron.
struct SparseRows {
    std::vector<std::uint64_t> offsets;  ///< size rows + 1
    std::vector<std::uint32_t> cols;
    std::vector<double> values;

    std::size_t rows() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t nnz() const noexcept { return cols.size(); }

    friend bool operator==(const SparseRows&, const SparseRows&) = default;
};

class ReservoirTopology {
public:
    BuildConfig config;
    std::vector<GridPos> positions;
    std::vector<std::uint8_t> is_excitatory;
    std::vector<std::uint8_t> is_primary;
    SparseRows w_l;                      ///< L x L, row = target, col = source
    std::vector<std::uint32_t> delays;   ///< parallel to w_l.cols
    SparseRows w_li;                     ///< L x input_size
    std::uint32_t t_max = 0;             ///< largest delay over existing connections (0 if none)

    std::size_t neurons() const noexcept { return positions.size(); }
    std::size_t input_size() const noexcept { return config.input_size; }
    std::size_t connections() const noexcept { return w_l.nnz(); }

    /// Grid index of position (x, y, z): (x * Y + y) * Z + z.
    std::size_t index_of(const GridPos& p) const;

    double weight(std::size_t target, std::size_t source) const;
    std::uint32_t delay(std::size_t target, std::size_t source) const;  ///< 0 when not connected
    double input_weight(std::size_t target, std::size_t input) const;

    std::vector<double> dense_w_l() const;
    std::vector<std::uint32_t> dense_delays() const;
    std::vector<double> dense_w_li() const;

    /// Copy with every recurrent weight removed (delays and flags kept).
    ReservoirTopology without_recurrence() const;

    friend bool operator==(const ReservoirTopology&, const ReservoirTopology&) = default;
};

/// C * exp(-(distance / lambda)^2), clamped to [0, 1].
double connection_probability(PairType type, double distance, const BuildConfig& cfg);

/// Row-major L x L Euclidean distances.
std::vector<double> distance_matrix(std::span<const GridPos> positions);

double euclidean(const GridPos& a, const GridPos& b) noexcept;

/// Delay in steps for a connection of the given length: max(1, round(distance)).
std::uint32_t quantize_delay(double distance) noexcept;

ReservoirTopology build(const BuildConfig& cfg);

struct TopologyStats {
    std::size_t neurons = 0;
    std::size_t excitatory = 0;
    std::size_t primary = 0;
    std::array<std::size_t, 4> connections_by_type{};
    std::map<std::uint32_t, std::size_t> delay_histogram;
    std::size_t input_connections = 0;
};

TopologyStats summarize(const ReservoirTopology& topo);

// Versioned binary file: "PLSMTOPO" magic, u32 version (1), the full BuildConfig
// (seed included), then positions, flags, the two CSR matrices, delays and t_max.
// All integers little-endian, doubles IEEE-754 binary64.
void write_topology(std::ostream& os, const ReservoirTopology& topo);
ReservoirTopology read_topology(std::istream& is);
void save_topology(const std::filesystem::path& path, const ReservoirTopology& topo);
ReservoirTopology load_topology(const std::filesystem::path& path);

}  // namespace plsm
