#include "plsm/errors.hpp"
#include "plsm/random.hpp"
#include "plsm/reservoir.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace plsm;

TEST_CASE("connection probability")
{
    const BuildConfig cfg;
    CHECK(connection_probability(PairType::EE, 0.0, cfg) == doctest::Approx(0.6).epsilon(1e-15));
    // 0.6 * e^-1, evaluated at 30 digits
    CHECK(connection_probability(PairType::EE, 6.0, cfg) == doctest::Approx(0.220727664702865392957).epsilon(1e-14));
    CHECK(connection_probability(PairType::EI, 0.0, cfg) == 1.0);
    // 0.8 * e^-(1/4)
    CHECK(connection_probability(PairType::IE, 3.0, cfg) == doctest::Approx(0.623040626457123894596).epsilon(1e-14));
    CHECK_THROWS_AS(connection_probability(static_cast<PairType>(7), 1.0, cfg), ValidationError);
    CHECK_THROWS_AS(connection_probability(PairType::EE, -1.0, cfg), ValidationError);
    CHECK(parse_pair_type("IE") == PairType::IE);
    CHECK_THROWS_AS(parse_pair_type("XY"), ValidationError);
}

TEST_CASE("distance matrix")
{
    const std::vector<GridPos> pts{{0, 0, 0}, {3, 4, 0}, {0, 0, 0}};
    const auto d = distance_matrix(pts);
    CHECK(d[0 * 3 + 1] == 5.0);
    CHECK(d[0 * 3 + 2] == 0.0);

    Rng rng(17);
    std::vector<GridPos> random(40);
    for (auto& p : random) {
        for (auto& x : p) x = static_cast<std::int32_t>(rng.below(12));
    }
    const auto m = distance_matrix(random);
    const std::size_t n = random.size();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(m[i * n + i] == 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int a = 0; a < 3; ++a) s += double(random[i][a] - random[j][a]) * double(random[i][a] - random[j][a]);
            CHECK(m[i * n + j] == doctest::Approx(std::sqrt(s)));
            CHECK(m[i * n + j] == m[j * n + i]);
            for (std::size_t k = 0; k < n; k += 7) CHECK(m[i * n + j] <= m[i * n + k] + m[k * n + j] + 1e-12);
        }
    }
}

TEST_CASE("vanishing lambda leaves no liquid connections")
{
    BuildConfig cfg;
    cfg.dims = {5, 5, 5};
    cfg.lambda = 1e-9;
    const auto topo = build(cfg);
    CHECK(topo.connections() == 0);
    CHECK(topo.t_max == 0);
}

TEST_CASE("default build satisfies the topology invariants")
{
    BuildConfig cfg;
    cfg.seed = 5;
    const auto topo = build(cfg);
    const std::size_t n = topo.neurons();
    REQUIRE(n == 1000);

    std::size_t exc = 0, primary = 0;
    for (std::size_t i = 0; i < n; ++i) {
        exc += topo.is_excitatory[i];
        primary += topo.is_primary[i];
        if (topo.is_primary[i]) CHECK(topo.is_excitatory[i]);
        CHECK(topo.index_of(topo.positions[i]) == i);
    }
    CHECK(exc == 800);
    CHECK(primary == 400);

    const std::set<double> allowed{0.03, 0.02, -0.01, -0.04};
    const double diag = std::sqrt(3.0 * 9.0 * 9.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto k = topo.w_l.offsets[i]; k < topo.w_l.offsets[i + 1]; ++k) {
            const auto j = topo.w_l.cols[k];
            const double w = topo.w_l.values[k];
            CHECK(j != i);
            CHECK((topo.is_excitatory[j] ? w > 0.0 : w < 0.0));
            bool found = false;
            for (double a : allowed) found |= std::fabs(w - a) < 1e-15;
            CHECK(found);
            const double dist = euclidean(topo.positions[i], topo.positions[j]);
            CHECK(topo.delays[k] == std::max<long>(1, std::lround(dist)));
            CHECK(topo.delays[k] >= 1);
        }
        const auto inputs = topo.w_li.offsets[i + 1] - topo.w_li.offsets[i];
        CHECK(inputs == (topo.is_primary[i] ? 51u : 0u));
    }
    CHECK(topo.t_max <= static_cast<std::uint32_t>(std::ceil(diag)));
    CHECK(topo.t_max == *std::max_element(topo.delays.begin(), topo.delays.end()));
}

TEST_CASE("build is deterministic and seed-sensitive")
{
    BuildConfig cfg;
    cfg.dims = {6, 6, 6};
    cfg.seed = 11;
    CHECK(build(cfg) == build(cfg));
    auto other = cfg;
    other.seed = 12;
    CHECK_FALSE(build(cfg) == build(other));
}

TEST_CASE("invalid configs are rejected")
{
    BuildConfig cfg;
    cfg.primary_ratio = 1.5;
    CHECK_THROWS_AS(build(cfg), ValidationError);
    cfg = {};
    cfg.lambda = 0.0;
    CHECK_THROWS_AS(build(cfg), ValidationError);
    cfg = {};
    cfg.c_table[2] = 1.1;
    CHECK_THROWS_AS(build(cfg), ValidationError);
    cfg = {};
    cfg.w_table[3] = 4.0;  // inhibitory source with positive weight
    CHECK_THROWS_AS(build(cfg), ValidationError);
    cfg = {};
    cfg.dims = {0, 3, 3};
    CHECK_THROWS_AS(build(cfg), ValidationError);
}

TEST_CASE("EE connection frequency follows the distance rule (small grid)")
{
    // Expected count per unit-distance bucket is the sum of per-pair probabilities;
    // binomial variance is the sum of p(1-p).
    BuildConfig cfg;
    cfg.dims = {6, 6, 6};
    std::map<long, std::pair<double, double>> expect;  // bucket -> (mean, var)
    std::map<long, double> observed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const auto topo = build(cfg);
        const auto dense = topo.dense_w_l();
        const std::size_t n = topo.neurons();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j || !topo.is_excitatory[i] || !topo.is_excitatory[j]) continue;
                const double d = euclidean(topo.positions[i], topo.positions[j]);
                const double p = 0.6 * std::exp(-(d / 6.0) * (d / 6.0));
                const long bucket = static_cast<long>(std::floor(d));
                expect[bucket].first += p;
                expect[bucket].second += p * (1.0 - p);
                observed[bucket] += dense[i * n + j] != 0.0 ? 1.0 : 0.0;
            }
        }
    }
    for (const auto& [bucket, mv] : expect) {
        CHECK(std::fabs(observed[bucket] - mv.first) <= 3.0 * std::sqrt(mv.second) + 1e-9);
    }
}

TEST_CASE("topology file round-trip is exact and byte-stable")
{
    BuildConfig cfg;
    cfg.dims = {4, 5, 6};
    cfg.input_size = 64;
    cfg.seed = 77;
    const auto topo = build(cfg);
    std::stringstream a, b;
    write_topology(a, topo);
    write_topology(b, build(cfg));
    CHECK(a.str() == b.str());
    CHECK(read_topology(a) == topo);

    std::string bytes = b.str();
    bytes.resize(bytes.size() / 2);
    std::stringstream truncated(bytes);
    CHECK_THROWS_AS(read_topology(truncated), FormatError);
}

TEST_CASE("dense accessors agree with sparse lookups")
{
    BuildConfig cfg;
    cfg.dims = {3, 3, 3};
    cfg.input_size = 20;
    cfg.seed = 3;
    const auto topo = build(cfg);
    const auto w = topo.dense_w_l();
    const auto d = topo.dense_delays();
    const auto wi = topo.dense_w_li();
    for (std::size_t i = 0; i < 27; ++i) {
        for (std::size_t j = 0; j < 27; ++j) {
            CHECK(w[i * 27 + j] == topo.weight(i, j));
            CHECK(d[i * 27 + j] == topo.delay(i, j));
        }
        for (std::size_t k = 0; k < 20; ++k) CHECK(wi[i * 20 + k] == topo.input_weight(i, k));
    }
}
