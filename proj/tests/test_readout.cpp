#include "plsm/baseline.hpp"
#include "plsm/errors.hpp"
#include "plsm/random.hpp"
#include "plsm/readout.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace plsm;
using oracle::max_relative_gradient_error;
using oracle::random_cube;
using oracle::randomize;

namespace {

// Straightforward conv -> ReLU -> max-pool -> dense -> softmax, no dropout.
std::vector<double> naive_forward(const ReadoutModel& model, const FeatureCube& cube, std::vector<double>* conv_out)
{
    const auto& cfg = model.config();
    auto params = std::vector<double>(model.parameters().begin(), model.parameters().end());
    const std::size_t k = cfg.kernel;
    const auto d = cfg.dims;
    const GridDims o{d[0] - k + 1, d[1] - k + 1, d[2] - k + 1};
    std::size_t idx = 0;
    auto take = [&](std::size_t n) {
        const double* p = params.data() + idx;
        idx += n;
        return p;
    };
    const double* w = take(cfg.out_channels * cfg.in_channels * k * k * k);
    const double* b = take(cfg.out_channels);

    std::vector<double> conv(cfg.out_channels * o[0] * o[1] * o[2]);
    for (std::size_t co = 0; co < cfg.out_channels; ++co)
        for (std::size_t x = 0; x < o[0]; ++x)
            for (std::size_t y = 0; y < o[1]; ++y)
                for (std::size_t z = 0; z < o[2]; ++z) {
                    double s = b[co];
                    for (std::size_t ci = 0; ci < cfg.in_channels; ++ci)
                        for (std::size_t a = 0; a < k; ++a)
                            for (std::size_t bb = 0; bb < k; ++bb)
                                for (std::size_t c = 0; c < k; ++c)
                                    s += w[(((co * cfg.in_channels + ci) * k + a) * k + bb) * k + c] *
                                         cube.at(ci, x + a, y + bb, z + c);
                    conv[((co * o[0] + x) * o[1] + y) * o[2] + z] = s;
                }
    if (conv_out) *conv_out = conv;

    std::vector<double> pooled;
    for (std::size_t co = 0; co < cfg.out_channels; ++co) {
        if (cfg.pool == 0) {
            double m = -1.0;
            for (std::size_t i = 0; i < o[0] * o[1] * o[2]; ++i)
                m = std::max(m, std::max(0.0, conv[co * o[0] * o[1] * o[2] + i]));
            pooled.push_back(m);
            continue;
        }
        const std::size_t p = cfg.pool;
        for (std::size_t cx = 0; cx < o[0] / p; ++cx)
            for (std::size_t cy = 0; cy < o[1] / p; ++cy)
                for (std::size_t cz = 0; cz < o[2] / p; ++cz) {
                    double m = -1.0;
                    for (std::size_t x = cx * p; x < cx * p + p; ++x)
                        for (std::size_t y = cy * p; y < cy * p + p; ++y)
                            for (std::size_t z = cz * p; z < cz * p + p; ++z)
                                m = std::max(m, std::max(0.0, conv[((co * o[0] + x) * o[1] + y) * o[2] + z]));
                    pooled.push_back(m);
                }
    }
    const double* dw = take(cfg.classes * pooled.size());
    const double* db = take(cfg.classes);
    std::vector<double> logits(cfg.classes);
    double mx = -1e300;
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        logits[c] = db[c];
        for (std::size_t f = 0; f < pooled.size(); ++f) logits[c] += dw[c * pooled.size() + f] * pooled[f];
        mx = std::max(mx, logits[c]);
    }
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (auto& l : logits) l /= z;
    return logits;
}

// Two Gaussian blobs in cube space: class 0 bright in the low-x half, class 1 in the high-x half.
std::vector<LabeledCube> two_blobs(std::size_t n, GridDims dims, Rng& rng)
{
    std::vector<LabeledCube> out;
    for (std::size_t s = 0; s < n; ++s) {
        LabeledCube lc;
        lc.label = s % 2;
        lc.cube.channels = 1;
        lc.cube.dims = dims;
        lc.cube.window = 1;
        lc.cube.values.resize(dims[0] * dims[1] * dims[2]);
        for (std::size_t x = 0; x < dims[0]; ++x)
            for (std::size_t i = 0; i < dims[1] * dims[2]; ++i) {
                const bool hot = (x < dims[0] / 2) == (lc.label == 0);
                const double v = (hot ? 0.7 : 0.2) + 0.1 * rng.normal();
                lc.cube.values[x * dims[1] * dims[2] + i] = std::clamp(v, 0.0, 1.0);
            }
        out.push_back(std::move(lc));
    }
    return out;
}

}  // namespace

TEST_CASE("windowed_cube")
{
    const GridDims dims{2, 3, 2};
    SUBCASE("zero raster gives a zero cube")
    {
        const auto c = windowed_cube(SpikeTrain(12, 20), dims, 5);
        CHECK(c.channels == 4);
        CHECK(std::all_of(c.values.begin(), c.values.end(), [](double v) { return v == 0.0; }));
    }
    SUBCASE("brute-force window means, including w = T")
    {
        Rng rng(3);
        SpikeTrain r(12, 20, 2);
        for (auto& s : r.raw()) s = rng.bernoulli(0.4) ? 1 : 0;
        for (std::size_t w : {1u, 4u, 5u, 20u}) {
            for (std::size_t lane = 0; lane < 2; ++lane) {
                const auto c = windowed_cube(r, dims, w, lane);
                REQUIRE(c.channels == 20 / w);
                for (std::size_t ch = 0; ch < c.channels; ++ch)
                    for (std::size_t x = 0; x < 2; ++x)
                        for (std::size_t y = 0; y < 3; ++y)
                            for (std::size_t z = 0; z < 2; ++z) {
                                const std::size_t n = (x * 3 + y) * 2 + z;
                                double s = 0;
                                for (std::size_t t = ch * w; t < (ch + 1) * w; ++t) s += r.at(n, t, lane);
                                CHECK(c.at(ch, x, y, z) == doctest::Approx(s / w).epsilon(1e-15));
                            }
            }
        }
        const auto whole = windowed_cube(r, dims, 20);
        for (std::size_t n = 0; n < 12; ++n) {
            double s = 0;
            for (std::size_t t = 0; t < 20; ++t) s += r.at(n, t);
            CHECK(whole.values[n] == doctest::Approx(s / 20));
        }
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(windowed_cube(SpikeTrain(12, 20), dims, 3), ValidationError);
        CHECK_THROWS_AS(windowed_cube(SpikeTrain(11, 20), dims, 5), ValidationError);
        CHECK_THROWS_AS(windowed_cube(SpikeTrain(12, 20), dims, 0), ValidationError);
        CHECK_THROWS_AS(windowed_cube(SpikeTrain(12, 20), dims, 5, 1), ValidationError);
    }
}

TEST_CASE("softmax and loss")
{
    const auto u = softmax(std::vector<double>{1, 1, 1});
    for (double p : u) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(loss(u, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(loss(u, 0) == doctest::Approx(1.0986).epsilon(1e-4));
    CHECK(loss(std::vector<double>{0, 1, 0}, 1) == 0.0);
    CHECK(loss(std::vector<double>{0.125, 0.375, 0.5}, std::vector<double>{0.25, 0.5, 0.25}) ==
          doctest::Approx(1.18356180706580842784).epsilon(1e-14));
    CHECK(loss(std::vector<double>{0.7, 0.2, 0.1}, 1) == doctest::Approx(1.60943791243410037460).epsilon(1e-14));
    // floor on log(0)
    CHECK(loss(std::vector<double>{1, 0, 0}, 2) == doctest::Approx(27.6310211159285482082).epsilon(1e-14));

    const auto big = softmax(std::vector<double>{1000, 999, -1000});
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] + big[1] + big[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
}

TEST_CASE("forward matches the nested-loop oracle")
{
    Rng rng(11);
    for (std::size_t pool : {0u, 2u}) {
        ReadoutConfig cfg;
        cfg.in_channels = 3;
        cfg.dims = {6, 5, 7};
        cfg.out_channels = 4;
        cfg.pool = pool;
        ReadoutModel m(cfg, 7);
        randomize(m, rng);
        const auto cube = random_cube(3, cfg.dims, rng);

        std::vector<double> conv;
        const auto expected = naive_forward(m, cube, &conv);
        const auto trace = m.forward_trace(cube);
        const auto o = cfg.conv_dims();
        for (std::size_t co = 0; co < 4; ++co)
            for (std::size_t x = 0; x < o[0]; ++x)
                for (std::size_t y = 0; y < o[1]; ++y)
                    for (std::size_t z = 0; z < o[2]; ++z) {
                        const double got = trace.pre[co * 210 + (x * 5 + y) * 7 + z];
                        CHECK(std::abs(got - conv[((co * o[0] + x) * o[1] + y) * o[2] + z]) <= 1e-6);
                    }
        const auto probs = m.forward(cube);
        REQUIRE(probs.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(probs[k] - expected[k]) <= 1e-6);
    }
}

TEST_CASE("zero model predicts uniform; inference is deterministic")
{
    ReadoutConfig cfg;
    cfg.dims = {4, 4, 4};
    cfg.out_channels = 2;
    ReadoutModel m(cfg, 1);
    std::fill(m.parameters().begin(), m.parameters().end(), 0.0);
    Rng rng(2);
    const auto cube = random_cube(1, cfg.dims, rng);
    for (double p : m.forward(cube)) CHECK(p == doctest::Approx(1.0 / 3));

    ReadoutModel r(cfg, 9);
    CHECK(r.forward(cube) == r.forward(cube));
}

TEST_CASE("property: softmax outputs are distributions")
{
    Rng rng(21);
    ReadoutConfig cfg;
    cfg.in_channels = 2;
    cfg.dims = {5, 5, 5};
    cfg.out_channels = 3;
    ReadoutModel m(cfg, 3);
    for (int trial = 0; trial < 50; ++trial) {
        randomize(m, rng, 3.0);
        const auto p = m.forward(random_cube(2, cfg.dims, rng));
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
        for (double x : p) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
    }
}

TEST_CASE("analytic gradients agree with central differences")
{
    struct Case {
        std::size_t in, out, pool;
        GridDims dims;
        double dropout;
    };
    const Case cases[] = {{1, 2, 0, {4, 4, 4}, 0.0}, {2, 3, 2, {5, 6, 5}, 0.0}, {3, 2, 0, {4, 5, 3}, 0.5}};
    Rng rng(5);
    std::uint64_t seed = 0;
    for (const auto& c : cases) {
        ReadoutConfig cfg;
        cfg.in_channels = c.in;
        cfg.out_channels = c.out;
        cfg.pool = c.pool;
        cfg.dims = c.dims;
        cfg.dropout = c.dropout;
        ReadoutModel m(cfg, ++seed);
        randomize(m, rng);
        const auto cube = random_cube(c.in, c.dims, rng);
        const double worst = max_relative_gradient_error(m, cube, seed % 3, 40 + seed);
        MESSAGE("max relative gradient error " << worst);
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("two separable blobs are learned; logistic oracle agrees")
{
    Rng rng(8);
    const GridDims dims{6, 4, 4};
    const auto data = two_blobs(60, dims, rng);

    ReadoutConfig cfg;
    cfg.dims = dims;
    cfg.out_channels = 4;
    cfg.classes = 2;
    cfg.pool = 2;
    ReadoutModel m(cfg, 4);
    TrainConfig tc;
    tc.epochs = 100;
    tc.learning_rate = 0.1;
    tc.seed = 2;
    const auto result = train(m, data, tc);
    CHECK(result.loss_curve.size() == 100);
    CHECK(result.loss_curve.back() < result.loss_curve.front());
    CHECK(accuracy(m, data) >= 0.99);

    std::vector<std::vector<double>> x;
    std::vector<std::size_t> y;
    for (const auto& d : data) {
        x.push_back(d.cube.values);
        y.push_back(d.label);
    }
    LogisticBaseline lr(x.front().size(), 2);
    lr.fit(x, y, LogisticConfig{});
    CHECK(lr.accuracy(x, y) >= 0.99);
}

TEST_CASE("zero learning rate leaves the model unchanged")
{
    Rng rng(8);
    const auto data = two_blobs(10, {4, 4, 4}, rng);
    ReadoutConfig cfg;
    cfg.dims = {4, 4, 4};
    cfg.out_channels = 2;
    cfg.classes = 2;
    cfg.dropout = 0.0;
    ReadoutModel m(cfg, 4);
    const auto before = m;
    TrainConfig tc;
    tc.epochs = 5;
    tc.learning_rate = 0.0;
    const auto result = train(m, data, tc);
    CHECK(m == before);
    for (double l : result.loss_curve) CHECK(l == result.loss_curve.front());
}

TEST_CASE("training is deterministic and follows the step schedule")
{
    Rng rng(8);
    const auto data = two_blobs(12, {4, 4, 4}, rng);
    ReadoutConfig cfg;
    cfg.dims = {4, 4, 4};
    cfg.out_channels = 2;
    cfg.classes = 2;
    TrainConfig tc;
    tc.epochs = 25;
    tc.decay_every = 10;
    ReadoutModel a(cfg, 4), b(cfg, 4);
    const auto ra = train(a, data, tc);
    const auto rb = train(b, data, tc);
    CHECK(a == b);
    CHECK(ra.loss_curve == rb.loss_curve);
    CHECK(ra.lr_curve[0] == tc.learning_rate);
    CHECK(ra.lr_curve[10] == tc.learning_rate / 2);
    CHECK(ra.lr_curve[24] == tc.learning_rate / 4);

    std::ostringstream csv;
    write_loss_curve(csv, ra);
    CHECK(csv.str().rfind("epoch,loss,learning_rate\n", 0) == 0);
}

TEST_CASE("non-finite training aborts")
{
    Rng rng(8);
    auto data = two_blobs(4, {4, 4, 4}, rng);
    ReadoutConfig cfg;
    cfg.dims = {4, 4, 4};
    cfg.out_channels = 2;
    cfg.classes = 2;
    ReadoutModel m(cfg, 1);
    m.parameters()[0] = std::nan("");
    TrainConfig tc;
    tc.epochs = 2;
    CHECK_THROWS_AS(train(m, data, tc), RuntimeFailure);
}

TEST_CASE("checkpoint round-trip and errors")
{
    ReadoutConfig cfg;
    cfg.in_channels = 2;
    cfg.dims = {5, 4, 6};
    cfg.out_channels = 3;
    cfg.pool = 2;
    const ReadoutModel m(cfg, 12);
    std::stringstream ss;
    write_model(ss, m);
    CHECK(read_model(ss) == m);

    std::string bytes;
    {
        std::ostringstream os;
        write_model(os, m);
        bytes = os.str();
    }
    std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(read_model(truncated), FormatError);
    std::istringstream garbage("not a model");
    CHECK_THROWS_AS(read_model(garbage), FormatError);

    Rng rng(1);
    CHECK_THROWS_AS(m.forward(random_cube(1, cfg.dims, rng)), ValidationError);
    CHECK_THROWS_AS(m.forward(random_cube(2, {5, 4, 5}, rng)), ValidationError);

    ReadoutConfig bad = cfg;
    bad.dims = {2, 4, 4};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.dropout = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.pool = 4;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("input normalization")
{
    Rng rng(31);
    ReadoutConfig cfg;
    cfg.in_channels = 2;
    cfg.dims = {4, 5, 4};
    cfg.out_channels = 3;
    std::vector<LabeledCube> data;
    for (int i = 0; i < 12; ++i) {
        auto c = random_cube(2, cfg.dims, rng);
        for (auto& v : c.values) v = 0.4 + 0.05 * v;
        c.values[7] = 0.25;  // constant element
        data.push_back({c, static_cast<std::size_t>(i % 3)});
    }
    ReadoutModel m(cfg, 5);
    m.fit_input_normalization(data);
    REQUIRE(m.input_shift().size() == 160);
    CHECK(m.input_scale()[7] == 0.0);

    // normalized training inputs have zero mean and unit variance per element
    for (std::size_t i : {0u, 50u, 159u}) {
        double mean = 0, var = 0;
        for (const auto& d : data) mean += (d.cube.values[i] - m.input_shift()[i]) * m.input_scale()[i] / 12;
        for (const auto& d : data) var += std::pow((d.cube.values[i] - m.input_shift()[i]) * m.input_scale()[i], 2) / 12;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }

    // equals the identity model applied to a hand-normalized cube
    ReadoutModel plain = m;
    plain.set_input_normalization({}, {});
    auto manual = data[3].cube;
    for (std::size_t i = 0; i < manual.values.size(); ++i)
        manual.values[i] = (manual.values[i] - m.input_shift()[i]) * m.input_scale()[i];
    const auto a = m.forward(data[3].cube);
    const auto b = plain.forward(manual);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));

    CHECK(max_relative_gradient_error(m, data[4].cube, 1, 3) <= 1e-3);

    std::stringstream ss;
    write_model(ss, m);
    CHECK(read_model(ss) == m);

    CHECK_THROWS_AS(m.set_input_normalization(std::vector<double>(3), std::vector<double>(3)), ValidationError);
    CHECK_THROWS_AS(m.fit_input_normalization({}), ValidationError);
}
