#include "plsm/spike_codec.hpp"

#include "plsm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace plsm {

void EncoderConfig::validate() const
{
    if (window < 1) throw ValidationError("encoding window must be at least 1");
}

double EncoderConfig::probability(double feature) const
{
    const double p = rate_scale ? rate_scale(feature) : feature;
    return std::clamp(p, 0.0, 1.0);
}

SpikeTrain encode(std::span<const double> features, const EncoderConfig& cfg, Rng& rng)
{
    cfg.validate();
    std::vector<double> prob(features.size());
    for (std::size_t d = 0; d < features.size(); ++d) {
        const double f = features[d];
        if (!std::isfinite(f) || f < 0.0 || f > 1.0) {
            throw ValidationError("feature " + std::to_string(d) + " = " + std::to_string(f) + " outside [0, 1]");
        }
        prob[d] = cfg.probability(f);
    }

    SpikeTrain train(features.size(), cfg.window);
    for (std::size_t t = 0; t < cfg.window; ++t) {
        auto step = train.step(t);
        for (std::size_t d = 0; d < prob.size(); ++d) step[d] = rng.bernoulli(prob[d]) ? 1 : 0;
    }
    return train;
}

SpikeTrain encode(std::span<const double> features, const EncoderConfig& cfg)
{
    Rng rng(cfg.seed);
    return encode(features, cfg, rng);
}

std::vector<double> rate_summary(const SpikeTrain& train)
{
    if (train.steps() == 0) throw ValidationError("rate summary of an empty train");
    std::vector<double> counts(train.neurons(), 0.0);
    for (std::size_t t = 0; t < train.steps(); ++t) {
        for (std::size_t n = 0; n < train.neurons(); ++n) counts[n] += train.at(n, t);
    }
    for (auto& c : counts) c /= static_cast<double>(train.steps());
    return counts;
}

}  // namespace plsm
