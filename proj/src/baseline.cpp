#include "plsm/baseline.hpp"

#include "plsm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace plsm {

LogisticBaseline::LogisticBaseline(std::size_t features, std::size_t classes)
    : features_(features), classes_(classes), weights_(features * classes, 0.0), bias_(classes, 0.0)
{
    if (features == 0 || classes == 0) throw ValidationError("logistic baseline needs features and classes");
}

std::vector<double> LogisticBaseline::predict_proba(std::span<const double> x) const
{
    if (x.size() != features_) throw ValidationError("feature vector size mismatch");
    std::vector<double> z(classes_);
    for (std::size_t k = 0; k < classes_; ++k) {
        double acc = bias_[k];
        const double* w = weights_.data() + k * features_;
        for (std::size_t f = 0; f < features_; ++f) acc += w[f] * x[f];
        z[k] = acc;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) sum += v = std::exp(v - m);
    for (auto& v : z) v /= sum;
    return z;
}

std::size_t LogisticBaseline::predict(std::span<const double> x) const
{
    const auto p = predict_proba(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

void LogisticBaseline::fit(std::span<const std::vector<double>> x, std::span<const std::size_t> y,
                           const LogisticConfig& cfg)
{
    if (x.size() != y.size() || x.empty()) throw ValidationError("logistic baseline needs matching, nonempty data");
    std::vector<double> gw(weights_.size());
    std::vector<double> gb(classes_);
    const double inv_n = 1.0 / static_cast<double>(x.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::fill(gw.begin(), gw.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (std::size_t s = 0; s < x.size(); ++s) {
            if (y[s] >= classes_) throw ValidationError("label out of range");
            auto p = predict_proba(x[s]);
            p[y[s]] -= 1.0;
            for (std::size_t k = 0; k < classes_; ++k) {
                gb[k] += p[k];
                double* g = gw.data() + k * features_;
                for (std::size_t f = 0; f < features_; ++f) g[f] += p[k] * x[s][f];
            }
        }
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            weights_[i] -= cfg.learning_rate * (gw[i] * inv_n + cfg.l2 * weights_[i]);
        }
        for (std::size_t k = 0; k < classes_; ++k) bias_[k] -= cfg.learning_rate * gb[k] * inv_n;
    }
}

double LogisticBaseline::accuracy(std::span<const std::vector<double>> x, std::span<const std::size_t> y) const
{
    if (x.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t s = 0; s < x.size(); ++s) hits += predict(x[s]) == y[s] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(x.size());
}

}  // namespace plsm
