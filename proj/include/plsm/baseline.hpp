#pragma once

// Multinomial logistic regression on flat feature vectors (mean spike rates).
// Serves as the classic LSM readout and as an independent separability check.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace plsm {

struct LogisticConfig {
    std::size_t epochs = 300;
    double learning_rate = 0.5;
    double l2 = 1e-4;
};

class LogisticBaseline {
public:
    LogisticBaseline(std::size_t features, std::size_t classes);

    /// Full-batch gradient descent on features (rows of `x`, each of length features()).
    void fit(std::span<const std::vector<double>> x, std::span<const std::size_t> y, const LogisticConfig& cfg);

    std::vector<double> predict_proba(std::span<const double> x) const;
    std::size_t predict(std::span<const double> x) const;
    double accuracy(std::span<const std::vector<double>> x, std::span<const std::size_t> y) const;

    std::size_t features() const noexcept { return features_; }
    std::size_t classes() const noexcept { return classes_; }

private:
    std::size_t features_;
    std::size_t classes_;
    std::vector<double> weights_;  ///< [class][feature]
    std::vector<double> bias_;
};

}  // namespace plsm
