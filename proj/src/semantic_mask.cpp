#include "plsm/semantic_mask.hpp"

#include "plsm/errors.hpp"

#include <cmath>

namespace plsm {

SemanticMask mask_for(std::optional<std::size_t> last)
{
    if (!last) return {1, 1, 1};
    switch (*last) {
    case 0: return {1, 1, 0};
    case 1: return {0, 1, 1};
    case 2: return {0, 0, 1};
    default: throw ValidationError("class " + std::to_string(*last) + " out of range for semantic masking");
    }
}

MaskedPrediction apply(const MaskState& state, std::span<const double> probs)
{
    if (probs.size() != kSemanticClasses) throw ValidationError("semantic masking expects 3 class probabilities");
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) throw ValidationError("probabilities must be finite and non-negative");
    }
    const auto mask = mask_for(state.last_prediction);
    std::size_t best = kSemanticClasses;
    double best_value = 0.0;
    for (std::size_t k = 0; k < kSemanticClasses; ++k) {
        if (!mask[k]) continue;
        if (best == kSemanticClasses || probs[k] > best_value) {
            best = k;
            best_value = probs[k];
        }
    }
    return {best, MaskState{best}};
}

std::vector<std::size_t> decode_sequence(std::span<const std::array<double, kSemanticClasses>> probs)
{
    std::vector<std::size_t> labels;
    labels.reserve(probs.size());
    MaskState state;
    for (const auto& p : probs) {
        const auto r = apply(state, p);
        labels.push_back(r.label);
        state = r.state;
    }
    return labels;
}

}  // namespace plsm
