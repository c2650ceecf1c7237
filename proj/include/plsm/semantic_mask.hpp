#pragma once

// Monotone three-phase label constraint (pre -> transition -> post).
//
// After predicting class c the next prediction may only be c or c + 1:
//   last 0 -> [1,1,0], last 1 -> [0,1,1], last 2 -> [0,0,1]; no history -> [1,1,1].

#include <array>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace plsm {

inline constexpr std::size_t kSemanticClasses = 3;

using SemanticMask = std::array<std::uint8_t, kSemanticClasses>;

struct MaskState {
    std::optional<std::size_t> last_prediction;
};

/// Throws ValidationError if `last` is not a class index.
SemanticMask mask_for(std::optional<std::size_t> last);

struct MaskedPrediction {
    std::size_t label;
    MaskState state;
};

/// Argmax of mask (.) probs; ties go to the lower class. Throws ValidationError unless
/// probs has three finite, non-negative entries.
MaskedPrediction apply(const MaskState& state, std::span<const double> probs);

/// Applies the mask step by step over a sequence, starting from no history.
std::vector<std::size_t> decode_sequence(std::span<const std::array<double, kSemanticClasses>> probs);

}  // namespace plsm
