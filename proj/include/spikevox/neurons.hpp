#pragma once
#include <vector>

#include "spikevox/errors.hpp"
#include "spikevox/matrix.hpp"

namespace spikevox {

struct NeuronParams {
    float beta = 0.5f;  // leak factor in (0, 1]
    float v_th = 1.0f;  // binary firing threshold
    int d_max = 4;      // maximum integer spike value
};

/// Post-reset membrane potential carried between timesteps, row/channel
/// aligned with the companion tensor's active sites. Empty means all zero.
struct NeuronState {
    FeatureMatrix h_prev;
};

struct LifStepResult {
    FeatureMatrix spikes; // binary {0,1}
    NeuronState state;
};

/// One binary LIF step: U = H_prev + input, S = [U >= v_th], H = beta*(U - S).
/// The threshold comparison fires on equality.
LifStepResult lif_step(const NeuronState& state, const FeatureMatrix& input_current,
                       const NeuronParams& params);

/// Integer spike emission: round(clip(u, 0, d_max)) with ties rounded away
/// from zero, so 2.5 -> 3 on the clipped nonnegative range.
FeatureMatrix ilif_forward(const FeatureMatrix& u, int d_max);

/// Rectangular surrogate window: 1 where 0 <= u <= d_max (both ends
/// inclusive), 0 elsewhere. The backward pass multiplies upstream gradients
/// by this mask.
FeatureMatrix ilif_surrogate_mask(const FeatureMatrix& u, int d_max);

/// Thermometer decomposition of integer spikes: d_max binary planes with
/// plane j = [s >= j+1], so the planes sum back to s. Entries outside
/// [0, d_max] or non-integer entries raise ValueOutOfRange.
std::vector<FeatureMatrix> expand_virtual_timesteps(const FeatureMatrix& s, int d_max);

struct IlifStepResult {
    FeatureMatrix spikes; // integers 0..d_max stored as float
    FeatureMatrix u;      // pre-spike membrane, kept for the surrogate window
    NeuronState state;
};

/// One integer-LIF step with the same membrane recurrence as lif_step but
/// integer emission: U = H_prev + input, S = ilif_forward(U),
/// H = beta*(U - S). With `rounding` false the emission is clip(U, 0, d_max)
/// without rounding — a continuous ramp whose exact derivative is the
/// rectangular window, used by gradient checks.
IlifStepResult ilif_step(const NeuronState& state, const FeatureMatrix& input_current,
                         const NeuronParams& params, bool rounding = true);

} // namespace spikevox
