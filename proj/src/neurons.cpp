#include "spikevox/neurons.hpp"

#include <cmath>
#include <string>

namespace spikevox {

namespace {

void check_state_shape(const NeuronState& state, const FeatureMatrix& input) {
    if (!state.h_prev.empty() && !state.h_prev.same_shape(input))
        throw ShapeMismatch("neuron state " + std::to_string(state.h_prev.rows()) + "x" +
                            std::to_string(state.h_prev.cols()) + " vs input " +
                            std::to_string(input.rows()) + "x" +
                            std::to_string(input.cols()));
}

inline float clip_round(float u, int d_max, bool rounding) {
    float c = u;
    if (c < 0.0f) c = 0.0f;
    const float d = static_cast<float>(d_max);
    if (c > d) c = d;
    if (!rounding) return c;
    // half away from zero; c is nonnegative here
    return static_cast<float>(std::lround(c));
}

} // namespace

LifStepResult lif_step(const NeuronState& state, const FeatureMatrix& input_current,
                       const NeuronParams& params) {
    check_state_shape(state, input_current);
    const int n = input_current.rows(), ch = input_current.cols();
    LifStepResult out;
    out.spikes = FeatureMatrix(n, ch);
    out.state.h_prev = FeatureMatrix(n, ch);
    const bool has_state = !state.h_prev.empty();
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < ch; ++c) {
            const float u = (has_state ? state.h_prev.at(i, c) : 0.0f) + input_current.at(i, c);
            const float s = (u >= params.v_th) ? 1.0f : 0.0f;
            out.spikes.at(i, c) = s;
            out.state.h_prev.at(i, c) = params.beta * (u - s);
        }
    }
    return out;
}

FeatureMatrix ilif_forward(const FeatureMatrix& u, int d_max) {
    FeatureMatrix s(u.rows(), u.cols());
    for (int i = 0; i < u.rows(); ++i)
        for (int c = 0; c < u.cols(); ++c)
            s.at(i, c) = clip_round(u.at(i, c), d_max, true);
    return s;
}

FeatureMatrix ilif_surrogate_mask(const FeatureMatrix& u, int d_max) {
    FeatureMatrix m(u.rows(), u.cols());
    const float d = static_cast<float>(d_max);
    for (int i = 0; i < u.rows(); ++i)
        for (int c = 0; c < u.cols(); ++c) {
            const float v = u.at(i, c);
            m.at(i, c) = (v >= 0.0f && v <= d) ? 1.0f : 0.0f;
        }
    return m;
}

std::vector<FeatureMatrix> expand_virtual_timesteps(const FeatureMatrix& s, int d_max) {
    std::vector<FeatureMatrix> planes;
    planes.reserve(d_max);
    for (int j = 1; j <= d_max; ++j) planes.emplace_back(s.rows(), s.cols());
    for (int i = 0; i < s.rows(); ++i)
        for (int c = 0; c < s.cols(); ++c) {
            const float v = s.at(i, c);
            const float r = std::nearbyint(v);
            if (v != r || v < 0.0f || v > static_cast<float>(d_max))
                throw ValueOutOfRange("spike value " + std::to_string(v) + " at (" +
                                      std::to_string(i) + "," + std::to_string(c) +
                                      ") not an integer in [0," + std::to_string(d_max) + "]");
            for (int j = 1; j <= d_max; ++j)
                planes[j - 1].at(i, c) = (v >= static_cast<float>(j)) ? 1.0f : 0.0f;
        }
    return planes;
}

IlifStepResult ilif_step(const NeuronState& state, const FeatureMatrix& input_current,
                         const NeuronParams& params, bool rounding) {
    check_state_shape(state, input_current);
    const int n = input_current.rows(), ch = input_current.cols();
    IlifStepResult out;
    out.spikes = FeatureMatrix(n, ch);
    out.u = FeatureMatrix(n, ch);
    out.state.h_prev = FeatureMatrix(n, ch);
    const bool has_state = !state.h_prev.empty();
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < ch; ++c) {
            const float u = (has_state ? state.h_prev.at(i, c) : 0.0f) + input_current.at(i, c);
            const float s = clip_round(u, params.d_max, rounding);
            out.u.at(i, c) = u;
            out.spikes.at(i, c) = s;
            out.state.h_prev.at(i, c) = params.beta * (u - s);
        }
    }
    return out;
}

} // namespace spikevox
