#pragma once
#include <algorithm>
#include <cstdint>
#include <random>
#include <tuple>
#include <vector>

#include "spikevox/conv.hpp"
#include "spikevox/rulebook.hpp"
#include "spikevox/sparse_tensor.hpp"

namespace testutil {

inline double rng01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline float rng_uniform(std::mt19937_64& rng, float lo, float hi) {
    return lo + static_cast<float>(rng01(rng)) * (hi - lo);
}

/// Random sparse tensor on a small grid. Each cell is active with
/// probability `density`; a fraction of active rows is zeroed so the
/// activity gating paths get exercised.
inline spikevox::SparseVoxelTensor random_tensor(std::mt19937_64& rng,
                                                 spikevox::SpatialShape shape,
                                                 int channels, double density,
                                                 double zero_row_fraction = 0.15) {
    std::vector<spikevox::VoxelCoord> coords;
    for (int x = 0; x < shape[0]; ++x)
        for (int y = 0; y < shape[1]; ++y)
            for (int z = 0; z < shape[2]; ++z)
                if (rng01(rng) < density) coords.push_back({0, x, y, z});
    if (coords.empty()) coords.push_back({0, 0, 0, 0});
    spikevox::FeatureMatrix f(static_cast<int>(coords.size()), channels);
    for (int i = 0; i < f.rows(); ++i) {
        const bool zero_row = rng01(rng) < zero_row_fraction;
        for (int c = 0; c < channels; ++c)
            f.at(i, c) = zero_row ? 0.0f : rng_uniform(rng, -1.0f, 1.0f);
    }
    return spikevox::SparseVoxelTensor(std::move(coords), std::move(f), shape);
}

/// Random integer-spike tensor with values in [0, d_max].
inline spikevox::SparseVoxelTensor random_spike_tensor(std::mt19937_64& rng,
                                                       spikevox::SpatialShape shape,
                                                       int channels, double density,
                                                       int d_max,
                                                       double zero_prob = 0.4) {
    spikevox::SparseVoxelTensor t = random_tensor(rng, shape, channels, density, 0.0);
    spikevox::FeatureMatrix f(t.num_active(), channels);
    for (int i = 0; i < f.rows(); ++i)
        for (int c = 0; c < channels; ++c)
            f.at(i, c) = (rng01(rng) < zero_prob)
                             ? 0.0f
                             : static_cast<float>(1 + rng() % d_max);
    return t.with_features(std::move(f));
}

inline spikevox::KernelWeights random_kernel(std::mt19937_64& rng,
                                             const spikevox::Kernel3& kernel, int c_in,
                                             int c_out) {
    spikevox::KernelWeights w = spikevox::make_kernel(kernel, c_in, c_out);
    for (float& v : w.w) v = rng_uniform(rng, -1.0f, 1.0f);
    return w;
}

/// (offset, input coord, output coord) incidence triple; the representation
/// both the rulebook under test and the brute-force oracle are reduced to.
using PairTriple = std::tuple<spikevox::Kernel3, spikevox::VoxelCoord, spikevox::VoxelCoord>;

inline std::vector<PairTriple> rulebook_triples(const spikevox::Rulebook& rb,
                                                const spikevox::SparseVoxelTensor& input) {
    std::vector<PairTriple> out;
    for (size_t k = 0; k < rb.offsets.size(); ++k)
        for (const auto& [i, o] : rb.pairs[k])
            out.emplace_back(rb.offsets[k], input.coords()[i], rb.out_coords[o]);
    std::sort(out.begin(), out.end());
    return out;
}

/// Brute-force enumeration of every (offset, input, output) incidence by
/// dense window scans, independent of the rulebook construction path.
inline std::vector<PairTriple> brute_force_triples(const spikevox::SparseVoxelTensor& input,
                                                   const spikevox::Kernel3& kernel,
                                                   const spikevox::Stride3& stride,
                                                   spikevox::ConvMode mode) {
    using namespace spikevox;
    std::vector<PairTriple> out;
    const auto offsets = kernel_offsets(kernel);
    const auto& shape = input.spatial_shape();
    if (mode == ConvMode::submanifold) {
        for (int i = 0; i < input.num_active(); ++i) {
            if (!input.row_active(i)) continue; // outputs only at active centers
            const VoxelCoord p = input.coords()[i];
            for (const auto& k : offsets) {
                const VoxelCoord n{p.batch, p.x + k[0], p.y + k[1], p.z + k[2]};
                if (input.row_of(n)) out.emplace_back(k, n, p);
            }
        }
    } else {
        SpatialShape oshape;
        for (int a = 0; a < 3; ++a) oshape[a] = (shape[a] + stride[a] - 1) / stride[a];
        std::vector<int32_t> batches;
        for (const auto& c : input.coords()) batches.push_back(c.batch);
        std::sort(batches.begin(), batches.end());
        batches.erase(std::unique(batches.begin(), batches.end()), batches.end());
        for (int32_t b : batches)
            for (int32_t ox = 0; ox < oshape[0]; ++ox)
                for (int32_t oy = 0; oy < oshape[1]; ++oy)
                    for (int32_t oz = 0; oz < oshape[2]; ++oz) {
                        const VoxelCoord p{b, ox, oy, oz};
                        for (const auto& k : offsets) {
                            const VoxelCoord n{b, ox * stride[0] + k[0],
                                               oy * stride[1] + k[1],
                                               oz * stride[2] + k[2]};
                            if (input.row_of(n)) out.emplace_back(k, n, p);
                        }
                    }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace testutil
