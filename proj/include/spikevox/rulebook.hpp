#pragma once
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "spikevox/sparse_tensor.hpp"

namespace spikevox {

enum class ConvMode {
    submanifold, // outputs only at active input sites, stride 1, odd kernel
    strided      // plain sparse conv; outputs wherever the window reaches an input site
};

using Kernel3 = std::array<int32_t, 3>;
using Stride3 = std::array<int32_t, 3>;

/// Kernel offsets in canonical order: x slowest, z fastest. Odd axes range
/// over [-k/2, k/2] (centered); even axes over [0, k-1] (downsample origin).
std::vector<Kernel3> kernel_offsets(const Kernel3& kernel);

/// Index of the (0,0,0) offset for odd kernels.
int center_offset_index(const Kernel3& kernel);

/// Per-kernel-offset gather/scatter address lists driving sparse convolution.
/// pairs[k] holds (input_row, output_row), sorted by (output_row, input_row),
/// so scatter-accumulation order is fixed and results are bit-reproducible.
struct Rulebook {
    Kernel3 kernel{1, 1, 1};
    Stride3 stride{1, 1, 1};
    ConvMode mode = ConvMode::submanifold;
    std::vector<Kernel3> offsets;
    std::vector<std::vector<std::pair<int32_t, int32_t>>> pairs; // per offset
    std::vector<VoxelCoord> out_coords;
    SpatialShape out_shape{0, 0, 0};
    uint64_t input_signature = 0; // coord_signature() of the source tensor

    long long total_pairs() const {
        long long n = 0;
        for (const auto& p : pairs) n += static_cast<long long>(p.size());
        return n;
    }
};

/// Builds the rulebook for `input`.
///
/// submanifold: out_coords are exactly the input coords whose feature row has
/// any nonzero entry (in input row order); for each such center p, every
/// offset k with p+k present in the input contributes a pair. Presence, not
/// activity, decides the gather side: a stored all-zero row is still
/// addressable (it just contributes nothing).
///
/// strided: out_coords are the distinct sites p with p*stride + k landing on
/// an input site for some offset k, 0 <= p < ceil(shape/stride); sorted
/// lexicographically. No activity gating.
Rulebook build_rulebook(const SparseVoxelTensor& input, const Kernel3& kernel,
                        const Stride3& stride, ConvMode mode);

} // namespace spikevox
