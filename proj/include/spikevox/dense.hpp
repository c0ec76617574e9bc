#pragma once
#include <array>
#include <vector>

#include "spikevox/conv.hpp"
#include "spikevox/sparse_tensor.hpp"

namespace spikevox {

/// Small dense voxel grid, batch-major then x, y, z, channel. Only used at
/// test scale as the reference convolution path.
struct DenseGrid {
    int batches = 0;
    SpatialShape shape{0, 0, 0};
    int channels = 0;
    std::vector<float> v;

    DenseGrid() = default;
    DenseGrid(int batches_, SpatialShape shape_, int channels_)
        : batches(batches_), shape(shape_), channels(channels_),
          v(static_cast<size_t>(batches_) * shape_[0] * shape_[1] * shape_[2] * channels_,
            0.0f) {}

    size_t idx(int b, int x, int y, int z, int c) const {
        return (((static_cast<size_t>(b) * shape[0] + x) * shape[1] + y) * shape[2] + z) *
                   channels +
               c;
    }
    float& at(int b, int x, int y, int z, int c) { return v[idx(b, x, y, z, c)]; }
    float at(int b, int x, int y, int z, int c) const { return v[idx(b, x, y, z, c)]; }
};

/// Scatter a sparse tensor to a dense grid (batch count from max batch + 1).
DenseGrid densify(const SparseVoxelTensor& t);

/// Dense 3D convolution with zero padding using the same kernel geometry as
/// the sparse path: out[p] = sum_k W_k * in[p*stride + k], offsets centered
/// for odd kernels and [0, k) for even ones. Output extent is
/// ceil(shape/stride) per axis. This is the reference the sparse path is
/// checked against.
DenseGrid vsc_forward_dense(const DenseGrid& input, const KernelWeights& w,
                            const Stride3& stride);

} // namespace spikevox
