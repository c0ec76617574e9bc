#include "spikevox/dense.hpp"

#include <algorithm>

namespace spikevox {

DenseGrid densify(const SparseVoxelTensor& t) {
    int batches = 1;
    for (const VoxelCoord& c : t.coords()) batches = std::max(batches, c.batch + 1);
    DenseGrid g(batches, t.spatial_shape(), t.channels());
    for (int i = 0; i < t.num_active(); ++i) {
        const VoxelCoord& c = t.coords()[i];
        const float* row = t.features().row(i);
        for (int ch = 0; ch < t.channels(); ++ch) g.at(c.batch, c.x, c.y, c.z, ch) = row[ch];
    }
    return g;
}

DenseGrid vsc_forward_dense(const DenseGrid& input, const KernelWeights& w,
                            const Stride3& stride) {
    const auto offsets = kernel_offsets(w.kernel);
    SpatialShape out_shape;
    for (int a = 0; a < 3; ++a) out_shape[a] = (input.shape[a] + stride[a] - 1) / stride[a];
    DenseGrid out(input.batches, out_shape, w.c_out);

    for (int b = 0; b < input.batches; ++b)
        for (int ox = 0; ox < out_shape[0]; ++ox)
            for (int oy = 0; oy < out_shape[1]; ++oy)
                for (int oz = 0; oz < out_shape[2]; ++oz) {
                    for (int co = 0; co < w.c_out; ++co) {
                        float acc = w.bias.empty() ? 0.0f : w.bias[co];
                        for (size_t k = 0; k < offsets.size(); ++k) {
                            const int ix = ox * stride[0] + offsets[k][0];
                            const int iy = oy * stride[1] + offsets[k][1];
                            const int iz = oz * stride[2] + offsets[k][2];
                            if (ix < 0 || iy < 0 || iz < 0 || ix >= input.shape[0] ||
                                iy >= input.shape[1] || iz >= input.shape[2])
                                continue; // zero padding
                            for (int ci = 0; ci < w.c_in; ++ci)
                                acc += input.at(b, ix, iy, iz, ci) *
                                       w.at(static_cast<int>(k), ci, co);
                        }
                        out.at(b, ox, oy, oz, co) = acc;
                    }
                }
    return out;
}

} // namespace spikevox
