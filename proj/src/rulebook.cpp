#include "spikevox/rulebook.hpp"

#include <algorithm>
#include <string>
#include <tuple>

namespace spikevox {

namespace {

std::array<int32_t, 3> offset_lo(const Kernel3& kernel) {
    std::array<int32_t, 3> lo;
    for (int a = 0; a < 3; ++a)
        lo[a] = (kernel[a] % 2 == 1) ? -(kernel[a] / 2) : 0;
    return lo;
}

int32_t ceil_div(int32_t a, int32_t b) { return (a + b - 1) / b; }

} // namespace

std::vector<Kernel3> kernel_offsets(const Kernel3& kernel) {
    const auto lo = offset_lo(kernel);
    std::vector<Kernel3> offs;
    offs.reserve(static_cast<size_t>(kernel[0]) * kernel[1] * kernel[2]);
    for (int32_t kx = lo[0]; kx < lo[0] + kernel[0]; ++kx)
        for (int32_t ky = lo[1]; ky < lo[1] + kernel[1]; ++ky)
            for (int32_t kz = lo[2]; kz < lo[2] + kernel[2]; ++kz)
                offs.push_back({kx, ky, kz});
    return offs;
}

int center_offset_index(const Kernel3& kernel) {
    const auto offs = kernel_offsets(kernel);
    for (int i = 0; i < static_cast<int>(offs.size()); ++i)
        if (offs[i] == Kernel3{0, 0, 0}) return i;
    return -1;
}

Rulebook build_rulebook(const SparseVoxelTensor& input, const Kernel3& kernel,
                        const Stride3& stride, ConvMode mode) {
    for (int a = 0; a < 3; ++a) {
        if (kernel[a] < 1)
            throw InvalidKernel("kernel component " + std::to_string(kernel[a]) + " < 1");
        if (stride[a] < 1)
            throw InvalidStride("stride component " + std::to_string(stride[a]) + " < 1");
    }
    if (mode == ConvMode::submanifold) {
        for (int a = 0; a < 3; ++a) {
            if (kernel[a] % 2 == 0)
                throw InvalidKernel("submanifold mode requires odd kernel, got " +
                                    std::to_string(kernel[a]));
            if (stride[a] != 1)
                throw InvalidStride("submanifold mode requires stride 1, got " +
                                    std::to_string(stride[a]));
        }
    }

    Rulebook rb;
    rb.kernel = kernel;
    rb.stride = stride;
    rb.mode = mode;
    rb.offsets = kernel_offsets(kernel);
    rb.pairs.assign(rb.offsets.size(), {});
    rb.input_signature = input.coord_signature();

    const SpatialShape& shape = input.spatial_shape();

    if (mode == ConvMode::submanifold) {
        rb.out_shape = shape;
        // active centers in input row order
        rb.out_coords.reserve(input.num_active());
        for (int i = 0; i < input.num_active(); ++i)
            if (input.row_active(i)) rb.out_coords.push_back(input.coords()[i]);
        for (size_t k = 0; k < rb.offsets.size(); ++k) {
            const Kernel3& off = rb.offsets[k];
            auto& plist = rb.pairs[k];
            for (int32_t o = 0; o < static_cast<int32_t>(rb.out_coords.size()); ++o) {
                const VoxelCoord& p = rb.out_coords[o];
                const VoxelCoord n{p.batch, p.x + off[0], p.y + off[1], p.z + off[2]};
                if (auto row = input.row_of(n))
                    plist.emplace_back(static_cast<int32_t>(*row), o);
            }
        }
        return rb;
    }

    // strided
    for (int a = 0; a < 3; ++a) rb.out_shape[a] = ceil_div(shape[a], stride[a]);

    // enumerate every (output site, offset, input row) incidence
    struct Incidence {
        VoxelCoord out;
        int32_t offset_index;
        int32_t input_row;
    };
    std::vector<Incidence> inc;
    for (int i = 0; i < input.num_active(); ++i) {
        const VoxelCoord& c = input.coords()[i];
        for (size_t k = 0; k < rb.offsets.size(); ++k) {
            const Kernel3& off = rb.offsets[k];
            VoxelCoord p{c.batch, 0, 0, 0};
            bool ok = true;
            const int32_t in_pos[3] = {c.x, c.y, c.z};
            int32_t out_pos[3];
            for (int a = 0; a < 3 && ok; ++a) {
                const int32_t rel = in_pos[a] - off[a];
                if (rel % stride[a] != 0) { ok = false; break; }
                out_pos[a] = rel / stride[a];
                if (out_pos[a] < 0 || out_pos[a] >= rb.out_shape[a]) ok = false;
            }
            if (!ok) continue;
            p.x = out_pos[0];
            p.y = out_pos[1];
            p.z = out_pos[2];
            inc.push_back({p, static_cast<int32_t>(k), static_cast<int32_t>(i)});
        }
    }

    std::vector<VoxelCoord> outs;
    outs.reserve(inc.size());
    for (const Incidence& e : inc) outs.push_back(e.out);
    std::sort(outs.begin(), outs.end());
    outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
    rb.out_coords = std::move(outs);

    std::unordered_map<VoxelCoord, int32_t, VoxelCoordHash> out_row;
    out_row.reserve(rb.out_coords.size() * 2);
    for (int32_t o = 0; o < static_cast<int32_t>(rb.out_coords.size()); ++o)
        out_row.emplace(rb.out_coords[o], o);

    for (const Incidence& e : inc)
        rb.pairs[e.offset_index].emplace_back(e.input_row, out_row.at(e.out));
    for (auto& plist : rb.pairs)
        std::sort(plist.begin(), plist.end(),
                  [](const std::pair<int32_t, int32_t>& a, const std::pair<int32_t, int32_t>& b) {
                      return std::tie(a.second, a.first) < std::tie(b.second, b.first);
                  });
    return rb;
}

} // namespace spikevox
