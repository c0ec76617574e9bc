#include "spikevox/voxelize.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace spikevox {

FeatureMode feature_mode_from_string(const std::string& s) {
    if (s == "occupancy") return FeatureMode::occupancy;
    if (s == "mean_offset") return FeatureMode::mean_offset;
    if (s == "mean_intensity") return FeatureMode::mean_intensity;
    throw BadHeader("unknown feature mode '" + s + "'");
}

std::string to_string(FeatureMode m) {
    switch (m) {
        case FeatureMode::occupancy: return "occupancy";
        case FeatureMode::mean_offset: return "mean_offset";
        case FeatureMode::mean_intensity: return "mean_intensity";
    }
    return "?";
}

SpatialShape VoxelConfig::grid_extents() const {
    SpatialShape s;
    for (int a = 0; a < 3; ++a)
        s[a] = static_cast<int32_t>(std::ceil((clip_max[a] - clip_min[a]) / voxel_size[a]));
    return s;
}

int VoxelConfig::channels() const {
    switch (mode) {
        case FeatureMode::occupancy: return 1;
        case FeatureMode::mean_offset: return 3;
        case FeatureMode::mean_intensity: return 4;
    }
    return 0;
}

void VoxelConfig::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (!(clip_max[a] > clip_min[a]))
            throw ShapeMismatch("clip_max must exceed clip_min on axis " + std::to_string(a));
        if (!(voxel_size[a] > 0.0f))
            throw ShapeMismatch("voxel_size must be positive on axis " + std::to_string(a));
    }
}

PointCloud clip_points(const PointCloud& pc, const VoxelConfig& cfg) {
    cfg.validate();
    PointCloud out;
    out.points.reserve(pc.points.size());
    for (const auto& p : pc.points) {
        const float v[3] = {p.x, p.y, p.z};
        bool keep = true;
        for (int a = 0; a < 3; ++a)
            if (!(v[a] >= cfg.clip_min[a] && v[a] < cfg.clip_max[a])) { keep = false; break; }
        if (keep) out.points.push_back(p);
    }
    return out;
}

SparseVoxelTensor voxelize(const PointCloud& pc, const VoxelConfig& cfg) {
    cfg.validate();
    const PointCloud clipped = clip_points(pc, cfg);
    const SpatialShape extents = cfg.grid_extents();

    struct Accum {
        double sum[4] = {0, 0, 0, 0}; // offset xyz (or occupancy) + intensity
        int count = 0;
    };
    // ordered map gives coordinate-sorted output rows
    std::map<VoxelCoord, Accum> cells;
    for (const auto& p : clipped.points) {
        VoxelCoord c;
        const float v[3] = {p.x, p.y, p.z};
        int32_t idx[3];
        for (int a = 0; a < 3; ++a) {
            idx[a] = static_cast<int32_t>(std::floor((v[a] - cfg.clip_min[a]) / cfg.voxel_size[a]));
            // guard against float round-up at the top clip edge
            idx[a] = std::min(idx[a], extents[a] - 1);
        }
        c.batch = 0;
        c.x = idx[0];
        c.y = idx[1];
        c.z = idx[2];
        Accum& acc = cells[c];
        for (int a = 0; a < 3; ++a) {
            const float center = cfg.clip_min[a] + (static_cast<float>(idx[a]) + 0.5f) * cfg.voxel_size[a];
            acc.sum[a] += (v[a] - center) / cfg.voxel_size[a];
        }
        acc.sum[3] += p.intensity;
        acc.count += 1;
    }
    if (cells.empty()) throw EmptyCloud("no voxels after clipping");

    const int ch = cfg.channels();
    std::vector<VoxelCoord> coords;
    coords.reserve(cells.size());
    FeatureMatrix features(static_cast<int>(cells.size()), ch);
    int row = 0;
    for (const auto& [coord, acc] : cells) {
        coords.push_back(coord);
        float* f = features.row(row++);
        switch (cfg.mode) {
            case FeatureMode::occupancy:
                f[0] = 1.0f;
                break;
            case FeatureMode::mean_intensity:
                f[3] = static_cast<float>(acc.sum[3] / acc.count);
                [[fallthrough]];
            case FeatureMode::mean_offset:
                for (int a = 0; a < 3; ++a)
                    f[a] = static_cast<float>(acc.sum[a] / acc.count);
                break;
        }
    }
    return SparseVoxelTensor(std::move(coords), std::move(features), extents);
}

} // namespace spikevox
