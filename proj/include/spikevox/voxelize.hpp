#pragma once
#include <array>
#include <cstdint>
#include <string>

#include "spikevox/sparse_tensor.hpp"

namespace spikevox {

enum class FeatureMode {
    occupancy,      // 1 channel, constant 1.0 per occupied voxel
    mean_offset,    // 3 channels, mean point offset from the voxel center in [-0.5, 0.5]
    mean_intensity, // mean_offset plus 1 mean-intensity channel
};

FeatureMode feature_mode_from_string(const std::string& s);
std::string to_string(FeatureMode m);

struct VoxelConfig {
    std::array<float, 3> clip_min{-0.2f, -0.2f, -0.2f};
    std::array<float, 3> clip_max{0.2f, 0.2f, 0.2f};
    std::array<float, 3> voxel_size{0.01f, 0.01f, 0.01f};
    FeatureMode mode = FeatureMode::mean_offset;

    SpatialShape grid_extents() const; // ceil((clip_max - clip_min) / voxel_size)
    int channels() const;
    void validate() const;
};

struct PointCloud {
    struct Point {
        float x = 0, y = 0, z = 0;
        float intensity = 0; // optional, 0 when absent
        int t = 0;           // optional timestep tag, unused by voxelize
    };
    std::vector<Point> points;

    bool empty() const { return points.empty(); }
    size_t size() const { return points.size(); }
};

/// Keeps points with clip_min <= p < clip_max on every axis.
PointCloud clip_points(const PointCloud& pc, const VoxelConfig& cfg);

/// Bins clipped points into voxels at floor((p - clip_min) / voxel_size) and
/// aggregates per-voxel features by mean (accumulated in point order).
/// Output rows are sorted by coordinate. Throws EmptyCloud when nothing
/// survives clipping.
SparseVoxelTensor voxelize(const PointCloud& pc, const VoxelConfig& cfg);

} // namespace spikevox
