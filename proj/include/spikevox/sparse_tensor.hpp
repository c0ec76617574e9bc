#pragma once
#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "spikevox/errors.hpp"
#include "spikevox/matrix.hpp"

namespace spikevox {

/// Integer voxel site: batch index plus grid coordinates.
struct VoxelCoord {
    int32_t batch = 0;
    int32_t x = 0;
    int32_t y = 0;
    int32_t z = 0;

    friend bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
    // lexicographic (batch, x, y, z) — the canonical site ordering
    friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

std::string to_string(const VoxelCoord& c);

struct VoxelCoordHash {
    size_t operator()(const VoxelCoord& c) const noexcept {
        // splitmix64-style mixing of the packed halves; keying stays exact
        // because equality is exact tuple equality.
        uint64_t a = (static_cast<uint64_t>(static_cast<uint32_t>(c.batch)) << 32) |
                     static_cast<uint32_t>(c.x);
        uint64_t b = (static_cast<uint64_t>(static_cast<uint32_t>(c.y)) << 32) |
                     static_cast<uint32_t>(c.z);
        uint64_t h = a + 0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2);
        h ^= h >> 30;
        h *= 0xbf58476d1ce4e5b9ull;
        h ^= h >> 27;
        h *= 0x94d049bb133111ebull;
        h ^= h >> 31;
        return static_cast<size_t>(h);
    }
};

using SpatialShape = std::array<int32_t, 3>;

/// Coordinate-indexed sparse voxel tensor: a list of active sites, one
/// feature row per site, and an exact coordinate -> row map. Immutable after
/// construction; layers produce new tensors rather than mutating.
class SparseVoxelTensor {
public:
    SparseVoxelTensor() = default;

    /// Validates uniqueness, bounds and the row/coord count match.
    /// Insertion order of coords is preserved: row i <-> coords[i].
    SparseVoxelTensor(std::vector<VoxelCoord> coords, FeatureMatrix features,
                      SpatialShape spatial_shape);

    int num_active() const { return static_cast<int>(coords_.size()); }
    int channels() const { return features_.cols(); }
    const std::vector<VoxelCoord>& coords() const { return coords_; }
    const FeatureMatrix& features() const { return features_; }
    const SpatialShape& spatial_shape() const { return spatial_shape_; }

    /// Row of `c`, or nullopt when the site is inactive or outside the grid.
    std::optional<int> row_of(const VoxelCoord& c) const;

    /// True when any channel of row r is nonzero (the active-site test).
    bool row_active(int r) const { return features_.row_any_nonzero(r); }

    /// FNV-1a digest of coords + spatial shape; rulebooks remember it so a
    /// mismatched tensor is rejected instead of silently misaddressed.
    uint64_t coord_signature() const;

    /// Same coords/shape, new feature rows (row count must match).
    SparseVoxelTensor with_features(FeatureMatrix f) const;

private:
    std::vector<VoxelCoord> coords_;
    FeatureMatrix features_;
    SpatialShape spatial_shape_{0, 0, 0};
    std::unordered_map<VoxelCoord, int32_t, VoxelCoordHash> index_;
};

SparseVoxelTensor make_sparse_tensor(std::vector<VoxelCoord> coords,
                                     FeatureMatrix features,
                                     SpatialShape spatial_shape);

std::optional<int> lookup(const SparseVoxelTensor& t, const VoxelCoord& c);

// ".svt" interchange format: little-endian, magic "SVT1", u32 num_active,
// u32 channels, 3x u32 spatial shape, then per-site (u32 batch, 3x i32),
// then num_active*channels float32 rows.
void write_svt(std::ostream& os, const SparseVoxelTensor& t);
SparseVoxelTensor read_svt(std::istream& is);
void write_svt_file(const std::string& path, const SparseVoxelTensor& t);
SparseVoxelTensor read_svt_file(const std::string& path);

} // namespace spikevox
