#pragma once
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spikevox/voxelize.hpp"

namespace spikevox {

/// Whitespace-separated rows of 3 or 4 floats (x y z [intensity]); blank
/// lines and '#' comments skipped. Bad rows raise MalformedRow with the
/// 1-based line number.
PointCloud parse_xyz(std::istream& is);
void write_xyz(std::ostream& os, const PointCloud& pc);

struct TriangleMesh {
    std::vector<std::array<float, 3>> vertices;
    std::vector<std::array<int, 3>> faces;
};

/// OFF mesh reader. Accepts the counts on the header line or the next one,
/// skips '#' comments, fans n-gons into n-2 triangles, and ignores trailing
/// per-face color fields.
TriangleMesh parse_off(std::istream& is);

/// Area-weighted barycentric surface sampling, deterministic under `seed`.
/// Samples are centered and scaled so the farthest point sits at radius
/// 0.18 m, keeping every point inside a +/-0.2 m clip box.
PointCloud sample_surface(const TriangleMesh& mesh, int n, uint64_t seed);

struct ManifestEntry {
    std::string path;
    int label = 0;
};

/// "path,label" rows, one per line; '#' comments skipped. Relative paths are
/// resolved against the manifest's directory by the file loader.
std::vector<ManifestEntry> read_manifest(const std::string& path);

/// Loads .xyz or .off (sampled to `off_samples` points) by extension.
PointCloud load_point_cloud(const std::string& path, int off_samples = 2048,
                            uint64_t seed = 0);

} // namespace spikevox
