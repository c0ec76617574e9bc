#include "spikevox/sparse_tensor.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace spikevox {

std::string to_string(const VoxelCoord& c) {
    std::ostringstream os;
    os << "(" << c.batch << "," << c.x << "," << c.y << "," << c.z << ")";
    return os.str();
}

SparseVoxelTensor::SparseVoxelTensor(std::vector<VoxelCoord> coords,
                                     FeatureMatrix features,
                                     SpatialShape spatial_shape)
    : coords_(std::move(coords)),
      features_(std::move(features)),
      spatial_shape_(spatial_shape) {
    if (features_.rows() != static_cast<int>(coords_.size()))
        throw ShapeMismatch("feature rows " + std::to_string(features_.rows()) +
                            " != coordinate count " + std::to_string(coords_.size()));
    index_.reserve(coords_.size() * 2);
    for (int i = 0; i < static_cast<int>(coords_.size()); ++i) {
        const VoxelCoord& c = coords_[i];
        if (c.batch < 0 || c.x < 0 || c.y < 0 || c.z < 0 ||
            c.x >= spatial_shape_[0] || c.y >= spatial_shape_[1] || c.z >= spatial_shape_[2])
            throw OutOfBounds("coordinate " + to_string(c) + " outside shape (" +
                              std::to_string(spatial_shape_[0]) + "," +
                              std::to_string(spatial_shape_[1]) + "," +
                              std::to_string(spatial_shape_[2]) + ") at row " +
                              std::to_string(i));
        auto [it, inserted] = index_.emplace(c, i);
        if (!inserted)
            throw DuplicateCoordinate("coordinate " + to_string(c) + " at rows " +
                                      std::to_string(it->second) + " and " +
                                      std::to_string(i));
    }
}

std::optional<int> SparseVoxelTensor::row_of(const VoxelCoord& c) const {
    auto it = index_.find(c);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

uint64_t SparseVoxelTensor::coord_signature() const {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](int32_t v) {
        for (int s = 0; s < 32; s += 8) {
            h ^= static_cast<uint64_t>((v >> s) & 0xff);
            h *= 0x100000001b3ull;
        }
    };
    for (int i = 0; i < 3; ++i) mix(spatial_shape_[i]);
    for (const VoxelCoord& c : coords_) {
        mix(c.batch);
        mix(c.x);
        mix(c.y);
        mix(c.z);
    }
    return h;
}

SparseVoxelTensor SparseVoxelTensor::with_features(FeatureMatrix f) const {
    if (f.rows() != num_active())
        throw ShapeMismatch("replacement feature rows " + std::to_string(f.rows()) +
                            " != num_active " + std::to_string(num_active()));
    SparseVoxelTensor out;
    out.coords_ = coords_;
    out.features_ = std::move(f);
    out.spatial_shape_ = spatial_shape_;
    out.index_ = index_;
    return out;
}

SparseVoxelTensor make_sparse_tensor(std::vector<VoxelCoord> coords,
                                     FeatureMatrix features,
                                     SpatialShape spatial_shape) {
    return SparseVoxelTensor(std::move(coords), std::move(features), spatial_shape);
}

std::optional<int> lookup(const SparseVoxelTensor& t, const VoxelCoord& c) {
    return t.row_of(c);
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(sizeof(T) == 4);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    static_assert(sizeof(T) == 4);
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw TruncatedFile("svt stream ended mid-record");
    return v;
}

} // namespace

void write_svt(std::ostream& os, const SparseVoxelTensor& t) {
    os.write("SVT1", 4);
    put<uint32_t>(os, static_cast<uint32_t>(t.num_active()));
    put<uint32_t>(os, static_cast<uint32_t>(t.channels()));
    for (int i = 0; i < 3; ++i) put<uint32_t>(os, static_cast<uint32_t>(t.spatial_shape()[i]));
    for (const VoxelCoord& c : t.coords()) {
        put<uint32_t>(os, static_cast<uint32_t>(c.batch));
        put<int32_t>(os, c.x);
        put<int32_t>(os, c.y);
        put<int32_t>(os, c.z);
    }
    const FeatureMatrix& f = t.features();
    os.write(reinterpret_cast<const char*>(f.data().data()),
             static_cast<std::streamsize>(f.size() * sizeof(float)));
}

SparseVoxelTensor read_svt(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SVT1", 4) != 0)
        throw BadHeader("missing SVT1 magic");
    const uint32_t n = get<uint32_t>(is);
    const uint32_t ch = get<uint32_t>(is);
    SpatialShape shape;
    for (int i = 0; i < 3; ++i) shape[i] = static_cast<int32_t>(get<uint32_t>(is));
    std::vector<VoxelCoord> coords(n);
    for (uint32_t i = 0; i < n; ++i) {
        coords[i].batch = static_cast<int32_t>(get<uint32_t>(is));
        coords[i].x = get<int32_t>(is);
        coords[i].y = get<int32_t>(is);
        coords[i].z = get<int32_t>(is);
    }
    FeatureMatrix f(static_cast<int>(n), static_cast<int>(ch));
    is.read(reinterpret_cast<char*>(f.data().data()),
            static_cast<std::streamsize>(f.size() * sizeof(float)));
    if (!is) throw TruncatedFile("svt feature block short");
    return SparseVoxelTensor(std::move(coords), std::move(f), shape);
}

void write_svt_file(const std::string& path, const SparseVoxelTensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw TruncatedFile("cannot open " + path + " for writing");
    write_svt(os, t);
}

SparseVoxelTensor read_svt_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TruncatedFile("cannot open " + path);
    return read_svt(is);
}

} // namespace spikevox
