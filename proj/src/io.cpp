#include "spikevox/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace spikevox {

PointCloud parse_xyz(std::istream& is) {
    PointCloud pc;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ss(line);
        float x, y, z;
        if (!(ss >> x >> y >> z))
            throw MalformedRow("line " + std::to_string(lineno) + ": expected 3 or 4 floats");
        PointCloud::Point p{x, y, z, 0.0f, 0};
        float intensity;
        if (ss >> intensity) p.intensity = intensity;
        std::string rest;
        if (ss >> rest)
            throw MalformedRow("line " + std::to_string(lineno) + ": trailing token '" + rest + "'");
        pc.points.push_back(p);
    }
    return pc;
}

void write_xyz(std::ostream& os, const PointCloud& pc) {
    os.precision(9);
    for (const auto& p : pc.points)
        os << p.x << " " << p.y << " " << p.z << " " << p.intensity << "\n";
}

namespace {

// next non-comment token stream line
bool next_content_line(std::istream& is, std::string& line) {
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
}

} // namespace

TriangleMesh parse_off(std::istream& is) {
    std::string line;
    if (!next_content_line(is, line)) throw BadHeader("empty OFF stream");
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag != "OFF") throw BadHeader("expected OFF, got '" + tag + "'");

    long nv = -1, nf = -1, ne = 0;
    if (!(header >> nv >> nf >> ne)) {
        if (!next_content_line(is, line)) throw TruncatedFile("missing counts line");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne)) throw BadHeader("bad counts line '" + line + "'");
    }
    if (nv < 0 || nf < 0) throw BadHeader("negative element counts");

    TriangleMesh mesh;
    mesh.vertices.reserve(static_cast<size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_content_line(is, line))
            throw TruncatedFile("vertex " + std::to_string(i) + " of " + std::to_string(nv));
        std::istringstream vs(line);
        std::array<float, 3> v;
        if (!(vs >> v[0] >> v[1] >> v[2]))
            throw MalformedRow("vertex " + std::to_string(i) + ": '" + line + "'");
        mesh.vertices.push_back(v);
    }
    for (long f = 0; f < nf; ++f) {
        if (!next_content_line(is, line))
            throw TruncatedFile("face " + std::to_string(f) + " of " + std::to_string(nf));
        std::istringstream fs(line);
        int n = 0;
        if (!(fs >> n) || n < 3) throw MalformedRow("face " + std::to_string(f) + ": '" + line + "'");
        std::vector<int> poly(n);
        for (int j = 0; j < n; ++j) {
            if (!(fs >> poly[j])) throw TruncatedFile("face " + std::to_string(f) + " index list");
            if (poly[j] < 0 || poly[j] >= static_cast<int>(mesh.vertices.size()))
                throw IndexOutOfRange("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(poly[j]) + " of " +
                                      std::to_string(mesh.vertices.size()));
        }
        // trailing color fields ignored; fan-triangulate n-gons
        for (int j = 1; j + 1 < n; ++j)
            mesh.faces.push_back({poly[0], poly[j], poly[j + 1]});
    }
    return mesh;
}

namespace {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::array<double, 3> sub(const std::array<float, 3>& a, const std::array<float, 3>& b) {
    return {static_cast<double>(a[0]) - b[0], static_cast<double>(a[1]) - b[1],
            static_cast<double>(a[2]) - b[2]};
}

double triangle_area(const std::array<float, 3>& a, const std::array<float, 3>& b,
                     const std::array<float, 3>& c) {
    const auto u = sub(b, a), v = sub(c, a);
    const double cx = u[1] * v[2] - u[2] * v[1];
    const double cy = u[2] * v[0] - u[0] * v[2];
    const double cz = u[0] * v[1] - u[1] * v[0];
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

} // namespace

PointCloud sample_surface(const TriangleMesh& mesh, int n, uint64_t seed) {
    if (mesh.faces.empty()) throw DegenerateMesh("mesh has no faces");
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        total += triangle_area(mesh.vertices[face[0]], mesh.vertices[face[1]],
                               mesh.vertices[face[2]]);
        cumulative[f] = total;
    }
    if (!(total > 0.0)) throw DegenerateMesh("total surface area is zero");

    std::mt19937_64 rng(seed);
    PointCloud pc;
    pc.points.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double pick = uniform01(rng) * total;
        const size_t f = std::lower_bound(cumulative.begin(), cumulative.end(), pick) -
                         cumulative.begin();
        const auto& face = mesh.faces[std::min(f, mesh.faces.size() - 1)];
        const auto& a = mesh.vertices[face[0]];
        const auto& b = mesh.vertices[face[1]];
        const auto& c = mesh.vertices[face[2]];
        const double r1 = std::sqrt(uniform01(rng));
        const double r2 = uniform01(rng);
        const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
        PointCloud::Point p;
        p.x = static_cast<float>(wa * a[0] + wb * b[0] + wc * c[0]);
        p.y = static_cast<float>(wa * a[1] + wb * b[1] + wc * c[1]);
        p.z = static_cast<float>(wa * a[2] + wb * b[2] + wc * c[2]);
        pc.points.push_back(p);
    }

    // center on the sample centroid, scale the farthest point to radius 0.18
    double cx = 0, cy = 0, cz = 0;
    for (const auto& p : pc.points) { cx += p.x; cy += p.y; cz += p.z; }
    cx /= pc.size();
    cy /= pc.size();
    cz /= pc.size();
    double rmax = 0.0;
    for (const auto& p : pc.points) {
        const double dx = p.x - cx, dy = p.y - cy, dz = p.z - cz;
        rmax = std::max(rmax, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    const double scale = (rmax > 0.0) ? 0.18 / rmax : 1.0;
    for (auto& p : pc.points) {
        p.x = static_cast<float>((p.x - cx) * scale);
        p.y = static_cast<float>((p.y - cy) * scale);
        p.z = static_cast<float>((p.z - cz) * scale);
    }
    return pc;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw TruncatedFile("cannot open manifest " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    const auto dir = std::filesystem::path(path).parent_path();
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw MalformedRow("manifest line " + std::to_string(lineno) + ": expected path,label");
        ManifestEntry e;
        e.path = line.substr(0, comma);
        try {
            e.label = std::stoi(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw MalformedRow("manifest line " + std::to_string(lineno) + ": bad label");
        }
        if (!e.path.empty() && std::filesystem::path(e.path).is_relative())
            e.path = (dir / e.path).string();
        entries.push_back(std::move(e));
    }
    return entries;
}

PointCloud load_point_cloud(const std::string& path, int off_samples, uint64_t seed) {
    std::ifstream is(path);
    if (!is) throw TruncatedFile("cannot open " + path);
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".off" || ext == ".OFF") {
        const TriangleMesh mesh = parse_off(is);
        return sample_surface(mesh, off_samples, seed);
    }
    return parse_xyz(is);
}

} // namespace spikevox
