#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "spikevox/rulebook.hpp"
#include "spikevox/sparse_tensor.hpp"

using namespace spikevox;

TEST_CASE("sparse tensor construction") {
    std::vector<VoxelCoord> coords{{0, 1, 1, 1}, {0, 2, 3, 4}};
    FeatureMatrix f(2, 4, 0.5f);

    SUBCASE("two sites on an 8^3 grid") {
        SparseVoxelTensor t(coords, f, {8, 8, 8});
        CHECK(t.num_active() == 2);
        CHECK(t.channels() == 4);
        CHECK(t.coords()[0] == coords[0]);
        CHECK(*t.row_of(coords[1]) == 1);
    }
    SUBCASE("duplicate coordinate rejected") {
        std::vector<VoxelCoord> dup{{0, 1, 1, 1}, {0, 1, 1, 1}};
        CHECK_THROWS_AS(SparseVoxelTensor(dup, f, {8, 8, 8}), DuplicateCoordinate);
    }
    SUBCASE("out-of-bounds coordinate rejected") {
        std::vector<VoxelCoord> oob{{0, 9, 0, 0}, {0, 0, 0, 0}};
        CHECK_THROWS_AS(SparseVoxelTensor(oob, f, {8, 8, 8}), OutOfBounds);
    }
    SUBCASE("row count mismatch rejected") {
        CHECK_THROWS_AS(SparseVoxelTensor(coords, FeatureMatrix(3, 4), {8, 8, 8}),
                        ShapeMismatch);
    }
}

TEST_CASE("lookup") {
    SparseVoxelTensor t({{0, 1, 2, 3}}, FeatureMatrix(1, 2, 1.0f), {4, 4, 4});
    CHECK(lookup(t, {0, 1, 2, 3}) == 0);
    CHECK_FALSE(lookup(t, {0, 0, 0, 0}).has_value());
    // outside the grid counts as empty space, not an error
    CHECK_FALSE(lookup(t, {0, 7, 0, 0}).has_value());
    CHECK_FALSE(lookup(t, {1, 1, 2, 3}).has_value());
}

TEST_CASE("kernel offsets") {
    const auto k3 = kernel_offsets({3, 3, 3});
    CHECK(k3.size() == 27);
    CHECK(k3.front() == Kernel3{-1, -1, -1});
    CHECK(k3.back() == Kernel3{1, 1, 1});
    CHECK(center_offset_index({3, 3, 3}) == 13);

    const auto k2 = kernel_offsets({2, 2, 2});
    CHECK(k2.size() == 8);
    CHECK(k2.front() == Kernel3{0, 0, 0});
    CHECK(k2.back() == Kernel3{1, 1, 1});
}

TEST_CASE("rulebook: two-site submanifold example") {
    // two adjacent active sites on a (3,3,1) grid, kernel 3x3x1
    std::vector<VoxelCoord> coords{{0, 0, 0, 0}, {0, 1, 0, 0}};
    FeatureMatrix f(2, 1, 1.0f);
    SparseVoxelTensor t(coords, f, {3, 3, 1});
    Rulebook rb = build_rulebook(t, {3, 3, 1}, {1, 1, 1}, ConvMode::submanifold);

    CHECK(rb.out_coords.size() == 2);
    // each site pairs with itself and its neighbor
    CHECK(rb.total_pairs() == 4);
    CHECK(testutil::rulebook_triples(rb, t) ==
          testutil::brute_force_triples(t, {3, 3, 1}, {1, 1, 1}, ConvMode::submanifold));
}

TEST_CASE("rulebook: all-zero features give an empty submanifold output") {
    std::vector<VoxelCoord> coords{{0, 0, 0, 0}, {0, 1, 0, 0}};
    SparseVoxelTensor t(coords, FeatureMatrix(2, 1, 0.0f), {3, 3, 1});
    Rulebook rb = build_rulebook(t, {3, 3, 1}, {1, 1, 1}, ConvMode::submanifold);
    CHECK(rb.out_coords.empty());
    CHECK(rb.total_pairs() == 0);
}

TEST_CASE("rulebook: single-site stride-2 downsample") {
    SparseVoxelTensor t({{0, 0, 0, 0}}, FeatureMatrix(1, 1, 1.0f), {4, 4, 4});
    Rulebook rb = build_rulebook(t, {2, 2, 2}, {2, 2, 2}, ConvMode::strided);
    CHECK(rb.out_coords.size() == 1);
    CHECK(rb.out_coords[0] == VoxelCoord{0, 0, 0, 0});
    CHECK(rb.total_pairs() == 1);
    CHECK(rb.out_shape == SpatialShape{2, 2, 2});
    CHECK(testutil::rulebook_triples(rb, t) ==
          testutil::brute_force_triples(t, {2, 2, 2}, {2, 2, 2}, ConvMode::strided));
}

TEST_CASE("rulebook: argument validation") {
    SparseVoxelTensor t({{0, 0, 0, 0}}, FeatureMatrix(1, 1, 1.0f), {4, 4, 4});
    CHECK_THROWS_AS(build_rulebook(t, {2, 2, 2}, {1, 1, 1}, ConvMode::submanifold),
                    InvalidKernel);
    CHECK_THROWS_AS(build_rulebook(t, {3, 3, 3}, {2, 2, 2}, ConvMode::submanifold),
                    InvalidStride);
    CHECK_THROWS_AS(build_rulebook(t, {0, 3, 3}, {1, 1, 1}, ConvMode::strided),
                    InvalidKernel);
    CHECK_THROWS_AS(build_rulebook(t, {2, 2, 2}, {0, 2, 2}, ConvMode::strided),
                    InvalidStride);
}

TEST_CASE("rulebook matches brute-force window enumeration on random grids") {
    std::mt19937_64 rng(2024);
    for (int it = 0; it < 60; ++it) {
        const int n = 2 + static_cast<int>(rng() % 5); // grids up to 6^3
        const SpatialShape shape{n, n, n};
        const double density = 0.05 + 0.45 * testutil::rng01(rng);
        const SparseVoxelTensor t = testutil::random_tensor(rng, shape, 2, density);

        {
            Rulebook rb = build_rulebook(t, {3, 3, 3}, {1, 1, 1}, ConvMode::submanifold);
            CHECK(testutil::rulebook_triples(rb, t) ==
                  testutil::brute_force_triples(t, {3, 3, 3}, {1, 1, 1},
                                                ConvMode::submanifold));
            // submanifold closure
            size_t active_rows = 0;
            for (int i = 0; i < t.num_active(); ++i)
                if (t.row_active(i)) ++active_rows;
            CHECK(rb.out_coords.size() == active_rows);
            for (const auto& c : rb.out_coords) CHECK(t.row_of(c).has_value());
        }
        {
            Rulebook rb = build_rulebook(t, {2, 2, 2}, {2, 2, 2}, ConvMode::strided);
            CHECK(testutil::rulebook_triples(rb, t) ==
                  testutil::brute_force_triples(t, {2, 2, 2}, {2, 2, 2},
                                                ConvMode::strided));
        }
        {
            // odd kernel with stride keeps the centered offsets
            Rulebook rb = build_rulebook(t, {3, 3, 3}, {2, 2, 2}, ConvMode::strided);
            CHECK(testutil::rulebook_triples(rb, t) ==
                  testutil::brute_force_triples(t, {3, 3, 3}, {2, 2, 2},
                                                ConvMode::strided));
        }
    }
}

TEST_CASE("rulebook pair geometry and ordering invariants") {
    std::mt19937_64 rng(77);
    for (int it = 0; it < 20; ++it) {
        const SparseVoxelTensor t = testutil::random_tensor(rng, {6, 6, 6}, 3, 0.3);
        for (ConvMode mode : {ConvMode::submanifold, ConvMode::strided}) {
            const Kernel3 kernel = mode == ConvMode::submanifold ? Kernel3{3, 3, 3}
                                                                 : Kernel3{2, 2, 2};
            const Stride3 stride = mode == ConvMode::submanifold ? Stride3{1, 1, 1}
                                                                 : Stride3{2, 2, 2};
            Rulebook rb = build_rulebook(t, kernel, stride, mode);

            // geometry: input coord = out coord * stride + offset
            for (size_t k = 0; k < rb.offsets.size(); ++k)
                for (const auto& [i, o] : rb.pairs[k]) {
                    const VoxelCoord& in = t.coords()[i];
                    const VoxelCoord& out = rb.out_coords[o];
                    CHECK(in.batch == out.batch);
                    CHECK(in.x == out.x * stride[0] + rb.offsets[k][0]);
                    CHECK(in.y == out.y * stride[1] + rb.offsets[k][1]);
                    CHECK(in.z == out.z * stride[2] + rb.offsets[k][2]);
                }

            // ordering: sorted by (output_row, input_row), no duplicates
            for (const auto& plist : rb.pairs) {
                for (size_t j = 1; j < plist.size(); ++j)
                    CHECK(std::tie(plist[j - 1].second, plist[j - 1].first) <
                          std::tie(plist[j].second, plist[j].first));
            }

            // determinism: a rebuild is identical
            Rulebook rb2 = build_rulebook(t, kernel, stride, mode);
            CHECK(rb.out_coords == rb2.out_coords);
            CHECK(rb.pairs == rb2.pairs);
        }
    }
}

TEST_CASE("svt round trip and byte layout") {
    std::vector<VoxelCoord> coords{{0, 1, 2, 3}, {1, 4, 5, 6}};
    FeatureMatrix f(2, 2);
    f.at(0, 0) = 1.5f;
    f.at(0, 1) = -2.0f;
    f.at(1, 0) = 0.25f;
    f.at(1, 1) = 4.0f;
    SparseVoxelTensor t(coords, f, {8, 8, 8});

    std::ostringstream os(std::ios::binary);
    write_svt(os, t);
    const std::string bytes = os.str();
    REQUIRE(bytes.size() == 4 + 4 + 4 + 12 + 2 * 16 + 2 * 2 * 4);
    CHECK(bytes.substr(0, 4) == "SVT1");
    // little-endian u32 num_active
    CHECK(static_cast<unsigned char>(bytes[4]) == 2);
    CHECK(static_cast<unsigned char>(bytes[5]) == 0);

    std::istringstream is(bytes, std::ios::binary);
    SparseVoxelTensor rt = read_svt(is);
    CHECK(rt.coords() == t.coords());
    CHECK(rt.features() == t.features());
    CHECK(rt.spatial_shape() == t.spatial_shape());

    std::istringstream bad("SVXX", std::ios::binary);
    CHECK_THROWS_AS(read_svt(bad), BadHeader);
    std::istringstream trunc(bytes.substr(0, 20), std::ios::binary);
    CHECK_THROWS_AS(read_svt(trunc), TruncatedFile);
}
