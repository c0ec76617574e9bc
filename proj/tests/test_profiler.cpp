#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "spikevox/profile.hpp"

using namespace spikevox;

TEST_CASE("measure_firing_rate") {
    SUBCASE("all zeros") {
        SparseVoxelTensor t({{0, 0, 0, 0}}, FeatureMatrix(1, 4, 0.0f), {2, 2, 2});
        auto [fb, fi] = measure_firing_rate(t, 4);
        CHECK(fb == 0.0);
        CHECK(fi == 0.0);
    }
    SUBCASE("all saturated") {
        SparseVoxelTensor t({{0, 0, 0, 0}}, FeatureMatrix(1, 4, 4.0f), {2, 2, 2});
        auto [fb, fi] = measure_firing_rate(t, 4);
        CHECK(fb == 1.0);
        CHECK(fi == 4.0);
    }
    SUBCASE("half the entries at 2") {
        FeatureMatrix f(2, 2);
        f.at(0, 0) = 2.0f;
        f.at(1, 1) = 2.0f;
        SparseVoxelTensor t({{0, 0, 0, 0}, {0, 1, 0, 0}}, f, {2, 2, 2});
        auto [fb, fi] = measure_firing_rate(t, 4);
        CHECK(fb == doctest::Approx(0.5));
        CHECK(fi == doctest::Approx(1.0));
    }
}

TEST_CASE("estimate_energy on synthetic stats") {
    EnergyModel em; // 4.6 pJ per MAC, 0.9 pJ per AC

    SUBCASE("analog stem only: 1000 MACs cost 4.6 nJ") {
        FiringStats s;
        s.timesteps = 1;
        LayerEnergyStats l;
        l.name = "stem";
        l.mac = true;
        l.flops = 1000.0;
        s.layers.push_back(l);
        CHECK(estimate_energy_joules(s, em) == doctest::Approx(4.6e-9).epsilon(1e-12));
    }
    SUBCASE("one spiking layer at half rate costs 0.45 nJ") {
        FiringStats s;
        s.timesteps = 1;
        LayerEnergyStats l;
        l.name = "conv";
        l.mac = false;
        l.flops = 1000.0;
        l.fr_integer = 0.5;
        s.layers.push_back(l);
        CHECK(estimate_energy_joules(s, em) == doctest::Approx(0.45e-9).epsilon(1e-12));
    }
    SUBCASE("silent spiking layers leave only the stem term") {
        FiringStats s;
        s.timesteps = 2;
        LayerEnergyStats stem;
        stem.name = "stem";
        stem.mac = true;
        stem.flops = 500.0;
        s.layers.push_back(stem);
        for (int i = 0; i < 3; ++i) {
            LayerEnergyStats l;
            l.name = "conv" + std::to_string(i);
            l.flops = 1e6;
            l.fr_integer = 0.0;
            s.layers.push_back(l);
        }
        CHECK(estimate_energy_joules(s, em) == doctest::Approx(4.6e-12 * 500).epsilon(1e-12));
    }
    SUBCASE("missing stats raise") {
        CHECK_THROWS_AS(estimate_energy_joules(FiringStats{}, em), MissingLayerStats);
    }
}

TEST_CASE("energy is monotone in rate, timesteps and width") {
    EnergyModel em;
    auto make = [](double fr, int timesteps, double flops) {
        FiringStats s;
        s.timesteps = timesteps;
        LayerEnergyStats l;
        l.name = "conv";
        l.flops = flops;
        l.fr_integer = fr;
        s.layers.push_back(l);
        return s;
    };
    CHECK(estimate_energy_joules(make(0.5, 1, 1000), em) <
          estimate_energy_joules(make(0.9, 1, 1000), em));
    CHECK(estimate_energy_joules(make(0.5, 1, 1000), em) <
          estimate_energy_joules(make(0.5, 4, 1000), em));
    CHECK(estimate_energy_joules(make(0.5, 1, 1000), em) <
          estimate_energy_joules(make(0.5, 1, 2000), em));
}

TEST_CASE("instrumented op counts match the rate-scaled rulebook prediction") {
    std::mt19937_64 rng(404);
    long long executed_mults = 0, executed_adds = 0;
    double predicted_mults = 0.0, predicted_adds = 0.0;
    for (int it = 0; it < 20; ++it) {
        const SparseVoxelTensor t =
            testutil::random_spike_tensor(rng, {6, 6, 6}, 8, 0.5, 4, 0.5);
        const KernelWeights w = testutil::random_kernel(rng, {3, 3, 3}, 8, 8);
        Rulebook rb = build_rulebook(t, {3, 3, 3}, {1, 1, 1}, ConvMode::submanifold);

        auto [fr_bin, fr_int] = measure_firing_rate(t, 4);
        predicted_mults += fr_bin * static_cast<double>(rb.total_pairs()) * 8 * 8;
        predicted_adds += fr_int * static_cast<double>(rb.total_pairs()) * 8 * 8;

        op_counters().reset();
        ssc_forward(t, w, rb);
        executed_mults += op_counters().multiplies;
        op_counters().reset();
        ssc_forward_accumulate(t, w, rb, 4);
        executed_adds += op_counters().accumulates;
    }
    CHECK(std::fabs(executed_mults - predicted_mults) <= 0.01 * predicted_mults);
    CHECK(std::fabs(executed_adds - predicted_adds) <= 0.01 * predicted_adds);
}

TEST_CASE("network trace: sparse energy undercuts the dense path") {
    std::mt19937_64 rng(808);
    NetworkSpec spec;
    spec.variant = "custom";
    spec.blocks_per_stage = {1, 1, 1, 1};
    spec.channels_per_stage = {8, 8, 8, 8};
    spec.stem_channels = 8;
    spec.in_channels = 3;
    spec.num_classes = 4;
    Network net(spec);
    net.init_weights(2);

    std::vector<VoxelCoord> coords;
    std::unordered_map<VoxelCoord, int, VoxelCoordHash> seen;
    while (coords.size() < 60) {
        VoxelCoord c{0, static_cast<int32_t>(rng() % 24), static_cast<int32_t>(rng() % 24),
                     static_cast<int32_t>(rng() % 24)};
        if (seen.emplace(c, 1).second) coords.push_back(c);
    }
    FeatureMatrix f(60, 3);
    for (float& v : f.data()) v = testutil::rng_uniform(rng, -0.5f, 0.5f);
    SparseVoxelTensor input(coords, f, {24, 24, 24});

    ForwardTrace trace;
    net.backbone_forward(input, &trace);
    const FiringStats stats = stats_from_trace(trace);
    REQUIRE_FALSE(stats.layers.empty());

    EnergyModel em;
    const double sparse = estimate_energy_joules(stats, em);
    const double dense = estimate_dense_energy_joules(stats, em);
    CHECK(sparse > 0.0);
    CHECK(sparse < dense);

    // per-layer rates stay strictly below saturation on sparse input
    for (const auto& l : stats.layers)
        if (!l.mac) CHECK(l.fr_binary < 1.0);

    const std::string report = format_profile_report(stats, em);
    CHECK(report.find("svc.conv1") != std::string::npos);
    CHECK(report.find("total sparse energy") != std::string::npos);
}
