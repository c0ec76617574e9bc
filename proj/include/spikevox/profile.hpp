#pragma once
#include <string>
#include <utility>
#include <vector>

#include "spikevox/net.hpp"
#include "spikevox/sparse_tensor.hpp"

namespace spikevox {

struct EnergyModel {
    double e_mac_pj = 4.6; // picojoules per multiply-accumulate
    double e_ac_pj = 0.9;  // picojoules per accumulate
};

/// Per-layer accounting snapshot. `flops` is the firing-rate-free
/// multiply-accumulate count (rulebook pairs x c_in x c_out); the energy
/// estimate discounts spiking layers by their firing rate, while the analog
/// first layer is charged in full as MACs.
struct LayerEnergyStats {
    std::string name;
    bool mac = false;
    double fr_binary = 0.0;  // fraction of nonzero input entries
    double fr_integer = 0.0; // mean integer spike magnitude (effective rate)
    double rulebook_pairs = 0.0;
    int c_in = 0, c_out = 0;
    double flops = 0.0;       // pairs * c_in * c_out
    double dense_flops = 0.0; // dense counterpart: sites * k^3 * c_in * c_out
};

struct FiringStats {
    std::vector<LayerEnergyStats> layers;
    int timesteps = 1;
    int d_max = 4;
};

/// (fraction of nonzero entries, mean spike magnitude). The mean magnitude
/// drives the accumulate count: an integer spike of value s costs s adds
/// under virtual-timestep expansion.
std::pair<double, double> measure_firing_rate(const SparseVoxelTensor& spikes, int d_max);

FiringStats stats_from_trace(const ForwardTrace& trace);

/// Total inference energy in joules:
///   E = e_mac * FL_1  +  e_ac * T * sum_{spiking layers} FL_n * fr_n
/// with fr_n the effective (integer) firing rate. Throws MissingLayerStats
/// on an empty or inconsistent stats set.
double estimate_energy_joules(const FiringStats& stats, const EnergyModel& model);

/// Energy of the equivalent dense path: every layer charged e_mac over its
/// dense FLOP count, no activity discount.
double estimate_dense_energy_joules(const FiringStats& stats, const EnergyModel& model);

std::string format_profile_report(const FiringStats& stats, const EnergyModel& model);

} // namespace spikevox
