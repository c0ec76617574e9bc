#include "spikevox/profile.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace spikevox {

std::pair<double, double> measure_firing_rate(const SparseVoxelTensor& spikes,
                                              int /*d_max*/) {
    const auto& d = spikes.features().data();
    if (d.empty()) return {0.0, 0.0};
    long long nnz = 0;
    double mag = 0.0;
    for (float v : d) {
        if (v != 0.0f) ++nnz;
        mag += std::fabs(v);
    }
    const double n = static_cast<double>(d.size());
    return {static_cast<double>(nnz) / n, mag / n};
}

FiringStats stats_from_trace(const ForwardTrace& trace) {
    FiringStats s;
    s.timesteps = trace.timesteps;
    s.d_max = trace.d_max;
    for (const auto& e : trace.layers) {
        LayerEnergyStats l;
        l.name = e.name;
        l.mac = e.mac;
        l.fr_binary = e.mean_fr_binary();
        l.fr_integer = e.mean_fr_integer();
        l.rulebook_pairs = e.mean_pairs();
        l.c_in = e.c_in;
        l.c_out = e.c_out;
        l.flops = e.mean_pairs() * e.c_in * e.c_out;
        l.dense_flops = e.mean_dense_sites() * e.kernel_volume * e.c_in * e.c_out;
        s.layers.push_back(std::move(l));
    }
    return s;
}

namespace {

void check_stats(const FiringStats& stats) {
    if (stats.layers.empty()) throw MissingLayerStats("no layer statistics recorded");
    for (const auto& l : stats.layers)
        if (l.flops < 0 || l.fr_binary < 0 || l.fr_integer < 0 || l.rulebook_pairs < 0)
            throw MissingLayerStats("negative counters in layer " + l.name);
}

} // namespace

double estimate_energy_joules(const FiringStats& stats, const EnergyModel& model) {
    check_stats(stats);
    double pj = 0.0;
    for (const auto& l : stats.layers) {
        if (l.mac)
            pj += model.e_mac_pj * l.flops;
        else
            pj += model.e_ac_pj * stats.timesteps * l.flops * l.fr_integer;
    }
    return pj * 1e-12;
}

double estimate_dense_energy_joules(const FiringStats& stats, const EnergyModel& model) {
    check_stats(stats);
    double pj = 0.0;
    for (const auto& l : stats.layers) pj += model.e_mac_pj * l.dense_flops;
    return pj * 1e-12;
}

std::string format_profile_report(const FiringStats& stats, const EnergyModel& model) {
    std::ostringstream os;
    os << "layer                    op    N_r        fr_bin  fr_int  MACs         pJ\n";
    double total_pj = 0.0;
    for (const auto& l : stats.layers) {
        const double pj = l.mac ? model.e_mac_pj * l.flops
                                : model.e_ac_pj * stats.timesteps * l.flops * l.fr_integer;
        total_pj += pj;
        os << std::left << std::setw(24) << l.name << " " << std::setw(5)
           << (l.mac ? "MAC" : "AC") << " " << std::setw(10) << std::right
           << static_cast<long long>(l.rulebook_pairs) << " " << std::fixed
           << std::setprecision(4) << std::setw(7) << l.fr_binary << " " << std::setw(7)
           << l.fr_integer << " " << std::setw(12)
           << static_cast<long long>(l.flops) << " " << std::setprecision(1)
           << std::setw(12) << pj << "\n";
    }
    const double sparse_j = estimate_energy_joules(stats, model);
    const double dense_j = estimate_dense_energy_joules(stats, model);
    os << std::setprecision(6);
    os << "timesteps=" << stats.timesteps << " d_max=" << stats.d_max << "\n";
    os << "total sparse energy: " << sparse_j * 1e3 << " mJ (" << total_pj << " pJ)\n";
    os << "dense-path energy:   " << dense_j * 1e3 << " mJ\n";
    if (dense_j > 0.0) os << "reduction: " << dense_j / std::max(sparse_j, 1e-30) << "x\n";
    return os.str();
}

} // namespace spikevox
