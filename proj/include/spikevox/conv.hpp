#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spikevox/rulebook.hpp"
#include "spikevox/sparse_tensor.hpp"

namespace spikevox {

/// Convolution weights: one (c_in x c_out) plane per kernel offset, offsets
/// in the canonical kernel_offsets() order. Bias is optional and unused in
/// the backbone (the accumulate-only inference path has no bias adds).
struct KernelWeights {
    Kernel3 kernel{1, 1, 1};
    int c_in = 0;
    int c_out = 0;
    std::vector<float> w;    // [num_offsets][c_in][c_out], row-major
    std::vector<float> bias; // empty = no bias

    int num_offsets() const { return kernel[0] * kernel[1] * kernel[2]; }
    size_t weight_count() const {
        return static_cast<size_t>(num_offsets()) * c_in * c_out;
    }
    float& at(int k, int ci, int co) {
        return w[(static_cast<size_t>(k) * c_in + ci) * c_out + co];
    }
    float at(int k, int ci, int co) const {
        return w[(static_cast<size_t>(k) * c_in + ci) * c_out + co];
    }
    const float* plane(int k, int ci) const {
        return w.data() + (static_cast<size_t>(k) * c_in + ci) * c_out;
    }
};

KernelWeights make_kernel(const Kernel3& kernel, int c_in, int c_out,
                          bool with_bias = false);

/// Operation counters for the energy audit. multiplies counts executed
/// multiply-accumulates (zero input entries are skipped — they cannot change
/// the sum); accumulates counts pure additions under virtual-timestep
/// semantics, where an integer spike of magnitude s costs s weight adds.
struct OpCounters {
    long long multiplies = 0;
    long long accumulates = 0;
    void reset() { multiplies = accumulates = 0; }
};
OpCounters& op_counters();

/// Gather-multiply-scatter sparse convolution. Output rows follow
/// rb.out_coords; values are membrane potentials (not yet spiked).
/// Accumulation order is offset-major then (output_row, input_row), so
/// repeated runs are bit-identical.
SparseVoxelTensor ssc_forward(const SparseVoxelTensor& input, const KernelWeights& w,
                              const Rulebook& rb);

/// Addition-only forward over the virtual-timestep expansion: each integer
/// spike of magnitude s contributes its weight column s times. Input entries
/// must be integers in [0, d_max].
SparseVoxelTensor ssc_forward_accumulate(const SparseVoxelTensor& input,
                                         const KernelWeights& w, const Rulebook& rb,
                                         int d_max);

struct SscGrads {
    FeatureMatrix grad_input;     // num_active x c_in
    std::vector<float> grad_w;    // same layout as KernelWeights::w
    std::vector<float> grad_bias; // present iff the layer has bias
};

/// Transpose of ssc_forward: grad_input[i] += W_k^T * grad_out[o] and
/// grad_w[k] += S_i (outer) grad_out[o] over all pairs, deterministic order.
SscGrads ssc_backward(const FeatureMatrix& grad_out, const SparseVoxelTensor& input,
                      const KernelWeights& w, const Rulebook& rb);

/// FLOPs of rulebook-addressed sparse convolution: 2 * fr * N_r * c_in * c_out.
double count_flops(const Rulebook& rb, int c_in, int c_out, double firing_rate);

/// FLOPs of the dense counterpart: 2 * fr * n_out_sites * k^3 * c_in * c_out.
double count_flops_dense(long long n_out_sites, const Kernel3& kernel, int c_in,
                         int c_out, double firing_rate);

// ".swt" checkpoint format: magic "SWT1", u32 record count, then per record
// u32 num_offsets, u32 c_in, u32 c_out and num_offsets*c_in*c_out float32
// weights row-major.
struct WeightRecord {
    uint32_t num_offsets = 0;
    uint32_t c_in = 0;
    uint32_t c_out = 0;
    std::vector<float> w;
};

void write_swt(std::ostream& os, const std::vector<WeightRecord>& records);
std::vector<WeightRecord> read_swt(std::istream& is);
void write_swt_file(const std::string& path, const std::vector<WeightRecord>& records);
std::vector<WeightRecord> read_swt_file(const std::string& path);

} // namespace spikevox
