#include "spikevox/conv.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace spikevox {

KernelWeights make_kernel(const Kernel3& kernel, int c_in, int c_out, bool with_bias) {
    KernelWeights kw;
    kw.kernel = kernel;
    kw.c_in = c_in;
    kw.c_out = c_out;
    kw.w.assign(kw.weight_count(), 0.0f);
    if (with_bias) kw.bias.assign(c_out, 0.0f);
    return kw;
}

OpCounters& op_counters() {
    static thread_local OpCounters counters;
    return counters;
}

namespace {

void check_compatible(const SparseVoxelTensor& input, const KernelWeights& w,
                      const Rulebook& rb) {
    if (input.channels() != w.c_in)
        throw ChannelMismatch("input has " + std::to_string(input.channels()) +
                              " channels, kernel expects " + std::to_string(w.c_in));
    if (static_cast<size_t>(w.num_offsets()) != rb.offsets.size())
        throw ChannelMismatch("kernel offsets " + std::to_string(w.num_offsets()) +
                              " != rulebook offsets " + std::to_string(rb.offsets.size()));
    if (rb.input_signature != input.coord_signature())
        throw StaleRulebook("input coordinates changed since the rulebook was built");
}

} // namespace

SparseVoxelTensor ssc_forward(const SparseVoxelTensor& input, const KernelWeights& w,
                              const Rulebook& rb) {
    check_compatible(input, w, rb);
    const int n_out = static_cast<int>(rb.out_coords.size());
    FeatureMatrix out(n_out, w.c_out);
    OpCounters& ops = op_counters();

    if (!w.bias.empty())
        for (int o = 0; o < n_out; ++o) {
            float* orow = out.row(o);
            for (int co = 0; co < w.c_out; ++co) orow[co] = w.bias[co];
        }

    const FeatureMatrix& x = input.features();
    for (size_t k = 0; k < rb.pairs.size(); ++k) {
        for (const auto& [i, o] : rb.pairs[k]) {
            const float* xrow = x.row(i);
            float* orow = out.row(o);
            for (int ci = 0; ci < w.c_in; ++ci) {
                const float v = xrow[ci];
                if (v == 0.0f) continue; // event-driven skip, sum unchanged
                ops.multiplies += w.c_out;
                const float* wrow = w.plane(static_cast<int>(k), ci);
                for (int co = 0; co < w.c_out; ++co) orow[co] += v * wrow[co];
            }
        }
    }
    return SparseVoxelTensor(rb.out_coords, std::move(out), rb.out_shape);
}

SparseVoxelTensor ssc_forward_accumulate(const SparseVoxelTensor& input,
                                         const KernelWeights& w, const Rulebook& rb,
                                         int d_max) {
    check_compatible(input, w, rb);
    const int n_out = static_cast<int>(rb.out_coords.size());
    FeatureMatrix out(n_out, w.c_out);
    OpCounters& ops = op_counters();

    const FeatureMatrix& x = input.features();
    for (size_t k = 0; k < rb.pairs.size(); ++k) {
        for (const auto& [i, o] : rb.pairs[k]) {
            const float* xrow = x.row(i);
            float* orow = out.row(o);
            for (int ci = 0; ci < w.c_in; ++ci) {
                const float v = xrow[ci];
                const float r = std::nearbyint(v);
                if (v != r || v < 0.0f || v > static_cast<float>(d_max))
                    throw ValueOutOfRange("spike " + std::to_string(v) + " at row " +
                                          std::to_string(i) + " not an integer in [0," +
                                          std::to_string(d_max) + "]");
                const int s = static_cast<int>(r);
                if (s == 0) continue;
                ops.accumulates += static_cast<long long>(s) * w.c_out;
                const float* wrow = w.plane(static_cast<int>(k), ci);
                for (int j = 0; j < s; ++j)
                    for (int co = 0; co < w.c_out; ++co) orow[co] += wrow[co];
            }
        }
    }
    return SparseVoxelTensor(rb.out_coords, std::move(out), rb.out_shape);
}

SscGrads ssc_backward(const FeatureMatrix& grad_out, const SparseVoxelTensor& input,
                      const KernelWeights& w, const Rulebook& rb) {
    check_compatible(input, w, rb);
    if (grad_out.rows() != static_cast<int>(rb.out_coords.size()) ||
        grad_out.cols() != w.c_out)
        throw ShapeMismatch("grad_out " + std::to_string(grad_out.rows()) + "x" +
                            std::to_string(grad_out.cols()) + ", expected " +
                            std::to_string(rb.out_coords.size()) + "x" +
                            std::to_string(w.c_out));

    SscGrads g;
    g.grad_input = FeatureMatrix(input.num_active(), w.c_in);
    g.grad_w.assign(w.weight_count(), 0.0f);
    if (!w.bias.empty()) {
        g.grad_bias.assign(w.c_out, 0.0f);
        for (int o = 0; o < grad_out.rows(); ++o) {
            const float* grow = grad_out.row(o);
            for (int co = 0; co < w.c_out; ++co) g.grad_bias[co] += grow[co];
        }
    }

    const FeatureMatrix& x = input.features();
    for (size_t k = 0; k < rb.pairs.size(); ++k) {
        float* gwk = g.grad_w.data() + k * static_cast<size_t>(w.c_in) * w.c_out;
        for (const auto& [i, o] : rb.pairs[k]) {
            const float* grow = grad_out.row(o);
            const float* xrow = x.row(i);
            float* girow = g.grad_input.row(i);
            for (int ci = 0; ci < w.c_in; ++ci) {
                const float* wrow = w.plane(static_cast<int>(k), ci);
                float* gwrow = gwk + static_cast<size_t>(ci) * w.c_out;
                const float xi = xrow[ci];
                float acc = 0.0f;
                for (int co = 0; co < w.c_out; ++co) {
                    acc += wrow[co] * grow[co];
                    gwrow[co] += xi * grow[co];
                }
                girow[ci] += acc;
            }
        }
    }
    return g;
}

double count_flops(const Rulebook& rb, int c_in, int c_out, double firing_rate) {
    return 2.0 * firing_rate * static_cast<double>(rb.total_pairs()) * c_in * c_out;
}

double count_flops_dense(long long n_out_sites, const Kernel3& kernel, int c_in,
                         int c_out, double firing_rate) {
    const double kvol = static_cast<double>(kernel[0]) * kernel[1] * kernel[2];
    return 2.0 * firing_rate * static_cast<double>(n_out_sites) * kvol * c_in * c_out;
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(std::istream& is) {
    uint32_t v{};
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw TruncatedFile("swt stream ended mid-record");
    return v;
}

} // namespace

void write_swt(std::ostream& os, const std::vector<WeightRecord>& records) {
    os.write("SWT1", 4);
    put_u32(os, static_cast<uint32_t>(records.size()));
    for (const WeightRecord& r : records) {
        put_u32(os, r.num_offsets);
        put_u32(os, r.c_in);
        put_u32(os, r.c_out);
        os.write(reinterpret_cast<const char*>(r.w.data()),
                 static_cast<std::streamsize>(r.w.size() * sizeof(float)));
    }
}

std::vector<WeightRecord> read_swt(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SWT1", 4) != 0)
        throw BadHeader("missing SWT1 magic");
    const uint32_t n = get_u32(is);
    std::vector<WeightRecord> records(n);
    for (uint32_t i = 0; i < n; ++i) {
        WeightRecord& r = records[i];
        r.num_offsets = get_u32(is);
        r.c_in = get_u32(is);
        r.c_out = get_u32(is);
        r.w.resize(static_cast<size_t>(r.num_offsets) * r.c_in * r.c_out);
        is.read(reinterpret_cast<char*>(r.w.data()),
                static_cast<std::streamsize>(r.w.size() * sizeof(float)));
        if (!is) throw TruncatedFile("swt weight block short in record " + std::to_string(i));
    }
    return records;
}

void write_swt_file(const std::string& path, const std::vector<WeightRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw TruncatedFile("cannot open " + path + " for writing");
    write_swt(os, records);
}

std::vector<WeightRecord> read_swt_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TruncatedFile("cannot open " + path);
    return read_swt(is);
}

} // namespace spikevox
