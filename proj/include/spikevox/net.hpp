#pragma once
#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "spikevox/conv.hpp"
#include "spikevox/neurons.hpp"
#include "spikevox/rulebook.hpp"
#include "spikevox/sparse_tensor.hpp"
#include "spikevox/voxelize.hpp"

namespace spikevox {

/// Declarative backbone description: a spike-coding stem followed by four
/// stages of (downsample, residual blocks).
struct NetworkSpec {
    std::string variant = "T"; // T, S, B, L or custom
    std::array<int, 4> blocks_per_stage{1, 1, 1, 1};
    std::array<int, 4> channels_per_stage{16, 32, 64, 128};
    int stem_channels = 16;
    int svc_depth = 2;   // conv+neuron repetitions in the coding stem
    int block_depth = 2; // trailing conv+neuron pairs per residual block
    int timesteps = 1;
    int d_max = 4;
    int num_classes = 4;
    int in_channels = 3;
    float beta = 0.5f;
    float v_th = 1.0f;

    static NetworkSpec preset(const std::string& variant, int num_classes,
                              int in_channels);
    void validate() const;
    NeuronParams neuron_params() const {
        return NeuronParams{beta, v_th, d_max};
    }
};

/// Per-layer counters collected during forward passes. fr_* and pairs are
/// sums over recorded passes; divide by `records` for per-pass means.
struct LayerTraceEntry {
    std::string name;
    bool mac = false; // analog-input layer (first stem conv)
    int c_in = 0, c_out = 0;
    double fr_binary_sum = 0.0;
    double fr_integer_sum = 0.0;
    double pairs_sum = 0.0;
    double dense_sites_sum = 0.0; // dense-counterpart output sites
    double kernel_volume = 1.0;
    long long records = 0;

    double mean_fr_binary() const { return records ? fr_binary_sum / records : 0.0; }
    double mean_fr_integer() const { return records ? fr_integer_sum / records : 0.0; }
    double mean_pairs() const { return records ? pairs_sum / records : 0.0; }
    double mean_dense_sites() const { return records ? dense_sites_sum / records : 0.0; }
};

struct ForwardTrace {
    std::vector<LayerTraceEntry> layers;
    int timesteps = 1;
    int d_max = 4;

    LayerTraceEntry& entry(const std::string& name);
};

struct ParamView {
    std::vector<float>* w = nullptr;
    std::vector<float>* g = nullptr;
};

/// One sparse convolution with taped forward for backprop. In submanifold
/// mode the output is re-embedded onto the input coordinate frame (silent
/// centers become explicit zero rows), so frames stay stable across layers,
/// timesteps and residual adds.
class SparseConvLayer {
public:
    SparseConvLayer(std::string name, const Kernel3& kernel, const Stride3& stride,
                    ConvMode mode, int c_in, int c_out, bool analog_input);

    SparseVoxelTensor forward(const SparseVoxelTensor& x, bool keep_tape,
                              ForwardTrace* trace);
    /// grad wrt this layer's output rows -> grad wrt input rows; consumes the
    /// most recent tape frame.
    FeatureMatrix backward(const FeatureMatrix& grad_out);

    void zero_grad() { std::fill(grad_w.begin(), grad_w.end(), 0.0f); }
    void clear_tape() { tape_.clear(); }
    ParamView param() { return {&weights.w, &grad_w}; }

    std::string name;
    Kernel3 kernel;
    Stride3 stride;
    ConvMode mode;
    bool analog_input;
    KernelWeights weights;
    std::vector<float> grad_w;

private:
    struct Tape {
        SparseVoxelTensor input;
        Rulebook rb;
        std::vector<int> out_to_frame; // submanifold: rb out row -> input row
    };
    std::vector<Tape> tape_;
};

/// Integer-LIF activation with membrane state carried across timesteps and
/// the rectangular-window surrogate on the way back.
class IlifLayer {
public:
    explicit IlifLayer(const NeuronParams& params) : params(params) {}

    FeatureMatrix forward(const FeatureMatrix& x, bool keep_tape);
    FeatureMatrix backward(const FeatureMatrix& grad_spikes);
    void reset();

    NeuronParams params;
    bool rounding = true; // false = continuous clip ramp (gradient checks)

private:
    NeuronState state_;
    std::vector<FeatureMatrix> tape_u_;
    FeatureMatrix grad_h_carry_;
};

/// Spike Voxel Coding stem: svc_depth x (submanifold conv 3^3 -> I-LIF),
/// turning real voxel features into integer spike trains.
class SvcStem {
public:
    SvcStem(const NetworkSpec& spec);
    SparseVoxelTensor forward(const SparseVoxelTensor& v, bool keep_tape,
                              ForwardTrace* trace);
    FeatureMatrix backward(const FeatureMatrix& grad_out);
    void reset();

    std::vector<SparseConvLayer> convs;
    std::vector<IlifLayer> neurons;
};

/// Spiking neuron followed by a kernel-2 stride-2 sparse conv; halves each
/// spatial extent.
class DownsampleLayer {
public:
    DownsampleLayer(std::string name, const NetworkSpec& spec, int c_in, int c_out);
    SparseVoxelTensor forward(const SparseVoxelTensor& u, bool keep_tape,
                              ForwardTrace* trace);
    FeatureMatrix backward(const FeatureMatrix& grad_out);
    void reset();

    IlifLayer sn;
    SparseConvLayer conv;
};

/// Residual block on membrane potentials:
///   U' = SSC(SN(U)) + U
///   out = SSC^m(SN^m(U')) + U'
/// All convs are 3^3 stride-1 submanifold, so the coordinate frame is
/// preserved and both adds are row-aligned. With zeroed conv weights the
/// block is the identity.
class BasicBlock {
public:
    BasicBlock(std::string name, const NetworkSpec& spec, int channels);
    SparseVoxelTensor forward(const SparseVoxelTensor& u, bool keep_tape,
                              ForwardTrace* trace);
    FeatureMatrix backward(const FeatureMatrix& grad_out);
    void reset();

    IlifLayer sn_in;
    SparseConvLayer conv_in;
    std::vector<IlifLayer> sns;
    std::vector<SparseConvLayer> convs;
};

/// Global average pool over active sites, then a fully connected layer.
/// Throws EmptyFeatures when no sites are active.
std::vector<float> classify_head(const SparseVoxelTensor& features,
                                 const FeatureMatrix& head_w,
                                 const std::vector<float>& head_bias,
                                 int num_classes);

struct SampleForward {
    std::vector<std::vector<float>> logits_per_t;
    std::vector<float> mean_logits;
};

/// The full spiking backbone plus classification head.
class Network {
public:
    explicit Network(const NetworkSpec& spec);

    void init_weights(uint64_t seed);

    /// Clears neuron states and tapes; call at the start of every sample.
    void begin_sample();

    /// One timestep through stem, stages, head. Input features must be
    /// real-valued voxel features; the same tensor is fed at every timestep
    /// (direct coding of static clouds).
    std::vector<float> forward_t(const SparseVoxelTensor& input, bool keep_tape,
                                 ForwardTrace* trace);
    /// Backward for one timestep; call in reverse timestep order.
    void backward_t(const std::vector<float>& grad_logits);

    /// Runs all timesteps with state carried across them.
    SampleForward forward_sample(const SparseVoxelTensor& input, bool keep_tape,
                                 ForwardTrace* trace = nullptr);
    void backward_sample(const std::vector<std::vector<float>>& grad_logits_per_t);

    /// Coding stem only, single timestep with fresh state.
    SparseVoxelTensor encode(const SparseVoxelTensor& v);

    /// Stem + stages across all timesteps; returns the final-timestep
    /// feature tensor. Throws EmptyCloud on an empty input.
    SparseVoxelTensor backbone_forward(const SparseVoxelTensor& v, ForwardTrace* trace);

    std::vector<ParamView> params();
    void zero_grad();
    long long param_count();

    std::vector<WeightRecord> to_records() const;
    void from_records(const std::vector<WeightRecord>& records);

    NetworkSpec spec;
    SvcStem stem;
    struct Stage {
        DownsampleLayer down;
        std::vector<BasicBlock> blocks;
    };
    std::vector<Stage> stages;
    IlifLayer head_sn;
    FeatureMatrix head_w; // c_in x num_classes
    std::vector<float> head_bias;
    FeatureMatrix grad_head_w;
    std::vector<float> grad_head_bias;

    /// Gradient checks flip this to run every neuron as a continuous clip
    /// ramp, whose exact derivative is the surrogate window.
    void set_rounding(bool rounding);

private:
    struct HeadTape {
        SparseVoxelTensor features; // backbone output (pre head-SN)
        std::vector<float> pooled;  // pooled spikes
        int rows = 0;
    };
    std::vector<HeadTape> head_tape_;
    SparseVoxelTensor forward_backbone_t(const SparseVoxelTensor& input, bool keep_tape,
                                         ForwardTrace* trace);
};

// Pipeline configuration file: flat key=value lines covering both the
// network and the voxelizer, so a checkpoint can be re-run bit-compatibly.
struct PipelineConfig {
    NetworkSpec net;
    VoxelConfig voxel;
};

void write_config(std::ostream& os, const PipelineConfig& cfg);
PipelineConfig read_config(std::istream& is);
void write_config_file(const std::string& path, const PipelineConfig& cfg);
PipelineConfig read_config_file(const std::string& path);

} // namespace spikevox
