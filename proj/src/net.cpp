#include "spikevox/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace spikevox {

namespace {

inline double rng01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void add_rows(FeatureMatrix& dst, const FeatureMatrix& src) {
    if (!dst.same_shape(src))
        throw CoordMismatch("row-aligned add on " + std::to_string(dst.rows()) + "x" +
                            std::to_string(dst.cols()) + " vs " + std::to_string(src.rows()) +
                            "x" + std::to_string(src.cols()));
    for (size_t i = 0; i < dst.data().size(); ++i) dst.data()[i] += src.data()[i];
}

std::array<int, 4> parse_int4(const std::string& s) {
    std::array<int, 4> out{};
    std::istringstream ss(s);
    std::string tok;
    for (int i = 0; i < 4; ++i) {
        if (!std::getline(ss, tok, ',')) throw BadHeader("expected 4 ints in '" + s + "'");
        out[i] = std::stoi(tok);
    }
    return out;
}

std::array<float, 3> parse_float3(const std::string& s) {
    std::array<float, 3> out{};
    std::istringstream ss(s);
    std::string tok;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, tok, ',')) throw BadHeader("expected 3 floats in '" + s + "'");
        out[i] = std::stof(tok);
    }
    return out;
}

template <typename T, size_t N>
std::string join(const std::array<T, N>& a) {
    std::ostringstream os;
    for (size_t i = 0; i < N; ++i) {
        if (i) os << ",";
        os << a[i];
    }
    return os.str();
}

} // namespace

NetworkSpec NetworkSpec::preset(const std::string& variant, int num_classes,
                                int in_channels) {
    NetworkSpec s;
    s.variant = variant;
    s.num_classes = num_classes;
    s.in_channels = in_channels;
    if (variant == "T") {
        s.blocks_per_stage = {1, 1, 1, 1};
        s.channels_per_stage = {16, 32, 64, 128};
    } else if (variant == "S") {
        s.blocks_per_stage = {1, 1, 1, 1};
        s.channels_per_stage = {24, 48, 96, 160};
    } else if (variant == "B") {
        s.blocks_per_stage = {2, 2, 2, 2};
        s.channels_per_stage = {16, 32, 64, 128};
    } else if (variant == "L") {
        s.blocks_per_stage = {2, 2, 2, 2};
        s.channels_per_stage = {64, 128, 128, 256};
    } else if (variant == "custom") {
        // caller fills the fields
    } else {
        throw BadHeader("unknown variant '" + variant + "'");
    }
    s.stem_channels = s.channels_per_stage[0];
    s.validate();
    return s;
}

void NetworkSpec::validate() const {
    for (int c : channels_per_stage)
        if (c <= 0) throw ShapeMismatch("stage channels must be positive");
    for (int b : blocks_per_stage)
        if (b < 0) throw ShapeMismatch("blocks per stage must be >= 0");
    if (stem_channels <= 0 || svc_depth < 1 || block_depth < 1)
        throw ShapeMismatch("stem_channels/svc_depth/block_depth out of range");
    if (timesteps < 1 || d_max < 1 || num_classes < 1 || in_channels < 1)
        throw ShapeMismatch("timesteps/d_max/num_classes/in_channels out of range");
    if (!(beta > 0.0f && beta <= 1.0f) || !(v_th > 0.0f))
        throw ShapeMismatch("neuron parameters out of range");
}

LayerTraceEntry& ForwardTrace::entry(const std::string& name) {
    for (auto& e : layers)
        if (e.name == name) return e;
    layers.emplace_back();
    layers.back().name = name;
    return layers.back();
}

// ---------------------------------------------------------------------------
// SparseConvLayer

SparseConvLayer::SparseConvLayer(std::string name_, const Kernel3& kernel_,
                                 const Stride3& stride_, ConvMode mode_, int c_in,
                                 int c_out, bool analog_input_)
    : name(std::move(name_)), kernel(kernel_), stride(stride_), mode(mode_),
      analog_input(analog_input_) {
    weights = make_kernel(kernel, c_in, c_out, /*with_bias=*/false);
    grad_w.assign(weights.weight_count(), 0.0f);
}

SparseVoxelTensor SparseConvLayer::forward(const SparseVoxelTensor& x, bool keep_tape,
                                           ForwardTrace* trace) {
    Rulebook rb = build_rulebook(x, kernel, stride, mode);

    if (trace) {
        LayerTraceEntry& e = trace->entry(name);
        e.mac = analog_input;
        e.c_in = weights.c_in;
        e.c_out = weights.c_out;
        e.kernel_volume = static_cast<double>(kernel[0]) * kernel[1] * kernel[2];
        const FeatureMatrix& f = x.features();
        const size_t total = f.size();
        if (total > 0) {
            long long nnz = 0;
            double mag = 0.0;
            for (float v : f.data()) {
                if (v != 0.0f) ++nnz;
                mag += std::fabs(v);
            }
            e.fr_binary_sum += static_cast<double>(nnz) / static_cast<double>(total);
            e.fr_integer_sum += mag / static_cast<double>(total);
        }
        e.pairs_sum += static_cast<double>(rb.total_pairs());
        e.dense_sites_sum += static_cast<double>(rb.out_shape[0]) * rb.out_shape[1] *
                             rb.out_shape[2];
        e.records += 1;
    }

    SparseVoxelTensor y = ssc_forward(x, weights, rb);

    if (mode == ConvMode::strided) {
        if (keep_tape) tape_.push_back({x, std::move(rb), {}});
        return y;
    }

    // submanifold: scatter active-center rows back onto the input frame so
    // downstream residual adds and neuron states stay row-aligned
    std::vector<int> out_to_frame(y.num_active());
    FeatureMatrix full(x.num_active(), weights.c_out);
    for (int o = 0; o < y.num_active(); ++o) {
        const int frame_row = *x.row_of(rb.out_coords[o]);
        out_to_frame[o] = frame_row;
        const float* src = y.features().row(o);
        float* dst = full.row(frame_row);
        for (int c = 0; c < weights.c_out; ++c) dst[c] = src[c];
    }
    if (keep_tape) tape_.push_back({x, std::move(rb), std::move(out_to_frame)});
    return x.with_features(std::move(full));
}

FeatureMatrix SparseConvLayer::backward(const FeatureMatrix& grad_out) {
    if (tape_.empty()) throw ShapeMismatch("conv backward without a taped forward");
    Tape tape = std::move(tape_.back());
    tape_.pop_back();

    FeatureMatrix grad_at_out;
    if (mode == ConvMode::strided) {
        grad_at_out = grad_out;
    } else {
        // slice the frame gradient down to the active-center rows
        grad_at_out = FeatureMatrix(static_cast<int>(tape.out_to_frame.size()), weights.c_out);
        for (int o = 0; o < grad_at_out.rows(); ++o) {
            const float* src = grad_out.row(tape.out_to_frame[o]);
            float* dst = grad_at_out.row(o);
            for (int c = 0; c < weights.c_out; ++c) dst[c] = src[c];
        }
    }

    SscGrads g = ssc_backward(grad_at_out, tape.input, weights, tape.rb);
    for (size_t i = 0; i < grad_w.size(); ++i) grad_w[i] += g.grad_w[i];
    return std::move(g.grad_input);
}

// ---------------------------------------------------------------------------
// IlifLayer

FeatureMatrix IlifLayer::forward(const FeatureMatrix& x, bool keep_tape) {
    IlifStepResult r = ilif_step(state_, x, params, rounding);
    state_ = std::move(r.state);
    if (keep_tape) tape_u_.push_back(std::move(r.u));
    return std::move(r.spikes);
}

FeatureMatrix IlifLayer::backward(const FeatureMatrix& grad_spikes) {
    if (tape_u_.empty()) throw ShapeMismatch("neuron backward without a taped forward");
    FeatureMatrix u = std::move(tape_u_.back());
    tape_u_.pop_back();

    const float d = static_cast<float>(params.d_max);
    const bool has_carry = !grad_h_carry_.empty();
    FeatureMatrix grad_u(u.rows(), u.cols());
    for (int i = 0; i < u.rows(); ++i) {
        const float* urow = u.row(i);
        const float* gs = grad_spikes.row(i);
        const float* gh = has_carry ? grad_h_carry_.row(i) : nullptr;
        float* gu = grad_u.row(i);
        for (int c = 0; c < u.cols(); ++c) {
            const float inside = (urow[c] >= 0.0f && urow[c] <= d) ? 1.0f : 0.0f;
            float v = gs[c] * inside;
            if (gh) v += gh[c] * params.beta * (1.0f - inside);
            gu[c] = v;
        }
    }
    grad_h_carry_ = grad_u;
    return grad_u;
}

void IlifLayer::reset() {
    state_ = NeuronState{};
    tape_u_.clear();
    grad_h_carry_ = FeatureMatrix{};
}

// ---------------------------------------------------------------------------
// SvcStem

SvcStem::SvcStem(const NetworkSpec& spec) {
    int c_in = spec.in_channels;
    for (int i = 0; i < spec.svc_depth; ++i) {
        convs.emplace_back("svc.conv" + std::to_string(i + 1), Kernel3{3, 3, 3},
                           Stride3{1, 1, 1}, ConvMode::submanifold, c_in,
                           spec.stem_channels, /*analog_input=*/i == 0);
        neurons.emplace_back(spec.neuron_params());
        c_in = spec.stem_channels;
    }
}

SparseVoxelTensor SvcStem::forward(const SparseVoxelTensor& v, bool keep_tape,
                                   ForwardTrace* trace) {
    SparseVoxelTensor cur = v;
    for (size_t i = 0; i < convs.size(); ++i) {
        SparseVoxelTensor u = convs[i].forward(cur, keep_tape, trace);
        cur = u.with_features(neurons[i].forward(u.features(), keep_tape));
    }
    return cur;
}

FeatureMatrix SvcStem::backward(const FeatureMatrix& grad_out) {
    FeatureMatrix g = grad_out;
    for (size_t i = convs.size(); i-- > 0;) {
        g = neurons[i].backward(g);
        g = convs[i].backward(g);
    }
    return g;
}

void SvcStem::reset() {
    for (auto& n : neurons) n.reset();
    for (auto& c : convs) c.clear_tape();
}

// ---------------------------------------------------------------------------
// DownsampleLayer

DownsampleLayer::DownsampleLayer(std::string name, const NetworkSpec& spec, int c_in,
                                 int c_out)
    : sn(spec.neuron_params()),
      conv(std::move(name), Kernel3{2, 2, 2}, Stride3{2, 2, 2}, ConvMode::strided,
           c_in, c_out, /*analog_input=*/false) {}

SparseVoxelTensor DownsampleLayer::forward(const SparseVoxelTensor& u, bool keep_tape,
                                           ForwardTrace* trace) {
    FeatureMatrix s = sn.forward(u.features(), keep_tape);
    return conv.forward(u.with_features(std::move(s)), keep_tape, trace);
}

FeatureMatrix DownsampleLayer::backward(const FeatureMatrix& grad_out) {
    return sn.backward(conv.backward(grad_out));
}

void DownsampleLayer::reset() {
    sn.reset();
    conv.clear_tape();
}

// ---------------------------------------------------------------------------
// BasicBlock

BasicBlock::BasicBlock(std::string name, const NetworkSpec& spec, int channels)
    : sn_in(spec.neuron_params()),
      conv_in(name + ".conv1", Kernel3{3, 3, 3}, Stride3{1, 1, 1},
              ConvMode::submanifold, channels, channels, false) {
    for (int i = 0; i < spec.block_depth; ++i) {
        sns.emplace_back(spec.neuron_params());
        convs.emplace_back(name + ".conv" + std::to_string(i + 2), Kernel3{3, 3, 3},
                           Stride3{1, 1, 1}, ConvMode::submanifold, channels, channels,
                           false);
    }
}

SparseVoxelTensor BasicBlock::forward(const SparseVoxelTensor& u, bool keep_tape,
                                      ForwardTrace* trace) {
    // U' = SSC(SN(U)) + U
    FeatureMatrix s0 = sn_in.forward(u.features(), keep_tape);
    SparseVoxelTensor y0 = conv_in.forward(u.with_features(std::move(s0)), keep_tape, trace);
    FeatureMatrix u1 = y0.features();
    add_rows(u1, u.features());

    // out = SSC^m(SN^m(U')) + U'
    SparseVoxelTensor cur = u.with_features(u1);
    for (size_t i = 0; i < convs.size(); ++i) {
        FeatureMatrix s = sns[i].forward(cur.features(), keep_tape);
        cur = convs[i].forward(cur.with_features(std::move(s)), keep_tape, trace);
    }
    FeatureMatrix out = cur.features();
    add_rows(out, u1);
    return u.with_features(std::move(out));
}

FeatureMatrix BasicBlock::backward(const FeatureMatrix& grad_out) {
    FeatureMatrix grad_u1 = grad_out; // shortcut into the final add
    FeatureMatrix g = grad_out;
    for (size_t i = convs.size(); i-- > 0;) {
        g = convs[i].backward(g);
        g = sns[i].backward(g);
    }
    add_rows(grad_u1, g);

    FeatureMatrix gx = conv_in.backward(grad_u1);
    gx = sn_in.backward(gx);
    add_rows(gx, grad_u1); // shortcut into U' = conv + U
    return gx;
}

void BasicBlock::reset() {
    sn_in.reset();
    conv_in.clear_tape();
    for (auto& n : sns) n.reset();
    for (auto& c : convs) c.clear_tape();
}

// ---------------------------------------------------------------------------
// Head

namespace {

std::vector<float> pool_mean(const SparseVoxelTensor& t) {
    if (t.num_active() == 0) throw EmptyFeatures("pooling over zero active sites");
    std::vector<float> pooled(t.channels(), 0.0f);
    for (int i = 0; i < t.num_active(); ++i) {
        const float* row = t.features().row(i);
        for (int c = 0; c < t.channels(); ++c) pooled[c] += row[c];
    }
    const float inv = 1.0f / static_cast<float>(t.num_active());
    for (float& v : pooled) v *= inv;
    return pooled;
}

} // namespace

std::vector<float> classify_head(const SparseVoxelTensor& features,
                                 const FeatureMatrix& head_w,
                                 const std::vector<float>& head_bias, int num_classes) {
    if (features.channels() != head_w.rows() || head_w.cols() != num_classes)
        throw ShapeMismatch("head expects " + std::to_string(head_w.rows()) + "x" +
                            std::to_string(head_w.cols()) + " weights");
    const std::vector<float> pooled = pool_mean(features);
    std::vector<float> logits(num_classes, 0.0f);
    for (int k = 0; k < num_classes; ++k) {
        float acc = head_bias.empty() ? 0.0f : head_bias[k];
        for (int c = 0; c < head_w.rows(); ++c) acc += pooled[c] * head_w.at(c, k);
        logits[k] = acc;
    }
    return logits;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(const NetworkSpec& spec_)
    : spec(spec_), stem(spec_), head_sn(spec_.neuron_params()) {
    spec.validate();
    int c_prev = spec.stem_channels;
    for (int l = 0; l < 4; ++l) {
        const int c = spec.channels_per_stage[l];
        Stage st{DownsampleLayer("s" + std::to_string(l + 1) + ".down", spec, c_prev, c),
                 {}};
        for (int b = 0; b < spec.blocks_per_stage[l]; ++b)
            st.blocks.emplace_back("s" + std::to_string(l + 1) + ".b" + std::to_string(b + 1),
                                   spec, c);
        stages.push_back(std::move(st));
        c_prev = c;
    }
    head_w = FeatureMatrix(c_prev, spec.num_classes);
    head_bias.assign(spec.num_classes, 0.0f);
    grad_head_w = FeatureMatrix(c_prev, spec.num_classes);
    grad_head_bias.assign(spec.num_classes, 0.0f);
}

void Network::init_weights(uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5f3759df9e3779b9ull);
    auto fill_uniform = [&rng](std::vector<float>& w, double bound) {
        for (float& v : w) v = static_cast<float>((rng01(rng) * 2.0 - 1.0) * bound);
    };
    auto init_conv = [&](SparseConvLayer& conv) {
        // scale by channel fan-in only: on surface-like voxel shells each
        // output gathers a handful of active neighbors, not k^3, and the
        // integer clip bounds the upside, so k^3 scaling would silence the
        // net. The analog first layer sees sub-voxel offsets an order of
        // magnitude smaller than spike magnitudes and gets a larger gain.
        const double gain = conv.analog_input ? 5.0 : 2.4;
        fill_uniform(conv.weights.w, gain / std::sqrt(static_cast<double>(conv.weights.c_in)));
    };
    for (auto& c : stem.convs) init_conv(c);
    for (auto& st : stages) {
        init_conv(st.down.conv);
        for (auto& b : st.blocks) {
            init_conv(b.conv_in);
            for (auto& c : b.convs) init_conv(c);
        }
    }
    std::vector<float> hw(head_w.size());
    fill_uniform(hw, std::sqrt(3.0 / head_w.rows()));
    std::copy(hw.begin(), hw.end(), head_w.data().begin());
    std::fill(head_bias.begin(), head_bias.end(), 0.0f);
}

void Network::begin_sample() {
    stem.reset();
    for (auto& st : stages) {
        st.down.reset();
        for (auto& b : st.blocks) b.reset();
    }
    head_sn.reset();
    head_tape_.clear();
}

SparseVoxelTensor Network::forward_backbone_t(const SparseVoxelTensor& input,
                                              bool keep_tape, ForwardTrace* trace) {
    if (input.num_active() == 0) throw EmptyCloud("backbone input has no active voxels");
    SparseVoxelTensor cur = stem.forward(input, keep_tape, trace);
    for (auto& st : stages) {
        cur = st.down.forward(cur, keep_tape, trace);
        for (auto& b : st.blocks) cur = b.forward(cur, keep_tape, trace);
    }
    return cur;
}

std::vector<float> Network::forward_t(const SparseVoxelTensor& input, bool keep_tape,
                                      ForwardTrace* trace) {
    SparseVoxelTensor feats = forward_backbone_t(input, keep_tape, trace);
    FeatureMatrix spikes = head_sn.forward(feats.features(), keep_tape);
    SparseVoxelTensor spike_tensor = feats.with_features(std::move(spikes));

    if (trace) {
        LayerTraceEntry& e = trace->entry("head.fc");
        e.mac = false;
        e.c_in = head_w.rows();
        e.c_out = head_w.cols();
        e.kernel_volume = 1.0;
        auto [frb, fri] = [&spike_tensor]() {
            long long nnz = 0;
            double mag = 0.0;
            const auto& d = spike_tensor.features().data();
            for (float v : d) {
                if (v != 0.0f) ++nnz;
                mag += std::fabs(v);
            }
            const double n = d.empty() ? 1.0 : static_cast<double>(d.size());
            return std::pair<double, double>(nnz / n, mag / n);
        }();
        e.fr_binary_sum += frb;
        e.fr_integer_sum += fri;
        e.pairs_sum += 1.0;
        e.dense_sites_sum += 1.0;
        e.records += 1;
    }

    std::vector<float> logits =
        classify_head(spike_tensor, head_w, head_bias, spec.num_classes);
    if (keep_tape) {
        HeadTape ht;
        ht.pooled = pool_mean(spike_tensor);
        ht.rows = spike_tensor.num_active();
        head_tape_.push_back(std::move(ht));
    }
    return logits;
}

void Network::backward_t(const std::vector<float>& grad_logits) {
    if (head_tape_.empty()) throw ShapeMismatch("backward without a taped forward");
    HeadTape ht = std::move(head_tape_.back());
    head_tape_.pop_back();

    const int classes = spec.num_classes;
    const int c = head_w.rows();
    for (int k = 0; k < classes; ++k) grad_head_bias[k] += grad_logits[k];
    std::vector<float> dpooled(c, 0.0f);
    for (int ci = 0; ci < c; ++ci) {
        float acc = 0.0f;
        for (int k = 0; k < classes; ++k) {
            grad_head_w.at(ci, k) += ht.pooled[ci] * grad_logits[k];
            acc += head_w.at(ci, k) * grad_logits[k];
        }
        dpooled[ci] = acc;
    }

    FeatureMatrix dspikes(ht.rows, c);
    const float inv = 1.0f / static_cast<float>(ht.rows);
    for (int i = 0; i < ht.rows; ++i) {
        float* row = dspikes.row(i);
        for (int ci = 0; ci < c; ++ci) row[ci] = dpooled[ci] * inv;
    }

    FeatureMatrix g = head_sn.backward(dspikes);
    for (size_t l = stages.size(); l-- > 0;) {
        auto& st = stages[l];
        for (size_t b = st.blocks.size(); b-- > 0;) g = st.blocks[b].backward(g);
        g = st.down.backward(g);
    }
    stem.backward(g); // gradient wrt the raw voxel features is discarded
}

SampleForward Network::forward_sample(const SparseVoxelTensor& input, bool keep_tape,
                                      ForwardTrace* trace) {
    begin_sample();
    if (trace) {
        trace->timesteps = spec.timesteps;
        trace->d_max = spec.d_max;
    }
    SampleForward out;
    out.mean_logits.assign(spec.num_classes, 0.0f);
    for (int t = 0; t < spec.timesteps; ++t) {
        out.logits_per_t.push_back(forward_t(input, keep_tape, trace));
        for (int k = 0; k < spec.num_classes; ++k)
            out.mean_logits[k] += out.logits_per_t.back()[k];
    }
    const float inv = 1.0f / static_cast<float>(spec.timesteps);
    for (float& v : out.mean_logits) v *= inv;
    return out;
}

void Network::backward_sample(const std::vector<std::vector<float>>& grad_logits_per_t) {
    for (size_t t = grad_logits_per_t.size(); t-- > 0;)
        backward_t(grad_logits_per_t[t]);
}

SparseVoxelTensor Network::encode(const SparseVoxelTensor& v) {
    stem.reset();
    return stem.forward(v, false, nullptr);
}

SparseVoxelTensor Network::backbone_forward(const SparseVoxelTensor& v,
                                            ForwardTrace* trace) {
    if (v.num_active() == 0) throw EmptyCloud("empty voxel tensor");
    begin_sample();
    if (trace) {
        trace->timesteps = spec.timesteps;
        trace->d_max = spec.d_max;
    }
    SparseVoxelTensor out;
    for (int t = 0; t < spec.timesteps; ++t) out = forward_backbone_t(v, false, trace);
    return out;
}

std::vector<ParamView> Network::params() {
    std::vector<ParamView> ps;
    for (auto& c : stem.convs) ps.push_back(c.param());
    for (auto& st : stages) {
        ps.push_back(st.down.conv.param());
        for (auto& b : st.blocks) {
            ps.push_back(b.conv_in.param());
            for (auto& c : b.convs) ps.push_back(c.param());
        }
    }
    ps.push_back({&head_w.data(), &grad_head_w.data()});
    ps.push_back({&head_bias, &grad_head_bias});
    return ps;
}

void Network::zero_grad() {
    for (auto& p : params()) std::fill(p.g->begin(), p.g->end(), 0.0f);
}

long long Network::param_count() {
    long long n = 0;
    for (auto& p : params()) n += static_cast<long long>(p.w->size());
    return n;
}

void Network::set_rounding(bool rounding) {
    for (auto& n : stem.neurons) n.rounding = rounding;
    for (auto& st : stages) {
        st.down.sn.rounding = rounding;
        for (auto& b : st.blocks) {
            b.sn_in.rounding = rounding;
            for (auto& n : b.sns) n.rounding = rounding;
        }
    }
    head_sn.rounding = rounding;
}

std::vector<WeightRecord> Network::to_records() const {
    std::vector<WeightRecord> recs;
    auto push_conv = [&recs](const SparseConvLayer& c) {
        recs.push_back({static_cast<uint32_t>(c.weights.num_offsets()),
                        static_cast<uint32_t>(c.weights.c_in),
                        static_cast<uint32_t>(c.weights.c_out), c.weights.w});
    };
    for (const auto& c : stem.convs) push_conv(c);
    for (const auto& st : stages) {
        push_conv(st.down.conv);
        for (const auto& b : st.blocks) {
            push_conv(b.conv_in);
            for (const auto& c : b.convs) push_conv(c);
        }
    }
    recs.push_back({1u, static_cast<uint32_t>(head_w.rows()),
                    static_cast<uint32_t>(head_w.cols()), head_w.data()});
    recs.push_back({1u, 1u, static_cast<uint32_t>(head_bias.size()), head_bias});
    return recs;
}

void Network::from_records(const std::vector<WeightRecord>& records) {
    size_t i = 0;
    auto take = [&](std::vector<float>& dst, uint32_t num_offsets, uint32_t c_in,
                    uint32_t c_out, const std::string& what) {
        if (i >= records.size()) throw TruncatedFile("checkpoint short at " + what);
        const WeightRecord& r = records[i++];
        if (r.num_offsets != num_offsets || r.c_in != c_in || r.c_out != c_out)
            throw ShapeMismatch("checkpoint record " + std::to_string(i - 1) + " (" + what +
                                "): got " + std::to_string(r.num_offsets) + "/" +
                                std::to_string(r.c_in) + "/" + std::to_string(r.c_out));
        dst = r.w;
    };
    auto take_conv = [&](SparseConvLayer& c) {
        take(c.weights.w, static_cast<uint32_t>(c.weights.num_offsets()),
             static_cast<uint32_t>(c.weights.c_in),
             static_cast<uint32_t>(c.weights.c_out), c.name);
    };
    for (auto& c : stem.convs) take_conv(c);
    for (auto& st : stages) {
        take_conv(st.down.conv);
        for (auto& b : st.blocks) {
            take_conv(b.conv_in);
            for (auto& c : b.convs) take_conv(c);
        }
    }
    take(head_w.data(), 1u, static_cast<uint32_t>(head_w.rows()),
         static_cast<uint32_t>(head_w.cols()), "head.fc");
    take(head_bias, 1u, 1u, static_cast<uint32_t>(head_bias.size()), "head.bias");
    if (i != records.size())
        throw ShapeMismatch("checkpoint has " + std::to_string(records.size() - i) +
                            " extra records");
}

// ---------------------------------------------------------------------------
// Pipeline configuration

void write_config(std::ostream& os, const PipelineConfig& cfg) {
    os << "variant=" << cfg.net.variant << "\n";
    os << "blocks=" << join(cfg.net.blocks_per_stage) << "\n";
    os << "channels=" << join(cfg.net.channels_per_stage) << "\n";
    os << "stem_channels=" << cfg.net.stem_channels << "\n";
    os << "svc_depth=" << cfg.net.svc_depth << "\n";
    os << "block_depth=" << cfg.net.block_depth << "\n";
    os << "timesteps=" << cfg.net.timesteps << "\n";
    os << "d_max=" << cfg.net.d_max << "\n";
    os << "num_classes=" << cfg.net.num_classes << "\n";
    os << "in_channels=" << cfg.net.in_channels << "\n";
    os << "beta=" << cfg.net.beta << "\n";
    os << "v_th=" << cfg.net.v_th << "\n";
    os << "feature_mode=" << to_string(cfg.voxel.mode) << "\n";
    os << "clip_min=" << join(cfg.voxel.clip_min) << "\n";
    os << "clip_max=" << join(cfg.voxel.clip_max) << "\n";
    os << "voxel_size=" << join(cfg.voxel.voxel_size) << "\n";
}

PipelineConfig read_config(std::istream& is) {
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw MalformedRow("config line " + std::to_string(lineno) + ": '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "variant") cfg.net.variant = val;
        else if (key == "blocks") cfg.net.blocks_per_stage = parse_int4(val);
        else if (key == "channels") cfg.net.channels_per_stage = parse_int4(val);
        else if (key == "stem_channels") cfg.net.stem_channels = std::stoi(val);
        else if (key == "svc_depth") cfg.net.svc_depth = std::stoi(val);
        else if (key == "block_depth") cfg.net.block_depth = std::stoi(val);
        else if (key == "timesteps") cfg.net.timesteps = std::stoi(val);
        else if (key == "d_max") cfg.net.d_max = std::stoi(val);
        else if (key == "num_classes") cfg.net.num_classes = std::stoi(val);
        else if (key == "in_channels") cfg.net.in_channels = std::stoi(val);
        else if (key == "beta") cfg.net.beta = std::stof(val);
        else if (key == "v_th") cfg.net.v_th = std::stof(val);
        else if (key == "feature_mode") cfg.voxel.mode = feature_mode_from_string(val);
        else if (key == "clip_min") cfg.voxel.clip_min = parse_float3(val);
        else if (key == "clip_max") cfg.voxel.clip_max = parse_float3(val);
        else if (key == "voxel_size") cfg.voxel.voxel_size = parse_float3(val);
        else throw MalformedRow("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.net.validate();
    cfg.voxel.validate();
    return cfg;
}

void write_config_file(const std::string& path, const PipelineConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw TruncatedFile("cannot open " + path + " for writing");
    write_config(os, cfg);
}

PipelineConfig read_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw TruncatedFile("cannot open " + path);
    return read_config(is);
}

} // namespace spikevox
