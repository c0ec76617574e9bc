#include "spikevox/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace spikevox {

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd" || s == "sgd_momentum") return OptimizerKind::sgd_momentum;
    if (s == "adam") return OptimizerKind::adam;
    if (s == "adamw") return OptimizerKind::adamw;
    throw BadHeader("unknown optimizer '" + s + "'");
}

std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd_momentum: return "sgd_momentum";
        case OptimizerKind::adam: return "adam";
        case OptimizerKind::adamw: return "adamw";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (!(lr > 0)) throw ShapeMismatch("learning rate must be positive");
    if (batch_size < 1) throw ShapeMismatch("batch size must be >= 1");
    if (epochs < 0) throw ShapeMismatch("epochs must be >= 0");
}

Optimizer::Optimizer(const TrainConfig& cfg, std::vector<ParamView> params)
    : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.w->size(), 0.0f);
        v_.emplace_back(p.w->size(), 0.0f);
    }
}

void Optimizer::step(double lr_now) {
    ++step_count_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, step_count_);
    const double bc2 = 1.0 - std::pow(b2, step_count_);
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        std::vector<float>& w = *params_[pi].w;
        std::vector<float>& g = *params_[pi].g;
        std::vector<float>& m = m_[pi];
        std::vector<float>& v = v_[pi];
        for (size_t i = 0; i < w.size(); ++i) {
            double grad = g[i];
            switch (cfg_.optimizer) {
                case OptimizerKind::sgd_momentum: {
                    grad += cfg_.weight_decay * w[i];
                    m[i] = static_cast<float>(cfg_.momentum * m[i] + grad);
                    w[i] -= static_cast<float>(lr_now * m[i]);
                    break;
                }
                case OptimizerKind::adam: {
                    grad += cfg_.weight_decay * w[i];
                    m[i] = static_cast<float>(b1 * m[i] + (1 - b1) * grad);
                    v[i] = static_cast<float>(b2 * v[i] + (1 - b2) * grad * grad);
                    const double mh = m[i] / bc1, vh = v[i] / bc2;
                    w[i] -= static_cast<float>(lr_now * mh / (std::sqrt(vh) + eps));
                    break;
                }
                case OptimizerKind::adamw: {
                    m[i] = static_cast<float>(b1 * m[i] + (1 - b1) * grad);
                    v[i] = static_cast<float>(b2 * v[i] + (1 - b2) * grad * grad);
                    const double mh = m[i] / bc1, vh = v[i] / bc2;
                    w[i] -= static_cast<float>(lr_now * (mh / (std::sqrt(vh) + eps) +
                                                         cfg_.weight_decay * w[i]));
                    break;
                }
            }
        }
    }
}

double cross_entropy(const std::vector<float>& logits, int label,
                     std::vector<float>* grad_logits) {
    const int k = static_cast<int>(logits.size());
    double zmax = logits[0];
    for (float z : logits) zmax = std::max(zmax, static_cast<double>(z));
    double denom = 0.0;
    for (float z : logits) denom += std::exp(static_cast<double>(z) - zmax);
    const double logp = static_cast<double>(logits[label]) - zmax - std::log(denom);
    if (grad_logits) {
        grad_logits->assign(k, 0.0f);
        for (int i = 0; i < k; ++i) {
            const double p = std::exp(static_cast<double>(logits[i]) - zmax) / denom;
            (*grad_logits)[i] = static_cast<float>(p - (i == label ? 1.0 : 0.0));
        }
    }
    return -logp;
}

double train_step(Network& net, const std::vector<const Sample*>& batch, Optimizer& opt,
                  double lr_now) {
    const int b = static_cast<int>(batch.size());
    double loss_sum = 0.0;
    net.zero_grad();
    for (int s = 0; s < b; ++s) {
        const Sample& sample = *batch[s];
        SampleForward f = net.forward_sample(sample.tensor, /*keep_tape=*/true);
        std::vector<float> grad_mean;
        const double loss = cross_entropy(f.mean_logits, sample.label, &grad_mean);
        if (!std::isfinite(loss))
            throw NonFiniteLoss("loss=" + std::to_string(loss) + " on sample " +
                                std::to_string(s) + " (label " +
                                std::to_string(sample.label) + ")");
        loss_sum += loss;
        // d(mean over T)/d(logit_t) = 1/T, and the batch mean adds 1/B
        const float scale = 1.0f / (static_cast<float>(net.spec.timesteps) * b);
        std::vector<std::vector<float>> grads(f.logits_per_t.size());
        for (size_t t = 0; t < grads.size(); ++t) {
            grads[t].resize(grad_mean.size());
            for (size_t k = 0; k < grad_mean.size(); ++k) grads[t][k] = grad_mean[k] * scale;
        }
        net.backward_sample(grads);
    }
    opt.step(lr_now);
    return loss_sum / b;
}

double evaluate(Network& net, const std::vector<Sample>& data) {
    if (data.empty()) throw EmptyDataset("evaluate called with no samples");
    long correct = 0;
    for (const Sample& s : data) {
        SampleForward f = net.forward_sample(s.tensor, /*keep_tape=*/false);
        const int pred = static_cast<int>(
            std::max_element(f.mean_logits.begin(), f.mean_logits.end()) -
            f.mean_logits.begin());
        if (pred == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

constexpr double kJitterSigma = 0.004;
constexpr double kSphereRadius = 0.13;

inline double rng01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller, truncated at 3 sigma so shell thickness is bounded
double jitter(std::mt19937_64& rng, double sigma) {
    const double u1 = std::max(rng01(rng), 1e-12);
    const double u2 = rng01(rng);
    double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    g = std::clamp(g, -3.0, 3.0);
    return g * sigma;
}

std::array<double, 3> random_unit(std::mt19937_64& rng) {
    while (true) {
        const double x = 2 * rng01(rng) - 1, y = 2 * rng01(rng) - 1, z = 2 * rng01(rng) - 1;
        const double n2 = x * x + y * y + z * z;
        if (n2 > 1e-6 && n2 <= 1.0) {
            const double n = std::sqrt(n2);
            return {x / n, y / n, z / n};
        }
    }
}

PointCloud::Point make_point(double x, double y, double z) {
    PointCloud::Point p;
    p.x = static_cast<float>(x);
    p.y = static_cast<float>(y);
    p.z = static_cast<float>(z);
    return p;
}

PointCloud toy_cloud(int label, int n_points, std::mt19937_64& rng) {
    PointCloud pc;
    pc.points.reserve(n_points);
    for (int i = 0; i < n_points; ++i) {
        switch (label) {
            case 0: { // sphere shell, radial jitter keeps radii in r +/- 3 sigma
                const auto d = random_unit(rng);
                const double r = kSphereRadius + jitter(rng, kJitterSigma);
                pc.points.push_back(make_point(r * d[0], r * d[1], r * d[2]));
                break;
            }
            case 1: { // cube shell
                const double a = 0.11;
                const int axis = static_cast<int>(rng() % 3);
                const double side = (rng() & 1) ? a : -a;
                double p[3];
                for (int k = 0; k < 3; ++k) p[k] = (2 * rng01(rng) - 1) * a;
                p[axis] = side;
                pc.points.push_back(make_point(p[0] + jitter(rng, kJitterSigma),
                                               p[1] + jitter(rng, kJitterSigma),
                                               p[2] + jitter(rng, kJitterSigma)));
                break;
            }
            case 2: { // two orthogonal planes
                const double e = 0.15;
                const double u = (2 * rng01(rng) - 1) * e;
                const double v = (2 * rng01(rng) - 1) * e;
                double x, y, z;
                if (rng() & 1) { x = u; y = v; z = 0.0; }
                else           { x = u; y = 0.0; z = v; }
                pc.points.push_back(make_point(x + jitter(rng, kJitterSigma),
                                               y + jitter(rng, kJitterSigma),
                                               z + jitter(rng, kJitterSigma)));
                break;
            }
            default: { // cylinder shell
                const double r = 0.085 + jitter(rng, kJitterSigma);
                const double theta = 2 * 3.14159265358979323846 * rng01(rng);
                const double z = (2 * rng01(rng) - 1) * 0.14;
                pc.points.push_back(make_point(r * std::cos(theta), r * std::sin(theta), z));
                break;
            }
        }
    }
    return pc;
}

} // namespace

double toy_jitter_sigma() { return kJitterSigma; }
double toy_sphere_radius() { return kSphereRadius; }

std::vector<LabeledCloud> make_toy_dataset(uint64_t seed, int n_per_class,
                                           int points_per_cloud) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    std::vector<LabeledCloud> out;
    out.reserve(4 * static_cast<size_t>(n_per_class));
    for (int label = 0; label < 4; ++label)
        for (int i = 0; i < n_per_class; ++i)
            out.push_back({toy_cloud(label, points_per_cloud, rng), label});
    return out;
}

std::vector<Sample> voxelize_dataset(const std::vector<LabeledCloud>& clouds,
                                     const VoxelConfig& cfg) {
    std::vector<Sample> out;
    out.reserve(clouds.size());
    for (const auto& lc : clouds) out.push_back({voxelize(lc.cloud, cfg), lc.label});
    return out;
}

FitResult fit(Network& net, const std::vector<Sample>& train, const TrainConfig& cfg,
              std::ostream* log) {
    cfg.validate();
    if (train.empty()) throw EmptyDataset("fit called with no samples");
    Optimizer opt(cfg, net.params());
    std::mt19937_64 shuffle_rng(cfg.seed + 0x9e3779b9u);
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    FitResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double frac = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
        const double lr_now = cfg.cosine_decay
                                  ? cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac))
                                  : cfg.lr;
        double epoch_loss = 0.0;
        int steps = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<const Sample*> batch;
            for (size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
                batch.push_back(&train[order[i]]);
            const double loss = train_step(net, batch, opt, lr_now);
            result.step_losses.push_back(loss);
            epoch_loss += loss;
            ++steps;
            if (log) {
                ForwardTrace trace;
                double fr = 0.0;
                if (steps == 1) { // probe firing on the first batch of each epoch
                    net.forward_sample(batch.front()->tensor, false, &trace);
                    double sum = 0.0;
                    int n = 0;
                    for (const auto& e : trace.layers)
                        if (!e.mac) { sum += e.mean_fr_binary(); ++n; }
                    fr = n ? sum / n : 0.0;
                }
                (*log) << "epoch=" << epoch << " step=" << steps << " loss=" << loss
                       << " lr=" << lr_now;
                if (steps == 1) (*log) << " fr=" << fr;
                (*log) << "\n";
            }
        }
        result.epoch_mean_loss.push_back(epoch_loss / std::max(steps, 1));
    }
    return result;
}

} // namespace spikevox
