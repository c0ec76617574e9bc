#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spikevox/net.hpp"
#include "spikevox/voxelize.hpp"

namespace spikevox {

enum class OptimizerKind { sgd_momentum, adam, adamw };
OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct TrainConfig {
    double lr = 0.1;
    double weight_decay = 1e-4;
    double momentum = 0.9;
    int batch_size = 16;
    int epochs = 200;
    OptimizerKind optimizer = OptimizerKind::sgd_momentum;
    uint64_t seed = 0;
    bool cosine_decay = true;

    void validate() const;
};

class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, std::vector<ParamView> params);
    /// Applies accumulated gradients at the given learning rate, then leaves
    /// gradient clearing to the caller.
    void step(double lr_now);

private:
    TrainConfig cfg_;
    std::vector<ParamView> params_;
    std::vector<std::vector<float>> m_; // momentum / first moment
    std::vector<std::vector<float>> v_; // second moment (adam)
    long step_count_ = 0;
};

struct Sample {
    SparseVoxelTensor tensor;
    int label = 0;
};

struct LabeledCloud {
    PointCloud cloud;
    int label = 0;
};

/// Cross-entropy on mean-over-timestep logits (computed in double).
double cross_entropy(const std::vector<float>& logits, int label,
                     std::vector<float>* grad_logits);

/// One optimizer step over a batch: forward + backward per sample with 1/B
/// gradient scaling, then the update. Returns the mean batch loss. Throws
/// NonFiniteLoss with diagnostics when the loss goes non-finite.
double train_step(Network& net, const std::vector<const Sample*>& batch, Optimizer& opt,
                  double lr_now);

/// Top-1 overall accuracy in [0,1]. Throws EmptyDataset on empty input.
double evaluate(Network& net, const std::vector<Sample>& data);

/// Deterministic synthetic 4-class set: sphere shell, cube shell, two-plane
/// cross, cylinder shell, each jittered (jitter truncated at 3 sigma) and
/// sized to sit inside the +/-0.2 m clip box. Returns class-major order:
/// n_per_class clouds of label 0, then label 1, ...
std::vector<LabeledCloud> make_toy_dataset(uint64_t seed, int n_per_class,
                                           int points_per_cloud = 512);

/// Radial jitter scale used by the toy generator (meters).
double toy_jitter_sigma();
/// Nominal sphere-shell radius of toy class 0 (meters).
double toy_sphere_radius();

std::vector<Sample> voxelize_dataset(const std::vector<LabeledCloud>& clouds,
                                     const VoxelConfig& cfg);

struct FitResult {
    std::vector<double> epoch_mean_loss;
    std::vector<double> step_losses;
};

/// Epoch loop with seeded shuffling, cosine or constant learning rate, and
/// line-per-step logging (epoch, step, loss, lr, firing-rate summary).
FitResult fit(Network& net, const std::vector<Sample>& train, const TrainConfig& cfg,
              std::ostream* log);

} // namespace spikevox
