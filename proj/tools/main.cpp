// Command-line front end: voxelize point clouds, train/evaluate/profile the
// spiking sparse-conv classifier, generate the synthetic dataset, and run the
// built-in self test.
#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "spikevox/conv.hpp"
#include "spikevox/dense.hpp"
#include "spikevox/io.hpp"
#include "spikevox/net.hpp"
#include "spikevox/profile.hpp"
#include "spikevox/train.hpp"
#include "spikevox/voxelize.hpp"

namespace fs = std::filesystem;
using namespace spikevox;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::array<float, 3> parse_triple(const std::string& s, const char* what) {
    std::array<float, 3> out{};
    std::istringstream ss(s);
    std::string tok;
    std::vector<float> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stof(tok));
    if (vals.size() == 1) out = {vals[0], vals[0], vals[0]};
    else if (vals.size() == 3) out = {vals[0], vals[1], vals[2]};
    else throw CLI::ValidationError(std::string(what) + ": expected 1 or 3 comma-separated values");
    return out;
}

struct VoxelFlags {
    std::string voxel_size = "0.01";
    std::string clip = "-0.2,0.2";
    std::string feature_mode = "mean_offset";

    void attach(CLI::App* cmd) {
        cmd->add_option("--voxel-size", voxel_size, "voxel edge in meters (1 or 3 values)");
        cmd->add_option("--clip", clip, "clip box: min,max (all axes) or 6 values");
        cmd->add_option("--feature-mode", feature_mode,
                        "occupancy | mean_offset | mean_intensity");
    }

    VoxelConfig config() const {
        VoxelConfig cfg;
        cfg.voxel_size = parse_triple(voxel_size, "--voxel-size");
        std::vector<float> vals;
        {
            std::istringstream ss(clip);
            std::string tok;
            while (std::getline(ss, tok, ',')) vals.push_back(std::stof(tok));
        }
        if (vals.size() == 2) {
            cfg.clip_min = {vals[0], vals[0], vals[0]};
            cfg.clip_max = {vals[1], vals[1], vals[1]};
        } else if (vals.size() == 6) {
            cfg.clip_min = {vals[0], vals[1], vals[2]};
            cfg.clip_max = {vals[3], vals[4], vals[5]};
        } else {
            throw CLI::ValidationError("--clip: expected 2 or 6 comma-separated values");
        }
        cfg.mode = feature_mode_from_string(feature_mode);
        cfg.validate();
        return cfg;
    }
};

void echo_config(const PipelineConfig& cfg, const TrainConfig* tc) {
    std::ostringstream os;
    write_config(os, cfg);
    std::istringstream is(os.str());
    std::string line;
    while (std::getline(is, line)) std::cout << "config: " << line << "\n";
    if (tc) {
        std::cout << "config: lr=" << tc->lr << "\n";
        std::cout << "config: weight_decay=" << tc->weight_decay << "\n";
        std::cout << "config: batch_size=" << tc->batch_size << "\n";
        std::cout << "config: epochs=" << tc->epochs << "\n";
        std::cout << "config: optimizer=" << to_string(tc->optimizer) << "\n";
        std::cout << "config: seed=" << tc->seed << "\n";
    }
}

// parallel per-file loading; results land at their manifest index
std::vector<Sample> load_dataset(const std::vector<ManifestEntry>& entries,
                                 const VoxelConfig& cfg, int off_samples, uint64_t seed,
                                 int threads) {
    std::vector<Sample> out(entries.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < entries.size(); i = next.fetch_add(1)) {
            if (failed.load()) return;
            try {
                const PointCloud pc = load_point_cloud(entries[i].path, off_samples,
                                                       seed + 0x9e37 * i);
                out[i] = {voxelize(pc, cfg), entries[i].label};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                error = entries[i].path + ": " + e.what();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = std::max(1, threads);
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failed.load()) throw TruncatedFile(error);
    return out;
}

int num_classes_of(const std::vector<ManifestEntry>& entries) {
    int top = 0;
    for (const auto& e : entries) top = std::max(top, e.label);
    return top + 1;
}

int run_gen_toy(const std::string& out_dir, uint64_t seed, int n_train, int n_test,
                int points) {
    fs::create_directories(out_dir);
    auto write_split = [&](const std::string& split, int n, uint64_t split_seed) {
        const auto clouds = make_toy_dataset(split_seed, n, points);
        std::ofstream manifest(out_dir + "/manifest_" + split + ".csv");
        for (size_t i = 0; i < clouds.size(); ++i) {
            const std::string rel =
                split + "_" + std::to_string(clouds[i].label) + "_" + std::to_string(i) + ".xyz";
            std::ofstream f(out_dir + "/" + rel);
            write_xyz(f, clouds[i].cloud);
            manifest << rel << "," << clouds[i].label << "\n";
        }
    };
    write_split("train", n_train, seed);
    write_split("test", n_test, seed + 1);
    std::cout << "wrote " << 4 * n_train << " train / " << 4 * n_test
              << " test clouds to " << out_dir << "\n";
    return 0;
}

// compact oracle-equivalence and invariant sweep; one line per check
int run_selftest(uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0xabcdef12345ull);
    auto rngf = [&rng](float lo, float hi) {
        return lo + static_cast<float>((rng() >> 11) * 0x1.0p-53) * (hi - lo);
    };
    int failures = 0;
    auto report = [&failures](const std::string& name, bool ok, const std::string& detail) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << detail << "\n";
        if (!ok) ++failures;
    };

    auto random_tensor = [&](SpatialShape shape, int ch, double density) {
        std::vector<VoxelCoord> coords;
        for (int x = 0; x < shape[0]; ++x)
            for (int y = 0; y < shape[1]; ++y)
                for (int z = 0; z < shape[2]; ++z)
                    if ((rng() >> 11) * 0x1.0p-53 < density) coords.push_back({0, x, y, z});
        if (coords.empty()) coords.push_back({0, 0, 0, 0});
        FeatureMatrix f(static_cast<int>(coords.size()), ch);
        for (float& v : f.data()) v = rngf(-1.0f, 1.0f);
        return SparseVoxelTensor(coords, std::move(f), shape);
    };

    // sparse forward vs dense reference at active centers
    {
        float worst = 0.0f;
        for (int it = 0; it < 25; ++it) {
            const SparseVoxelTensor t = random_tensor({6, 6, 6}, 3, 0.3);
            KernelWeights w = make_kernel({3, 3, 3}, 3, 4);
            for (float& v : w.w) v = rngf(-1.0f, 1.0f);
            Rulebook rb = build_rulebook(t, {3, 3, 3}, {1, 1, 1}, ConvMode::submanifold);
            const SparseVoxelTensor y = ssc_forward(t, w, rb);
            const DenseGrid dy = vsc_forward_dense(densify(t), w, {1, 1, 1});
            for (int o = 0; o < y.num_active(); ++o) {
                const VoxelCoord& c = rb.out_coords[o];
                for (int co = 0; co < 4; ++co)
                    worst = std::max(worst, std::fabs(y.features().at(o, co) -
                                                      dy.at(c.batch, c.x, c.y, c.z, co)));
            }
        }
        report("oracle-equivalence", worst <= 1e-5f,
               " (max |sparse-dense| = " + std::to_string(worst) + ")");
    }
    // adjoint identity
    {
        double worst = 0.0;
        for (int it = 0; it < 10; ++it) {
            const SparseVoxelTensor t = random_tensor({5, 5, 5}, 2, 0.4);
            KernelWeights w = make_kernel({3, 3, 3}, 2, 3);
            for (float& v : w.w) v = rngf(-1.0f, 1.0f);
            Rulebook rb = build_rulebook(t, {3, 3, 3}, {1, 1, 1}, ConvMode::submanifold);
            const SparseVoxelTensor y = ssc_forward(t, w, rb);
            FeatureMatrix g(y.num_active(), 3);
            for (float& v : g.data()) v = rngf(-1.0f, 1.0f);
            const SscGrads back = ssc_backward(g, t, w, rb);
            double lhs = 0.0, rhs = 0.0;
            for (int o = 0; o < y.num_active(); ++o)
                for (int c = 0; c < 3; ++c)
                    lhs += static_cast<double>(y.features().at(o, c)) * g.at(o, c);
            for (int i = 0; i < t.num_active(); ++i)
                for (int c = 0; c < 2; ++c)
                    rhs += static_cast<double>(t.features().at(i, c)) * back.grad_input.at(i, c);
            worst = std::max(worst, std::fabs(lhs - rhs) / std::max(1.0, std::fabs(lhs)));
        }
        report("adjoint-identity", worst <= 1e-5, " (rel err = " + std::to_string(worst) + ")");
    }
    // accumulate-only path equals the multiply path on integer spikes
    {
        float worst = 0.0f;
        for (int it = 0; it < 10; ++it) {
            SparseVoxelTensor t = random_tensor({6, 6, 6}, 4, 0.3);
            FeatureMatrix f(t.num_active(), 4);
            for (float& v : f.data())
                v = (rng() % 5 == 0) ? 0.0f : static_cast<float>(1 + rng() % 4);
            t = t.with_features(std::move(f));
            KernelWeights w = make_kernel({3, 3, 3}, 4, 4);
            for (float& v : w.w) v = rngf(-1.0f, 1.0f);
            Rulebook rb = build_rulebook(t, {3, 3, 3}, {1, 1, 1}, ConvMode::submanifold);
            const SparseVoxelTensor a = ssc_forward(t, w, rb);
            const SparseVoxelTensor b = ssc_forward_accumulate(t, w, rb, 4);
            for (size_t i = 0; i < a.features().data().size(); ++i)
                worst = std::max(worst, std::fabs(a.features().data()[i] -
                                                  b.features().data()[i]));
        }
        report("accumulate-only-path", worst <= 1e-4f,
               " (max abs diff = " + std::to_string(worst) + ")");
    }
    // residual identity with zeroed weights
    {
        NetworkSpec spec;
        spec.variant = "custom";
        spec.in_channels = 3;
        spec.channels_per_stage = {8, 8, 8, 8};
        spec.stem_channels = 8;
        BasicBlock block("selftest", spec, 8);
        const SparseVoxelTensor u = random_tensor({8, 8, 8}, 8, 0.2);
        const SparseVoxelTensor out = block.forward(u, false, nullptr);
        report("residual-identity",
               out.coords() == u.coords() && out.features() == u.features(), "");
    }
    // determinism of a short fixed-seed training run
    {
        VoxelConfig vc;
        vc.voxel_size = {0.02f, 0.02f, 0.02f};
        const auto samples = voxelize_dataset(make_toy_dataset(seed, 4, 128), vc);
        auto run = [&samples]() {
            NetworkSpec spec;
            spec.variant = "custom";
            spec.blocks_per_stage = {1, 0, 0, 0};
            spec.channels_per_stage = {8, 8, 8, 8};
            spec.stem_channels = 8;
            spec.in_channels = 3;
            Network net(spec);
            net.init_weights(3);
            TrainConfig cfg;
            cfg.lr = 0.05;
            cfg.epochs = 2;
            cfg.batch_size = 4;
            cfg.seed = 11;
            return fit(net, samples, cfg, nullptr).step_losses;
        };
        report("determinism", run() == run(), "");
    }
    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
    return failures == 0 ? 0 : kExitNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse spiking 3D convolution engine"};
    app.require_subcommand(1);
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    app.add_option("--threads", threads, "worker threads for data loading");

    // gen-toy
    auto* gen = app.add_subcommand("gen-toy", "write the synthetic 4-class dataset");
    std::string gen_out = "toy_data";
    uint64_t gen_seed = 0;
    int gen_train = 50, gen_test = 20, gen_points = 512;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--n-train", gen_train, "train clouds per class");
    gen->add_option("--n-test", gen_test, "test clouds per class");
    gen->add_option("--points", gen_points, "points per cloud");

    // voxelize
    auto* vox = app.add_subcommand("voxelize", "point cloud file -> .svt tensor");
    std::string vox_in, vox_out;
    uint64_t vox_seed = 0;
    int vox_off_samples = 2048;
    VoxelFlags vox_flags;
    vox->add_option("--in", vox_in, "input .xyz or .off")->required();
    vox->add_option("--out", vox_out, "output .svt path")->required();
    vox->add_option("--seed", vox_seed, "surface-sampling seed for .off inputs");
    vox->add_option("--off-samples", vox_off_samples, "points sampled from .off meshes");
    vox_flags.attach(vox);

    // train
    auto* tr = app.add_subcommand("train", "train a classifier from a manifest");
    std::string tr_manifest, tr_eval_manifest, tr_out = "model.swt", tr_log, tr_config;
    std::string tr_variant = "T", tr_optimizer = "sgd";
    TrainConfig tr_cfg;
    int tr_timesteps = 1, tr_dmax = 4, tr_off_samples = 2048;
    VoxelFlags tr_flags;
    tr->add_option("--manifest", tr_manifest, "training manifest (path,label rows)")->required();
    tr->add_option("--eval-manifest", tr_eval_manifest, "optional held-out manifest");
    tr->add_option("--out", tr_out, "checkpoint output (.swt)");
    tr->add_option("--config", tr_config, "config output (default: <out>.cfg)");
    tr->add_option("--log", tr_log, "training log file");
    tr->add_option("--variant", tr_variant, "T | S | B | L");
    tr->add_option("--timesteps", tr_timesteps, "timesteps T");
    tr->add_option("--dmax", tr_dmax, "maximum integer spike D");
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--lr", tr_cfg.lr, "learning rate");
    tr->add_option("--weight-decay", tr_cfg.weight_decay, "weight decay");
    tr->add_option("--batch", tr_cfg.batch_size, "batch size");
    tr->add_option("--optimizer", tr_optimizer, "sgd | adam | adamw");
    tr->add_option("--seed", tr_cfg.seed, "init and shuffle seed");
    tr->add_option("--off-samples", tr_off_samples, "points sampled from .off meshes");
    tr_flags.attach(tr);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    std::string ev_checkpoint, ev_manifest, ev_config;
    int ev_off_samples = 2048;
    ev->add_option("--checkpoint", ev_checkpoint, "model .swt")->required();
    ev->add_option("--manifest", ev_manifest, "eval manifest")->required();
    ev->add_option("--config", ev_config, "config file (default: <checkpoint>.cfg)");
    ev->add_option("--off-samples", ev_off_samples, "points sampled from .off meshes");

    // profile
    auto* pr = app.add_subcommand("profile", "firing-rate / energy report for one input");
    std::string pr_checkpoint, pr_in, pr_config;
    int pr_off_samples = 2048;
    pr->add_option("--checkpoint", pr_checkpoint, "model .swt")->required();
    pr->add_option("--in", pr_in, "input .svt, .xyz or .off")->required();
    pr->add_option("--config", pr_config, "config file (default: <checkpoint>.cfg)");
    pr->add_option("--off-samples", pr_off_samples, "points sampled from .off meshes");

    // selftest
    auto* st = app.add_subcommand("selftest", "run oracle-equivalence and invariant checks");
    uint64_t st_seed = 0;
    st->add_option("--seed", st_seed, "seed for the randomized checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return run_gen_toy(gen_out, gen_seed, gen_train, gen_test, gen_points);

        if (vox->parsed()) {
            const VoxelConfig cfg = vox_flags.config();
            PipelineConfig echo;
            echo.voxel = cfg;
            echo_config(echo, nullptr);
            const PointCloud pc = load_point_cloud(vox_in, vox_off_samples, vox_seed);
            const SparseVoxelTensor t = voxelize(pc, cfg);
            write_svt_file(vox_out, t);
            std::cout << "wrote " << vox_out << ": " << t.num_active() << " voxels, "
                      << t.channels() << " channels\n";
            return 0;
        }

        if (tr->parsed()) {
            const auto entries = read_manifest(tr_manifest);
            if (entries.empty()) throw EmptyDataset("manifest " + tr_manifest + " is empty");
            PipelineConfig cfg;
            cfg.voxel = tr_flags.config();
            cfg.net = NetworkSpec::preset(tr_variant, num_classes_of(entries),
                                          cfg.voxel.channels());
            cfg.net.timesteps = tr_timesteps;
            cfg.net.d_max = tr_dmax;
            tr_cfg.optimizer = optimizer_from_string(tr_optimizer);
            echo_config(cfg, &tr_cfg);

            const auto train_set = load_dataset(entries, cfg.voxel, tr_off_samples,
                                                tr_cfg.seed, threads);
            Network net(cfg.net);
            net.init_weights(tr_cfg.seed);

            std::ofstream log;
            if (!tr_log.empty()) log.open(tr_log);
            const FitResult r = fit(net, train_set, tr_cfg, tr_log.empty() ? nullptr : &log);
            if (!r.epoch_mean_loss.empty())
                std::cout << "final epoch mean loss: " << r.epoch_mean_loss.back() << "\n";

            write_swt_file(tr_out, net.to_records());
            const std::string cfg_path = tr_config.empty() ? tr_out + ".cfg" : tr_config;
            write_config_file(cfg_path, cfg);
            std::cout << "wrote " << tr_out << " and " << cfg_path << "\n";

            if (!tr_eval_manifest.empty()) {
                const auto eval_set = load_dataset(read_manifest(tr_eval_manifest), cfg.voxel,
                                                   tr_off_samples, tr_cfg.seed, threads);
                std::cout << "eval accuracy: " << evaluate(net, eval_set) << "\n";
            }
            return 0;
        }

        if (ev->parsed()) {
            const std::string cfg_path = ev_config.empty() ? ev_checkpoint + ".cfg" : ev_config;
            const PipelineConfig cfg = read_config_file(cfg_path);
            echo_config(cfg, nullptr);
            Network net(cfg.net);
            net.from_records(read_swt_file(ev_checkpoint));
            const auto data = load_dataset(read_manifest(ev_manifest), cfg.voxel,
                                           ev_off_samples, 0, threads);
            std::cout << "accuracy: " << evaluate(net, data) << "\n";
            return 0;
        }

        if (pr->parsed()) {
            const std::string cfg_path = pr_config.empty() ? pr_checkpoint + ".cfg" : pr_config;
            const PipelineConfig cfg = read_config_file(cfg_path);
            echo_config(cfg, nullptr);
            Network net(cfg.net);
            net.from_records(read_swt_file(pr_checkpoint));
            SparseVoxelTensor input =
                pr_in.size() > 4 && pr_in.substr(pr_in.size() - 4) == ".svt"
                    ? read_svt_file(pr_in)
                    : voxelize(load_point_cloud(pr_in, pr_off_samples, 0), cfg.voxel);
            ForwardTrace trace;
            net.backbone_forward(input, &trace);
            const FiringStats stats = stats_from_trace(trace);
            std::cout << format_profile_report(stats, EnergyModel{});
            return 0;
        }

        if (st->parsed()) return run_selftest(st_seed);
    } catch (const NonFiniteLoss& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ValueOutOfRange& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
