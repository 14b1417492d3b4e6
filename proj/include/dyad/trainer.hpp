#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/bagging.hpp"
#include "dyad/common.hpp"
#include "dyad/regressor.hpp"

namespace dyad {

// ---------------------------------------------------------------------------
// Iterative learning driver. Each pass fine-tunes the anomaly regressor
// (appearance features) and the dynamicity regressor (motion features) on the
// current bag labels, rescoring every segment with the pass snapshots and
// re-forming the bags from those scores alone. Inference averages the
// snapshots of all passes.
// ---------------------------------------------------------------------------

struct TrainerConfig {
    std::size_t passes = 10;
    std::size_t iterations_per_pass = 30;
    std::size_t batch_size = 32;
    double tau = 0.5;
    std::uint64_t seed = 0;
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 8;
    double learning_rate = 0.005;
    double adagrad_epsilon = 1e-8;
    // Ablation switch: when false the dynamicity branch is disabled and every
    // dynamicity score is pinned to 1, so labels depend on the anomaly score
    // alone.
    bool use_dynamicity = true;
};

struct PassRecord {
    std::size_t pass_index = 0;  // 1-based
    MlpRegressor omega_snapshot;
    MlpRegressor psi_snapshot;
    Bags bags_after;
    std::optional<double> metric;  // held-out AUC hook; never feeds back
};

struct RegressorEnsemble {
    std::vector<PassRecord> passes;

    std::size_t pass_count() const { return passes.size(); }
};

/// Mutable training state threaded through the passes.
struct TrainerState {
    MlpRegressor omega;
    MlpRegressor psi;
    AdaGradState omega_opt;
    AdaGradState psi_opt;
};

inline TrainerState make_trainer_state(std::size_t appearance_dim, std::size_t motion_dim,
                                       const TrainerConfig& config) {
    TrainerState state;
    state.omega = make_regressor(appearance_dim, config.hidden1, config.hidden2,
                                 mix_seed(config.seed, 1));
    state.psi = make_regressor(motion_dim, config.hidden1, config.hidden2,
                               mix_seed(config.seed, 2));
    state.omega_opt = make_adagrad(state.omega, config.learning_rate, config.adagrad_epsilon);
    state.psi_opt = make_adagrad(state.psi, config.learning_rate, config.adagrad_epsilon);
    return state;
}

namespace detail {

inline std::vector<double> bag_targets(const std::vector<FeatureVector>& features,
                                       const Bags& bags) {
    std::vector<double> targets(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        std::size_t id = features[i].segment_id;
        if (bags.positive.count(id))
            targets[i] = 1.0;
        else if (bags.negative.count(id))
            targets[i] = 0.0;
        else
            throw std::invalid_argument("run_pass: bags do not cover segment " +
                                        std::to_string(id));
    }
    return targets;
}

}  // namespace detail

/// One training pass: tune both regressors on the current bag labels and
/// snapshot them. bags_after initially holds the training bags; run_training
/// replaces it with the re-mapped bags.
inline PassRecord run_pass(TrainerState& state, const std::vector<FeatureVector>& appearance,
                           const std::vector<FeatureVector>& motion, const Bags& bags,
                           const TrainerConfig& config, std::size_t pass_index) {
    if (appearance.empty()) throw std::invalid_argument("run_pass: no appearance features");
    if (bags.size() == 0) throw std::invalid_argument("run_pass: both bags are empty");
    if (config.use_dynamicity && motion.size() != appearance.size())
        throw std::invalid_argument("run_pass: appearance/motion feature count mismatch");

    auto targets = detail::bag_targets(appearance, bags);
    train_iterations(state.omega, state.omega_opt, appearance, targets,
                     config.iterations_per_pass, config.batch_size,
                     mix_seed(config.seed, 2 * pass_index + 1));
    if (config.use_dynamicity)
        train_iterations(state.psi, state.psi_opt, motion, targets, config.iterations_per_pass,
                         config.batch_size, mix_seed(config.seed, 2 * pass_index + 2));

    PassRecord record;
    record.pass_index = pass_index;
    record.omega_snapshot = state.omega;
    record.psi_snapshot = state.psi;
    record.bags_after = bags;
    return record;
}

/// Fresh scores from one pass's snapshots; prior scores play no part.
inline std::vector<PseudoScore> rescore(const PassRecord& record,
                                        const std::vector<FeatureVector>& appearance,
                                        const std::vector<FeatureVector>& motion,
                                        bool use_dynamicity = true) {
    std::vector<PseudoScore> scores(appearance.size());
    for (std::size_t i = 0; i < appearance.size(); ++i) {
        scores[i].segment_id = appearance[i].segment_id;
        scores[i].y_s_hat = forward(record.omega_snapshot, appearance[i]);
        scores[i].y_d_hat = use_dynamicity ? forward(record.psi_snapshot, motion[i]) : 1.0;
    }
    return scores;
}

using PassMetricFn = std::function<std::optional<double>(const std::vector<PseudoScore>&)>;

/// The full loop starting from explicit initial bags: per pass
/// train -> rescore -> re-map. The optional metric hook sees each pass's
/// fresh scores (for held-out evaluation) and never influences training.
inline RegressorEnsemble run_training(const std::vector<FeatureVector>& appearance,
                                      const std::vector<FeatureVector>& motion,
                                      const Bags& initial_bags, const TrainerConfig& config,
                                      const PassMetricFn& metric_fn = {}) {
    if (appearance.empty()) throw std::invalid_argument("run_training: empty dataset");
    if (config.passes < 1) throw std::invalid_argument("run_training: passes must be >= 1");

    std::size_t motion_dim = motion.empty() ? 1 : motion.front().dim();
    TrainerState state = make_trainer_state(appearance.front().dim(), motion_dim, config);

    Bags bags = initial_bags;
    RegressorEnsemble ensemble;
    for (std::size_t p = 1; p <= config.passes; ++p) {
        PassRecord record = run_pass(state, appearance, motion, bags, config, p);
        auto scores = rescore(record, appearance, motion, config.use_dynamicity);
        if (metric_fn) record.metric = metric_fn(scores);
        bags = remap_bags(bags, scores, config.tau);
        record.bags_after = bags;
        ensemble.passes.push_back(std::move(record));
    }
    return ensemble;
}

/// Same loop with the initial bags formed from pseudo scores.
inline RegressorEnsemble run_training(const std::vector<FeatureVector>& appearance,
                                      const std::vector<FeatureVector>& motion,
                                      const std::vector<PseudoScore>& initial_scores,
                                      const TrainerConfig& config,
                                      const PassMetricFn& metric_fn = {}) {
    if (initial_scores.size() != appearance.size())
        throw std::invalid_argument("run_training: pseudo scores do not cover the dataset");
    return run_training(appearance, motion, form_bags(initial_scores, config.tau), config,
                        metric_fn);
}

/// Inference: mean of the per-pass snapshot scores, one (y_s, y_d) per segment.
inline std::vector<PseudoScore> ensemble_score(const RegressorEnsemble& ensemble,
                                               const std::vector<FeatureVector>& appearance,
                                               const std::vector<FeatureVector>& motion,
                                               bool use_dynamicity = true) {
    if (ensemble.pass_count() < 1) throw std::invalid_argument("ensemble_score: empty ensemble");
    std::vector<PseudoScore> scores(appearance.size());
    for (std::size_t i = 0; i < appearance.size(); ++i) {
        scores[i].segment_id = appearance[i].segment_id;
        double y_s = 0.0, y_d = 0.0;
        for (const auto& record : ensemble.passes) {
            y_s += forward(record.omega_snapshot, appearance[i]);
            y_d += use_dynamicity ? forward(record.psi_snapshot, motion[i]) : 1.0;
        }
        scores[i].y_s_hat = y_s / static_cast<double>(ensemble.pass_count());
        scores[i].y_d_hat = y_d / static_cast<double>(ensemble.pass_count());
    }
    return scores;
}

inline int final_label(double y_s, double y_d, double tau = 0.5) {
    return assign_label(y_s, y_d, tau);
}

// ---------------------------------------------------------------------------
// Ensemble directory layout: pass_<i>/omega.mlp1, pass_<i>/psi.mlp1,
// pass_<i>/bags.csv plus manifest.json with the trainer configuration.
// ---------------------------------------------------------------------------

inline void save_ensemble(const std::string& dir, const RegressorEnsemble& ensemble,
                          const TrainerConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest{{"passes", ensemble.pass_count()},
                            {"iterations_per_pass", config.iterations_per_pass},
                            {"batch_size", config.batch_size},
                            {"tau", config.tau},
                            {"seed", config.seed},
                            {"hidden1", config.hidden1},
                            {"hidden2", config.hidden2},
                            {"learning_rate", config.learning_rate},
                            {"adagrad_epsilon", config.adagrad_epsilon},
                            {"use_dynamicity", config.use_dynamicity}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write ensemble manifest in " + dir);
    out << manifest.dump(2) << "\n";
    out.close();

    for (const auto& record : ensemble.passes) {
        fs::path pass_dir = fs::path(dir) / ("pass_" + std::to_string(record.pass_index));
        fs::create_directories(pass_dir);
        save_regressor((pass_dir / "omega.mlp1").string(), record.omega_snapshot);
        save_regressor((pass_dir / "psi.mlp1").string(), record.psi_snapshot);
        save_bags((pass_dir / "bags.csv").string(), record.bags_after);
    }
}

inline std::pair<RegressorEnsemble, TrainerConfig> load_ensemble(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("cannot open ensemble manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;

    TrainerConfig config;
    config.passes = manifest.at("passes").get<std::size_t>();
    config.iterations_per_pass = manifest.at("iterations_per_pass").get<std::size_t>();
    config.batch_size = manifest.at("batch_size").get<std::size_t>();
    config.tau = manifest.at("tau").get<double>();
    config.seed = manifest.at("seed").get<std::uint64_t>();
    config.hidden1 = manifest.at("hidden1").get<std::size_t>();
    config.hidden2 = manifest.at("hidden2").get<std::size_t>();
    config.learning_rate = manifest.at("learning_rate").get<double>();
    config.adagrad_epsilon = manifest.at("adagrad_epsilon").get<double>();
    config.use_dynamicity = manifest.at("use_dynamicity").get<bool>();

    RegressorEnsemble ensemble;
    for (std::size_t p = 1; p <= config.passes; ++p) {
        fs::path pass_dir = fs::path(dir) / ("pass_" + std::to_string(p));
        PassRecord record;
        record.pass_index = p;
        record.omega_snapshot = load_regressor((pass_dir / "omega.mlp1").string());
        record.psi_snapshot = load_regressor((pass_dir / "psi.mlp1").string());
        record.bags_after = load_bags((pass_dir / "bags.csv").string());
        ensemble.passes.push_back(std::move(record));
    }
    return {std::move(ensemble), config};
}

}  // namespace dyad
