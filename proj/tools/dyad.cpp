// dyad: command-line surface for the self-trained video anomaly detection
// pipeline. Stages run in order: synth -> features -> pseudo -> train ->
// score -> eval, each reading the artifacts of the previous one.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dyad/pipeline.hpp"

namespace {

struct Overrides {
    CLI::Option* seed = nullptr;
    CLI::Option* tau = nullptr;
    CLI::Option* passes = nullptr;
    CLI::Option* iterations = nullptr;
    CLI::Option* scorer = nullptr;
    CLI::Option* pca_k = nullptr;
    CLI::Option* segments = nullptr;
    CLI::Option* no_dynamicity = nullptr;

    std::uint64_t seed_value = 0;
    double tau_value = 0.5;
    std::size_t passes_value = 10;
    std::size_t iterations_value = 30;
    std::string scorer_value = "ocsvm";
    std::size_t pca_k_value = 16;
    std::size_t segments_value = 32;
};

dyad::PipelineConfig effective_config(const std::string& config_path, const Overrides& o) {
    dyad::PipelineConfig config =
        config_path.empty() ? dyad::default_config() : dyad::load_config(config_path);
    if (o.seed->count()) config.seed = o.seed_value;
    if (o.tau->count()) config.tau = o.tau_value;
    if (o.passes->count()) config.passes = o.passes_value;
    if (o.iterations->count()) config.iterations = o.iterations_value;
    if (o.scorer->count()) config.scorer = o.scorer_value;
    if (o.pca_k->count()) config.pca_k = o.pca_k_value;
    if (o.segments->count()) config.segments = o.segments_value;
    if (o.no_dynamicity->count()) config.use_dynamicity = false;
    dyad::validate_config(config);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dyad: self-trained video anomaly detection at desk scale"};
    app.require_subcommand(0, 1);

    std::string config_path;
    bool print_config = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_flag("--print-config", print_config,
                 "print the effective merged configuration and exit");

    Overrides o;
    o.seed = app.add_option("--seed", o.seed_value, "random seed (overrides config and DYAD_SEED)");
    o.tau = app.add_option("--tau", o.tau_value, "label threshold in (0,1)");
    o.passes = app.add_option("--passes", o.passes_value, "training passes");
    o.iterations = app.add_option("--iterations", o.iterations_value, "iterations per pass");
    o.scorer = app.add_option("--scorer", o.scorer_value, "companion scorer: ocsvm, lof, pca_recon");
    o.pca_k = app.add_option("--pca-k", o.pca_k_value, "retained PCA components");
    o.segments = app.add_option("--segments", o.segments_value, "segments per video");
    o.no_dynamicity = app.add_flag("--no-dynamicity",
                                   "disable the dynamicity branch (appearance-only ablation)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic GV8 dataset");
    std::string synth_out;
    dyad::SynthSpec spec;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--videos", spec.videos, "video count");
    synth->add_option("--frames", spec.frames_per_video, "frames per video");
    synth->add_option("--width", spec.width, "frame width");
    synth->add_option("--height", spec.height, "frame height");
    synth->add_option("--rate", spec.anomaly_rate, "anomalous fraction of segments");
    synth->add_option("--separation", spec.separation, "appearance offset multiplier");
    synth->add_option("--burst", spec.motion_burst, "anomalous blob displacement per frame");

    // features
    auto* features = app.add_subcommand("features", "extract appearance and motion features");
    std::string features_manifest, features_out;
    features->add_option("--manifest", features_manifest, "dataset manifest")->required();
    features->add_option("--out", features_out, "output directory")->required();

    // pseudo
    auto* pseudo = app.add_subcommand("pseudo", "unsupervised pseudo scores and initial bags");
    std::string pseudo_features, pseudo_out;
    pseudo->add_option("--features", pseudo_features, "features directory")->required();
    pseudo->add_option("--out", pseudo_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "iterative training of the score regressors");
    std::string train_manifest, train_features, train_pseudo, train_out;
    train->add_option("--manifest", train_manifest, "dataset manifest")->required();
    train->add_option("--features", train_features, "features directory")->required();
    train->add_option("--pseudo", train_pseudo, "pseudo-scoring directory")->required();
    train->add_option("--out", train_out, "ensemble output directory")->required();

    // score
    auto* score = app.add_subcommand("score", "ensemble inference over all segments");
    std::string score_features, score_ensemble, score_out;
    score->add_option("--features", score_features, "features directory")->required();
    score->add_option("--ensemble", score_ensemble, "trained ensemble directory")->required();
    score->add_option("--out", score_out, "output directory")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "frame-level ROC/AUC and false-alarm rate");
    std::string eval_manifest, eval_scores, eval_out;
    eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
    eval->add_option("--scores", eval_scores, "scores.csv from the score stage")->required();
    eval->add_option("--out", eval_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        dyad::PipelineConfig config = effective_config(config_path, o);
        if (print_config) {
            std::cout << dyad::config_to_json(config).dump(2) << "\n";
            return 0;
        }
        if (synth->parsed()) {
            spec.segments = config.segments;
            spec.seed = config.seed;
            std::cout << dyad::run_synth(spec, synth_out) << "\n";
        } else if (features->parsed()) {
            std::cout << dyad::run_features(config, features_manifest, features_out) << "\n";
        } else if (pseudo->parsed()) {
            std::cout << dyad::run_pseudo(config, pseudo_features, pseudo_out) << "\n";
        } else if (train->parsed()) {
            std::cout << dyad::run_train(config, train_manifest, train_features, train_pseudo,
                                         train_out)
                      << "\n";
        } else if (score->parsed()) {
            std::cout << dyad::run_score(score_features, score_ensemble, score_out) << "\n";
        } else if (eval->parsed()) {
            dyad::EvalSummary summary =
                dyad::run_eval(config, eval_manifest, eval_scores, eval_out);
            std::cout << "eval: auc " << summary.auc << ", far " << summary.far << " -> "
                      << eval_out << "\n";
        } else {
            std::cerr << "dyad: no subcommand given (try --help)\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "dyad: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
