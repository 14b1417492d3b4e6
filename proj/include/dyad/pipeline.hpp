#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/bagging.hpp"
#include "dyad/config.hpp"
#include "dyad/dynamicity.hpp"
#include "dyad/eval.hpp"
#include "dyad/features.hpp"
#include "dyad/ingest.hpp"
#include "dyad/pseudo_scoring.hpp"
#include "dyad/synth.hpp"
#include "dyad/trainer.hpp"

namespace dyad {

// Stage drivers shared by the command-line tool and the test harnesses. Each
// stage reads the artifacts of the previous one from disk, so reruns with the
// same inputs and seed reproduce every output byte for byte.

namespace detail {

/// Shortest round-trippable decimal form of a double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void require_file(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("missing " + what + ": " + path);
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                                      const std::string& header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw std::runtime_error(path + ": expected header '" + header + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline std::string run_synth(const SynthSpec& spec, const std::string& out_dir) {
    SynthResult result = generate_dataset(spec, out_dir);
    std::ostringstream msg;
    msg << "synth: wrote " << result.video_files.size() << " videos ("
        << result.anomalous_segments << " anomalous segments) to " << out_dir;
    return msg.str();
}

// ---------------------------------------------------------------------------
// features: appearance features (handcrafted or imported) reduced with PCA,
// motion features, and the dynamicity table.
// ---------------------------------------------------------------------------

struct DatasetFeatures {
    std::vector<FeatureVector> appearance;  // raw, before PCA
    std::vector<FeatureVector> motion;
    std::vector<double> dynamicity;  // D_mean per segment
};

inline DatasetFeatures compute_dataset_features(const DatasetManifest& manifest,
                                                const PipelineConfig& config) {
    DatasetFeatures out;
    const std::size_t per_video = manifest.segment_count_per_video;

    for (std::size_t v = 0; v < manifest.entries.size(); ++v) {
        const auto& entry = manifest.entries[v];
        std::optional<GrayVideo> video;
        auto ensure_video = [&]() -> const GrayVideo& {
            if (!video) video = read_gv8(entry.video);
            return *video;
        };

        std::vector<FeatureVector> appearance;
        if (entry.features) {
            appearance = load_features(*entry.features);
            if (appearance.size() != per_video)
                throw std::runtime_error(*entry.features + ": expected " +
                                         std::to_string(per_video) + " segment features, got " +
                                         std::to_string(appearance.size()));
        } else {
            const GrayVideo& gv = ensure_video();
            for (const auto& view : split_segments(gv, per_video, v))
                appearance.push_back(extract_handcrafted(gv, view));
        }

        std::vector<std::vector<FlowField>> segment_flows(per_video);
        if (entry.flow) {
            auto fields = load_flow(*entry.flow);
            auto views = split_segments(fields.size() + 1, per_video, v);
            for (std::size_t i = 0; i < per_video; ++i) {
                const auto& view = views[i];
                segment_flows[i].assign(fields.begin() + static_cast<std::ptrdiff_t>(view.begin),
                                        fields.begin() + static_cast<std::ptrdiff_t>(view.end - 1));
            }
        } else {
            const GrayVideo& gv = ensure_video();
            auto views = split_segments(gv, per_video, v);
            for (std::size_t i = 0; i < per_video; ++i)
                segment_flows[i] = estimate_segment_flow(gv, views[i], config.flow_block,
                                                         config.flow_search);
        }

        for (std::size_t i = 0; i < per_video; ++i) {
            std::size_t id = v * per_video + i;
            appearance[i].segment_id = id;
            out.appearance.push_back(std::move(appearance[i]));
            FeatureVector motion = motion_features(segment_flows[i], config.flow_search);
            motion.segment_id = id;
            out.motion.push_back(std::move(motion));
            out.dynamicity.push_back(segment_dynamicity(segment_flows[i]).segment_value);
        }
    }
    return out;
}

inline std::string run_features(const PipelineConfig& config, const std::string& manifest_path,
                                const std::string& out_dir) {
    detail::require_file(manifest_path, "manifest");
    DatasetManifest manifest = load_manifest(manifest_path);
    DatasetFeatures data = compute_dataset_features(manifest, config);

    PcaModel pca = pca_fit(data.appearance, config.pca_k);
    std::vector<FeatureVector> reduced;
    reduced.reserve(data.appearance.size());
    for (const auto& f : data.appearance) reduced.push_back(pca_transform(pca, f));

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    save_pca((fs::path(out_dir) / "pca.pca1").string(), pca);
    store_features((fs::path(out_dir) / "features.fv32").string(), reduced);
    store_features((fs::path(out_dir) / "motion.fv32").string(), data.motion);

    auto y_d = normalize_dynamicity(data.dynamicity);
    std::ofstream csv(fs::path(out_dir) / "dynamicity.csv");
    if (!csv) throw std::runtime_error("cannot write dynamicity.csv in " + out_dir);
    csv << "segment_id,D_mean,y_d_hat\n";
    for (std::size_t i = 0; i < data.dynamicity.size(); ++i)
        csv << i << "," << detail::format_double(data.dynamicity[i]) << ","
            << detail::format_double(y_d[i]) << "\n";
    csv.close();

    std::ostringstream msg;
    msg << "features: " << reduced.size() << " segments, appearance dim "
        << (reduced.empty() ? 0 : reduced.front().dim()) << ", motion dim "
        << (data.motion.empty() ? 0 : data.motion.front().dim()) << " -> " << out_dir;
    return msg.str();
}

// ---------------------------------------------------------------------------
// pseudo: unsupervised scores and the initial bags.
// ---------------------------------------------------------------------------

struct DynamicityTable {
    std::vector<std::size_t> ids;
    std::vector<double> d_mean;
    std::vector<double> y_d_hat;
};

inline DynamicityTable read_dynamicity_csv(const std::string& path) {
    detail::require_file(path, "dynamicity table");
    DynamicityTable table;
    for (const auto& row : detail::read_csv(path, "segment_id,D_mean,y_d_hat")) {
        if (row.size() != 3) throw std::runtime_error(path + ": malformed row");
        table.ids.push_back(std::stoull(row[0]));
        table.d_mean.push_back(std::stod(row[1]));
        table.y_d_hat.push_back(std::stod(row[2]));
    }
    return table;
}

inline std::string run_pseudo(const PipelineConfig& config, const std::string& features_dir,
                              const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::string features_path = (fs::path(features_dir) / "features.fv32").string();
    detail::require_file(features_path, "features");
    auto features = load_features(features_path);
    for (std::size_t i = 0; i < features.size(); ++i) features[i].segment_id = i;
    auto dynamicity = read_dynamicity_csv((fs::path(features_dir) / "dynamicity.csv").string());
    if (dynamicity.ids.size() != features.size())
        throw std::runtime_error("dynamicity table does not cover the feature set");

    fs::create_directories(out_dir);

    IsolationForest forest =
        iforest_fit(features, config.iforest_trees, config.iforest_subsample, config.seed);
    save_forest((fs::path(out_dir) / "iforest.psm1").string(), forest);
    std::vector<double> tree_scores(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        tree_scores[i] = iforest_score(forest, features[i]);

    std::vector<double> companion(features.size());
    if (config.scorer == "ocsvm") {
        Hypersphere sphere = meb_fit(features, config.meb_epsilon);
        save_sphere((fs::path(out_dir) / "sphere.psm1").string(), sphere);
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (sphere.radius > 0.0) {
                companion[i] = ocsvm_score(sphere, features[i], sphere.radius);
            } else {
                double d2 = 0.0;
                for (std::size_t j = 0; j < features[i].dim(); ++j) {
                    double d = features[i].values[j] - sphere.center[j];
                    d2 += d * d;
                }
                companion[i] = d2 > 0.0 ? 1.0 : 0.0;
            }
        }
    } else if (config.scorer == "lof") {
        companion = lof_scores(features, config.lof_k);
    } else {
        PcaModel recon = pca_fit(features, std::min(config.pca_recon_k, features.front().dim()));
        save_pca((fs::path(out_dir) / "recon_pca.pca1").string(), recon);
        for (std::size_t i = 0; i < features.size(); ++i)
            companion[i] = pca_recon_score(recon, features[i]);
    }

    auto y_s = combine_scores(tree_scores, companion);
    std::vector<PseudoScore> scores(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        scores[i].segment_id = i;
        scores[i].y_s_hat = y_s[i];
        scores[i].y_d_hat = config.use_dynamicity ? dynamicity.y_d_hat[i] : 1.0;
    }

    std::ofstream csv(fs::path(out_dir) / "pseudo.csv");
    if (!csv) throw std::runtime_error("cannot write pseudo.csv in " + out_dir);
    csv << "segment_id,y_s_hat\n";
    for (const auto& s : scores)
        csv << s.segment_id << "," << detail::format_double(s.y_s_hat) << "\n";
    csv.close();

    Bags bags = form_bags(scores, config.tau);
    save_bags((fs::path(out_dir) / "bags.csv").string(), bags);

    std::ostringstream msg;
    msg << "pseudo: scorer " << config.scorer << ", bags A=" << bags.positive.size()
        << " N=" << bags.negative.size() << " -> " << out_dir;
    return msg.str();
}

// ---------------------------------------------------------------------------
// train: the iterative-learning loop, with per-pass AUC when ground truth is
// available.
// ---------------------------------------------------------------------------

namespace detail {

struct FrameTruth {
    std::vector<std::vector<SegmentView>> views;  // per video
    std::vector<std::vector<int>> labels;         // per video
};

inline std::optional<FrameTruth> load_frame_truth(const DatasetManifest& manifest) {
    FrameTruth truth;
    for (std::size_t v = 0; v < manifest.entries.size(); ++v) {
        const auto& entry = manifest.entries[v];
        if (!entry.ground_truth) return std::nullopt;
        auto labels = load_ground_truth(*entry.ground_truth);
        truth.views.push_back(
            split_segments(labels.size(), manifest.segment_count_per_video, v));
        truth.labels.push_back(std::move(labels));
    }
    return truth;
}

/// Frame-level AUC of the anomaly stream for a full set of segment scores.
inline std::optional<double> frame_auc(const FrameTruth& truth, std::size_t per_video,
                                       const std::vector<PseudoScore>& scores) {
    std::vector<double> frame_scores;
    std::vector<int> frame_labels;
    for (std::size_t v = 0; v < truth.views.size(); ++v) {
        std::vector<double> segment_scores(per_video);
        for (std::size_t i = 0; i < per_video; ++i)
            segment_scores[i] = scores[v * per_video + i].y_s_hat;
        auto frames = interpolate_to_frames(segment_scores, truth.views[v]);
        frame_scores.insert(frame_scores.end(), frames.begin(), frames.end());
        frame_labels.insert(frame_labels.end(), truth.labels[v].begin(), truth.labels[v].end());
    }
    bool has_pos = false, has_neg = false;
    for (int l : frame_labels) (l ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) return std::nullopt;
    return roc_auc(frame_scores, frame_labels).auc;
}

}  // namespace detail

inline std::string run_train(const PipelineConfig& config, const std::string& manifest_path,
                             const std::string& features_dir, const std::string& pseudo_dir,
                             const std::string& out_dir) {
    namespace fs = std::filesystem;
    detail::require_file(manifest_path, "manifest");
    DatasetManifest manifest = load_manifest(manifest_path);

    std::string features_path = (fs::path(features_dir) / "features.fv32").string();
    std::string motion_path = (fs::path(features_dir) / "motion.fv32").string();
    std::string bags_path = (fs::path(pseudo_dir) / "bags.csv").string();
    detail::require_file(features_path, "features");
    detail::require_file(motion_path, "motion features");
    detail::require_file(bags_path, "bags");

    auto appearance = load_features(features_path);
    auto motion = load_features(motion_path);
    for (std::size_t i = 0; i < appearance.size(); ++i) appearance[i].segment_id = i;
    for (std::size_t i = 0; i < motion.size(); ++i) motion[i].segment_id = i;
    Bags bags = load_bags(bags_path);

    auto truth = detail::load_frame_truth(manifest);
    PassMetricFn metric;
    if (truth)
        metric = [&](const std::vector<PseudoScore>& scores) {
            return detail::frame_auc(*truth, manifest.segment_count_per_video, scores);
        };

    RegressorEnsemble ensemble = run_training(appearance, motion, bags, config.trainer(), metric);
    fs::create_directories(out_dir);
    save_ensemble(out_dir, ensemble, config.trainer());

    if (truth) {
        std::ofstream csv(fs::path(out_dir) / "pass_metrics.csv");
        if (!csv) throw std::runtime_error("cannot write pass_metrics.csv in " + out_dir);
        csv << "pass,auc\n";
        for (const auto& record : ensemble.passes)
            csv << record.pass_index << ","
                << (record.metric ? detail::format_double(*record.metric) : "nan") << "\n";
        csv.close();
    }

    std::ostringstream msg;
    msg << "train: " << ensemble.pass_count() << " passes on " << appearance.size()
        << " segments -> " << out_dir;
    if (!ensemble.passes.empty() && ensemble.passes.back().metric)
        msg << " (final pass AUC " << detail::format_double(*ensemble.passes.back().metric)
            << ")";
    return msg.str();
}

// ---------------------------------------------------------------------------
// score: ensemble inference over all segments.
// ---------------------------------------------------------------------------

inline std::string run_score(const std::string& features_dir, const std::string& ensemble_dir,
                             const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::string features_path = (fs::path(features_dir) / "features.fv32").string();
    std::string motion_path = (fs::path(features_dir) / "motion.fv32").string();
    detail::require_file(features_path, "features");
    detail::require_file(motion_path, "motion features");
    detail::require_file((fs::path(ensemble_dir) / "manifest.json").string(), "ensemble");

    auto appearance = load_features(features_path);
    auto motion = load_features(motion_path);
    for (std::size_t i = 0; i < appearance.size(); ++i) appearance[i].segment_id = i;
    for (std::size_t i = 0; i < motion.size(); ++i) motion[i].segment_id = i;

    auto [ensemble, trainer_config] = load_ensemble(ensemble_dir);
    auto scores = ensemble_score(ensemble, appearance, motion, trainer_config.use_dynamicity);

    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "scores.csv");
    if (!csv) throw std::runtime_error("cannot write scores.csv in " + out_dir);
    csv << "segment_id,y_s,y_d,label\n";
    for (const auto& s : scores)
        csv << s.segment_id << "," << detail::format_double(s.y_s_hat) << ","
            << detail::format_double(s.y_d_hat) << ","
            << final_label(s.y_s_hat, s.y_d_hat, trainer_config.tau) << "\n";
    csv.close();

    std::ostringstream msg;
    msg << "score: " << scores.size() << " segments with a " << ensemble.pass_count()
        << "-pass ensemble -> " << out_dir;
    return msg.str();
}

// ---------------------------------------------------------------------------
// eval: frame-level interpolation, ROC/AUC, and the false-alarm rate.
// ---------------------------------------------------------------------------

struct SegmentScoreRow {
    std::size_t segment_id = 0;
    double y_s = 0.0;
    double y_d = 0.0;
    int label = 0;
};

inline std::vector<SegmentScoreRow> read_scores_csv(const std::string& path) {
    detail::require_file(path, "scores");
    std::vector<SegmentScoreRow> rows;
    for (const auto& row : detail::read_csv(path, "segment_id,y_s,y_d,label")) {
        if (row.size() != 4) throw std::runtime_error(path + ": malformed row");
        rows.push_back({std::stoull(row[0]), std::stod(row[1]), std::stod(row[2]),
                        std::stoi(row[3])});
    }
    return rows;
}

struct EvalSummary {
    double auc = 0.0;
    double far = 0.0;
    std::vector<std::optional<double>> per_video_auc;
};

inline EvalSummary run_eval(const PipelineConfig& config, const std::string& manifest_path,
                            const std::string& scores_path, const std::string& out_dir) {
    namespace fs = std::filesystem;
    detail::require_file(manifest_path, "manifest");
    DatasetManifest manifest = load_manifest(manifest_path);
    auto rows = read_scores_csv(scores_path);

    const std::size_t per_video = manifest.segment_count_per_video;
    if (rows.size() != manifest.entries.size() * per_video)
        throw std::runtime_error("scores.csv does not cover the manifest segments");
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].segment_id != i)
            throw std::runtime_error("scores.csv rows must be ordered by segment id");

    EvalSummary summary;
    std::vector<double> frame_y_s, frame_y_d;
    std::vector<int> frame_labels;
    for (std::size_t v = 0; v < manifest.entries.size(); ++v) {
        const auto& entry = manifest.entries[v];
        if (!entry.ground_truth)
            throw std::runtime_error("missing ground truth for " + entry.video);
        auto labels = load_ground_truth(*entry.ground_truth);
        auto views = split_segments(labels.size(), per_video, v);

        std::vector<double> seg_y_s(per_video), seg_y_d(per_video);
        for (std::size_t i = 0; i < per_video; ++i) {
            seg_y_s[i] = rows[v * per_video + i].y_s;
            seg_y_d[i] = rows[v * per_video + i].y_d;
        }
        auto video_y_s = interpolate_to_frames(seg_y_s, views);
        auto video_y_d = interpolate_to_frames(seg_y_d, views);

        bool has_pos = false, has_neg = false;
        for (int l : labels) (l ? has_pos : has_neg) = true;
        if (has_pos && has_neg)
            summary.per_video_auc.emplace_back(roc_auc(video_y_s, labels).auc);
        else
            summary.per_video_auc.emplace_back(std::nullopt);

        frame_y_s.insert(frame_y_s.end(), video_y_s.begin(), video_y_s.end());
        frame_y_d.insert(frame_y_d.end(), video_y_d.begin(), video_y_d.end());
        frame_labels.insert(frame_labels.end(), labels.begin(), labels.end());
    }

    RocCurve curve = roc_auc(frame_y_s, frame_labels);
    summary.auc = curve.auc;
    summary.far = false_alarm_rate(frame_y_s, frame_labels, config.tau);

    fs::create_directories(out_dir);
    std::ofstream roc(fs::path(out_dir) / "roc.csv");
    if (!roc) throw std::runtime_error("cannot write roc.csv in " + out_dir);
    roc << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : curve.points)
        roc << detail::format_double(fpr) << "," << detail::format_double(tpr) << "\n";
    roc.close();

    std::ofstream frames(fs::path(out_dir) / "frames.csv");
    if (!frames) throw std::runtime_error("cannot write frames.csv in " + out_dir);
    frames << "frame_index,y_s,y_d,label\n";
    for (std::size_t f = 0; f < frame_y_s.size(); ++f)
        frames << f << "," << detail::format_double(frame_y_s[f]) << ","
               << detail::format_double(frame_y_d[f]) << "," << frame_labels[f] << "\n";
    frames.close();

    nlohmann::json doc{{"auc", summary.auc}, {"far", summary.far}};
    doc["per_video_auc"] = nlohmann::json::array();
    for (const auto& auc : summary.per_video_auc)
        doc["per_video_auc"].push_back(auc ? nlohmann::json(*auc) : nlohmann::json(nullptr));
    std::ofstream sj(fs::path(out_dir) / "summary.json");
    if (!sj) throw std::runtime_error("cannot write summary.json in " + out_dir);
    sj << doc.dump(2) << "\n";
    sj.close();

    return summary;
}

}  // namespace dyad
