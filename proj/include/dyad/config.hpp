#pragma once

#include <cstdlib>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "dyad/trainer.hpp"

namespace dyad {

// ---------------------------------------------------------------------------
// Pipeline configuration. Loaded from JSON with exhaustive validation;
// unknown keys are rejected. Command-line flags override file values and the
// DYAD_SEED environment variable supplies the seed default when neither the
// file nor a flag sets one.
// ---------------------------------------------------------------------------

struct PipelineConfig {
    std::size_t segments = 32;
    std::size_t pca_k = 16;
    std::size_t iforest_trees = 100;
    std::size_t iforest_subsample = 256;
    double meb_epsilon = 1e-3;
    double tau = 0.5;
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 8;
    double learning_rate = 0.005;
    double adagrad_epsilon = 1e-8;
    std::size_t passes = 10;
    std::size_t iterations = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::size_t flow_block = 8;
    int flow_search = 4;
    std::string scorer = "ocsvm";  // ocsvm | lof | pca_recon
    std::size_t lof_k = 20;
    std::size_t pca_recon_k = 8;
    bool use_dynamicity = true;

    TrainerConfig trainer() const {
        TrainerConfig t;
        t.passes = passes;
        t.iterations_per_pass = iterations;
        t.batch_size = batch_size;
        t.tau = tau;
        t.seed = seed;
        t.hidden1 = hidden1;
        t.hidden2 = hidden2;
        t.learning_rate = learning_rate;
        t.adagrad_epsilon = adagrad_epsilon;
        t.use_dynamicity = use_dynamicity;
        return t;
    }
};

inline void validate_config(const PipelineConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("config: ") + what);
    };
    require(c.segments >= 1, "segments must be >= 1");
    require(c.pca_k >= 1, "pca_k must be >= 1");
    require(c.iforest_trees >= 1, "iforest.trees must be >= 1");
    require(c.iforest_subsample >= 2, "iforest.subsample must be >= 2");
    require(c.meb_epsilon > 0.0, "meb_epsilon must be > 0");
    require(c.tau > 0.0 && c.tau < 1.0, "tau must be in (0,1)");
    require(c.hidden1 >= 1 && c.hidden2 >= 1, "regressor sizes must be >= 1");
    require(c.learning_rate > 0.0, "learning_rate must be > 0");
    require(c.adagrad_epsilon > 0.0, "adagrad_epsilon must be > 0");
    require(c.passes >= 1, "passes must be >= 1");
    require(c.iterations >= 1, "iterations must be >= 1");
    require(c.batch_size >= 1, "batch_size must be >= 1");
    require(c.flow_block >= 1, "flow.block must be >= 1");
    require(c.flow_search >= 1, "flow.search must be >= 1");
    require(c.scorer == "ocsvm" || c.scorer == "lof" || c.scorer == "pca_recon",
            "scorer must be one of ocsvm, lof, pca_recon");
    require(c.lof_k >= 1, "lof_k must be >= 1");
    require(c.pca_recon_k >= 1, "pca_recon_k must be >= 1");
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    return nlohmann::json{{"segments", c.segments},
                          {"pca_k", c.pca_k},
                          {"iforest", {{"trees", c.iforest_trees}, {"subsample", c.iforest_subsample}}},
                          {"meb_epsilon", c.meb_epsilon},
                          {"tau", c.tau},
                          {"regressor", {{"hidden1", c.hidden1}, {"hidden2", c.hidden2}}},
                          {"learning_rate", c.learning_rate},
                          {"adagrad_epsilon", c.adagrad_epsilon},
                          {"passes", c.passes},
                          {"iterations", c.iterations},
                          {"batch_size", c.batch_size},
                          {"seed", c.seed},
                          {"flow", {{"block", c.flow_block}, {"search", c.flow_search}}},
                          {"scorer", c.scorer},
                          {"lof_k", c.lof_k},
                          {"pca_recon_k", c.pca_recon_k},
                          {"use_dynamicity", c.use_dynamicity}};
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& doc, const std::set<std::string>& known,
                                const std::string& scope) {
    for (const auto& [key, value] : doc.items())
        if (!known.count(key))
            throw std::invalid_argument("config: unknown key '" +
                                        (scope.empty() ? key : scope + "." + key) + "'");
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("config: document must be a JSON object");
    detail::reject_unknown_keys(
        doc,
        {"segments", "pca_k", "iforest", "meb_epsilon", "tau", "regressor", "learning_rate",
         "adagrad_epsilon", "passes", "iterations", "batch_size", "seed", "flow", "scorer",
         "lof_k", "pca_recon_k", "use_dynamicity"},
        "");

    PipelineConfig c;
    if (const char* env = std::getenv("DYAD_SEED")) c.seed = std::strtoull(env, nullptr, 10);

    auto get = [&](const char* key, auto& field) {
        if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("segments", c.segments);
    get("pca_k", c.pca_k);
    get("meb_epsilon", c.meb_epsilon);
    get("tau", c.tau);
    get("learning_rate", c.learning_rate);
    get("adagrad_epsilon", c.adagrad_epsilon);
    get("passes", c.passes);
    get("iterations", c.iterations);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
    get("scorer", c.scorer);
    get("lof_k", c.lof_k);
    get("pca_recon_k", c.pca_recon_k);
    get("use_dynamicity", c.use_dynamicity);

    if (doc.contains("iforest")) {
        const auto& f = doc.at("iforest");
        detail::reject_unknown_keys(f, {"trees", "subsample"}, "iforest");
        if (f.contains("trees")) c.iforest_trees = f.at("trees").get<std::size_t>();
        if (f.contains("subsample")) c.iforest_subsample = f.at("subsample").get<std::size_t>();
    }
    if (doc.contains("regressor")) {
        const auto& r = doc.at("regressor");
        detail::reject_unknown_keys(r, {"hidden1", "hidden2"}, "regressor");
        if (r.contains("hidden1")) c.hidden1 = r.at("hidden1").get<std::size_t>();
        if (r.contains("hidden2")) c.hidden2 = r.at("hidden2").get<std::size_t>();
    }
    if (doc.contains("flow")) {
        const auto& f = doc.at("flow");
        detail::reject_unknown_keys(f, {"block", "search"}, "flow");
        if (f.contains("block")) c.flow_block = f.at("block").get<std::size_t>();
        if (f.contains("search")) c.flow_search = f.at("search").get<int>();
    }

    validate_config(c);
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": config is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

/// Default configuration with the DYAD_SEED fallback applied.
inline PipelineConfig default_config() { return config_from_json(nlohmann::json::object()); }

}  // namespace dyad
