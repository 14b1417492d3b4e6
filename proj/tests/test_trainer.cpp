#include <catch2/catch_amalgamated.hpp>

#include "dyad/trainer.hpp"
#include "test_util.hpp"

using namespace dyad;
using Catch::Approx;

namespace {

// Two separable clusters in both feature spaces; ids 0..n-1, even ids normal,
// odd ids anomalous.
struct Fixture {
    std::vector<FeatureVector> appearance;
    std::vector<FeatureVector> motion;
    std::vector<PseudoScore> scores;

    explicit Fixture(std::size_t n, std::uint64_t seed, double flip_fraction = 0.0) {
        SplitMix64 rng(seed);
        for (std::size_t i = 0; i < n; ++i) {
            bool anomalous = i % 2 == 1;
            double ca = anomalous ? 1.5 : -1.5;
            double cm = anomalous ? 2.0 : -2.0;
            appearance.push_back(testutil::vec(
                {ca + rng.next_double() - 0.5, rng.next_double() - 0.5}, i));
            motion.push_back(testutil::vec(
                {cm + rng.next_double() - 0.5, rng.next_double() - 0.5, rng.next_double()}, i));
            bool flipped = rng.next_double() < flip_fraction;
            double level = anomalous != flipped ? 0.9 : 0.1;
            scores.push_back(PseudoScore{i, level, level});
        }
    }
};

double mean_forward(const MlpRegressor& m, const std::vector<FeatureVector>& xs) {
    double acc = 0.0;
    for (const auto& x : xs) acc += forward(m, x);
    return acc / static_cast<double>(xs.size());
}

}  // namespace

TEST_CASE("run_pass with zero iterations snapshots the input models") {
    Fixture fx(16, 71);
    TrainerConfig config;
    config.iterations_per_pass = 0;
    config.seed = 5;
    TrainerState state = make_trainer_state(2, 3, config);
    MlpRegressor omega_before = state.omega;
    Bags bags = form_bags(fx.scores, config.tau);
    PassRecord record = run_pass(state, fx.appearance, fx.motion, bags, config, 1);
    REQUIRE(record.omega_snapshot.weights == omega_before.weights);
    REQUIRE(record.bags_after.positive == bags.positive);
}

TEST_CASE("a pass on separable bags reduces the training loss") {
    Fixture fx(32, 72);
    TrainerConfig config;
    config.iterations_per_pass = 30;
    config.batch_size = 8;
    config.seed = 11;
    TrainerState state = make_trainer_state(2, 3, config);
    Bags bags = form_bags(fx.scores, config.tau);

    std::vector<double> targets;
    std::vector<double> before, after;
    for (const auto& f : fx.appearance) {
        targets.push_back(bags.positive.count(f.segment_id) ? 1.0 : 0.0);
        before.push_back(forward(state.omega, f));
    }
    run_pass(state, fx.appearance, fx.motion, bags, config, 1);
    for (const auto& f : fx.appearance) after.push_back(forward(state.omega, f));
    REQUIRE(mse_loss(after, targets) < mse_loss(before, targets));
}

TEST_CASE("run_pass determinism and empty-bag handling") {
    Fixture fx(16, 73);
    TrainerConfig config;
    config.iterations_per_pass = 10;
    config.batch_size = 4;
    config.seed = 21;

    SECTION("same seed gives identical pass records") {
        Bags bags = form_bags(fx.scores, config.tau);
        TrainerState s1 = make_trainer_state(2, 3, config);
        TrainerState s2 = make_trainer_state(2, 3, config);
        PassRecord r1 = run_pass(s1, fx.appearance, fx.motion, bags, config, 1);
        PassRecord r2 = run_pass(s2, fx.appearance, fx.motion, bags, config, 1);
        REQUIRE(r1.omega_snapshot.weights == r2.omega_snapshot.weights);
        REQUIRE(r1.psi_snapshot.weights == r2.psi_snapshot.weights);
    }
    SECTION("an empty positive bag trains on negatives only") {
        Bags bags;
        for (const auto& f : fx.appearance) bags.negative.insert(f.segment_id);
        TrainerState state = make_trainer_state(2, 3, config);
        run_pass(state, fx.appearance, fx.motion, bags, config, 1);
        REQUIRE(mean_forward(state.omega, fx.appearance) < 0.5);
    }
    SECTION("both bags empty is an error") {
        TrainerState state = make_trainer_state(2, 3, config);
        REQUIRE_THROWS(run_pass(state, fx.appearance, fx.motion, Bags{}, config, 1));
    }
}

TEST_CASE("rescore uses only the snapshots") {
    Fixture fx(8, 74);
    PassRecord record;
    record.pass_index = 1;
    record.omega_snapshot = make_regressor(2, 3, 2, 1);
    record.psi_snapshot = make_regressor(3, 3, 2, 2);
    for (auto& w : record.omega_snapshot.weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : record.omega_snapshot.biases) std::fill(b.begin(), b.end(), 0.0);

    auto scores = rescore(record, fx.appearance, fx.motion);
    REQUIRE(scores.size() == fx.appearance.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        REQUIRE(scores[i].segment_id == fx.appearance[i].segment_id);
        REQUIRE(scores[i].y_s_hat == Approx(0.5));  // zeroed model
        REQUIRE(scores[i].y_d_hat ==
                Approx(forward(record.psi_snapshot, fx.motion[i])));  // forward oracle
    }
    SECTION("disabled dynamicity pins y_d to 1") {
        auto pinned = rescore(record, fx.appearance, fx.motion, false);
        for (const auto& s : pinned) REQUIRE(s.y_d_hat == 1.0);
    }
}

TEST_CASE("run_training keeps every pass and is reproducible") {
    Fixture fx(32, 75, 0.1);
    TrainerConfig config;
    config.passes = 4;
    config.iterations_per_pass = 10;
    config.batch_size = 8;
    config.seed = 31;

    RegressorEnsemble e1 = run_training(fx.appearance, fx.motion, fx.scores, config);
    REQUIRE(e1.pass_count() == 4);

    SECTION("bit-identical rerun") {
        RegressorEnsemble e2 = run_training(fx.appearance, fx.motion, fx.scores, config);
        for (std::size_t p = 0; p < 4; ++p) {
            REQUIRE(e1.passes[p].omega_snapshot.weights == e2.passes[p].omega_snapshot.weights);
            REQUIRE(e1.passes[p].bags_after.positive == e2.passes[p].bags_after.positive);
        }
    }
    SECTION("bags stay disjoint and covering after every pass") {
        for (const auto& record : e1.passes) {
            REQUIRE(record.bags_after.size() == fx.appearance.size());
            for (std::size_t id : record.bags_after.positive)
                REQUIRE(record.bags_after.negative.count(id) == 0);
        }
    }
    SECTION("bags after a pass are a pure function of its snapshots") {
        for (const auto& record : e1.passes) {
            auto scores = rescore(record, fx.appearance, fx.motion, config.use_dynamicity);
            Bags reformed = form_bags(scores, config.tau);
            REQUIRE(reformed.positive == record.bags_after.positive);
            REQUIRE(reformed.negative == record.bags_after.negative);
        }
    }
    SECTION("metric hook sees every pass and never mutates training") {
        std::vector<std::size_t> seen;
        auto hook = [&](const std::vector<PseudoScore>& scores) -> std::optional<double> {
            seen.push_back(scores.size());
            return 0.75;
        };
        RegressorEnsemble e3 = run_training(fx.appearance, fx.motion, fx.scores, config, hook);
        REQUIRE(seen.size() == 4);
        for (std::size_t p = 0; p < 4; ++p) {
            REQUIRE(e3.passes[p].metric == 0.75);
            REQUIRE(e3.passes[p].omega_snapshot.weights == e1.passes[p].omega_snapshot.weights);
        }
    }
}

TEST_CASE("single-pass training is one supervised fit") {
    Fixture fx(32, 76);
    TrainerConfig config;
    config.passes = 1;
    config.iterations_per_pass = 20;
    config.batch_size = 8;
    config.seed = 41;

    RegressorEnsemble ensemble = run_training(fx.appearance, fx.motion, fx.scores, config);
    REQUIRE(ensemble.pass_count() == 1);

    TrainerState state = make_trainer_state(2, 3, config);
    Bags bags = form_bags(fx.scores, config.tau);
    PassRecord record = run_pass(state, fx.appearance, fx.motion, bags, config, 1);
    REQUIRE(ensemble.passes[0].omega_snapshot.weights == record.omega_snapshot.weights);
    REQUIRE(ensemble.passes[0].psi_snapshot.weights == record.psi_snapshot.weights);
}

TEST_CASE("ensemble_score averages the pass snapshots") {
    Fixture fx(8, 77);
    TrainerConfig config;
    config.passes = 3;
    config.iterations_per_pass = 5;
    config.batch_size = 4;
    config.seed = 51;
    RegressorEnsemble ensemble = run_training(fx.appearance, fx.motion, fx.scores, config);

    auto scores = ensemble_score(ensemble, fx.appearance, fx.motion);
    for (std::size_t i = 0; i < fx.appearance.size(); ++i) {
        double y_s = 0.0, y_d = 0.0;
        for (const auto& record : ensemble.passes) {
            y_s += forward(record.omega_snapshot, fx.appearance[i]);
            y_d += forward(record.psi_snapshot, fx.motion[i]);
        }
        REQUIRE(scores[i].y_s_hat == Approx(y_s / 3.0).margin(1e-9));
        REQUIRE(scores[i].y_d_hat == Approx(y_d / 3.0).margin(1e-9));
        REQUIRE(scores[i].y_s_hat >= 0.0);
        REQUIRE(scores[i].y_s_hat <= 1.0);
    }

    SECTION("a single-pass ensemble equals the plain forward pass") {
        RegressorEnsemble single;
        single.passes.push_back(ensemble.passes[0]);
        auto s = ensemble_score(single, fx.appearance, fx.motion);
        for (std::size_t i = 0; i < fx.appearance.size(); ++i)
            REQUIRE(s[i].y_s_hat ==
                    Approx(forward(single.passes[0].omega_snapshot, fx.appearance[i])));
    }
    SECTION("two fixed models average to the midpoint") {
        RegressorEnsemble pair;
        pair.passes.resize(2);
        pair.passes[0].omega_snapshot = make_regressor(2, 2, 2, 0);
        pair.passes[1].omega_snapshot = make_regressor(2, 2, 2, 0);
        for (auto* rec : {&pair.passes[0], &pair.passes[1]}) {
            for (auto& w : rec->omega_snapshot.weights) std::fill(w.begin(), w.end(), 0.0);
            for (auto& b : rec->omega_snapshot.biases) std::fill(b.begin(), b.end(), 0.0);
            rec->psi_snapshot = rec->omega_snapshot;
        }
        // Output biases chosen so the two passes produce fixed scores a and b.
        pair.passes[0].omega_snapshot.biases[2][0] = 50.0;   // ~1.0
        pair.passes[1].omega_snapshot.biases[2][0] = -50.0;  // ~0.0
        auto s = ensemble_score(pair, {testutil::vec({0.0, 0.0})}, {testutil::vec({0.0, 0.0})});
        REQUIRE(s[0].y_s_hat == Approx(0.5).margin(1e-12));
    }
}

TEST_CASE("final_label delegates to the bag heuristic") {
    REQUIRE(final_label(0.8, 0.8, 0.5) == 1);
    REQUIRE(final_label(0.8, 0.2, 0.5) == 0);
    SplitMix64 rng(78);
    for (int i = 0; i < 50; ++i) {
        double s = rng.next_double(), d = rng.next_double();
        REQUIRE(final_label(s, d, 0.5) == assign_label(s, d, 0.5));
    }
}

TEST_CASE("ensemble persistence round trip") {
    testutil::TempDir dir("ensemble");
    Fixture fx(16, 79);
    TrainerConfig config;
    config.passes = 2;
    config.iterations_per_pass = 5;
    config.batch_size = 4;
    config.seed = 61;
    RegressorEnsemble ensemble = run_training(fx.appearance, fx.motion, fx.scores, config);

    save_ensemble(dir.file("model"), ensemble, config);
    auto [loaded, loaded_config] = load_ensemble(dir.file("model"));
    REQUIRE(loaded.pass_count() == 2);
    REQUIRE(loaded_config.seed == config.seed);
    REQUIRE(loaded_config.tau == config.tau);

    save_ensemble(dir.file("model2"), loaded, loaded_config);
    for (const char* name : {"manifest.json", "pass_1/omega.mlp1", "pass_1/psi.mlp1",
                             "pass_1/bags.csv", "pass_2/omega.mlp1"}) {
        REQUIRE(testutil::slurp(dir.file(std::string("model/") + name)) ==
                testutil::slurp(dir.file(std::string("model2/") + name)));
    }
}
