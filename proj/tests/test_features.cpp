#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "dyad/features.hpp"
#include "dyad/pseudo_scoring.hpp"
#include "test_util.hpp"

using namespace dyad;
using Catch::Approx;

namespace {

GrayVideo video_from_frames(std::size_t w, std::size_t h,
                            std::vector<std::vector<std::uint8_t>> frames) {
    GrayVideo v;
    v.width = w;
    v.height = h;
    v.frames = std::move(frames);
    return v;
}

double sum_range(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += v[i];
    return acc;
}

}  // namespace

TEST_CASE("handcrafted features on a static black segment") {
    auto video = video_from_frames(2, 2, {{0, 0, 0, 0}, {0, 0, 0, 0}});
    auto f = extract_handcrafted(video, 0, 2);
    REQUIRE(f.dim() == 64);
    REQUIRE(f.values[0] == Approx(1.0));
    REQUIRE(f.values[32] == Approx(1.0));
    REQUIRE(sum_range(f.values, 1, 32) == Approx(0.0));
    REQUIRE(sum_range(f.values, 33, 64) == Approx(0.0));
}

TEST_CASE("handcrafted features are invariant to time reversal") {
    auto a = video_from_frames(2, 2, {{10, 20, 30, 40}, {200, 150, 100, 50}});
    auto b = video_from_frames(2, 2, {{200, 150, 100, 50}, {10, 20, 30, 40}});
    REQUIRE(extract_handcrafted(a, 0, 2).values == extract_handcrafted(b, 0, 2).values);
}

TEST_CASE("handcrafted features match a hand-summed oracle") {
    // Frame 1: 0,8,16,24 -> bins 0..3. Frame 2: 0,0,255,255 -> bins 0 and 31.
    // Diffs: 0, 8, 239, 231 -> bins 0, 1, 29, 28.
    auto video = video_from_frames(2, 2, {{0, 8, 16, 24}, {0, 0, 255, 255}});
    auto f = extract_handcrafted(video, 0, 2);
    REQUIRE(f.values[0] == Approx(0.375));
    REQUIRE(f.values[1] == Approx(0.125));
    REQUIRE(f.values[2] == Approx(0.125));
    REQUIRE(f.values[3] == Approx(0.125));
    REQUIRE(f.values[31] == Approx(0.25));
    REQUIRE(f.values[32 + 0] == Approx(0.25));
    REQUIRE(f.values[32 + 1] == Approx(0.25));
    REQUIRE(f.values[32 + 29] == Approx(0.25));
    REQUIRE(f.values[32 + 28] == Approx(0.25));
}

TEST_CASE("handcrafted halves are normalized for random segments") {
    SplitMix64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t frames = 2 + rng.next_below(6);
        std::vector<std::vector<std::uint8_t>> data(frames, std::vector<std::uint8_t>(48));
        for (auto& frame : data)
            for (auto& p : frame) p = static_cast<std::uint8_t>(rng.next_below(256));
        auto video = video_from_frames(8, 6, data);
        auto f = extract_handcrafted(video, 0, frames);
        for (double v : f.values) REQUIRE(v >= 0.0);
        REQUIRE(sum_range(f.values, 0, 32) == Approx(1.0).epsilon(1e-6));
        REQUIRE(sum_range(f.values, 32, 64) == Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("handcrafted rejects degenerate segments") {
    auto video = video_from_frames(2, 2, {{0, 0, 0, 0}, {0, 0, 0, 0}});
    REQUIRE_THROWS(extract_handcrafted(video, 0, 1));
    REQUIRE_THROWS(extract_handcrafted(video, 0, 3));
}

TEST_CASE("pca_fit on axis-aligned data finds the axis with positive sign") {
    std::vector<FeatureVector> points;
    for (double x : {-3.0, -1.0, 0.0, 2.0, 5.0}) points.push_back(testutil::vec({x, 0.0, 0.0}));
    PcaModel model = pca_fit(points, 1);
    REQUIRE(model.components[0][0] == Approx(1.0).margin(1e-9));
    REQUIRE(model.components[0][1] == Approx(0.0).margin(1e-9));
    REQUIRE(model.components[0][2] == Approx(0.0).margin(1e-9));
}

TEST_CASE("pca eigenvalues match the closed-form 2x2 eigendecomposition") {
    SplitMix64 rng(11);
    auto points = testutil::random_features(40, 2, rng, 2.0);
    for (auto& p : points) p.values[1] = 0.6 * p.values[0] + 0.4 * p.values[1];

    // Independent oracle: sample covariance entries and its eigenvalues.
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.values[0];
        my += p.values[1];
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        double dx = p.values[0] - mx, dy = p.values[1] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    double denom = static_cast<double>(points.size() - 1);
    sxx /= denom;
    syy /= denom;
    sxy /= denom;
    double tr = sxx + syy;
    double det = sxx * syy - sxy * sxy;
    double disc = std::sqrt(tr * tr / 4.0 - det);
    double hi = tr / 2.0 + disc, lo = tr / 2.0 - disc;

    PcaModel model = pca_fit(points, 2);
    REQUIRE(model.eigenvalues[0] == Approx(hi).margin(1e-9));
    REQUIRE(model.eigenvalues[1] == Approx(lo).margin(1e-9));
    REQUIRE(model.mean[0] == Approx(mx));
    REQUIRE(model.mean[1] == Approx(my));
}

TEST_CASE("full-rank pca transform preserves pairwise distances") {
    SplitMix64 rng(12);
    auto points = testutil::random_features(15, 5, rng, 3.0);
    PcaModel model = pca_fit(points, 5);
    std::vector<FeatureVector> mapped;
    for (const auto& p : points) mapped.push_back(pca_transform(model, p));
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            double before = 0.0, after = 0.0;
            for (std::size_t d = 0; d < 5; ++d) {
                double bd = points[i].values[d] - points[j].values[d];
                double ad = mapped[i].values[d] - mapped[j].values[d];
                before += bd * bd;
                after += ad * ad;
            }
            REQUIRE(std::sqrt(after) == Approx(std::sqrt(before)).margin(1e-6));
        }
}

TEST_CASE("pca components are orthonormal") {
    SplitMix64 rng(13);
    auto points = testutil::random_features(30, 6, rng, 1.5);
    PcaModel model = pca_fit(points, 4);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            double dot = 0.0;
            for (std::size_t d = 0; d < 6; ++d)
                dot += model.components[a][d] * model.components[b][d];
            REQUIRE(dot == Approx(a == b ? 1.0 : 0.0).margin(1e-6));
        }
}

TEST_CASE("full spectrum reconstructs the covariance matrix") {
    SplitMix64 rng(14);
    auto points = testutil::random_features(25, 4, rng, 2.0);
    PcaModel model = pca_fit(points, 4);

    std::vector<double> mean(4, 0.0);
    for (const auto& p : points)
        for (std::size_t d = 0; d < 4; ++d) mean[d] += p.values[d];
    for (double& m : mean) m /= static_cast<double>(points.size());
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            double cov = 0.0;
            for (const auto& p : points)
                cov += (p.values[i] - mean[i]) * (p.values[j] - mean[j]);
            cov /= static_cast<double>(points.size() - 1);
            double recon = 0.0;
            for (std::size_t c = 0; c < 4; ++c)
                recon += model.eigenvalues[c] * model.components[c][i] * model.components[c][j];
            REQUIRE(recon == Approx(cov).margin(1e-6));
        }
    }
}

TEST_CASE("pca_transform basics") {
    SplitMix64 rng(15);
    auto points = testutil::random_features(20, 5, rng, 1.0);
    PcaModel model = pca_fit(points, 3);

    SECTION("mean maps to zero") {
        FeatureVector mean_point;
        mean_point.values = model.mean;
        auto out = pca_transform(model, mean_point);
        for (double v : out.values) REQUIRE(v == Approx(0.0).margin(1e-12));
    }
    SECTION("mean plus first component maps to e_0") {
        FeatureVector p;
        p.values = model.mean;
        for (std::size_t d = 0; d < 5; ++d) p.values[d] += model.components[0][d];
        auto out = pca_transform(model, p);
        REQUIRE(out.values[0] == Approx(1.0).margin(1e-9));
        REQUIRE(out.values[1] == Approx(0.0).margin(1e-9));
        REQUIRE(out.values[2] == Approx(0.0).margin(1e-9));
    }
    SECTION("matches an explicit matrix-multiplication oracle") {
        auto q = testutil::random_features(1, 5, rng, 2.0).front();
        auto out = pca_transform(model, q);
        for (std::size_t c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (std::size_t d = 0; d < 5; ++d)
                acc += (q.values[d] - model.mean[d]) * model.components[c][d];
            REQUIRE(out.values[c] == Approx(acc).margin(1e-6));
        }
    }
    SECTION("dimension mismatch") {
        REQUIRE_THROWS(pca_transform(model, testutil::vec({1.0, 2.0})));
    }
}

TEST_CASE("pca reconstruction error is nonincreasing in k") {
    SplitMix64 rng(16);
    auto points = testutil::random_features(30, 6, rng, 2.0);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 6; ++k) {
        PcaModel model = pca_fit(points, k);
        double total = 0.0;
        for (const auto& p : points) total += pca_recon_score(model, p);
        REQUIRE(total <= previous + 1e-9);
        previous = total;
    }
}

TEST_CASE("pca_fit input validation") {
    SplitMix64 rng(17);
    auto points = testutil::random_features(5, 3, rng);
    REQUIRE_THROWS(pca_fit(points, 4));  // k > dim
    REQUIRE_THROWS(pca_fit({points[0]}, 1));
}

TEST_CASE("pca1 persistence round trip") {
    testutil::TempDir dir("pca1");
    SplitMix64 rng(18);
    auto points = testutil::random_features(20, 4, rng);
    PcaModel model = pca_fit(points, 2);
    save_pca(dir.file("m.pca1"), model);
    PcaModel loaded = load_pca(dir.file("m.pca1"));
    REQUIRE(loaded.input_dim() == 4);
    REQUIRE(loaded.output_dim() == 2);
    save_pca(dir.file("m2.pca1"), loaded);
    REQUIRE(testutil::slurp(dir.file("m.pca1")) == testutil::slurp(dir.file("m2.pca1")));
}
