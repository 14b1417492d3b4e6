#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/common.hpp"
#include "dyad/ingest.hpp"

namespace dyad {

// ---------------------------------------------------------------------------
// Synthetic desk-scale dataset.
//
// Every segment shows a static per-video texture with mild temporal noise,
// one or two flickering patches (brightness toggles between frames, no
// motion) and two rigid textured blobs drifting at 1 px/frame. Anomalous
// segments differ in exactly two dials: their blobs move at
// max(motion_burst, 1) px/frame and all pixels are lifted by
// round(8 * separation) intensity levels. With separation 0 and motion_burst
// <= 1 the anomalous generator coincides with the normal one, so the classes
// are statistically indistinguishable.
// ---------------------------------------------------------------------------

struct SynthSpec {
    std::size_t videos = 8;
    std::size_t frames_per_video = 256;
    std::size_t width = 64;
    std::size_t height = 64;
    std::size_t segments = 32;
    double anomaly_rate = 0.25;   // fraction of segments per video
    double separation = 3.0;      // appearance offset multiplier
    int motion_burst = 4;         // blob displacement for anomalous segments
    std::uint64_t seed = 7;
};

namespace detail {

struct MovingBlob {
    double x = 0.0, y = 0.0;      // top-left corner
    int dx = 0, dy = 0;           // unit direction
    std::size_t size = 12;
    std::vector<int> texture;     // size x size intensity values
};

inline MovingBlob make_blob(SplitMix64& rng, std::size_t width, std::size_t height,
                            std::size_t size) {
    MovingBlob blob;
    blob.size = size;
    blob.x = static_cast<double>(rng.next_below(width - size));
    blob.y = static_cast<double>(rng.next_below(height - size));
    constexpr int kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    std::size_t d = rng.next_below(4);
    blob.dx = kDirs[d][0];
    blob.dy = kDirs[d][1];
    int base = 190 + static_cast<int>(rng.next_below(41));  // [190, 230]
    blob.texture.resize(size * size);
    for (int& t : blob.texture) t = base + static_cast<int>(rng.next_below(61)) - 30;
    return blob;
}

inline void advance_blob(MovingBlob& blob, double speed, std::size_t width, std::size_t height) {
    double nx = blob.x + speed * blob.dx;
    double ny = blob.y + speed * blob.dy;
    double max_x = static_cast<double>(width - blob.size);
    double max_y = static_cast<double>(height - blob.size);
    if (nx < 0.0 || nx > max_x) {
        blob.dx = -blob.dx;
        nx = std::clamp(nx, 0.0, max_x);
    }
    if (ny < 0.0 || ny > max_y) {
        blob.dy = -blob.dy;
        ny = std::clamp(ny, 0.0, max_y);
    }
    blob.x = nx;
    blob.y = ny;
}

struct FlickerPatch {
    std::size_t x = 0, y = 0, size = 12;
    int lift = 0;  // added on odd frame offsets only
};

}  // namespace detail

struct SynthResult {
    std::vector<std::string> video_files;
    std::vector<std::string> ground_truth_files;
    std::string manifest_file;
    std::size_t anomalous_segments = 0;
};

inline SynthResult generate_dataset(const SynthSpec& spec, const std::string& out_dir) {
    if (!(spec.anomaly_rate > 0.0 && spec.anomaly_rate < 1.0))
        throw std::invalid_argument("generate_dataset: anomaly_rate must be in (0,1)");
    if (spec.separation < 0.0)
        throw std::invalid_argument("generate_dataset: separation must be >= 0");
    if (spec.motion_burst < 0)
        throw std::invalid_argument("generate_dataset: motion_burst must be >= 0");
    if (spec.width < 24 || spec.height < 24)
        throw std::invalid_argument("generate_dataset: frames must be at least 24x24");
    if (spec.frames_per_video < 2 * spec.segments)
        throw std::invalid_argument("generate_dataset: too few frames per video");

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("generate_dataset: cannot create " + out_dir);

    const std::size_t pixels = spec.width * spec.height;
    const int lift = static_cast<int>(std::lround(8.0 * spec.separation));
    const double normal_speed = 1.0;
    const double anomalous_speed = std::max(static_cast<double>(spec.motion_burst), 1.0);
    const std::size_t patch_size = 12;
    const auto anomalous_per_video =
        static_cast<std::size_t>(std::lround(spec.anomaly_rate * static_cast<double>(spec.segments)));

    SynthResult result;
    nlohmann::json manifest{{"segment_count_per_video", spec.segments},
                            {"entries", nlohmann::json::array()}};

    for (std::size_t v = 0; v < spec.videos; ++v) {
        SplitMix64 rng(mix_seed(spec.seed, v));

        std::vector<int> background(pixels);
        for (int& p : background) p = 80 + static_cast<int>(rng.next_below(81));  // [80, 160]

        auto segments = split_segments(spec.frames_per_video, spec.segments, v);
        std::vector<bool> anomalous(spec.segments, false);
        for (std::size_t s : rng.sample_without_replacement(spec.segments, anomalous_per_video))
            anomalous[s] = true;
        result.anomalous_segments += anomalous_per_video;

        GrayVideo video;
        video.width = spec.width;
        video.height = spec.height;
        video.frames.reserve(spec.frames_per_video);
        std::vector<int> labels(spec.frames_per_video, 0);

        for (const auto& segment : segments) {
            std::size_t patch_count = 1 + rng.next_below(2);
            std::vector<detail::FlickerPatch> patches(patch_count);
            for (auto& patch : patches) {
                patch.size = patch_size;
                patch.x = rng.next_below(spec.width - patch.size);
                patch.y = rng.next_below(spec.height - patch.size);
                patch.lift = 60 + static_cast<int>(rng.next_below(41));  // [60, 100]
            }
            std::vector<detail::MovingBlob> blobs;
            for (int b = 0; b < 2; ++b)
                blobs.push_back(detail::make_blob(rng, spec.width, spec.height, patch_size));

            bool is_anomalous = anomalous[segment.index];
            double speed = is_anomalous ? anomalous_speed : normal_speed;
            int segment_lift = is_anomalous ? lift : 0;

            for (std::size_t f = segment.begin; f < segment.end; ++f) {
                std::vector<int> frame = background;
                if ((f - segment.begin) % 2 == 1) {
                    for (const auto& patch : patches)
                        for (std::size_t y = 0; y < patch.size; ++y)
                            for (std::size_t x = 0; x < patch.size; ++x)
                                frame[(patch.y + y) * spec.width + patch.x + x] += patch.lift;
                }
                for (const auto& blob : blobs) {
                    auto bx = static_cast<std::size_t>(std::lround(blob.x));
                    auto by = static_cast<std::size_t>(std::lround(blob.y));
                    for (std::size_t y = 0; y < blob.size; ++y)
                        for (std::size_t x = 0; x < blob.size; ++x)
                            frame[(by + y) * spec.width + bx + x] =
                                blob.texture[y * blob.size + x];
                }
                std::vector<std::uint8_t> bytes(pixels);
                for (std::size_t k = 0; k < pixels; ++k) {
                    int value = frame[k] + segment_lift + static_cast<int>(rng.next_below(5)) - 2;
                    bytes[k] = static_cast<std::uint8_t>(std::clamp(value, 0, 255));
                }
                video.frames.push_back(std::move(bytes));
                labels[f] = is_anomalous ? 1 : 0;
                for (auto& blob : blobs) detail::advance_blob(blob, speed, spec.width, spec.height);
            }
        }

        char name[32];
        std::snprintf(name, sizeof(name), "video_%03zu", v);
        std::string video_file = std::string(name) + ".gv8";
        std::string gt_file = std::string(name) + ".gt.txt";
        write_gv8((fs::path(out_dir) / video_file).string(), video);
        std::ofstream gt(fs::path(out_dir) / gt_file);
        if (!gt) throw std::runtime_error("generate_dataset: cannot write " + gt_file);
        for (int label : labels) gt << label << "\n";
        gt.close();

        // Relative paths keep the dataset relocatable and runs byte-comparable.
        manifest["entries"].push_back({{"video", video_file}, {"ground_truth", gt_file}});
        result.video_files.push_back(video_file);
        result.ground_truth_files.push_back(gt_file);
    }

    std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream mf(manifest_path);
    if (!mf) throw std::runtime_error("generate_dataset: cannot write manifest");
    mf << manifest.dump(2) << "\n";
    mf.close();
    result.manifest_file = manifest_path;
    return result;
}

}  // namespace dyad
