#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/common.hpp"

namespace dyad {

/// Raw 8-bit grayscale video, frames row-major.
struct GrayVideo {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::vector<std::uint8_t>> frames;

    std::size_t frame_count() const { return frames.size(); }
    std::size_t pixel_count() const { return width * height; }
};

/// One contiguous temporal slice of a video; the unit of scoring and labeling.
struct SegmentView {
    std::size_t video = 0;  // position of the video within the dataset
    std::size_t index = 0;  // segment ordinal within the video
    std::size_t begin = 0;  // first frame
    std::size_t end = 0;    // one past the last frame

    std::size_t frame_count() const { return end - begin; }
};

struct ManifestEntry {
    std::string video;
    std::optional<std::string> features;      // FV32 with precomputed appearance features
    std::optional<std::string> flow;          // FL32 with precomputed optical flow
    std::optional<std::string> ground_truth;  // one 0/1 per line, one line per frame
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::size_t segment_count_per_video = 32;
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, std::string path)
        : bytes_(bytes), path_(std::move(path)) {}

    void expect_magic(const char (&magic)[5]) {
        if (remaining() < 4 || std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
            throw std::runtime_error(path_ + ": malformed header (bad magic)");
        pos_ += 4;
    }

    std::uint32_t read_u32() {
        if (remaining() < 4) throw std::runtime_error(path_ + ": malformed header (truncated)");
        std::uint32_t v = static_cast<std::uint32_t>(bytes_[pos_]) |
                          static_cast<std::uint32_t>(bytes_[pos_ + 1]) << 8 |
                          static_cast<std::uint32_t>(bytes_[pos_ + 2]) << 16 |
                          static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24;
        pos_ += 4;
        return v;
    }

    float read_f32() {
        std::uint32_t bits = read_u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::uint64_t read_u64() {
        std::uint64_t lo = read_u32();
        std::uint64_t hi = read_u32();
        return lo | (hi << 32);
    }

    double read_f64() {
        std::uint64_t bits = read_u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::uint8_t read_u8() {
        if (remaining() < 1) throw std::runtime_error(path_ + ": malformed header (truncated)");
        return bytes_[pos_++];
    }

    const std::uint8_t* take(std::size_t n, const char* what) {
        if (remaining() < n)
            throw std::runtime_error(path_ + ": truncated payload (" + what + ")");
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    void expect_end() {
        if (remaining() != 0) throw std::runtime_error(path_ + ": trailing bytes after payload");
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

class ByteWriter {
public:
    explicit ByteWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw std::runtime_error("cannot open file for writing: " + path);
    }

    void write_magic(const char (&magic)[5]) { out_.write(magic, 4); }

    void write_u32(std::uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        out_.write(b, 4);
    }

    void write_f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        write_u32(bits);
    }

    void write_u64(std::uint64_t v) {
        write_u32(static_cast<std::uint32_t>(v & 0xffffffffull));
        write_u32(static_cast<std::uint32_t>(v >> 32));
    }

    void write_f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        write_u64(bits);
    }

    void write_u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

    void write_bytes(const std::uint8_t* p, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// GV8: magic "GV8\0", u32 width, u32 height, u32 frame_count, then
// frame_count x height x width raw intensity bytes, row-major per frame.
// ---------------------------------------------------------------------------

inline GrayVideo read_gv8(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("GV8\0");
    GrayVideo video;
    video.width = r.read_u32();
    video.height = r.read_u32();
    std::size_t frame_count = r.read_u32();
    if (video.width == 0 || video.height == 0 || frame_count == 0)
        throw std::runtime_error(path + ": malformed header (zero dimension)");
    video.frames.reserve(frame_count);
    for (std::size_t f = 0; f < frame_count; ++f) {
        const std::uint8_t* p = r.take(video.pixel_count(), "frame data");
        video.frames.emplace_back(p, p + video.pixel_count());
    }
    r.expect_end();
    return video;
}

inline void write_gv8(const std::string& path, const GrayVideo& video) {
    if (video.width == 0 || video.height == 0 || video.frame_count() == 0)
        throw std::invalid_argument("write_gv8: empty video");
    detail::ByteWriter w(path);
    w.write_magic("GV8\0");
    w.write_u32(static_cast<std::uint32_t>(video.width));
    w.write_u32(static_cast<std::uint32_t>(video.height));
    w.write_u32(static_cast<std::uint32_t>(video.frame_count()));
    for (const auto& frame : video.frames) {
        if (frame.size() != video.pixel_count())
            throw std::invalid_argument("write_gv8: frame size does not match video dimensions");
        w.write_bytes(frame.data(), frame.size());
    }
    w.close();
}

// ---------------------------------------------------------------------------
// FV32: magic "FV32", u32 count, u32 dim, then count x dim little-endian f32.
// ---------------------------------------------------------------------------

inline std::vector<FeatureVector> load_features(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("FV32");
    std::size_t count = r.read_u32();
    std::size_t dim = r.read_u32();
    std::vector<FeatureVector> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i].segment_id = i;
        out[i].values.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            double v = r.read_f32();
            if (!std::isfinite(v))
                throw std::runtime_error(path + ": non-finite value at vector " +
                                         std::to_string(i));
            out[i].values[j] = v;
        }
    }
    r.expect_end();
    return out;
}

inline void store_features(const std::string& path, const std::vector<FeatureVector>& features) {
    std::size_t dim = features.empty() ? 0 : features.front().dim();
    detail::ByteWriter w(path);
    w.write_magic("FV32");
    w.write_u32(static_cast<std::uint32_t>(features.size()));
    w.write_u32(static_cast<std::uint32_t>(dim));
    for (const auto& f : features) {
        if (f.dim() != dim)
            throw std::invalid_argument("store_features: inconsistent dimensions");
        for (double v : f.values) w.write_f32(static_cast<float>(v));
    }
    w.close();
}

// ---------------------------------------------------------------------------
// FL32: magic "FL32", u32 pair_count, u32 height, u32 width, then per pair two
// planes (u then v) of height x width little-endian f32.
// ---------------------------------------------------------------------------

inline std::vector<FlowField> load_flow(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("FL32");
    std::size_t pair_count = r.read_u32();
    std::size_t height = r.read_u32();
    std::size_t width = r.read_u32();
    std::vector<FlowField> out(pair_count);
    for (std::size_t i = 0; i < pair_count; ++i) {
        FlowField& f = out[i];
        f.width = width;
        f.height = height;
        f.u.resize(width * height);
        f.v.resize(width * height);
        for (auto* plane : {&f.u, &f.v}) {
            for (std::size_t k = 0; k < plane->size(); ++k) {
                float v = r.read_f32();
                if (!std::isfinite(v))
                    throw std::runtime_error(path + ": non-finite value in flow pair " +
                                             std::to_string(i));
                (*plane)[k] = v;
            }
        }
    }
    r.expect_end();
    return out;
}

inline void store_flow(const std::string& path, const std::vector<FlowField>& fields) {
    std::size_t height = fields.empty() ? 0 : fields.front().height;
    std::size_t width = fields.empty() ? 0 : fields.front().width;
    detail::ByteWriter w(path);
    w.write_magic("FL32");
    w.write_u32(static_cast<std::uint32_t>(fields.size()));
    w.write_u32(static_cast<std::uint32_t>(height));
    w.write_u32(static_cast<std::uint32_t>(width));
    for (const auto& f : fields) {
        if (f.width != width || f.height != height)
            throw std::invalid_argument("store_flow: inconsistent field dimensions");
        for (const auto* plane : {&f.u, &f.v})
            for (float v : *plane) w.write_f32(v);
    }
    w.close();
}

// ---------------------------------------------------------------------------
// Ground truth: plain text, one 0/1 per line, one line per frame.
// ---------------------------------------------------------------------------

inline std::vector<int> load_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ground truth: " + path);
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "0")
            labels.push_back(0);
        else if (line == "1")
            labels.push_back(1);
        else
            throw std::runtime_error(path + ": ground truth line is not 0 or 1: '" + line + "'");
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Manifest: UTF-8 JSON listing the dataset files. Relative paths resolve
// against the manifest's own directory.
// ---------------------------------------------------------------------------

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": manifest is not valid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc.contains("segment_count_per_video"))
        throw std::runtime_error(path + ": manifest must contain entries and segment_count_per_video");

    DatasetManifest manifest;
    manifest.segment_count_per_video = doc.at("segment_count_per_video").get<std::size_t>();
    if (manifest.segment_count_per_video < 1)
        throw std::runtime_error(path + ": segment_count_per_video must be >= 1");

    std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        std::string full = fp.is_absolute() ? fp.string() : (base / fp).string();
        if (!std::filesystem::exists(full))
            throw std::runtime_error(path + ": manifest references missing file " + full);
        return full;
    };

    for (const auto& item : doc.at("entries")) {
        ManifestEntry entry;
        entry.video = resolve(item.at("video").get<std::string>());
        if (item.contains("features")) entry.features = resolve(item.at("features").get<std::string>());
        if (item.contains("flow")) entry.flow = resolve(item.at("flow").get<std::string>());
        if (item.contains("ground_truth"))
            entry.ground_truth = resolve(item.at("ground_truth").get<std::string>());
        manifest.entries.push_back(std::move(entry));
    }
    if (manifest.entries.empty()) throw std::runtime_error(path + ": manifest has no entries");
    return manifest;
}

// ---------------------------------------------------------------------------
// Temporal segmentation: floor split, the first (frames mod count) segments
// take one extra frame. Segments are disjoint and cover every frame.
// ---------------------------------------------------------------------------

inline std::vector<SegmentView> split_segments(std::size_t frame_count, std::size_t count,
                                               std::size_t video_index = 0) {
    if (count < 1) throw std::invalid_argument("split_segments: count must be >= 1");
    if (frame_count < 2 * count)
        throw std::invalid_argument("split_segments: too few frames (" +
                                    std::to_string(frame_count) + ") for " +
                                    std::to_string(count) + " segments of at least 2 frames");
    std::size_t base = frame_count / count;
    std::size_t remainder = frame_count % count;
    std::vector<SegmentView> segments(count);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t size = base + (i < remainder ? 1 : 0);
        segments[i] = SegmentView{video_index, i, cursor, cursor + size};
        cursor += size;
    }
    return segments;
}

inline std::vector<SegmentView> split_segments(const GrayVideo& video, std::size_t count,
                                               std::size_t video_index = 0) {
    return split_segments(video.frame_count(), count, video_index);
}

}  // namespace dyad
