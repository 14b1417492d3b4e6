#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dyad/common.hpp"
#include "dyad/features.hpp"
#include "dyad/ingest.hpp"

namespace dyad {

/// Unsupervised score pair attached to one segment.
struct PseudoScore {
    std::size_t segment_id = 0;
    double y_s_hat = 0.0;  // anomaly score in [0,1]
    double y_d_hat = 0.0;  // dynamicity score in [0,1]
};

// ---------------------------------------------------------------------------
// Isolation forest.
//
// Every tree draws its own uniform subsample (without replacement, capped at
// the dataset size) from a per-tree splitmix stream, then recursively picks a
// feature uniformly among those with min < max in the node and a split value
// uniformly in (min, max). Recursion stops at height ceil(log2(subsample)) or
// node size 1. RNG consumption order is: subsample draw, then one feature and
// one split per internal node in preorder (left subtree before right).
// ---------------------------------------------------------------------------

/// Expected unsuccessful-search path length of a binary search tree with n
/// items: 2*H(n-1) - 2(n-1)/n with H(i) = ln(i) + 0.5772156649; g(1) = 0,
/// g(2) = 1. The ln form underestimates the exact harmonic sum by about
/// 1/(n-1); the scorer only needs the standard normalizer, not exactness.
inline double average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    double harmonic = std::log(static_cast<double>(n - 1)) + 0.5772156649;
    return 2.0 * harmonic - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

struct IsolationNode {
    static constexpr std::uint32_t kLeaf = 0xffffffffu;
    std::uint32_t feature = kLeaf;  // kLeaf marks a leaf
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t size = 0;  // sample count at termination (leaves only)

    bool is_leaf() const { return feature == kLeaf; }
};

struct IsolationTree {
    std::vector<IsolationNode> nodes;  // nodes[0] is the root
    std::size_t height_limit = 0;

    /// Depth of the leaf reached by x plus the unsuccessful-search adjustment
    /// for the leaf's size.
    double path_length(const std::vector<double>& x) const {
        std::size_t node = 0;
        double depth = 0.0;
        while (!nodes[node].is_leaf()) {
            node = x[nodes[node].feature] < nodes[node].split ? nodes[node].left
                                                              : nodes[node].right;
            depth += 1.0;
        }
        return depth + average_path_length(nodes[node].size);
    }
};

struct IsolationForest {
    std::vector<IsolationTree> trees;
    std::size_t subsample_size = 0;  // effective size after capping
    std::size_t dim = 0;
};

namespace detail {

inline std::uint32_t build_isolation_node(IsolationTree& tree,
                                          const std::vector<const FeatureVector*>& points,
                                          std::vector<std::size_t>& items, std::size_t depth,
                                          SplitMix64& rng) {
    auto node_index = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    if (depth >= tree.height_limit || items.size() <= 1) {
        tree.nodes[node_index].size = static_cast<std::uint32_t>(items.size());
        return node_index;
    }

    std::size_t dim = points[items.front()]->dim();
    std::vector<std::uint32_t> candidates;
    std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
    for (std::size_t idx : items) {
        const auto& values = points[idx]->values;
        for (std::size_t j = 0; j < dim; ++j) {
            lo[j] = std::min(lo[j], values[j]);
            hi[j] = std::max(hi[j], values[j]);
        }
    }
    for (std::size_t j = 0; j < dim; ++j)
        if (lo[j] < hi[j]) candidates.push_back(static_cast<std::uint32_t>(j));
    if (candidates.empty()) {
        tree.nodes[node_index].size = static_cast<std::uint32_t>(items.size());
        return node_index;
    }

    std::uint32_t feature = candidates[rng.next_below(candidates.size())];
    double split = lo[feature] + rng.next_open() * (hi[feature] - lo[feature]);

    std::vector<std::size_t> left_items, right_items;
    for (std::size_t idx : items)
        (points[idx]->values[feature] < split ? left_items : right_items).push_back(idx);
    items.clear();
    items.shrink_to_fit();

    tree.nodes[node_index].feature = feature;
    tree.nodes[node_index].split = split;
    std::uint32_t left = build_isolation_node(tree, points, left_items, depth + 1, rng);
    std::uint32_t right = build_isolation_node(tree, points, right_items, depth + 1, rng);
    tree.nodes[node_index].left = left;
    tree.nodes[node_index].right = right;
    return node_index;
}

}  // namespace detail

inline IsolationForest iforest_fit(const std::vector<FeatureVector>& features,
                                   std::size_t n_trees = 100, std::size_t subsample = 256,
                                   std::uint64_t seed = 0) {
    if (features.size() < 2) throw std::invalid_argument("iforest_fit: need at least 2 samples");
    if (n_trees < 1) throw std::invalid_argument("iforest_fit: need at least 1 tree");
    if (subsample < 2) throw std::invalid_argument("iforest_fit: subsample must be >= 2");
    std::size_t dim = features.front().dim();
    for (const auto& f : features)
        if (f.dim() != dim) throw std::invalid_argument("iforest_fit: inconsistent dimensions");

    IsolationForest forest;
    forest.dim = dim;
    forest.subsample_size = std::min(subsample, features.size());
    std::size_t height_limit =
        static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(forest.subsample_size))));

    std::vector<const FeatureVector*> points(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) points[i] = &features[i];

    forest.trees.resize(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        SplitMix64 rng(mix_seed(seed, t));
        std::vector<std::size_t> items =
            rng.sample_without_replacement(features.size(), forest.subsample_size);
        forest.trees[t].height_limit = height_limit;
        detail::build_isolation_node(forest.trees[t], points, items, 0, rng);
    }
    return forest;
}

/// Eq-style anomaly score 2^(-E/g): E is the mean adjusted path length over
/// the trees, g the normalizer for the subsample size. Always in (0,1).
inline double iforest_score(const IsolationForest& forest, const FeatureVector& f) {
    if (f.dim() != forest.dim) throw std::invalid_argument("iforest_score: dimension mismatch");
    double mean_path = 0.0;
    for (const auto& tree : forest.trees) mean_path += tree.path_length(f.values);
    mean_path /= static_cast<double>(forest.trees.size());
    return std::pow(2.0, -mean_path / average_path_length(forest.subsample_size));
}

// ---------------------------------------------------------------------------
// Minimum enclosing ball via Badoiu-Clarkson core-set iteration: start at the
// first point, then for ceil(1/eps^2) rounds step 1/(t+1) toward the current
// farthest point. The returned radius is the max distance from the final
// center, within (1+eps) of the optimal MEB radius.
// ---------------------------------------------------------------------------

struct Hypersphere {
    std::vector<double> center;
    double radius = 0.0;

    std::size_t dim() const { return center.size(); }
};

namespace detail {

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace detail

inline Hypersphere meb_fit(const std::vector<FeatureVector>& features, double epsilon = 1e-3) {
    if (features.empty()) throw std::invalid_argument("meb_fit: empty input");
    if (!(epsilon > 0.0)) throw std::invalid_argument("meb_fit: epsilon must be > 0");
    std::size_t dim = features.front().dim();
    for (const auto& f : features)
        if (f.dim() != dim) throw std::invalid_argument("meb_fit: inconsistent dimensions");

    Hypersphere sphere;
    sphere.center = features.front().values;
    auto rounds = static_cast<std::size_t>(std::ceil(1.0 / (epsilon * epsilon)));
    double worst_sq = 0.0;
    for (std::size_t t = 1; t <= rounds; ++t) {
        std::size_t farthest = 0;
        worst_sq = 0.0;
        for (std::size_t i = 0; i < features.size(); ++i) {
            double d2 = detail::squared_distance(sphere.center, features[i].values);
            if (d2 > worst_sq) {
                worst_sq = d2;
                farthest = i;
            }
        }
        if (worst_sq == 0.0) break;  // center coincides with every farthest point
        double step = 1.0 / static_cast<double>(t + 1);
        const auto& p = features[farthest].values;
        for (std::size_t j = 0; j < dim; ++j)
            sphere.center[j] += step * (p[j] - sphere.center[j]);
    }

    worst_sq = 0.0;
    for (const auto& f : features)
        worst_sq = std::max(worst_sq, detail::squared_distance(sphere.center, f.values));
    sphere.radius = std::sqrt(worst_sq);
    return sphere;
}

/// Distance from the sphere center normalized by the maximum training-set
/// distance, clipped to [0,1].
inline double ocsvm_score(const Hypersphere& sphere, const FeatureVector& f, double calibration) {
    if (f.dim() != sphere.dim()) throw std::invalid_argument("ocsvm_score: dimension mismatch");
    if (!(calibration > 0.0)) throw std::invalid_argument("ocsvm_score: calibration must be > 0");
    double dist = std::sqrt(detail::squared_distance(sphere.center, f.values));
    return std::min(1.0, dist / calibration);
}

// ---------------------------------------------------------------------------
// Local outlier factor. Neighbor sets are the k nearest points under
// (distance, index) ordering, so they always hold exactly k entries. Dataset
// points exclude themselves from their own neighborhoods; the query point is
// treated as external and excludes nothing. Degenerate 0/0 density ratios
// count as 1 and x/0 ratios are capped at 1e9 to keep scores finite.
// ---------------------------------------------------------------------------

namespace detail {

struct LofTable {
    std::vector<std::vector<std::size_t>> neighbors;  // k nearest, self excluded
    std::vector<double> k_distance;
    std::vector<double> mean_reach;  // mean reachability distance to neighbors
};

inline std::vector<std::size_t> k_nearest(const std::vector<FeatureVector>& data,
                                          const std::vector<double>& query, std::size_t k,
                                          std::size_t exclude) {
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (i == exclude) continue;
        ranked.emplace_back(squared_distance(query, data[i].values), i);
    }
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k),
                      ranked.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = ranked[i].second;
    return out;
}

inline LofTable lof_table(const std::vector<FeatureVector>& data, std::size_t k) {
    std::size_t n = data.size();
    LofTable table;
    table.neighbors.resize(n);
    table.k_distance.resize(n);
    table.mean_reach.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        table.neighbors[i] = k_nearest(data, data[i].values, k, i);
        table.k_distance[i] = std::sqrt(
            squared_distance(data[i].values, data[table.neighbors[i].back()].values));
    }
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t o : table.neighbors[i]) {
            double d = std::sqrt(squared_distance(data[i].values, data[o].values));
            acc += std::max(table.k_distance[o], d);
        }
        table.mean_reach[i] = acc / static_cast<double>(k);
    }
    return table;
}

inline double lof_from_table(const std::vector<FeatureVector>& data, const LofTable& table,
                             const std::vector<double>& query,
                             const std::vector<std::size_t>& neighbors) {
    double query_reach = 0.0;
    for (std::size_t o : neighbors) {
        double d = std::sqrt(squared_distance(query, data[o].values));
        query_reach += std::max(table.k_distance[o], d);
    }
    query_reach /= static_cast<double>(neighbors.size());

    double acc = 0.0;
    for (std::size_t o : neighbors) {
        double denom = table.mean_reach[o];
        if (query_reach == 0.0 && denom == 0.0)
            acc += 1.0;
        else if (denom == 0.0)
            acc += 1e9;
        else
            acc += query_reach / denom;
    }
    return acc / static_cast<double>(neighbors.size());
}

}  // namespace detail

inline double lof_score(const std::vector<FeatureVector>& features, const FeatureVector& query,
                        std::size_t k_neighbors = 20) {
    if (features.size() <= k_neighbors)
        throw std::invalid_argument("lof_score: dataset must hold more than k points");
    auto table = detail::lof_table(features, k_neighbors);
    auto neighbors = detail::k_nearest(features, query.values, k_neighbors, features.size());
    return detail::lof_from_table(features, table, query.values, neighbors);
}

/// LOF of every dataset point against the rest, sharing one neighbor table.
inline std::vector<double> lof_scores(const std::vector<FeatureVector>& features,
                                      std::size_t k_neighbors = 20) {
    if (features.size() <= k_neighbors)
        throw std::invalid_argument("lof_scores: dataset must hold more than k points");
    auto table = detail::lof_table(features, k_neighbors);
    std::vector<double> out(features.size());
    for (std::size_t i = 0; i < features.size(); ++i)
        out[i] = detail::lof_from_table(features, table, features[i].values, table.neighbors[i]);
    return out;
}

// ---------------------------------------------------------------------------
// PCA reconstruction error: squared norm of the component of (F - mean)
// orthogonal to the retained basis.
// ---------------------------------------------------------------------------

inline double pca_recon_score(const PcaModel& model, const FeatureVector& f) {
    if (f.dim() != model.input_dim())
        throw std::invalid_argument("pca_recon_score: dimension mismatch");
    std::size_t d = model.input_dim();
    std::vector<double> centered(d);
    for (std::size_t j = 0; j < d; ++j) centered[j] = f.values[j] - model.mean[j];

    std::vector<double> residual = centered;
    for (const auto& comp : model.components) {
        double coeff = std::inner_product(centered.begin(), centered.end(), comp.begin(), 0.0);
        for (std::size_t j = 0; j < d; ++j) residual[j] -= coeff * comp[j];
    }
    return std::inner_product(residual.begin(), residual.end(), residual.begin(), 0.0);
}

// ---------------------------------------------------------------------------
// Combination: each score list is min-max normalized over the batch, then the
// two are averaged element-wise.
// ---------------------------------------------------------------------------

inline std::vector<double> combine_scores(const std::vector<double>& a,
                                          const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("combine_scores: length mismatch");
    if (a.empty()) throw std::invalid_argument("combine_scores: empty lists");
    auto na = min_max_normalize(a);
    auto nb = min_max_normalize(b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (na[i] + nb[i]);
    return out;
}

// ---------------------------------------------------------------------------
// PSM1 container: magic "PSM1", one scorer tag byte, then the payload.
//   'F' isolation forest: u32 n_trees, u32 subsample, u32 dim, then per tree
//       u32 height_limit, u32 node_count and per node u8 kind (0 leaf,
//       1 internal); leaves store u32 size, internal nodes u32 feature,
//       f64 split, u32 left, u32 right.
//   'S' hypersphere: u32 dim, f64 radius, then dim f64 center coordinates.
// ---------------------------------------------------------------------------

inline void save_forest(const std::string& path, const IsolationForest& forest) {
    detail::ByteWriter w(path);
    w.write_magic("PSM1");
    w.write_u8('F');
    w.write_u32(static_cast<std::uint32_t>(forest.trees.size()));
    w.write_u32(static_cast<std::uint32_t>(forest.subsample_size));
    w.write_u32(static_cast<std::uint32_t>(forest.dim));
    for (const auto& tree : forest.trees) {
        w.write_u32(static_cast<std::uint32_t>(tree.height_limit));
        w.write_u32(static_cast<std::uint32_t>(tree.nodes.size()));
        for (const auto& node : tree.nodes) {
            w.write_u8(node.is_leaf() ? 0 : 1);
            if (node.is_leaf()) {
                w.write_u32(node.size);
            } else {
                w.write_u32(node.feature);
                w.write_f64(node.split);
                w.write_u32(node.left);
                w.write_u32(node.right);
            }
        }
    }
    w.close();
}

inline IsolationForest load_forest(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("PSM1");
    if (r.read_u8() != 'F') throw std::runtime_error(path + ": not an isolation forest container");
    IsolationForest forest;
    std::size_t n_trees = r.read_u32();
    forest.subsample_size = r.read_u32();
    forest.dim = r.read_u32();
    forest.trees.resize(n_trees);
    for (auto& tree : forest.trees) {
        tree.height_limit = r.read_u32();
        std::size_t node_count = r.read_u32();
        tree.nodes.resize(node_count);
        for (auto& node : tree.nodes) {
            if (r.read_u8() == 0) {
                node.size = r.read_u32();
            } else {
                node.feature = r.read_u32();
                node.split = r.read_f64();
                node.left = r.read_u32();
                node.right = r.read_u32();
            }
        }
    }
    r.expect_end();
    return forest;
}

inline void save_sphere(const std::string& path, const Hypersphere& sphere) {
    detail::ByteWriter w(path);
    w.write_magic("PSM1");
    w.write_u8('S');
    w.write_u32(static_cast<std::uint32_t>(sphere.dim()));
    w.write_f64(sphere.radius);
    for (double c : sphere.center) w.write_f64(c);
    w.close();
}

inline Hypersphere load_sphere(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("PSM1");
    if (r.read_u8() != 'S') throw std::runtime_error(path + ": not a hypersphere container");
    Hypersphere sphere;
    std::size_t dim = r.read_u32();
    sphere.radius = r.read_f64();
    sphere.center.resize(dim);
    for (double& c : sphere.center) c = r.read_f64();
    r.expect_end();
    return sphere;
}

}  // namespace dyad
