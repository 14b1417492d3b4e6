#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyad/pseudo_scoring.hpp"

namespace dyad {

/// Disjoint positive (A) and negative (N) bags over segment ids.
struct Bags {
    std::set<std::size_t> positive;
    std::set<std::size_t> negative;

    std::size_t size() const { return positive.size() + negative.size(); }
    bool contains(std::size_t id) const {
        return positive.count(id) != 0 || negative.count(id) != 0;
    }
};

/// Label heuristic: 1 iff both scores strictly exceed tau. Boundary values go
/// to the negative bag.
inline int assign_label(double y_s_hat, double y_d_hat, double tau = 0.5) {
    if (!(y_s_hat >= 0.0 && y_s_hat <= 1.0) || !(y_d_hat >= 0.0 && y_d_hat <= 1.0))
        throw std::invalid_argument("assign_label: scores must lie in [0,1]");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("assign_label: tau must be in (0,1)");
    return (y_s_hat > tau && y_d_hat > tau) ? 1 : 0;
}

inline Bags form_bags(const std::vector<PseudoScore>& scores, double tau = 0.5) {
    if (scores.empty()) throw std::invalid_argument("form_bags: empty score list");
    Bags bags;
    for (const auto& s : scores) {
        if (bags.contains(s.segment_id))
            throw std::invalid_argument("form_bags: duplicate segment id " +
                                        std::to_string(s.segment_id));
        if (assign_label(s.y_s_hat, s.y_d_hat, tau) == 1)
            bags.positive.insert(s.segment_id);
        else
            bags.negative.insert(s.segment_id);
    }
    return bags;
}

/// Re-form the bags from fresh scores only; previous membership is discarded.
inline Bags remap_bags(const Bags& old_bags, const std::vector<PseudoScore>& new_scores,
                       double tau = 0.5) {
    if (new_scores.size() != old_bags.size())
        throw std::invalid_argument("remap_bags: score list does not cover the old bags");
    for (const auto& s : new_scores)
        if (!old_bags.contains(s.segment_id))
            throw std::invalid_argument("remap_bags: segment " + std::to_string(s.segment_id) +
                                        " not present in the old bags");
    return form_bags(new_scores, tau);
}

// CSV export `segment_id,bag` with bag in {A,N}, rows ordered by segment id.

inline void save_bags(const std::string& path, const Bags& bags) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "segment_id,bag\n";
    auto a = bags.positive.begin();
    auto n = bags.negative.begin();
    while (a != bags.positive.end() || n != bags.negative.end()) {
        bool take_a = n == bags.negative.end() || (a != bags.positive.end() && *a < *n);
        if (take_a)
            out << *a++ << ",A\n";
        else
            out << *n++ << ",N\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Bags load_bags(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open bags file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "segment_id,bag")
        throw std::runtime_error(path + ": missing segment_id,bag header");
    Bags bags;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path + ": malformed bags row: " + line);
        std::size_t id = std::stoull(line.substr(0, comma));
        std::string bag = line.substr(comma + 1);
        if (bags.contains(id))
            throw std::runtime_error(path + ": duplicate segment id " + std::to_string(id));
        if (bag == "A")
            bags.positive.insert(id);
        else if (bag == "N")
            bags.negative.insert(id);
        else
            throw std::runtime_error(path + ": bag must be A or N, got " + bag);
    }
    return bags;
}

}  // namespace dyad
