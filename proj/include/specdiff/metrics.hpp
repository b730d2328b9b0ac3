#pragma once

// ISO/IEC 30107-3 style error rates and ROC sweeps. A sample is accepted as
// live when its score is >= the threshold, ties included.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specdiff/dataset.hpp"
#include "specdiff/error.hpp"

namespace specdiff {

struct RocPoint {
    double far = 0.0;  ///< attacks accepted / attacks
    double tar = 0.0;  ///< bona fide accepted / bona fide
    double threshold = 0.0;
};

struct EvalReport {
    double apcer = 0.0;
    double bpcer = 0.0;
    double acer = 0.0;
    std::vector<RocPoint> roc;
    std::size_t n_live = 0;
    std::size_t n_attack = 0;
    std::map<std::string, double> per_spoof_kind_apcer;
};

namespace detail {

inline void count_classes(std::span<const Label> labels, std::size_t& live, std::size_t& attack) {
    live = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::live));
    attack = labels.size() - live;
}

}  // namespace detail

/// APCER / BPCER / ACER at `threshold`. `kinds`, when given, must be parallel
/// to `labels` and adds per-spoof-kind APCER.
inline EvalReport compute_metrics(std::span<const double> scores, std::span<const Label> labels, double threshold,
                                  std::span<const std::optional<SpoofKind>> kinds = {}) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    if (!kinds.empty() && kinds.size() != labels.size()) throw ShapeError("spoof kinds and labels differ in length");
    EvalReport rep;
    detail::count_classes(labels, rep.n_live, rep.n_attack);
    if (rep.n_live == 0 || rep.n_attack == 0) throw MetricError("metrics need both bona fide and attack samples");
    std::size_t accepted_attacks = 0, rejected_live = 0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_kind;  // accepted, total
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool accepted = scores[i] >= threshold;
        if (labels[i] == Label::live) {
            if (!accepted) ++rejected_live;
        } else {
            if (accepted) ++accepted_attacks;
            if (!kinds.empty() && kinds[i]) {
                auto& slot = per_kind[to_string(*kinds[i])];
                slot.first += accepted ? 1 : 0;
                ++slot.second;
            }
        }
    }
    rep.apcer = static_cast<double>(accepted_attacks) / static_cast<double>(rep.n_attack);
    rep.bpcer = static_cast<double>(rejected_live) / static_cast<double>(rep.n_live);
    rep.acer = (rep.apcer + rep.bpcer) / 2.0;
    for (const auto& [kind, c] : per_kind)
        rep.per_spoof_kind_apcer[kind] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return rep;
}

/// ROC over +inf, every midpoint between adjacent distinct scores, and -inf,
/// ordered by decreasing threshold so both rates are non-decreasing.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    std::size_t n_live = 0, n_attack = 0;
    detail::count_classes(labels, n_live, n_attack);
    if (n_live == 0 || n_attack == 0) throw MetricError("ROC needs both bona fide and attack samples");

    std::vector<double> live, attack;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == Label::live ? live : attack).push_back(scores[i]);
    std::sort(live.begin(), live.end());
    std::sort(attack.begin(), attack.end());
    std::vector<double> uniq(scores.begin(), scores.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    std::vector<double> thresholds;
    thresholds.push_back(std::numeric_limits<double>::infinity());
    for (std::size_t k = uniq.size(); k-- > 1;) thresholds.push_back(uniq[k - 1] + (uniq[k] - uniq[k - 1]) / 2.0);
    thresholds.push_back(-std::numeric_limits<double>::infinity());

    auto accepted = [](const std::vector<double>& sorted, double t) {
        return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
    };
    std::vector<RocPoint> roc;
    roc.reserve(thresholds.size());
    for (double t : thresholds) {
        roc.push_back({accepted(attack, t) / static_cast<double>(n_attack),
                       accepted(live, t) / static_cast<double>(n_live), t});
    }
    return roc;
}

/// TAR at each FAR grid point: the best TAR among ROC points with FAR <= grid value.
inline std::vector<double> tar_at_far(std::span<const RocPoint> roc, std::span<const double> far_grid) {
    std::vector<double> out(far_grid.size(), 0.0);
    for (std::size_t g = 0; g < far_grid.size(); ++g) {
        for (const RocPoint& p : roc) {
            if (p.far <= far_grid[g]) out[g] = std::max(out[g], p.tar);
        }
    }
    return out;
}

inline std::vector<double> default_far_grid(std::size_t steps = 1000) {
    std::vector<double> g(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) g[i] = static_cast<double>(i) / static_cast<double>(steps);
    return g;
}

/// One scored test presentation with its own decision (folds differ in threshold).
struct ScoredSample {
    std::string pair_id;
    Label label = Label::live;
    std::optional<SpoofKind> spoof_kind;
    std::optional<std::string> lighting_tag;
    double score = 0.0;
    double threshold = 0.0;

    bool accepted() const noexcept { return score >= threshold; }
};

struct GroupMetrics {
    std::string group;
    std::optional<double> apcer;  ///< absent when the group has no attacks
    std::optional<double> bpcer;  ///< absent when the group has no bona fide samples
    std::size_t n_live = 0;
    std::size_t n_attack = 0;
};

/// Per-group error rates. group_by is "spoof_kind" (attacks grouped by
/// instrument; bona fide samples belong to no group) or "lighting_tag"
/// (every sample must carry a tag). Groups come out sorted by name.
inline std::vector<GroupMetrics> subgroup_eval(std::span<const ScoredSample> samples, const std::string& group_by) {
    const bool by_kind = group_by == "spoof_kind";
    if (!by_kind && group_by != "lighting_tag") throw MetricError("unknown group key \"" + group_by + "\"");
    std::map<std::string, std::array<std::size_t, 4>> acc;  // accepted attacks, attacks, rejected live, live
    for (const ScoredSample& s : samples) {
        std::string key;
        if (by_kind) {
            if (s.label == Label::live) continue;
            if (!s.spoof_kind) throw MetricError("attack " + s.pair_id + " has no spoof_kind");
            key = to_string(*s.spoof_kind);
        } else {
            if (!s.lighting_tag) throw MetricError("sample " + s.pair_id + " has no lighting_tag");
            key = *s.lighting_tag;
        }
        auto& a = acc[key];
        if (s.label == Label::live) {
            a[2] += s.accepted() ? 0 : 1;
            ++a[3];
        } else {
            a[0] += s.accepted() ? 1 : 0;
            ++a[1];
        }
    }
    std::vector<GroupMetrics> out;
    for (const auto& [key, a] : acc) {
        GroupMetrics g;
        g.group = key;
        g.n_attack = a[1];
        g.n_live = a[3];
        if (a[1] > 0) g.apcer = static_cast<double>(a[0]) / static_cast<double>(a[1]);
        if (a[3] > 0) g.bpcer = static_cast<double>(a[2]) / static_cast<double>(a[3]);
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace specdiff
