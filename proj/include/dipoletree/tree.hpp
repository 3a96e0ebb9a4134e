#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dipoletree/data.hpp"
#include "dipoletree/errors.hpp"
#include "dipoletree/splitter.hpp"

namespace dipoletree {

// Product-limit survival estimate. Steps only at event times; `max_time` is
// the largest observed time (censored included) for the median fallback.
struct KaplanMeier {
    std::vector<double> event_times;
    std::vector<double> survival;  // value at each event time, after the step
    std::vector<int> at_risk;
    std::vector<int> deaths;
    double max_time = 0.0;
};

inline KaplanMeier kaplan_meier(const std::vector<double>& times,
                                const std::vector<int>& statuses) {
    if (times.empty() || times.size() != statuses.size())
        throw DataError("kaplan_meier: empty or mismatched input");
    std::vector<int> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return times[a] < times[b]; });

    KaplanMeier km;
    km.max_time = times[order.back()];
    double s = 1.0;
    std::size_t k = 0;
    int at_risk = static_cast<int>(times.size());
    while (k < order.size()) {
        const double t = times[order[k]];
        int d = 0, removed = 0;
        while (k < order.size() && times[order[k]] == t) {
            if (statuses[order[k]] == 1) ++d;
            ++removed;
            ++k;
        }
        if (d > 0) {
            s *= 1.0 - static_cast<double>(d) / at_risk;
            km.event_times.push_back(t);
            km.survival.push_back(s);
            km.at_risk.push_back(at_risk);
            km.deaths.push_back(d);
        }
        at_risk -= removed;
    }
    return km;
}

// Right-continuous step evaluation: S(t) with S = 1 before the first event.
inline double km_survival_at(const KaplanMeier& km, double t) {
    double s = 1.0;
    for (std::size_t i = 0; i < km.event_times.size(); ++i) {
        if (km.event_times[i] <= t)
            s = km.survival[i];
        else
            break;
    }
    return s;
}

inline bool km_crosses_half(const KaplanMeier& km) {
    return !km.survival.empty() && km.survival.back() <= 0.5 + 1e-12;
}

// Smallest event time with S(t) <= 0.5; when the curve never reaches 0.5 the
// largest observed time is returned to keep predictions finite.
inline double km_median(const KaplanMeier& km) {
    for (std::size_t i = 0; i < km.event_times.size(); ++i)
        if (km.survival[i] <= 0.5 + 1e-12) return km.event_times[i];
    return km.max_time;
}

// Two-sample log-rank chi-square with hypergeometric variance; tied event
// times share a risk set. Returns 0 when the variance vanishes.
inline double logrank_statistic(const std::vector<double>& times_a,
                                const std::vector<int>& status_a,
                                const std::vector<double>& times_b,
                                const std::vector<int>& status_b) {
    if (times_a.empty() || times_b.empty())
        throw DataError("logrank_statistic: empty group");
    struct Row {
        double t;
        int status;
        int group;
    };
    std::vector<Row> rows;
    rows.reserve(times_a.size() + times_b.size());
    for (std::size_t i = 0; i < times_a.size(); ++i) rows.push_back({times_a[i], status_a[i], 0});
    for (std::size_t i = 0; i < times_b.size(); ++i) rows.push_back({times_b[i], status_b[i], 1});
    std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) { return x.t < y.t; });

    double observed_a = 0.0, expected_a = 0.0, variance = 0.0;
    int n = static_cast<int>(rows.size());
    int n_a = static_cast<int>(times_a.size());
    std::size_t k = 0;
    while (k < rows.size()) {
        const double t = rows[k].t;
        int d = 0, d_a = 0, removed = 0, removed_a = 0;
        while (k < rows.size() && rows[k].t == t) {
            if (rows[k].status == 1) {
                ++d;
                if (rows[k].group == 0) ++d_a;
            }
            ++removed;
            if (rows[k].group == 0) ++removed_a;
            ++k;
        }
        if (d > 0 && n > 0) {
            const double frac_a = static_cast<double>(n_a) / n;
            observed_a += d_a;
            expected_a += d * frac_a;
            if (n > 1)
                variance += d * frac_a * (1.0 - frac_a) * (n - d) / (n - 1.0);
        }
        n -= removed;
        n_a -= removed_a;
    }
    if (variance <= 0.0) return 0.0;
    const double diff = observed_a - expected_a;
    return diff * diff / variance;
}

// Every node carries leaf statistics so that collapsing a branch during
// pruning needs no refit.
struct TreeNode {
    int node_id = 0;
    int depth = 0;
    int n_samples = 0;

    KaplanMeier km;
    double median = 0.0;
    bool median_fallback = false;

    std::optional<SplitModel> split;
    double logrank = 0.0;  // training-data statistic for this split
    std::unique_ptr<TreeNode> left, right;

    bool is_leaf() const { return !split.has_value(); }

    std::unique_ptr<TreeNode> clone() const {
        auto c = std::make_unique<TreeNode>();
        c->node_id = node_id;
        c->depth = depth;
        c->n_samples = n_samples;
        c->km = km;
        c->median = median;
        c->median_fallback = median_fallback;
        c->split = split;
        c->logrank = logrank;
        if (left) c->left = left->clone();
        if (right) c->right = right->clone();
        return c;
    }
};

struct GrowConfig {
    KernelSpec kernel;
    double kappa = 1.0;
    double epsilon = 1.0;
    double zeta1 = 0.3;
    double zeta2 = 0.6;
    int min_node = 15;
    int min_child = 5;
    double tau_rel = 1e-5;
    int max_rounds = 25;
    SolverConfig qp;
};

struct SurvivalTree {
    std::unique_ptr<TreeNode> root;
    Standardization standardization;
    GrowConfig config;
    std::vector<std::string> covariate_names;

    SurvivalTree clone() const {
        SurvivalTree t;
        t.root = root ? root->clone() : nullptr;
        t.standardization = standardization;
        t.config = config;
        t.covariate_names = covariate_names;
        return t;
    }
};

namespace treedetail {

inline void count_nodes(const TreeNode* node, int& total, int& internal) {
    if (node == nullptr) return;
    ++total;
    if (!node->is_leaf()) {
        ++internal;
        count_nodes(node->left.get(), total, internal);
        count_nodes(node->right.get(), total, internal);
    }
}

}  // namespace treedetail

inline int n_nodes(const SurvivalTree& t) {
    int total = 0, internal = 0;
    treedetail::count_nodes(t.root.get(), total, internal);
    return total;
}

inline int n_internal(const SurvivalTree& t) {
    int total = 0, internal = 0;
    treedetail::count_nodes(t.root.get(), total, internal);
    return internal;
}

// Routing: f(x) <= 0 goes left. `collapsed` treats branch roots as leaves,
// which is how pruned subtrees are represented without copying.
inline const TreeNode* route_leaf(const TreeNode* node, const Eigen::VectorXd& x,
                                  const std::set<int>& collapsed = {}) {
    while (node != nullptr && !node->is_leaf() && collapsed.count(node->node_id) == 0) {
        node = decision_value(*node->split, x) <= 0.0 ? node->left.get() : node->right.get();
    }
    return node;
}

// Grow by recursive dipole labeling and SVM splitting. A node turns terminal
// when it is too small, when no right-comparable pair exists, when every
// labeled dipole is pure, when the split degenerates, or when a child would
// fall below min_child.
inline SurvivalTree grow(const Dataset& d, const GrowConfig& cfg) {
    if (d.n() == 0) throw DataError("grow: empty dataset");

    int counter = 0;
    const std::function<std::unique_ptr<TreeNode>(const std::vector<int>&, int)> build =
        [&](const std::vector<int>& rows, int depth) -> std::unique_ptr<TreeNode> {
        auto node = std::make_unique<TreeNode>();
        node->node_id = counter++;
        node->depth = depth;
        node->n_samples = static_cast<int>(rows.size());

        const Dataset sub = d.subset(rows);
        std::vector<double> times(sub.time.data(), sub.time.data() + sub.n());
        node->km = kaplan_meier(times, sub.status);
        node->median = km_median(node->km);
        node->median_fallback = !km_crosses_half(node->km);

        if (sub.n() < cfg.min_node) return node;

        DipoleLabels labels;
        try {
            labels = label_dipoles(sub, cfg.zeta1, cfg.zeta2);
        } catch (const LabelingError&) {
            return node;
        }
        if (labels.mixed.empty()) return node;  // nothing left to separate

        SplitModel model;
        try {
            model = fit_split(sub, labels, cfg.kernel, cfg.kappa, Margin{cfg.epsilon},
                              cfg.tau_rel, cfg.max_rounds, cfg.qp);
        } catch (const DegenerateSplitError&) {
            return node;
        }

        std::vector<int> left_rows, right_rows;
        std::vector<double> lt, rt;
        std::vector<int> ls, rs;
        for (int i = 0; i < sub.n(); ++i) {
            if (decision_value(model, sub.x.row(i).transpose()) <= 0.0) {
                left_rows.push_back(rows[i]);
                lt.push_back(sub.time(i));
                ls.push_back(sub.status[i]);
            } else {
                right_rows.push_back(rows[i]);
                rt.push_back(sub.time(i));
                rs.push_back(sub.status[i]);
            }
        }
        if (static_cast<int>(left_rows.size()) < cfg.min_child ||
            static_cast<int>(right_rows.size()) < cfg.min_child)
            return node;

        node->split = std::move(model);
        node->logrank = logrank_statistic(lt, ls, rt, rs);
        node->left = build(left_rows, depth + 1);
        node->right = build(right_rows, depth + 1);
        return node;
    };

    std::vector<int> all(d.n());
    std::iota(all.begin(), all.end(), 0);

    SurvivalTree tree;
    tree.root = build(all, 0);
    tree.standardization = d.standardization;
    tree.config = cfg;
    tree.covariate_names = d.covariate_names;
    return tree;
}

inline double predict_median(const SurvivalTree& t, const Eigen::VectorXd& x) {
    if (x.size() != static_cast<Eigen::Index>(t.covariate_names.size()) &&
        t.root != nullptr && !t.root->is_leaf())
        throw DataError("predict_median: dimension mismatch");
    return route_leaf(t.root.get(), x)->median;
}

// One step of the weakest-link chain: a pruned subtree plus the threshold at
// which it becomes optimal.
struct PruneEntry {
    double alpha = -std::numeric_limits<double>::infinity();
    std::set<int> collapsed;  // branch-root node ids turned into leaves
    int internal_nodes = 0;
    double g_train = 0.0;  // sum of training log-ranks over remaining internal nodes
};

struct PruneSequence {
    std::vector<PruneEntry> entries;  // entries[0] = full tree, back() = root only
};

namespace treedetail {

struct BranchStats {
    double g = 0.0;
    int internal = 0;
};

inline BranchStats branch_stats(const TreeNode* node, const std::set<int>& collapsed) {
    BranchStats s;
    if (node == nullptr || node->is_leaf() || collapsed.count(node->node_id) > 0) return s;
    s.g = node->logrank;
    s.internal = 1;
    const BranchStats l = branch_stats(node->left.get(), collapsed);
    const BranchStats r = branch_stats(node->right.get(), collapsed);
    s.g += l.g + r.g;
    s.internal += l.internal + r.internal;
    return s;
}

inline void alive_internal(const TreeNode* node, const std::set<int>& collapsed,
                           std::vector<const TreeNode*>& out) {
    if (node == nullptr || node->is_leaf() || collapsed.count(node->node_id) > 0) return;
    out.push_back(node);
    alive_internal(node->left.get(), collapsed, out);
    alive_internal(node->right.get(), collapsed, out);
}

}  // namespace treedetail

// Weakest-link pruning on the training log-rank ratio g(h) = G(T_h)/|S_h|.
// Ties collapse the deeper branch first, then the lower node id; exact ties
// in alpha fold into one chain step so the thresholds increase strictly.
inline PruneSequence prune_sequence(const SurvivalTree& tree) {
    PruneSequence seq;
    std::set<int> collapsed;

    const auto push_entry = [&](double alpha) {
        PruneEntry e;
        e.alpha = alpha;
        e.collapsed = collapsed;
        const treedetail::BranchStats s = treedetail::branch_stats(tree.root.get(), collapsed);
        e.internal_nodes = s.internal;
        e.g_train = s.g;
        seq.entries.push_back(std::move(e));
    };

    push_entry(-std::numeric_limits<double>::infinity());

    while (true) {
        std::vector<const TreeNode*> alive;
        treedetail::alive_internal(tree.root.get(), collapsed, alive);
        if (alive.empty()) break;

        const TreeNode* best = nullptr;
        double best_g = 0.0;
        for (const TreeNode* h : alive) {
            const treedetail::BranchStats s = treedetail::branch_stats(h, collapsed);
            const double g = s.g / s.internal;
            if (best == nullptr || g < best_g ||
                (g == best_g && (h->depth > best->depth ||
                                 (h->depth == best->depth && h->node_id < best->node_id)))) {
                best = h;
                best_g = g;
            }
        }
        collapsed.insert(best->node_id);

        const double last_alpha = seq.entries.back().alpha;
        if (seq.entries.size() > 1 &&
            std::abs(best_g - last_alpha) <= 1e-12 * std::max(1.0, std::abs(best_g))) {
            // Same threshold: extend the previous chain step.
            PruneEntry& e = seq.entries.back();
            e.collapsed = collapsed;
            const treedetail::BranchStats s =
                treedetail::branch_stats(tree.root.get(), collapsed);
            e.internal_nodes = s.internal;
            e.g_train = s.g;
        } else {
            push_entry(best_g);
        }
    }

    for (std::size_t k = 2; k < seq.entries.size(); ++k) {
        if (!(seq.entries[k].alpha > seq.entries[k - 1].alpha))
            throw NumericalError("prune_sequence: alpha thresholds not strictly increasing");
    }
    return seq;
}

// Materialize one chain entry as a standalone tree.
inline SurvivalTree materialize_subtree(const SurvivalTree& tree, const PruneEntry& entry) {
    SurvivalTree out = tree.clone();
    const std::function<void(TreeNode*)> cut = [&](TreeNode* node) {
        if (node == nullptr) return;
        if (entry.collapsed.count(node->node_id) > 0) {
            node->split.reset();
            node->logrank = 0.0;
            node->left.reset();
            node->right.reset();
            return;
        }
        if (!node->is_leaf()) {
            cut(node->left.get());
            cut(node->right.get());
        }
    };
    cut(out.root.get());
    return out;
}

namespace treedetail {

// Sum of log-rank statistics recomputed by sending `rows` of `d` down the
// (possibly collapsed) tree. Empty sides contribute zero.
inline double validation_g(const TreeNode* node, const std::set<int>& collapsed,
                           const Dataset& d, const std::vector<int>& rows) {
    if (node == nullptr || node->is_leaf() || collapsed.count(node->node_id) > 0 ||
        rows.empty())
        return 0.0;
    std::vector<int> left_rows, right_rows;
    std::vector<double> lt, rt;
    std::vector<int> ls, rs;
    for (int i : rows) {
        if (decision_value(*node->split, d.x.row(i).transpose()) <= 0.0) {
            left_rows.push_back(i);
            lt.push_back(d.time(i));
            ls.push_back(d.status[i]);
        } else {
            right_rows.push_back(i);
            rt.push_back(d.time(i));
            rs.push_back(d.status[i]);
        }
    }
    double g = 0.0;
    if (!lt.empty() && !rt.empty()) g = logrank_statistic(lt, ls, rt, rs);
    return g + validation_g(node->left.get(), collapsed, d, left_rows) +
           validation_g(node->right.get(), collapsed, d, right_rows);
}

inline std::vector<int> all_rows(const Dataset& d) {
    std::vector<int> rows(d.n());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace treedetail

// Split complexity G_alpha = G - alpha * |internal nodes| with G recomputed
// on validation data sent down the subtree.
inline double split_complexity(const SurvivalTree& tree, const PruneEntry& entry,
                               double alpha, const Dataset& validation) {
    if (validation.p() != static_cast<int>(tree.covariate_names.size()))
        throw DataError("split_complexity: dimension mismatch");
    const double g = treedetail::validation_g(tree.root.get(), entry.collapsed, validation,
                                              treedetail::all_rows(validation));
    return g - alpha * entry.internal_nodes;
}

inline double split_complexity(const SurvivalTree& subtree, double alpha,
                               const Dataset& validation) {
    PruneEntry whole;
    whole.internal_nodes = n_internal(subtree);
    return split_complexity(subtree, whole, alpha, validation);
}

namespace treedetail {

// T(alpha): the chain entry optimal for a given threshold.
inline std::size_t chain_lookup(const PruneSequence& seq, double alpha) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < seq.entries.size(); ++k)
        if (seq.entries[k].alpha <= alpha) best = k;
    return best;
}

}  // namespace treedetail

// Choose a chain entry maximizing validation split complexity at alpha_c.
// With bootstrap > 0 the validation G of each subtree is first reduced by
// the bootstrap optimism estimate (statistic on the resample the tree was
// grown on, minus the statistic on the original data).
inline SurvivalTree select_subtree(const SurvivalTree& tree, const PruneSequence& seq,
                                   double alpha_c, const Dataset& validation,
                                   int bootstrap = 0, std::uint64_t seed = 0) {
    const std::size_t m = seq.entries.size();
    const std::vector<int> rows = treedetail::all_rows(validation);

    std::vector<double> g_val(m);
    for (std::size_t k = 0; k < m; ++k)
        g_val[k] = treedetail::validation_g(tree.root.get(), seq.entries[k].collapsed,
                                            validation, rows);

    if (bootstrap > 0 && m > 1) {
        const auto repr_alpha = [&](std::size_t k) {
            if (k == 0) return 0.0;
            if (k + 1 == m) return std::numeric_limits<double>::infinity();
            return std::sqrt(std::max(0.0, seq.entries[k].alpha) *
                             std::max(0.0, seq.entries[k + 1].alpha));
        };
        std::vector<double> optimism(m, 0.0);
        for (int b = 1; b <= bootstrap; ++b) {
            std::mt19937_64 rng(seed + static_cast<std::uint64_t>(b));
            std::uniform_int_distribution<int> pick(0, validation.n() - 1);
            std::vector<int> resample_rows(validation.n());
            for (int& r : resample_rows) r = pick(rng);
            const Dataset resample = validation.subset(resample_rows);

            const SurvivalTree tree_b = grow(resample, tree.config);
            const PruneSequence seq_b = prune_sequence(tree_b);
            const std::vector<int> rrows = treedetail::all_rows(resample);
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t kb = treedetail::chain_lookup(seq_b, repr_alpha(k));
                const std::set<int>& cb = seq_b.entries[kb].collapsed;
                const double g_boot =
                    treedetail::validation_g(tree_b.root.get(), cb, resample, rrows);
                const double g_orig =
                    treedetail::validation_g(tree_b.root.get(), cb, validation, rows);
                optimism[k] += g_boot - g_orig;
            }
        }
        for (std::size_t k = 0; k < m; ++k) g_val[k] -= optimism[k] / bootstrap;
    }

    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
        const double score = g_val[k] - alpha_c * seq.entries[k].internal_nodes;
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    return materialize_subtree(tree, seq.entries[best]);
}

}  // namespace dipoletree
