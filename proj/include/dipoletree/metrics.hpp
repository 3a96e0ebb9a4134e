#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "dipoletree/data.hpp"
#include "dipoletree/errors.hpp"
#include "dipoletree/tree.hpp"

namespace dipoletree {

// Kaplan-Meier estimate of the censoring distribution (statuses flipped).
inline KaplanMeier censoring_km(const std::vector<double>& times,
                                const std::vector<int>& statuses) {
    std::vector<int> flipped(statuses.size());
    for (std::size_t i = 0; i < statuses.size(); ++i) flipped[i] = 1 - statuses[i];
    return kaplan_meier(times, flipped);
}

// Left-continuous evaluation G(t-): steps strictly before t count.
inline double censoring_survival_before(const KaplanMeier& g, double t) {
    double s = 1.0;
    for (std::size_t i = 0; i < g.event_times.size(); ++i) {
        if (g.event_times[i] < t)
            s = g.survival[i];
        else
            break;
    }
    return s;
}

// Concordance over ordered test pairs with distinct predictions; undefined
// (not an error) when no pair qualifies.
inline std::optional<double> concordance_index(const std::vector<double>& pred_medians,
                                               const std::vector<double>& times,
                                               const std::vector<int>& statuses) {
    const std::size_t n = times.size();
    if (pred_medians.size() != n || statuses.size() != n)
        throw DataError("concordance_index: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (statuses[i] != 1) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || pred_medians[i] == pred_medians[j]) continue;
            if (times[i] < times[j]) {
                den += 1.0;
                if (pred_medians[i] < pred_medians[j]) num += 1.0;
            }
        }
    }
    if (den == 0.0) return std::nullopt;
    return num / den;
}

struct BrierValue {
    double value = 0.0;
    int dropped = 0;  // observations with a zero censoring weight
};

// IPCW Brier score at time t. Each observation's weight is 1/G(t_i-); a zero
// weight drops the observation from both terms and is counted instead.
inline BrierValue brier_score(const std::vector<const KaplanMeier*>& curves,
                              const std::vector<double>& times,
                              const std::vector<int>& statuses, const KaplanMeier& censoring,
                              double t) {
    const std::size_t n = times.size();
    if (curves.size() != n || statuses.size() != n)
        throw DataError("brier_score: length mismatch");
    BrierValue out;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = censoring_survival_before(censoring, times[i]);
        if (g <= 0.0) {
            ++out.dropped;
            continue;
        }
        const double s = km_survival_at(*curves[i], t);
        if (times[i] <= t && statuses[i] == 1) {
            sum += s * s / g;
        } else if (times[i] > t) {
            sum += (1.0 - s) * (1.0 - s) / g;
        }
    }
    out.value = sum / static_cast<double>(n);
    return out;
}

// Trapezoidal integral of a Brier curve normalized by its final time.
inline double integrated_brier(const std::vector<std::pair<double, double>>& curve) {
    if (curve.empty()) throw DataError("integrated_brier: empty grid");
    if (curve.size() == 1) return curve.front().second;
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double dt = curve[i].first - curve[i - 1].first;
        area += 0.5 * (curve[i].second + curve[i - 1].second) * dt;
    }
    const double span = curve.back().first - curve.front().first;
    return span > 0.0 ? area / span : curve.back().second;
}

struct EvalReport {
    std::optional<double> ci;
    double ibs = 0.0;
    std::vector<std::pair<double, double>> brier_curve;
    int n_test = 0;
    int dropped_g_zero = 0;
};

// Route standardized test data through the tree and score it. The Brier grid
// is 0, the unique uncensored test times, and the largest test time.
inline EvalReport evaluate_tree(const SurvivalTree& tree, const Dataset& test) {
    if (test.p() != static_cast<int>(tree.covariate_names.size()))
        throw DataError("evaluate_tree: dimension mismatch");
    const int n = test.n();

    std::vector<const KaplanMeier*> curves(n);
    std::vector<double> medians(n), times(test.time.data(), test.time.data() + n);
    for (int i = 0; i < n; ++i) {
        const TreeNode* leaf = route_leaf(tree.root.get(), test.x.row(i).transpose());
        curves[i] = &leaf->km;
        medians[i] = leaf->median;
    }

    EvalReport report;
    report.n_test = n;
    report.ci = concordance_index(medians, times, test.status);

    const KaplanMeier g = censoring_km(times, test.status);
    std::vector<double> grid{0.0};
    for (int i = 0; i < n; ++i)
        if (test.status[i] == 1) grid.push_back(times[i]);
    grid.push_back(*std::max_element(times.begin(), times.end()));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    for (double t : grid) {
        const BrierValue bv = brier_score(curves, times, test.status, g, t);
        report.brier_curve.emplace_back(t, bv.value);
        report.dropped_g_zero = std::max(report.dropped_g_zero, bv.dropped);
    }
    report.ibs = integrated_brier(report.brier_curve);
    return report;
}

}  // namespace dipoletree
