#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "dipoletree/data.hpp"
#include "dipoletree/errors.hpp"
#include "dipoletree/kernel.hpp"
#include "dipoletree/metrics.hpp"
#include "dipoletree/tree.hpp"

namespace dipoletree {

struct FitConfig {
    GrowConfig grow;
    KernelChoice kernel_choice{KernelSpec::linear(), false};
    double alpha_c = 3.0;
    int bootstrap = 25;
    double prune_fraction = 0.25;  // validation share; 0 reuses the training data
    std::uint64_t seed = 0;
};

// Deterministic stratified-by-status partition into (grow, validation) rows.
inline std::pair<std::vector<int>, std::vector<int>> stratified_split(const Dataset& d,
                                                                      double grow_fraction,
                                                                      std::uint64_t seed) {
    std::vector<int> grow_rows, val_rows;
    std::mt19937_64 rng(seed);
    for (int cls : {1, 0}) {
        std::vector<int> members;
        for (int i = 0; i < d.n(); ++i)
            if (d.status[i] == cls) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        const auto cut = static_cast<std::size_t>(
            std::llround(grow_fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < cut ? grow_rows : val_rows).push_back(members[i]);
    }
    std::sort(grow_rows.begin(), grow_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    return {grow_rows, val_rows};
}

struct FitReport {
    int nodes_grown = 0;
    int nodes_selected = 0;
    int internal_grown = 0;
    int internal_selected = 0;
    std::vector<std::pair<int, double>> node_logranks;  // node id -> training log-rank
    std::vector<double> alphas;                         // pruning thresholds
};

struct FitOutcome {
    SurvivalTree tree;
    FitReport report;
};

// Grow on a stratified share of the data, build the weakest-link chain, and
// select a subtree by validation split complexity (bootstrap-corrected when
// requested). `train` must already be standardized.
inline FitOutcome fit_survival_tree(const Dataset& train, FitConfig cfg) {
    if (train.n() < 2) throw DataError("fit: need at least 2 observations");
    cfg.grow.kernel = cfg.kernel_choice.resolve(train.x);

    std::vector<int> grow_rows, val_rows;
    if (cfg.prune_fraction > 0.0) {
        std::tie(grow_rows, val_rows) =
            stratified_split(train, 1.0 - cfg.prune_fraction, cfg.seed);
        if (grow_rows.empty() || val_rows.empty()) {
            grow_rows.resize(train.n());
            std::iota(grow_rows.begin(), grow_rows.end(), 0);
            val_rows = grow_rows;
        }
    } else {
        grow_rows.resize(train.n());
        std::iota(grow_rows.begin(), grow_rows.end(), 0);
        val_rows = grow_rows;
    }

    const Dataset grow_data = train.subset(grow_rows);
    const Dataset val_data = train.subset(val_rows);

    SurvivalTree grown = grow(grow_data, cfg.grow);
    const PruneSequence seq = prune_sequence(grown);

    FitOutcome out;
    out.report.nodes_grown = n_nodes(grown);
    out.report.internal_grown = n_internal(grown);
    std::vector<const TreeNode*> internals;
    treedetail::alive_internal(grown.root.get(), {}, internals);
    for (const TreeNode* h : internals)
        out.report.node_logranks.emplace_back(h->node_id, h->logrank);
    for (std::size_t k = 1; k < seq.entries.size(); ++k)
        out.report.alphas.push_back(seq.entries[k].alpha);

    out.tree = select_subtree(grown, seq, cfg.alpha_c, val_data, cfg.bootstrap, cfg.seed);
    out.report.nodes_selected = n_nodes(out.tree);
    out.report.internal_selected = n_internal(out.tree);
    return out;
}

// Deterministic stratified k-fold assignment; returns fold index per row.
inline std::vector<int> kfold_assignment(const Dataset& d, int folds, std::uint64_t seed) {
    if (folds < 2) throw DataError("cv: need at least 2 folds");
    std::vector<int> assign(d.n(), 0);
    std::mt19937_64 rng(seed);
    int next = 0;
    for (int cls : {1, 0}) {
        std::vector<int> members;
        for (int i = 0; i < d.n(); ++i)
            if (d.status[i] == cls) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        for (int i : members) {
            assign[i] = next % folds;
            ++next;
        }
    }
    return assign;
}

struct CvCell {
    int fold = 0;
    std::optional<double> ci;
    double ibs = 0.0;
};

struct TuneRow {
    double eta = 0.0;
    double kappa = 1.0;
    std::optional<double> mean_ci;
    double mean_ibs = 0.0;
    int defined_folds = 0;
    std::vector<CvCell> cells;
};

struct TuneResult {
    double best_eta = 0.0;
    double best_kappa = 1.0;
    std::vector<TuneRow> table;
};

// k-fold cross-validation of one configuration; CI-undefined folds are
// excluded from the CI average but still contribute their IBS.
inline TuneRow cross_validate(const Dataset& data, const FitConfig& base, double eta,
                              int folds, std::uint64_t seed) {
    const std::vector<int> assign = kfold_assignment(data, folds, seed);
    TuneRow row;
    row.eta = eta;
    row.kappa = std::exp(eta);

    double ci_sum = 0.0, ibs_sum = 0.0;
    int ibs_count = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_rows, test_rows;
        for (int i = 0; i < data.n(); ++i)
            (assign[i] == f ? test_rows : train_rows).push_back(i);
        if (train_rows.size() < 2 || test_rows.empty()) {
            row.cells.push_back({f, std::nullopt, 0.0});
            continue;
        }
        FitConfig cfg = base;
        cfg.grow.kappa = row.kappa;
        cfg.seed = seed + static_cast<std::uint64_t>(f) + 1;
        const FitOutcome fit = fit_survival_tree(data.subset(train_rows), cfg);
        const EvalReport rep = evaluate_tree(fit.tree, data.subset(test_rows));

        CvCell cell{f, rep.ci, rep.ibs};
        row.cells.push_back(cell);
        ibs_sum += rep.ibs;
        ++ibs_count;
        if (rep.ci.has_value()) {
            ci_sum += *rep.ci;
            ++row.defined_folds;
        }
    }
    if (row.defined_folds > 0) row.mean_ci = ci_sum / row.defined_folds;
    row.mean_ibs = ibs_count > 0 ? ibs_sum / ibs_count : 0.0;
    return row;
}

// Grid search over eta = log(kappa), selecting the largest mean concordance;
// ties resolve to the smaller eta.
inline TuneResult tune_kappa(const Dataset& data, const std::vector<double>& etas,
                             int folds, const FitConfig& base, std::uint64_t seed) {
    if (etas.empty()) throw DataError("tune: empty eta grid");
    TuneResult result;
    for (double eta : etas) result.table.push_back(cross_validate(data, base, eta, folds, seed));

    const TuneRow* best = nullptr;
    for (const TuneRow& row : result.table) {
        if (!row.mean_ci.has_value()) continue;
        if (best == nullptr || *row.mean_ci > *best->mean_ci ||
            (*row.mean_ci == *best->mean_ci && row.eta < best->eta))
            best = &row;
    }
    if (best == nullptr)
        throw DataError("tune: no eta in the grid produced a splittable model");
    result.best_eta = best->eta;
    result.best_kappa = best->kappa;
    return result;
}

}  // namespace dipoletree
