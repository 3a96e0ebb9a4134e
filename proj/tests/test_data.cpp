#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "dipoletree/data.hpp"

using namespace dipoletree;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    return path.string();
}

Dataset toy(const std::vector<double>& times, const std::vector<int>& statuses,
            const std::vector<double>& xs = {}) {
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < times.size(); ++i) {
        Observation o;
        o.covariates = Eigen::VectorXd::Constant(1, xs.empty() ? double(i) : xs[i]);
        o.time = times[i];
        o.status = statuses[i];
        obs.push_back(o);
    }
    return make_dataset(obs);
}

std::set<IndexPair> as_set(const std::vector<IndexPair>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("load_csv parses and standardizes") {
    const std::string path = write_temp_csv(
        "dtree_basic.csv", "x1,time,status\n1,5,1\n3,2,0\n2,7,1\n");
    const Dataset d = load_csv(path);
    REQUIRE(d.n() == 3);
    REQUIRE(d.p() == 1);
    REQUIRE(d.covariate_names == std::vector<std::string>{"x1"});
    REQUIRE(d.time(0) == 5.0);
    REQUIRE(d.status == std::vector<int>{1, 0, 1});
    // x column (1,3,2): mean 2, sample sd 1
    REQUIRE_THAT(d.x(0, 0), Catch::Matchers::WithinAbs(-1.0, 1e-12));
    REQUIRE_THAT(d.x(1, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("load_csv uses the n-1 sd convention") {
    const std::string path =
        write_temp_csv("dtree_sd.csv", "x1,time,status\n1,5,1\n3,2,0\n");
    const Dataset d = load_csv(path);
    // column (1,3): mean 2, sample sd sqrt(2) -> (-0.7071, 0.7071)
    REQUIRE_THAT(d.x(0, 0), Catch::Matchers::WithinAbs(-0.70710678, 1e-6));
    REQUIRE_THAT(d.x(1, 0), Catch::Matchers::WithinAbs(0.70710678, 1e-6));
    REQUIRE_THAT(d.standardization.sd(0), Catch::Matchers::WithinAbs(std::sqrt(2.0), 1e-12));
}

TEST_CASE("load_csv rejects bad schema and cells") {
    const std::string no_time =
        write_temp_csv("dtree_notime.csv", "x1,t,status\n1,5,1\n2,3,1\n");
    REQUIRE_THROWS_AS(load_csv(no_time), DataError);

    const std::string bad_cell =
        write_temp_csv("dtree_badcell.csv", "x1,time,status\n1,5,1\nfoo,3,1\n");
    REQUIRE_THROWS_AS(load_csv(bad_cell), DataError);

    const std::string bad_time =
        write_temp_csv("dtree_badtime.csv", "x1,time,status\n1,0,1\n2,3,1\n");
    REQUIRE_THROWS_AS(load_csv(bad_time), DataError);

    const std::string bad_status =
        write_temp_csv("dtree_badstatus.csv", "x1,time,status\n1,5,2\n2,3,1\n");
    REQUIRE_THROWS_AS(load_csv(bad_status), DataError);

    const std::string missing =
        write_temp_csv("dtree_missing.csv", "x1,time,status\n1,5,1\n,3,1\n");
    REQUIRE_THROWS_AS(load_csv(missing), DataError);
}

TEST_CASE("constant covariate columns standardize to zero") {
    const std::string path =
        write_temp_csv("dtree_const.csv", "x1,time,status\n4,5,1\n4,3,1\n");
    const Dataset d = load_csv(path);
    REQUIRE(d.x(0, 0) == 0.0);
    REQUIRE(d.standardization.sd(0) == 1.0);
}

TEST_CASE("right_comparable_pairs follows the smaller-time rule") {
    SECTION("smaller time uncensored: included") {
        const Dataset d = toy({3, 5}, {1, 0});
        REQUIRE(as_set(right_comparable_pairs(d)) == std::set<IndexPair>{{0, 1}});
    }
    SECTION("smaller time censored: excluded") {
        const Dataset d = toy({3, 5}, {0, 1});
        REQUIRE(right_comparable_pairs(d).empty());
    }
    SECTION("no censoring: all pairs") {
        const Dataset d = toy({1, 2, 10}, {1, 1, 1});
        REQUIRE(right_comparable_pairs(d).size() == 3);
    }
    SECTION("tied times comparable when any tied observation is uncensored") {
        const Dataset censored_tie = toy({4, 4}, {0, 0});
        REQUIRE(right_comparable_pairs(censored_tie).empty());
        const Dataset mixed_tie = toy({4, 4}, {0, 1});
        REQUIRE(right_comparable_pairs(mixed_tie).size() == 1);
    }
}

TEST_CASE("label_dipoles matches the hand-enumerated fixture") {
    // times {1,2,10,12}, all events, zeta1=0.4, zeta2=0.6:
    // sorted deltas (1,2,8,9,10,11); thresholds 2 and 8.
    const Dataset d = toy({1, 2, 10, 12}, {1, 1, 1, 1});
    const DipoleLabels labels = label_dipoles(d, 0.4, 0.6);
    REQUIRE(as_set(labels.pure) == std::set<IndexPair>{{0, 1}});
    REQUIRE(as_set(labels.mixed) ==
            std::set<IndexPair>{{0, 2}, {0, 3}, {1, 2}, {1, 3}});
    REQUIRE(labels.delta_t.size() == 6);
}

TEST_CASE("label_dipoles on degenerate nodes") {
    SECTION("all times equal: everything mixed, nothing pure") {
        const Dataset d = toy({5, 5, 5}, {1, 1, 1});
        const DipoleLabels labels = label_dipoles(d, 0.3, 0.6);
        REQUIRE(labels.pure.empty());
        REQUIRE(labels.mixed.size() == 3);
    }
    SECTION("single comparable pair: mixed, not pure") {
        const Dataset d = toy({1, 4}, {1, 1});
        const DipoleLabels labels = label_dipoles(d, 0.3, 0.6);
        REQUIRE(labels.pure.empty());
        REQUIRE(as_set(labels.mixed) == std::set<IndexPair>{{0, 1}});
    }
    SECTION("no comparable pair raises LabelingError") {
        const Dataset d = toy({1, 4}, {0, 0});
        REQUIRE_THROWS_AS(label_dipoles(d, 0.3, 0.6), LabelingError);
    }
    SECTION("cutoffs must be ordered") {
        const Dataset d = toy({1, 4}, {1, 1});
        REQUIRE_THROWS_AS(label_dipoles(d, 0.7, 0.3), DataError);
    }
}

TEST_CASE("label invariants over random datasets") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> time_dist(0.1, 20.0);
    std::bernoulli_distribution censor(0.3);

    for (int rep = 0; rep < 30; ++rep) {
        const int n = 4 + static_cast<int>(rng() % 12);
        std::vector<double> times;
        std::vector<int> statuses;
        for (int i = 0; i < n; ++i) {
            times.push_back(time_dist(rng));
            statuses.push_back(censor(rng) ? 0 : 1);
        }
        if (std::none_of(statuses.begin(), statuses.end(), [](int s) { return s == 1; }))
            statuses[0] = 1;
        const Dataset d = toy(times, statuses);

        DipoleLabels labels;
        try {
            labels = label_dipoles(d, 0.3, 0.6);
        } catch (const LabelingError&) {
            continue;
        }
        const std::set<IndexPair> comparable = as_set(right_comparable_pairs(d));
        const std::set<IndexPair> pure = as_set(labels.pure);
        const std::set<IndexPair> mixed = as_set(labels.mixed);

        for (const auto& pr : pure) {
            REQUIRE(d.status[pr.first] == 1);
            REQUIRE(d.status[pr.second] == 1);
            REQUIRE(comparable.count(pr) == 1);
            REQUIRE(mixed.count(pr) == 0);
        }
        for (const auto& pr : mixed) REQUIRE(comparable.count(pr) == 1);

        // Monotonicity in the cutoffs.
        const DipoleLabels wider = label_dipoles(d, 0.45, 0.8);
        for (const auto& pr : pure) {
            REQUIRE(as_set(wider.pure).count(pr) == 1);
        }
        for (const auto& pr : as_set(wider.mixed)) REQUIRE(mixed.count(pr) == 1);
    }
}

TEST_CASE("labels are invariant under row permutation up to relabeling") {
    const Dataset d = toy({3, 1, 8, 2, 12}, {1, 1, 0, 1, 1});
    const DipoleLabels base = label_dipoles(d, 0.3, 0.6);

    const std::vector<int> perm{4, 2, 0, 1, 3};  // new order of old rows
    const Dataset shuffled = d.subset(perm);
    const DipoleLabels relabeled = label_dipoles(shuffled, 0.3, 0.6);

    std::vector<int> inverse(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) inverse[perm[k]] = static_cast<int>(k);
    const auto remap = [&](const std::vector<IndexPair>& pairs) {
        std::set<IndexPair> out;
        for (const auto& [i, j] : pairs) {
            const int a = inverse[i], b = inverse[j];
            out.emplace(std::min(a, b), std::max(a, b));
        }
        return out;
    };
    REQUIRE(remap(base.pure) == as_set(relabeled.pure));
    REQUIRE(remap(base.mixed) == as_set(relabeled.mixed));
}
