// Shared randomized fixtures for splitter and tree tests.
#pragma once

#include <random>
#include <vector>

#include "dipoletree/data.hpp"
#include "dipoletree/kernel.hpp"

namespace fixtures {

inline dipoletree::Dataset random_survival(std::mt19937_64& rng, int n, int p,
                                           double censor_prob = 0.25) {
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<dipoletree::Observation> obs;
    for (int i = 0; i < n; ++i) {
        dipoletree::Observation o;
        o.covariates.resize(p);
        for (int j = 0; j < p; ++j) o.covariates(j) = gauss(rng);
        // Times loosely tied to the first covariate so splits have signal.
        const double rate = 0.3 + 0.5 * std::abs(o.covariates(0) + 1.2);
        o.time = -std::log(std::max(unif(rng), 1e-12)) / rate + 1e-3;
        o.status = unif(rng) < censor_prob ? 0 : 1;
        obs.push_back(o);
    }
    bool any_event = false;
    for (const auto& o : obs) any_event |= o.status == 1;
    if (!any_event) obs.front().status = 1;
    return dipoletree::make_dataset(obs);
}

inline dipoletree::KernelSpec kernel_cycle(int i) {
    switch (i % 3) {
        case 0: return dipoletree::KernelSpec::linear();
        case 1: return dipoletree::KernelSpec::quadratic();
        default: return dipoletree::KernelSpec::gaussian(1.5);
    }
}

}  // namespace fixtures
