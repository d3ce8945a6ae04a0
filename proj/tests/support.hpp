#pragma once

#include "testfee/testfee.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

namespace fx {

using namespace testfee;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

inline const double kE = std::exp(1.0);

inline MixedDistribution binary() { return MixedDistribution::from_atoms(0.0, 1.0, {{0.0, 0.5}, {1.0, 0.5}}); }

inline MixedDistribution gstar() { return binary_optimal(0.0, 1.0, 0.5).structure.G; }

// Masses (1-p)/2, 2p, (1-3p)/2 on {0, 3/4, 1}.
inline MixedDistribution three_score(double p) {
    return MixedDistribution::from_atoms(0.0, 1.0, {{0.0, (1.0 - p) / 2.0}, {0.75, 2.0 * p}, {1.0, (1.0 - 3.0 * p) / 2.0}});
}

inline MixedDistribution uniform01() { return MixedDistribution::uniform(0.0, 1.0); }

inline std::vector<double> grid(double lo, double hi, double step) {
    std::vector<double> g;
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    for (int i = 0; i <= n; ++i) g.push_back(lo + step * i);
    return g;
}

// Nondegenerate random mixed distribution on [0, 1].
inline MixedDistribution random_prior(Rng& rng) {
    for (;;) {
        MixedDistribution d = random_mixed(rng);
        const double mu = d.mean();
        if (mu > 1e-3 && mu < 1.0 - 1e-3 && option_value(d, mu) > 1e-6) return d;
    }
}

// Light search settings for property sweeps.
inline OptimizerConfig light_cfg(unsigned long long seed) {
    OptimizerConfig c;
    c.starts = 6;
    c.max_iter = 1500;
    c.seed = seed;
    return c;
}

} // namespace fx
