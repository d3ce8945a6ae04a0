#pragma once

// Seeded random instances for verification sweeps.

#include "testfee/equilibrium.hpp"
#include "testfee/measure.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace testfee {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
}

inline int uniform_int(Rng& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

/// Finite pmf with 2..max_points distinct scores in [lo, hi]. Scores are
/// rounded to a 1/1000 lattice now and then to provoke ties with fees.
inline FinitePmf random_pmf(Rng& rng, int max_points = 12, double lo = 0.0, double hi = 1.0) {
    const int n = uniform_int(rng, 2, max_points);
    const bool lattice = uniform(rng, 0.0, 1.0) < 0.25;
    std::vector<double> xs;
    while (static_cast<int>(xs.size()) < n) {
        double x = uniform(rng, lo, hi);
        if (lattice) x = lo + std::round((x - lo) / (hi - lo) * 1000.0) / 1000.0 * (hi - lo);
        if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    std::vector<double> w(n);
    double total = 0.0;
    for (double& v : w) {
        v = uniform(rng, 0.05, 1.0);
        total += v;
    }
    std::vector<PmfPoint> pts;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double m = i + 1 == n ? 1.0 - acc : w[i] / total;
        acc += m;
        pts.push_back({xs[i], m});
    }
    return FinitePmf(std::move(pts));
}

/// Mixed distribution with 1..4 segments on [lo, hi]: random atoms at
/// segment starts and at the top, flat / affine / exponential segments.
inline MixedDistribution random_mixed(Rng& rng, double lo = 0.0, double hi = 1.0) {
    const int k = uniform_int(rng, 1, 4);
    std::vector<double> xs{lo, hi};
    for (int i = 1; i < k; ++i) xs.push_back(uniform(rng, lo, hi));
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    const int segs = static_cast<int>(xs.size()) - 1;

    std::vector<int> type(segs);
    std::vector<double> atom(segs), cont(segs);
    double total = 0.0;
    for (int i = 0; i < segs; ++i) {
        type[i] = uniform_int(rng, 0, 2);
        atom[i] = uniform(rng, 0.0, 1.0) < 0.5 ? uniform(rng, 0.02, 1.0) : 0.0;
        cont[i] = type[i] == 0 ? 0.0 : uniform(rng, 0.05, 1.0);
        total += atom[i] + cont[i];
    }
    // An exponential segment cannot start from zero mass.
    for (int i = 0; i < segs; ++i) {
        double before = atom[i];
        for (int j = 0; j < i; ++j) before += atom[j] + cont[j];
        if (type[i] == 2 && before <= 0.0) {
            atom[i] = uniform(rng, 0.05, 1.0);
            total += atom[i];
        }
    }
    const double top = uniform(rng, 0.0, 1.0) < 0.4 ? uniform(rng, 0.02, 0.5) : 0.0;
    total += top;
    if (total <= 0.0) {
        atom[0] = 1.0;
        total = 1.0;
    }

    std::vector<Piece> pieces;
    double cum = 0.0;
    for (int i = 0; i < segs; ++i) {
        const double a = xs[i];
        const double b = xs[i + 1];
        const double len = b - a;
        cum += atom[i] / total;
        const double inc = cont[i] / total;
        if (type[i] == 0) {
            pieces.push_back({a, b, Flat{cum}});
        } else if (type[i] == 1) {
            pieces.push_back({a, b, Affine{cum, inc / len}});
        } else {
            pieces.push_back({a, b, ExpCdf{cum, len / std::log((cum + inc) / cum)}});
        }
        cum += inc;
    }
    return MixedDistribution(lo, hi, std::move(pieces));
}

/// Non-negative fees spread over the interesting range for G.
inline Fees random_fees(Rng& rng, const MixedDistribution& G) {
    const double range = G.upper() - G.lower();
    Fees f;
    f.phi_d = uniform(rng, 0.0, 0.8 * range);
    const double ov = option_value(G, G.mean() + f.phi_d);
    f.phi_t = uniform(rng, 0.0, 1.0) < 0.3 ? 0.0 : uniform(rng, 0.0, 1.2 * ov);
    return f;
}

} // namespace testfee
