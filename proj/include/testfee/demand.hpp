#pragma once

// Demand correspondence over a disclosure-fee grid and the two-part tariff
// sweep for a fixed test.

#include "testfee/equilibrium.hpp"
#include "testfee/measure.hpp"
#include "testfee/oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace testfee {

struct DemandPoint {
    double phi_d = 0.0;
    std::vector<double> disclosure_probs; ///< ascending
    double robust_prob = 0.0;
    double robust_revenue = 0.0;
    bool interval = false; ///< a continuum of thresholds was sampled
};

inline DemandPoint demand_at(const MixedDistribution& G, double phi_d) {
    DemandPoint dp;
    dp.phi_d = phi_d;
    std::vector<double> probs;
    if (phi_d < 0.0) {
        probs.push_back(1.0);
    } else {
        const ThresholdSet set = equilibrium_thresholds(G, phi_d);
        for (double t : set.points) probs.push_back(1.0 - G.cdf(t));
        for (const auto& iv : set.intervals) {
            dp.interval = true;
            probs.push_back(1.0 - G.cdf(iv.lo));
            probs.push_back(1.0 - (iv.hi_attained ? G.cdf(iv.hi) : G.cdf_left(iv.hi)));
            for (int j = 1; j <= 9; ++j) probs.push_back(1.0 - G.cdf(iv.lo + (iv.hi - iv.lo) * j / 10.0));
        }
        if (G.is_purely_atomic()) {
            for (const auto& e : enumerate_equilibria(G.to_pmf(), Fees{0.0, phi_d}))
                if (e.kind != EqKind::NoTest) probs.push_back(e.disclosure_prob);
        }
    }
    for (double& p : probs) p = std::clamp(p, 0.0, 1.0);
    std::sort(probs.begin(), probs.end());
    for (double p : probs)
        if (dp.disclosure_probs.empty() || p - dp.disclosure_probs.back() > 1e-12) dp.disclosure_probs.push_back(p);
    dp.robust_prob = dp.disclosure_probs.front();
    dp.robust_revenue = std::max(0.0, option_value(G, G.mean() + phi_d)) + phi_d * dp.robust_prob;
    return dp;
}

inline std::vector<DemandPoint> demand_correspondence(const MixedDistribution& G, const std::vector<double>& grid) {
    std::vector<DemandPoint> out;
    out.reserve(grid.size());
    for (double phi_d : grid) out.push_back(demand_at(G, phi_d));
    return out;
}

inline std::vector<std::pair<double, double>> robust_demand(const MixedDistribution& G, const std::vector<double>& grid) {
    std::vector<std::pair<double, double>> out;
    for (const auto& dp : demand_correspondence(G, grid)) out.emplace_back(dp.phi_d, dp.robust_prob);
    return out;
}

struct TariffResult {
    Fees fees;
    double revenue = 0.0;
    bool sup_only = true; ///< phi_t binds participation; realizing it needs a small shift
};

/// Best (phi_t, phi_d) over the grid with phi_t at the binding participation
/// level. Ties within 1e-12 go to the lowest phi_d.
inline TariffResult best_two_part_tariff(const MixedDistribution& G, std::vector<double> grid) {
    std::sort(grid.begin(), grid.end());
    TariffResult best;
    bool have = false;
    for (double phi_d : grid) {
        const DemandPoint dp = demand_at(G, phi_d);
        if (!have || dp.robust_revenue > best.revenue + 1e-12) {
            best.fees = Fees{std::max(0.0, option_value(G, G.mean() + phi_d)), phi_d};
            best.revenue = dp.robust_revenue;
            have = true;
        }
    }
    return best;
}

inline std::string fmt9(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

inline void write_demand_csv(std::ostream& os, const std::vector<DemandPoint>& pts) {
    os << "phi_d,robust_prob,robust_revenue,n_equilibria,probs\n";
    for (const auto& dp : pts) {
        os << fmt9(dp.phi_d) << ',' << fmt9(dp.robust_prob) << ',' << fmt9(dp.robust_revenue) << ','
           << dp.disclosure_probs.size() << ',';
        for (std::size_t i = 0; i < dp.disclosure_probs.size(); ++i) {
            if (i) os << ';';
            os << fmt9(dp.disclosure_probs[i]);
        }
        os << '\n';
    }
}

} // namespace testfee
