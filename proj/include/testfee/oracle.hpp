#pragma once

// Brute-force equilibrium enumeration on finite score distributions. Works
// on prefix sums of the pmf only and shares no root finding with the
// analytic engine.

#include "testfee/equilibrium.hpp"
#include "testfee/errors.hpp"
#include "testfee/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace testfee {

inline constexpr double kOracleTol = 1e-12;

enum class EqKind { NoTest, Threshold, MixedAtAtom };

inline const char* to_string(EqKind k) {
    switch (k) {
    case EqKind::NoTest: return "no-test";
    case EqKind::Threshold: return "threshold";
    case EqKind::MixedAtAtom: return "mixed";
    }
    return "?";
}

struct OracleEquilibrium {
    EqKind kind = EqKind::NoTest;
    double tau_or_atom = 0.0;
    double mix_lambda = 0.0; ///< disclosure probability of the indifferent atom
    double nondisclosure_price = 0.0;
    double disclosure_prob = 0.0;
    double revenue = 0.0;
    std::size_t conceal_count = 0; ///< scores below this index conceal outright
};

namespace detail {

inline double pmf_option_value(const FinitePmf& pmf, double cutoff) {
    double v = 0.0;
    for (const auto& p : pmf.points()) v += p.mass * std::max(0.0, p.score - cutoff);
    return v;
}

} // namespace detail

/// All outcome classes: no testing, pure thresholds (prefix conceal sets)
/// and equilibria where one atom randomizes.
inline std::vector<OracleEquilibrium> enumerate_equilibria(const FinitePmf& pmf, const Fees& fees) {
    const auto& pts = pmf.points();
    const std::size_t n = pts.size();
    const double mu = pmf.mean();
    const double phi_t = fees.phi_t;
    const double phi_d = fees.phi_d;

    std::vector<double> M(n + 1, 0.0), A(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        M[i + 1] = M[i] + pts[i].mass;
        A[i + 1] = A[i] + pts[i].mass * pts[i].score;
    }

    std::vector<OracleEquilibrium> out;
    if (phi_t >= detail::pmf_option_value(pmf, mu + phi_d) - kOracleTol) {
        OracleEquilibrium e;
        e.kind = EqKind::NoTest;
        e.tau_or_atom = mu + phi_d;
        e.nondisclosure_price = mu;
        e.conceal_count = n;
        out.push_back(e);
    }
    // Testing is a best response when its value beats selling untested at p_N.
    auto tests = [&](double p_n) { return phi_t <= detail::pmf_option_value(pmf, p_n + phi_d) + kOracleTol; };

    // Nobody conceals; off-path non-disclosure is priced at the lowest score.
    if (phi_d <= 0.0 && tests(pts[0].score)) {
        OracleEquilibrium e;
        e.kind = EqKind::Threshold;
        e.nondisclosure_price = pts[0].score;
        e.tau_or_atom = pts[0].score + phi_d;
        e.disclosure_prob = 1.0;
        e.revenue = phi_t + phi_d;
        e.conceal_count = 0;
        out.push_back(e);
    }
    for (std::size_t k = 1; k <= n; ++k) {
        const double p = A[k] / M[k];
        const bool low_ok = pts[k - 1].score - phi_d <= p + kOracleTol;
        const bool high_ok = k == n || pts[k].score - phi_d >= p - kOracleTol;
        if (!low_ok || !high_ok || !tests(p)) continue;
        OracleEquilibrium e;
        e.kind = EqKind::Threshold;
        e.nondisclosure_price = p;
        e.tau_or_atom = p + phi_d;
        e.disclosure_prob = std::max(0.0, 1.0 - M[k]);
        if (k == n) e.disclosure_prob = 0.0;
        e.revenue = phi_t + phi_d * e.disclosure_prob;
        e.conceal_count = k;
        out.push_back(e);
    }
    if (phi_d > 0.0) {
        for (std::size_t k = 2; k <= n; ++k) {
            const double s = pts[k - 1].score;
            const double m = pts[k - 1].mass;
            const double x = ((s - phi_d) * M[k - 1] - A[k - 1]) / phi_d;
            const double lambda = 1.0 - x / m;
            if (!(lambda > kOracleTol && lambda < 1.0 - kOracleTol)) continue;
            const double p = s - phi_d;
            if (!tests(p)) continue;
            OracleEquilibrium e;
            e.kind = EqKind::MixedAtAtom;
            e.tau_or_atom = s;
            e.mix_lambda = lambda;
            e.nondisclosure_price = p;
            e.disclosure_prob = std::max(0.0, lambda * m + (1.0 - M[k]));
            e.revenue = phi_t + phi_d * e.disclosure_prob;
            e.conceal_count = k - 1;
            out.push_back(e);
        }
    }
    return out;
}

inline double adversarial_revenue_bruteforce(const FinitePmf& pmf, const Fees& fees) {
    const auto eqs = enumerate_equilibria(pmf, fees);
    if (eqs.empty()) throw NoThreshold("oracle: no equilibrium found");
    double r = std::numeric_limits<double>::infinity();
    for (const auto& e : eqs) r = std::min(r, e.revenue);
    return r;
}

/// Checks consistency of prices with beliefs and that no score, and no
/// testing decision, gains more than tol by deviating.
inline bool certify_best_response(const FinitePmf& pmf, const Fees& fees, const OracleEquilibrium& e,
                                  double tol = 1e-12) {
    const auto& pts = pmf.points();
    const std::size_t n = pts.size();
    const double phi_d = fees.phi_d;
    if (e.kind == EqKind::NoTest) {
        if (std::abs(e.nondisclosure_price - pmf.mean()) > tol) return false;
        return detail::pmf_option_value(pmf, pmf.mean() + phi_d) - fees.phi_t <= tol;
    }
    double cm = 0.0, cs = 0.0;
    for (std::size_t i = 0; i < e.conceal_count; ++i) {
        cm += pts[i].mass;
        cs += pts[i].mass * pts[i].score;
    }
    if (e.kind == EqKind::MixedAtAtom) {
        const auto& at = pts[e.conceal_count];
        cm += (1.0 - e.mix_lambda) * at.mass;
        cs += (1.0 - e.mix_lambda) * at.mass * at.score;
    }
    const double p = e.nondisclosure_price;
    if (cm > 0.0 && std::abs(cs / cm - p) > 1e-10) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const double gain_disclose = pts[i].score - phi_d - p;
        const bool mixing = e.kind == EqKind::MixedAtAtom && i == e.conceal_count;
        if (mixing) {
            if (std::abs(gain_disclose) > 1e-10) return false;
        } else if (i < e.conceal_count) {
            if (gain_disclose > tol) return false;
        } else if (-gain_disclose > tol) {
            return false;
        }
    }
    return fees.phi_t <= detail::pmf_option_value(pmf, p + phi_d) + tol;
}

struct Witness {
    OracleEquilibrium equilibrium;
    double bound = 0.0;
};

/// Prop-1 style bound constants.
inline double witness_eps_star(double lo, double hi, double mu) {
    const double r = (mu - lo) / (1.0 + hi);
    return r * r;
}

inline double witness_delta(double lo, double hi, double mu, double eps) {
    return (hi - mu) / (mu - lo) * eps + std::sqrt(eps) * (hi - mu);
}

/// Highest revenue over equilibria of tf. Exact through the oracle for
/// finite G; otherwise over threshold equilibria that satisfy testing IC.
inline double max_equilibrium_revenue(const TestFeeStructure& tf) {
    const auto& G = tf.G;
    if (G.is_purely_atomic()) {
        double best = 0.0;
        for (const auto& e : enumerate_equilibria(G.to_pmf(), tf.fees)) best = std::max(best, e.revenue);
        return best;
    }
    const double phi_t = tf.fees.phi_t;
    const double phi_d = tf.fees.phi_d;
    double best = 0.0;
    if (phi_d < 0.0) return std::max(0.0, phi_t + phi_d);
    const auto set = equilibrium_thresholds(G, phi_d);
    auto consider = [&](double tau) {
        if (phi_t <= option_value(G, tau) + kOracleTol) best = std::max(best, phi_t + phi_d * (1.0 - G.cdf(tau)));
    };
    for (double t : set.points) consider(t);
    for (const auto& iv : set.intervals) consider(iv.lo);
    return best;
}

/// An equilibrium of tf whose revenue is at most delta(eps), given that tf
/// has some equilibrium within eps of the full surplus mu - lower.
inline Witness low_revenue_witness(const TestFeeStructure& tf, double eps) {
    const auto& G = tf.G;
    const double lo = G.lower();
    const double hi = G.upper();
    const double mu = G.mean();
    if (!(mu > lo && mu < hi)) throw DomainError("low_revenue_witness: degenerate prior mean");
    if (!(eps > 0.0) || eps > witness_eps_star(lo, hi, mu))
        throw DomainError("low_revenue_witness: eps outside (0, eps*]");
    const double full = mu - lo;
    if (max_equilibrium_revenue(tf) < full - eps - kOracleTol)
        throw NotNearFullSurplus("low_revenue_witness: no equilibrium within eps of the full surplus");

    Witness w;
    w.bound = witness_delta(lo, hi, mu, eps);
    const auto out = adversarial_outcome(tf);
    if (out.tested == 0.0) {
        w.equilibrium.kind = EqKind::NoTest;
        w.equilibrium.tau_or_atom = mu + tf.fees.phi_d;
        w.equilibrium.nondisclosure_price = mu;
        return w;
    }
    w.equilibrium.kind = EqKind::Threshold;
    w.equilibrium.tau_or_atom = out.tau;
    w.equilibrium.nondisclosure_price = out.nondisclosure_price;
    w.equilibrium.disclosure_prob = out.disclosure_prob;
    w.equilibrium.revenue = out.revenue;
    return w;
}

} // namespace testfee
