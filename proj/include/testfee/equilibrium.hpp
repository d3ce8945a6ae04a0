#pragma once

// Threshold equilibria of the disclosure stage and the adversarial
// (intermediary-worst) outcome of a test-fee structure.

#include "testfee/errors.hpp"
#include "testfee/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace testfee {

/// Root tolerance when merging threshold candidates.
inline constexpr double kRootMergeTol = 1e-12;

/// Slack below which participation is treated as binding. Absorbs rounding in
/// closed-form constructions whose option value is zero by design.
inline constexpr double kParticipationTol = 1e-12;

struct Fees {
    double phi_t = 0.0; ///< testing fee
    double phi_d = 0.0; ///< disclosure fee
};

struct TestFeeStructure {
    MixedDistribution G;
    Fees fees;
};

/// Closed interval of thresholds. `hi_attained` is false when an atom sits
/// at hi and breaks equality there, so hi is only a supremum.
struct ThresholdInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool hi_attained = true;
};

struct ThresholdSet {
    std::vector<double> points;
    std::vector<ThresholdInterval> intervals;

    bool empty() const { return points.empty() && intervals.empty(); }

    /// Largest member (right endpoint of the top interval).
    double max() const {
        double m = -std::numeric_limits<double>::infinity();
        for (double p : points) m = std::max(m, p);
        for (const auto& iv : intervals) m = std::max(m, iv.hi);
        return m;
    }
};

enum class Participation { StrictHold, Fail };

struct ParticipationResult {
    Participation status = Participation::Fail;
    double slack = 0.0;
};

enum class HeMode { Strict, Weak };

struct HighestThreshold {
    double tau = 0.0;
    bool strict = false; ///< D > 0 everywhere above tau
};

struct EquilibriumOutcome {
    double tau = 0.0;
    double tested = 0.0;
    double disclosure_prob = 0.0;
    double nondisclosure_price = 0.0;
    double revenue = 0.0;
    bool strict = true; ///< false when tau is the top of a continuum of thresholds
};

/// D(tau) = I(tau) - phi_d G(tau). Thresholds are its zeros.
inline double defect(const MixedDistribution& G, double phi_d, double tau) {
    return G.integral(tau) - phi_d * G.cdf(tau);
}

inline ParticipationResult participation(const TestFeeStructure& tf) {
    ParticipationResult r;
    r.slack = option_value(tf.G, tf.G.mean() + tf.fees.phi_d) - tf.fees.phi_t;
    r.status = r.slack > kParticipationTol ? Participation::StrictHold : Participation::Fail;
    return r;
}

namespace detail {

// Roots of q2 t^2 + q1 t + q0 in [0, len).
inline void quadratic_roots(double q2, double q1, double q0, double len, std::vector<double>& out) {
    auto keep = [&](double t) {
        if (std::isfinite(t) && t >= -1e-12 * (1.0 + len) && t < len) out.push_back(std::max(0.0, t));
    };
    if (std::abs(q2) <= 1e-300) {
        if (q1 != 0.0) keep(-q0 / q1);
        return;
    }
    double disc = q1 * q1 - 4.0 * q2 * q0;
    if (disc < 0.0) {
        if (disc > -1e-14 * (q1 * q1 + std::abs(4.0 * q2 * q0))) disc = 0.0;
        else return;
    }
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (q1 + (q1 >= 0.0 ? sq : -sq));
    if (qq != 0.0) {
        keep(qq / q2);
        keep(q0 / qq);
    } else {
        keep(0.0);
    }
}

} // namespace detail

/// Every tau in [support min, max(upper, mu + phi_d)] with I(tau) = phi_d G(tau)
/// and G(tau) > 0, solved piece by piece in closed form.
inline ThresholdSet equilibrium_thresholds(const MixedDistribution& G, double phi_d) {
    ThresholdSet out;
    if (!std::isfinite(phi_d) || phi_d < 0.0) return out;

    const double mu = G.mean();
    const double hi_end = G.upper();
    std::vector<double> pts;

    if (phi_d == 0.0) {
        // Only the lowest score conceals.
        pts.push_back(G.support_min());
    } else {
        for (const auto& p : G.pieces()) {
            const double len = p.b - p.a;
            const double Ia = G.integral(p.a);
            std::vector<double> ts;
            if (const auto* f = std::get_if<Flat>(&p.form)) {
                if (f->value <= kMassTol) continue;
                const double t = phi_d - Ia / f->value;
                if (t >= -1e-12 * (1.0 + len) && t < len) ts.push_back(std::max(0.0, t));
            } else if (const auto* f = std::get_if<Affine>(&p.form)) {
                detail::quadratic_roots(0.5 * f->slope, f->value - phi_d * f->slope, Ia - phi_d * f->value, len, ts);
            } else if (const auto* f = std::get_if<ExpCdf>(&p.form)) {
                const double A = Ia - f->coeff * f->scale;
                const double B = f->coeff * (f->scale - phi_d);
                if (std::abs(f->scale - phi_d) <= 1e-12 &&
                    std::abs(A) <= 1e-12 * (1.0 + std::abs(Ia) + f->coeff * f->scale)) {
                    const bool attained = std::abs(defect(G, phi_d, p.b)) <= 1e-10;
                    out.intervals.push_back({p.a, p.b, attained});
                    continue;
                }
                if (B != 0.0 && -A / B > 0.0) {
                    const double t = f->scale * std::log(-A / B);
                    if (t >= -1e-12 * (1.0 + len) && t < len) ts.push_back(std::max(0.0, t));
                }
            }
            for (double t : ts) {
                const double tau = p.a + t;
                if (G.cdf(tau) > 0.0) pts.push_back(tau);
            }
        }
    }
    // Above the support D(x) = x - mu - phi_d.
    if (mu + phi_d >= hi_end - 1e-12) pts.push_back(std::max(hi_end, mu + phi_d));

    std::sort(pts.begin(), pts.end());
    std::sort(out.intervals.begin(), out.intervals.end(),
              [](const ThresholdInterval& l, const ThresholdInterval& r) { return l.lo < r.lo; });
    // Glue intervals that touch.
    std::vector<ThresholdInterval> ivs;
    for (const auto& iv : out.intervals) {
        if (!ivs.empty() && iv.lo <= ivs.back().hi + kRootMergeTol && ivs.back().hi_attained) {
            ivs.back().hi = std::max(ivs.back().hi, iv.hi);
            ivs.back().hi_attained = iv.hi_attained;
        } else {
            ivs.push_back(iv);
        }
    }
    for (double x : pts) {
        bool absorbed = false;
        for (auto& iv : ivs) {
            if (x >= iv.lo - kRootMergeTol && x <= iv.hi + kRootMergeTol) {
                if (x >= iv.hi - kRootMergeTol) iv.hi_attained = true;
                absorbed = true;
                break;
            }
        }
        if (absorbed) continue;
        if (!out.points.empty() && x - out.points.back() <= kRootMergeTol) continue;
        out.points.push_back(x);
    }
    out.intervals = std::move(ivs);
    return out;
}

inline HighestThreshold highest_threshold(const MixedDistribution& G, double phi_d, HeMode mode = HeMode::Weak) {
    const ThresholdSet set = equilibrium_thresholds(G, phi_d);
    if (set.empty()) throw NoThreshold("highest_threshold: no equilibrium threshold");
    HighestThreshold h;
    h.tau = set.max();
    h.strict = true;
    for (const auto& iv : set.intervals)
        if (iv.hi >= h.tau) h.strict = false;
    if (mode == HeMode::Strict && h.strict) {
        const double top = std::max(G.upper(), G.mean() + phi_d);
        for (int i = 1; i <= 200 && top > h.tau; ++i) {
            const double x = h.tau + (top - h.tau) * i / 200.0;
            if (!(defect(G, phi_d, x) > 0.0)) {
                h.strict = false;
                break;
            }
        }
    }
    return h;
}

/// Worst equilibrium for the intermediary: no testing when participation
/// fails, otherwise disclosure strictly above the weak-highest threshold.
inline EquilibriumOutcome adversarial_outcome(const TestFeeStructure& tf) {
    const auto& G = tf.G;
    const double mu = G.mean();
    const double phi_t = tf.fees.phi_t;
    const double phi_d = tf.fees.phi_d;
    EquilibriumOutcome o;
    if (participation(tf).status == Participation::Fail) {
        o.tau = std::max(G.upper(), mu + phi_d);
        o.tested = 0.0;
        o.disclosure_prob = 0.0;
        o.nondisclosure_price = mu;
        o.revenue = 0.0;
        return o;
    }
    o.tested = 1.0;
    if (phi_d < 0.0) {
        o.tau = G.lower();
        o.disclosure_prob = 1.0;
        o.nondisclosure_price = G.lower();
        o.revenue = phi_t + phi_d;
        return o;
    }
    const HighestThreshold h = highest_threshold(G, phi_d, HeMode::Weak);
    o.tau = h.tau;
    o.strict = h.strict;
    o.disclosure_prob = 1.0 - G.cdf(h.tau);
    o.nondisclosure_price = std::clamp(h.tau - phi_d, G.lower(), mu);
    o.revenue = phi_t + phi_d * o.disclosure_prob;
    return o;
}

/// Relaxed objective at a given threshold.
inline double revenue_at(const TestFeeStructure& tf, double tau) {
    if (!(std::abs(defect(tf.G, tf.fees.phi_d, tau)) <= 1e-9))
        throw NotAThreshold("revenue_at: tau is not an equilibrium threshold");
    return tf.fees.phi_t + tf.fees.phi_d * (1.0 - tf.G.cdf(tau));
}

} // namespace testfee
