#pragma once

// Exact calculus for score distributions on a bounded interval that mix
// atoms with flat, affine and exponential CDF segments. Every integral used
// by the equilibrium engine has a closed form here, so root finding never
// sits on top of quadrature error.

#include "testfee/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace testfee {

/// Tolerance on CDF values: total mass, negative atoms, overshoot above 1.
inline constexpr double kMassTol = 1e-12;

/// G(s) = value on the segment.
struct Flat {
    double value = 0.0;
};

/// G(s) = value + slope * (s - a).
struct Affine {
    double value = 0.0;
    double slope = 0.0;
};

/// G(s) = coeff * exp((s - a) / scale). `scale` is the e-folding length of
/// the segment, the quantity a disclosure fee is compared against.
struct ExpCdf {
    double coeff = 0.0;
    double scale = 1.0;
};

using PieceForm = std::variant<Flat, Affine, ExpCdf>;

/// CDF on the half-open segment [a, b). Jumps between consecutive pieces
/// are atoms.
struct Piece {
    double a = 0.0;
    double b = 0.0;
    PieceForm form;

    /// Form evaluated at x; valid on the closed segment [a, b] so that
    /// value_at(b) is the left limit at b.
    double value_at(double x) const {
        const double t = x - a;
        return std::visit(
            [t](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, Flat>) {
                    return f.value;
                } else if constexpr (std::is_same_v<F, Affine>) {
                    return f.value + f.slope * t;
                } else {
                    return f.coeff * std::exp(t / f.scale);
                }
            },
            form);
    }

    double start_value() const { return value_at(a); }
    double end_value() const { return value_at(b); }

    /// \int_a^x G(s) ds for x in [a, b].
    double integral_to(double x) const {
        const double t = x - a;
        return std::visit(
            [t](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, Flat>) {
                    return f.value * t;
                } else if constexpr (std::is_same_v<F, Affine>) {
                    return f.value * t + 0.5 * f.slope * t * t;
                } else {
                    return f.coeff * f.scale * std::expm1(t / f.scale);
                }
            },
            form);
    }

    /// \int_a^x s g(s) ds over the absolutely continuous part (density g),
    /// computed from the density rather than from integral_to.
    double moment_to(double x) const {
        const double t = x - a;
        const double lo = a;
        return std::visit(
            [t, x, lo](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, Flat>) {
                    return 0.0;
                } else if constexpr (std::is_same_v<F, Affine>) {
                    return 0.5 * f.slope * (x * x - lo * lo);
                } else {
                    const double e = std::exp(t / f.scale);
                    return f.coeff * (x * e - lo - f.scale * std::expm1(t / f.scale));
                }
            },
            form);
    }

    bool is_flat() const { return std::holds_alternative<Flat>(form); }
};

struct Atom {
    double x = 0.0;
    double mass = 0.0;
};

struct PmfPoint {
    double score = 0.0;
    double mass = 0.0;
};

/// Finite score distribution: strictly increasing scores with positive
/// masses summing to one.
class FinitePmf {
public:
    explicit FinitePmf(std::vector<PmfPoint> points) : points_(std::move(points)) {
        if (points_.empty()) throw InvalidDistribution("pmf: no support points");
        double total = 0.0;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& p = points_[i];
            if (!std::isfinite(p.score) || !std::isfinite(p.mass))
                throw InvalidDistribution("pmf: non-finite entry");
            if (p.mass <= 0.0) throw InvalidDistribution("pmf: masses must be positive");
            if (i > 0 && !(points_[i - 1].score < p.score))
                throw InvalidDistribution("pmf: scores must be strictly increasing");
            total += p.mass;
        }
        if (std::abs(total - 1.0) > kMassTol)
            throw InvalidDistribution("pmf: masses sum to " + std::to_string(total));
    }

    const std::vector<PmfPoint>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    const PmfPoint& operator[](std::size_t i) const { return points_[i]; }

    double mean() const {
        double m = 0.0;
        for (const auto& p : points_) m += p.score * p.mass;
        return m;
    }

private:
    std::vector<PmfPoint> points_;
};

/// CDF on [lower, upper] built from pieces that tile the interval. Values are
/// immutable after construction.
class MixedDistribution {
public:
    MixedDistribution(double lower, double upper, std::vector<Piece> pieces)
        : lower_(lower), upper_(upper), pieces_(std::move(pieces)) {
        validate();
        prefix_integral_.resize(pieces_.size() + 1, 0.0);
        prefix_moment_.resize(pieces_.size() + 1, 0.0);
        double prev_end = 0.0;
        for (std::size_t k = 0; k < pieces_.size(); ++k) {
            const auto& p = pieces_[k];
            const double jump = std::max(0.0, p.start_value() - prev_end);
            prefix_integral_[k + 1] = prefix_integral_[k] + p.integral_to(p.b);
            prefix_moment_[k + 1] = prefix_moment_[k] + p.a * jump + p.moment_to(p.b);
            prev_end = p.end_value();
        }
    }

    /// Purely atomic distribution; atoms need not be sorted but must lie in
    /// [lower, upper] and sum to one.
    static MixedDistribution from_atoms(double lower, double upper, std::vector<Atom> atoms) {
        if (!(lower < upper)) throw InvalidDistribution("from_atoms: need lower < upper");
        std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
        std::vector<Atom> merged;
        for (const auto& at : atoms) {
            if (at.mass < -kMassTol) throw InvalidDistribution("from_atoms: negative mass");
            if (at.x < lower || at.x > upper) throw InvalidDistribution("from_atoms: atom outside bounds");
            if (at.mass <= 0.0) continue;
            if (!merged.empty() && merged.back().x == at.x)
                merged.back().mass += at.mass;
            else
                merged.push_back(at);
        }
        double total = 0.0;
        for (const auto& at : merged) total += at.mass;
        if (std::abs(total - 1.0) > kMassTol)
            throw InvalidDistribution("from_atoms: masses sum to " + std::to_string(total));

        std::vector<Piece> pieces;
        double cum = 0.0;
        double cursor = lower;
        for (const auto& at : merged) {
            if (at.x > cursor) {
                pieces.push_back({cursor, at.x, Flat{cum}});
                cursor = at.x;
            }
            cum += at.mass;
        }
        if (cursor < upper) pieces.push_back({cursor, upper, Flat{std::min(cum, 1.0)}});
        return MixedDistribution(lower, upper, std::move(pieces));
    }

    static MixedDistribution from_pmf(const FinitePmf& pmf, double lower, double upper) {
        std::vector<Atom> atoms;
        atoms.reserve(pmf.size());
        for (const auto& p : pmf.points()) atoms.push_back({p.score, p.mass});
        return from_atoms(lower, upper, std::move(atoms));
    }

    static MixedDistribution uniform(double lower, double upper) {
        if (!(lower < upper)) throw InvalidDistribution("uniform: need lower < upper");
        return MixedDistribution(lower, upper, {{lower, upper, Affine{0.0, 1.0 / (upper - lower)}}});
    }

    double lower() const { return lower_; }
    double upper() const { return upper_; }
    const std::vector<Piece>& pieces() const { return pieces_; }

    /// Right-continuous CDF; 0 below the support interval and 1 from upper on.
    double cdf(double x) const {
        if (x < lower_) return 0.0;
        if (x >= upper_) return 1.0;
        return std::clamp(pieces_[locate(x)].value_at(x), 0.0, 1.0);
    }

    /// Left limit G(x-).
    double cdf_left(double x) const {
        if (x <= lower_) return 0.0;
        if (x > upper_) return 1.0;
        auto it = std::lower_bound(pieces_.begin(), pieces_.end(), x,
                                   [](const Piece& p, double v) { return p.b < v; });
        if (it == pieces_.end()) --it;
        return std::clamp(it->value_at(x), 0.0, 1.0);
    }

    double atom_at(double x) const { return std::max(0.0, cdf(x) - cdf_left(x)); }

    /// I(x) = \int_{lower}^{x} G(s) ds, extended with integrand 1 above upper.
    double integral(double x) const {
        if (x <= lower_) return 0.0;
        if (x >= upper_) return prefix_integral_.back() + (x - upper_);
        const std::size_t k = locate(x);
        return prefix_integral_[k] + pieces_[k].integral_to(x);
    }

    /// \int_{[lower, x]} s dG(s), atoms at x included. Computed from atom
    /// masses and densities, independently of integral().
    double partial_moment(double x) const {
        if (x < lower_) return 0.0;
        if (x >= upper_) return prefix_moment_.back() + upper_ * top_atom();
        const std::size_t k = locate(x);
        const auto& p = pieces_[k];
        const double prev_end = k == 0 ? 0.0 : pieces_[k - 1].end_value();
        const double jump = std::max(0.0, p.start_value() - prev_end);
        return prefix_moment_[k] + p.a * jump + p.moment_to(x);
    }

    double mean() const { return upper_ - prefix_integral_.back(); }

    /// Lowest point of the support.
    double support_min() const {
        for (const auto& p : pieces_) {
            if (p.start_value() > kMassTol) return p.a;
            if (!p.is_flat()) return p.a;
        }
        return upper_;
    }

    /// Mass at upper not covered by the last piece.
    double top_atom() const { return std::max(0.0, 1.0 - pieces_.back().end_value()); }

    /// Piece starts plus upper.
    std::vector<double> breakpoints() const {
        std::vector<double> out;
        out.reserve(pieces_.size() + 1);
        for (const auto& p : pieces_) out.push_back(p.a);
        out.push_back(upper_);
        return out;
    }

    std::vector<Atom> atoms() const {
        std::vector<Atom> out;
        double prev_end = 0.0;
        for (const auto& p : pieces_) {
            const double jump = p.start_value() - prev_end;
            if (jump > 0.0) out.push_back({p.a, jump});
            prev_end = p.end_value();
        }
        if (top_atom() > 0.0) out.push_back({upper_, top_atom()});
        return out;
    }

    bool is_purely_atomic() const {
        return std::all_of(pieces_.begin(), pieces_.end(), [](const Piece& p) { return p.is_flat(); });
    }

    /// Atoms as a FinitePmf; only meaningful when is_purely_atomic().
    FinitePmf to_pmf() const {
        if (!is_purely_atomic()) throw InvalidDistribution("to_pmf: distribution has a continuous part");
        std::vector<PmfPoint> pts;
        double total = 0.0;
        for (const auto& at : atoms()) {
            if (at.mass <= kMassTol) continue;
            pts.push_back({at.x, at.mass});
            total += at.mass;
        }
        for (auto& p : pts) p.mass /= total;
        return FinitePmf(std::move(pts));
    }

    /// Index of the piece with a <= x < b; x must lie in [lower, upper).
    std::size_t locate(double x) const {
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                                   [](double v, const Piece& p) { return v < p.a; });
        return it == pieces_.begin() ? 0 : static_cast<std::size_t>(it - pieces_.begin()) - 1;
    }

private:
    void validate() const {
        if (!std::isfinite(lower_) || !std::isfinite(upper_) || !(lower_ < upper_))
            throw InvalidDistribution("distribution: need finite lower < upper");
        if (pieces_.empty()) throw InvalidDistribution("distribution: no pieces");
        if (pieces_.front().a != lower_) throw InvalidDistribution("distribution: first piece must start at lower");
        if (pieces_.back().b != upper_) throw InvalidDistribution("distribution: last piece must end at upper");
        double prev_end = 0.0;
        for (std::size_t k = 0; k < pieces_.size(); ++k) {
            const auto& p = pieces_[k];
            if (!(p.a < p.b)) throw InvalidDistribution("distribution: empty or reversed piece");
            if (k > 0 && pieces_[k - 1].b != p.a) throw InvalidDistribution("distribution: pieces must tile the interval");
            std::visit(
                [](const auto& f) {
                    using F = std::decay_t<decltype(f)>;
                    if constexpr (std::is_same_v<F, Flat>) {
                        if (!std::isfinite(f.value)) throw InvalidDistribution("flat: non-finite value");
                    } else if constexpr (std::is_same_v<F, Affine>) {
                        if (!std::isfinite(f.value) || !std::isfinite(f.slope) || f.slope < 0.0)
                            throw InvalidDistribution("affine: slope must be finite and non-negative");
                    } else {
                        if (!(f.coeff > 0.0) || !(f.scale > 0.0) || !std::isfinite(f.coeff) || !std::isfinite(f.scale))
                            throw InvalidDistribution("expcdf: coeff and scale must be positive");
                    }
                },
                p.form);
            const double start = p.start_value();
            const double end = p.end_value();
            if (start < -kMassTol) throw InvalidDistribution("distribution: negative CDF value");
            if (start - prev_end < -kMassTol)
                throw InvalidDistribution("distribution: CDF decreases at " + std::to_string(p.a));
            if (!std::isfinite(end) || end > 1.0 + kMassTol)
                throw InvalidDistribution("distribution: CDF exceeds 1 on [" + std::to_string(p.a) + ", " +
                                          std::to_string(p.b) + ")");
            prev_end = end;
        }
    }

    double lower_;
    double upper_;
    std::vector<Piece> pieces_;
    std::vector<double> prefix_integral_;
    std::vector<double> prefix_moment_;
};

// Free-function surface.

inline double cdf(const MixedDistribution& d, double x) { return d.cdf(x); }

inline double cdf_integral(const MixedDistribution& d, double x) { return d.integral(x); }

inline double mean(const MixedDistribution& d) { return d.mean(); }

/// E[s | s <= tau] = tau - I(tau) / G(tau), the atom at tau included.
inline double conditional_mean_below(const MixedDistribution& d, double tau) {
    const double g = d.cdf(tau);
    if (!(g > 0.0)) throw ZeroMassBelow("conditional_mean_below: no mass at or below " + std::to_string(tau));
    const double m = tau - d.integral(tau) / g;
    return std::clamp(m, d.lower(), std::min(tau, d.upper()));
}

/// \int_{cutoff}^{upper} (s - cutoff) dG = \int_{cutoff}^{upper} (1 - G(s)) ds.
inline double option_value(const MixedDistribution& d, double cutoff) {
    if (cutoff >= d.upper()) return 0.0;
    const double v = (d.upper() - cutoff) - (d.integral(d.upper()) - d.integral(cutoff));
    return std::max(0.0, v);
}

struct MpcReport {
    bool holds = false;
    double max_violation = 0.0; ///< max over checkpoints of I_candidate - I_prior
    double at = 0.0;            ///< where the maximum was found
    double mean_gap = 0.0;      ///< |mean(candidate) - mean(prior)|
};

namespace detail {

// Piece restricted to a sub-interval, viewed as q*x + const + c*exp((x - a)/s).
struct SmoothShape {
    double slope = 0.0;
    bool has_exp = false;
    double c = 0.0;
    double a = 0.0;
    double s = 1.0;
};

inline SmoothShape shape_of(const Piece& p) {
    SmoothShape sh;
    if (const auto* f = std::get_if<Affine>(&p.form)) {
        sh.slope = f->slope;
    } else if (const auto* e = std::get_if<ExpCdf>(&p.form)) {
        sh.has_exp = true;
        sh.c = e->coeff;
        sh.a = p.a;
        sh.s = e->scale;
    }
    return sh;
}

// The derivative of G - F vanishes at most once on a smooth cell; returns it
// when it exists.
inline bool critical_point(const SmoothShape& g, const SmoothShape& f, double& out) {
    const double dq = g.slope - f.slope;
    if (g.has_exp && f.has_exp) {
        const double inv = 1.0 / g.s - 1.0 / f.s;
        if (inv == 0.0) return false;
        out = (std::log(f.c / f.s) - std::log(g.c / g.s) - f.a / f.s + g.a / g.s) / inv;
        return std::isfinite(out);
    }
    if (g.has_exp) {
        const double arg = -dq * g.s / g.c;
        if (!(arg > 0.0)) return false;
        out = g.a + g.s * std::log(arg);
        return std::isfinite(out);
    }
    if (f.has_exp) {
        const double arg = dq * f.s / f.c;
        if (!(arg > 0.0)) return false;
        out = f.a + f.s * std::log(arg);
        return std::isfinite(out);
    }
    return false;
}

template <class Fn>
double bisect_root(Fn&& h, double lo, double hi, double hlo) {
    for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double hm = h(mid);
        if (hm == 0.0) return mid;
        if ((hm < 0.0) == (hlo < 0.0)) {
            lo = mid;
            hlo = hm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Largest value of I_candidate - I_prior over a finite certificate set:
/// breakpoints of both CDFs, every interior crossing G = F (where the
/// difference of integrals is stationary), and an optional uniform grid.
inline MpcReport mpc_report(const MixedDistribution& candidate, const MixedDistribution& prior, int grid = 2048) {
    if (std::abs(candidate.lower() - prior.lower()) > 1e-12 || std::abs(candidate.upper() - prior.upper()) > 1e-12)
        throw DomainMismatch("is_mpc: candidate and prior live on different intervals");

    const double lo = prior.lower();
    const double hi = prior.upper();
    std::vector<double> xs = candidate.breakpoints();
    const auto pb = prior.breakpoints();
    xs.insert(xs.end(), pb.begin(), pb.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<double> checks = xs;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double x0 = xs[i];
        const double x1 = xs[i + 1];
        if (!(x1 > x0)) continue;
        const double mid = 0.5 * (x0 + x1);
        const Piece& gp = candidate.pieces()[candidate.locate(std::min(mid, candidate.upper()))];
        const Piece& fp = prior.pieces()[prior.locate(std::min(mid, prior.upper()))];
        auto h = [&](double x) { return gp.value_at(x) - fp.value_at(x); };

        std::vector<double> cuts{x0};
        double crit = 0.0;
        if (detail::critical_point(detail::shape_of(gp), detail::shape_of(fp), crit) && crit > x0 && crit < x1)
            cuts.push_back(crit);
        cuts.push_back(x1);
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
            const double l = cuts[j];
            const double r = cuts[j + 1];
            const double hl = h(l);
            const double hr = h(r);
            if (hl == 0.0) {
                checks.push_back(l);
            } else if ((hl < 0.0) != (hr < 0.0) && hr != 0.0) {
                checks.push_back(detail::bisect_root(h, l, r, hl));
            }
            if (crit > x0 && crit < x1) checks.push_back(crit);
        }
    }
    for (int i = 1; i < grid; ++i) checks.push_back(lo + (hi - lo) * static_cast<double>(i) / grid);

    MpcReport rep;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (double x : checks) {
        const double v = candidate.integral(x) - prior.integral(x);
        if (v > rep.max_violation) {
            rep.max_violation = v;
            rep.at = x;
        }
    }
    rep.mean_gap = std::abs(candidate.mean() - prior.mean());
    return rep;
}

/// True iff candidate is a mean-preserving contraction of prior within tol.
inline MpcReport is_mpc(const MixedDistribution& candidate, const MixedDistribution& prior, double tol = 1e-9,
                        int grid = 2048) {
    MpcReport rep = mpc_report(candidate, prior, grid);
    rep.holds = rep.max_violation <= tol && rep.mean_gap <= tol;
    return rep;
}

/// Finite approximation: atoms pass through unchanged, every continuous
/// segment is cut into n equal cells whose mass sits at the cell's
/// conditional mean, so the result is a contraction of d with the same mean.
inline FinitePmf discretize(const MixedDistribution& d, int n) {
    if (n < 2) throw InvalidParams("discretize: need n >= 2");
    std::vector<PmfPoint> pts;
    auto push = [&pts](double x, double m) {
        if (m <= 0.0) return;
        if (!pts.empty() && x <= pts.back().score) {
            // Cell means collapse onto a neighbouring atom only through rounding.
            pts.back().mass += m;
            return;
        }
        pts.push_back({x, m});
    };
    double prev_end = 0.0;
    for (const auto& p : d.pieces()) {
        push(p.a, p.start_value() - prev_end);
        if (!p.is_flat()) {
            const double width = (p.b - p.a) / n;
            for (int i = 0; i < n; ++i) {
                const double x0 = p.a + width * i;
                const double x1 = i + 1 == n ? p.b : p.a + width * (i + 1);
                const double g0 = p.value_at(x0);
                const double g1 = p.value_at(x1);
                const double m = g1 - g0;
                if (m <= 0.0) continue;
                const double area = p.integral_to(x1) - p.integral_to(x0);
                const double loc = std::clamp((x1 * g1 - x0 * g0 - area) / m, x0, x1);
                push(loc, m);
            }
        }
        prev_end = p.end_value();
    }
    push(d.upper(), d.top_atom());
    return FinitePmf(std::move(pts));
}

} // namespace testfee
