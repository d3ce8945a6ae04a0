#include "support.hpp"

using namespace fx;

TEST_CASE("participation") {
    const auto p1 = participation({binary(), Fees{0.0, 0.4}});
    CHECK(p1.status == Participation::StrictHold);
    CHECK_THAT(p1.slack, WithinAbs(0.05, 1e-15));

    const auto p2 = participation({gstar(), Fees{0.0, 0.5}});
    CHECK(p2.status == Participation::Fail);
    CHECK_THAT(p2.slack, WithinAbs(0.0, 1e-12));

    const auto U = uniform01();
    const auto p3 = participation({U, Fees{option_value(U, 0.7) + 1.0, 0.2}});
    CHECK(p3.status == Participation::Fail);
}

TEST_CASE("equilibrium thresholds on the fully revealing test") {
    const auto s1 = equilibrium_thresholds(binary(), 0.4);
    REQUIRE(s1.points.size() == 1);
    CHECK(s1.intervals.empty());
    CHECK_THAT(s1.points[0], WithinAbs(0.4, 1e-15));
    // tau - phi_d equals the conditional mean below tau
    CHECK_THAT(s1.points[0] - 0.4 - conditional_mean_below(binary(), s1.points[0]), WithinAbs(0.0, 1e-12));

    const auto s2 = equilibrium_thresholds(binary(), 0.6);
    REQUIRE(s2.points.size() == 2);
    CHECK_THAT(s2.points[0], WithinAbs(0.6, 1e-15));
    CHECK_THAT(s2.points[1], WithinAbs(1.1, 1e-15));
}

TEST_CASE("thresholds form an interval on the exponential segment") {
    const auto s = equilibrium_thresholds(gstar(), 0.5);
    CHECK(s.points.empty());
    REQUIRE(s.intervals.size() == 1);
    CHECK_THAT(s.intervals[0].lo, WithinAbs(0.5, 1e-15));
    CHECK_THAT(s.intervals[0].hi, WithinAbs(1.0, 1e-15));
    CHECK(s.intervals[0].hi_attained);
}

TEST_CASE("negative disclosure fee has no threshold") {
    CHECK(equilibrium_thresholds(binary(), -0.1).empty());
    CHECK_THROWS_AS(highest_threshold(binary(), -0.1), NoThreshold);
}

TEST_CASE("zero disclosure fee: only the lowest score conceals") {
    const auto s = equilibrium_thresholds(uniform01(), 0.0);
    REQUIRE(s.points.size() == 1);
    CHECK(s.points[0] == 0.0);
}

TEST_CASE("highest threshold") {
    const auto h1 = highest_threshold(binary(), 0.4, HeMode::Strict);
    CHECK_THAT(h1.tau, WithinAbs(0.4, 1e-15));
    CHECK(h1.strict);
    const auto h2 = highest_threshold(binary(), 0.6, HeMode::Strict);
    CHECK_THAT(h2.tau, WithinAbs(1.1, 1e-15));
    CHECK(h2.strict);
    const auto h3 = highest_threshold(gstar(), 0.5, HeMode::Strict);
    CHECK_THAT(h3.tau, WithinAbs(1.0, 1e-15));
    CHECK_FALSE(h3.strict);
}

TEST_CASE("adversarial outcomes") {
    const auto o1 = adversarial_outcome({binary(), Fees{0.0, 0.4}});
    CHECK_THAT(o1.revenue, WithinAbs(0.2, 1e-15));
    CHECK(o1.tested == 1.0);
    CHECK_THAT(o1.nondisclosure_price, WithinAbs(0.0, 1e-15));

    const auto o2 = adversarial_outcome({three_score(1.0 / 9.0), Fees{0.0, 0.45}});
    CHECK_THAT(o2.disclosure_prob, WithinAbs(5.0 / 9.0, 1e-12));
    CHECK_THAT(o2.revenue, WithinAbs(0.25, 1e-12));

    const auto o3 = adversarial_outcome({gstar(), Fees{0.0, 0.49}});
    CHECK_THAT(o3.tau, WithinAbs(0.49, 1e-12));
    CHECK_THAT(o3.disclosure_prob, WithinAbs(1.0 - 1.0 / kE, 1e-12));
    CHECK_THAT(o3.revenue, WithinAbs(0.49 * (1.0 - 1.0 / kE), 1e-12));

    // exact optimum: participation binds, worst case is no testing
    const auto o4 = adversarial_outcome({gstar(), Fees{0.0, 0.5}});
    CHECK(o4.revenue == 0.0);
    CHECK(o4.tested == 0.0);
    CHECK_THAT(o4.nondisclosure_price, WithinAbs(0.5, 1e-12));

    // negative disclosure fee: everyone discloses
    const auto o5 = adversarial_outcome({binary(), Fees{0.1, -0.05}});
    CHECK(o5.disclosure_prob == 1.0);
    CHECK_THAT(o5.revenue, WithinAbs(0.05, 1e-15));
}

TEST_CASE("revenue_at") {
    const TestFeeStructure tf{gstar(), Fees{0.0, 0.5}};
    CHECK_THAT(revenue_at(tf, 0.5), WithinAbs(0.5 * (1.0 - 1.0 / kE), 1e-12));
    CHECK_THAT(revenue_at(tf, 1.0), WithinAbs(0.0, 1e-12));
    CHECK_THAT(revenue_at({binary(), Fees{0.0, 0.4}}, 0.4), WithinAbs(0.2, 1e-15));
    CHECK_THROWS_AS(revenue_at({binary(), Fees{0.0, 0.4}}, 0.3), NotAThreshold);
}

TEST_CASE("property: every threshold is certified", "[property]") {
    Rng rng(201);
    for (int c = 0; c < 300; ++c) {
        const auto G = random_mixed(rng);
        const double phi_d = uniform(rng, 0.0, 0.8);
        const auto set = equilibrium_thresholds(G, phi_d);
        const double top = std::max(G.upper(), G.mean() + phi_d);
        auto certify = [&](double tau) {
            CHECK(tau >= G.support_min() - 1e-12);
            CHECK(tau <= top + 1e-12);
            CHECK(std::abs(defect(G, phi_d, tau)) <= 1e-10);
            if (G.cdf(tau) > 0.0) CHECK(std::abs(tau - phi_d - conditional_mean_below(G, tau)) <= 1e-8);
        };
        for (double t : set.points) certify(t);
        for (const auto& iv : set.intervals) {
            certify(iv.lo);
            certify(0.5 * (iv.lo + iv.hi));
            if (iv.hi_attained) certify(iv.hi);
        }
        CHECK_FALSE(set.empty());
    }
}

TEST_CASE("property: weak-highest threshold has a non-negative defect above it", "[property]") {
    Rng rng(202);
    int checked = 0;
    for (int c = 0; c < 300; ++c) {
        const auto G = random_mixed(rng);
        const double phi_d = uniform(rng, 1e-3, 0.8);
        const auto h = highest_threshold(G, phi_d, HeMode::Weak);
        const double top = std::max(G.upper(), G.mean() + phi_d);
        for (int i = 1; i <= 200 && top > h.tau; ++i) {
            const double x = h.tau + (top - h.tau) * i / 200.0;
            CHECK(defect(G, phi_d, x) >= -1e-10);
        }
        ++checked;
    }
    CHECK(checked >= 200);
}

TEST_CASE("property: robust disclosure falls as the disclosure fee rises", "[property]") {
    Rng rng(203);
    for (int c = 0; c < 200; ++c) {
        const auto G = random_mixed(rng);
        double prev_tau = -1.0;
        double prev_prob = 2.0;
        for (double phi_d : grid(0.0, 1.0, 0.02)) {
            const auto h = highest_threshold(G, phi_d);
            CHECK(h.tau >= prev_tau - 1e-12);
            const double prob = 1.0 - G.cdf(h.tau);
            CHECK(prob <= prev_prob + 1e-12);
            prev_tau = h.tau;
            prev_prob = prob;
        }
    }
}

TEST_CASE("property: boundspeed above the weak-highest threshold", "[property]") {
    Rng rng(204);
    for (int c = 0; c < 250; ++c) {
        const auto G = random_mixed(rng);
        const double phi_d = uniform(rng, 1e-2, 0.8);
        const auto h = highest_threshold(G, phi_d);
        const double top = std::max(G.upper(), G.mean() + phi_d) + 0.2;
        for (int k = 0; k < 10; ++k) {
            double a = uniform(rng, h.tau, top);
            double b = uniform(rng, h.tau, top);
            if (a > b) std::swap(a, b);
            CHECK(G.integral(b) <= std::exp((b - a) / phi_d) * G.integral(a) * (1.0 + 1e-9) + 1e-15);
        }
    }
}

TEST_CASE("property: revenue identity under binding participation and a flat top", "[property]") {
    // Pooled low atom, exponential middle, then no mass until a top atom at
    // the upper bound; testing fee set to the binding level.
    Rng rng(205);
    int checked = 0;
    while (checked < 200) {
        const double phi_d = uniform(rng, 0.05, 0.4);
        const double tau0 = uniform(rng, 0.0, 0.3);
        const double tau1 = tau0 + phi_d;
        const double g = uniform(rng, 0.1, 0.9);
        const double tau2 = tau1 + uniform(rng, 0.0, 1.0) * std::min(1.0 - tau1, phi_d * std::log(1.0 / g));
        SesStructure s = ses_build({tau0, tau1, tau2, 1.0, g}, 0.0, 1.0);
        const auto& G = s.tf.G;
        const double mu = G.mean();
        if (tau2 > mu + phi_d) continue;
        TestFeeStructure tf{G, Fees{option_value(G, mu + phi_d), phi_d}};
        for (double tau : {tau1, 0.5 * (tau1 + tau2), tau2}) {
            CHECK_THAT(revenue_at(tf, tau), WithinAbs(G.integral(mu + phi_d) - G.integral(tau), 1e-10));
        }
        ++checked;
    }
}
