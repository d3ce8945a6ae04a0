#include "support.hpp"

using namespace fx;

TEST_CASE("cdf on the closed-form optimum for the binary prior") {
    const auto G = gstar();
    CHECK_THAT(G.cdf(0.3), WithinAbs(1.0 / kE, 1e-12));
    CHECK_THAT(G.cdf(0.75), WithinAbs(std::exp(-0.5), 1e-12));
    CHECK(G.cdf(1.0) == 1.0);
    CHECK(G.cdf(-0.5) == 0.0);
    CHECK(G.cdf(2.0) == 1.0);
}

TEST_CASE("cdf is right-continuous at atoms") {
    const auto F = binary();
    CHECK(F.cdf(0.0) == 0.5);
    CHECK(F.cdf_left(0.0) == 0.0);
    CHECK(F.cdf_left(1.0) == 0.5);
    CHECK(F.atom_at(1.0) == 0.5);
}

TEST_CASE("cdf_integral values") {
    CHECK_THAT(uniform01().integral(1.0), WithinAbs(0.5, 1e-15));
    CHECK_THAT(gstar().integral(0.75), WithinAbs(0.5 * std::exp(-0.5), 1e-12));
    CHECK_THAT(binary().integral(0.9), WithinAbs(0.45, 1e-15));
    // integrand 1 above the support
    CHECK_THAT(binary().integral(1.5), WithinAbs(1.0, 1e-15));
}

TEST_CASE("means") {
    CHECK_THAT(binary().mean(), WithinAbs(0.5, 1e-15));
    const auto pm = MixedDistribution::from_atoms(0.0, 1.0, {{1.0, 1.0}});
    CHECK(pm.mean() == 1.0);
    CHECK_THAT(gstar().mean(), WithinAbs(0.5, 1e-12));
}

TEST_CASE("conditional_mean_below") {
    CHECK_THAT(conditional_mean_below(binary(), 0.4), WithinAbs(0.0, 1e-15));
    CHECK_THAT(conditional_mean_below(gstar(), 0.75), WithinAbs(0.25, 1e-12));
    CHECK_THAT(conditional_mean_below(uniform01(), 3.0), WithinAbs(0.5, 1e-15));
    CHECK_THROWS_AS(conditional_mean_below(uniform01(), 0.0), ZeroMassBelow);
    const auto late = MixedDistribution::from_atoms(0.0, 1.0, {{0.6, 1.0}});
    CHECK_THROWS_AS(conditional_mean_below(late, 0.3), ZeroMassBelow);
}

TEST_CASE("option_value") {
    CHECK_THAT(option_value(binary(), 0.5), WithinAbs(0.25, 1e-15));
    CHECK(option_value(uniform01(), 1.0) == 0.0);
    CHECK(option_value(gstar(), 1.0) == 0.0);
    CHECK_THAT(option_value(uniform01(), 0.5), WithinAbs(0.125, 1e-15));
}

TEST_CASE("is_mpc") {
    const auto F = binary();
    const auto G = gstar();
    CHECK(is_mpc(G, F).holds);
    CHECK(is_mpc(F, F).holds);
    const auto back = is_mpc(F, G);
    CHECK_FALSE(back.holds);
    // I_F(0.3) - I_G(0.3) = 0.15 - 0.3/e
    CHECK(back.max_violation >= 0.15 - 0.3 / kE - 1e-12);
    const auto other = MixedDistribution::uniform(0.0, 2.0);
    CHECK_THROWS_AS(is_mpc(other, F), DomainMismatch);
    // same shape, different mean
    const auto shifted = MixedDistribution::from_atoms(0.0, 1.0, {{0.0, 0.4}, {1.0, 0.6}});
    CHECK_FALSE(is_mpc(G, shifted).holds);
}

TEST_CASE("is_mpc finds a crossing between grid points") {
    // Prior uniform, candidate puts a thin extra spread that only the root
    // search between breakpoints can see with no grid.
    const auto F = uniform01();
    const auto G = MixedDistribution::from_atoms(0.0, 1.0, {{0.25, 0.5}, {0.75, 0.5}});
    CHECK(is_mpc(G, F, 1e-12, 0).holds);
    const auto H = MixedDistribution::from_atoms(0.0, 1.0, {{0.2, 0.5}, {0.8, 0.5}});
    const auto rep = is_mpc(H, F, 1e-12, 0);
    CHECK_FALSE(rep.holds);
    // violation peaks where H = F, at 0.5 with I_H - I_F = 0.15 - 0.125
    CHECK_THAT(rep.max_violation, WithinAbs(0.025, 1e-12));
}

TEST_CASE("discretize") {
    const auto F = binary();
    const auto d = discretize(F, 10);
    REQUIRE(d.size() == 2);
    CHECK(d[0].score == 0.0);
    CHECK(d[1].mass == 0.5);

    const auto g = discretize(gstar(), 4);
    REQUIRE(g.size() == 5);
    CHECK_THAT(g[0].mass, WithinAbs(1.0 / kE, 1e-15));
    CHECK_THAT(g.mean(), WithinAbs(0.5, 1e-12));

    const auto u = discretize(uniform01(), 2);
    REQUIRE(u.size() == 2);
    CHECK_THAT(u[0].score, WithinAbs(0.25, 1e-15));
    CHECK_THAT(u[1].score, WithinAbs(0.75, 1e-15));
    CHECK_THAT(u[0].mass, WithinAbs(0.5, 1e-15));

    CHECK_THROWS_AS(discretize(uniform01(), 1), InvalidParams);
}

TEST_CASE("distribution validation") {
    CHECK_THROWS_AS(MixedDistribution(0.0, 1.0, {{0.0, 0.5, Flat{0.5}}}), InvalidDistribution);
    CHECK_THROWS_AS(MixedDistribution(0.0, 1.0, {{0.0, 0.5, Flat{0.6}}, {0.5, 1.0, Flat{0.4}}}), InvalidDistribution);
    CHECK_THROWS_AS(MixedDistribution(0.0, 1.0, {{0.0, 1.0, ExpCdf{0.5, -1.0}}}), InvalidDistribution);
    CHECK_THROWS_AS(MixedDistribution(0.0, 1.0, {{0.0, 1.0, Affine{0.5, 1.0}}}), InvalidDistribution);
    CHECK_THROWS_AS(MixedDistribution(1.0, 1.0, {{1.0, 1.0, Flat{0.5}}}), InvalidDistribution);
    CHECK_THROWS_AS(MixedDistribution::from_atoms(0.0, 1.0, {{0.5, 0.7}}), InvalidDistribution);
    CHECK_THROWS_AS(FinitePmf({{0.5, 0.5}, {0.2, 0.5}}), InvalidDistribution);
}

TEST_CASE("property: integration by parts against Stieltjes sums", "[property]") {
    Rng rng(101);
    for (int c = 0; c < 200; ++c) {
        const auto D = random_mixed(rng);
        const double tau = uniform(rng, D.lower(), D.upper());
        const double g = D.cdf(tau);
        if (!(g > 0.0)) continue;
        const double I = D.integral(tau);
        CHECK_THAT(conditional_mean_below(D, tau) * g + I, WithinAbs(tau * g, 1e-10));
        // density route
        CHECK_THAT(D.partial_moment(tau) + I, WithinAbs(tau * g, 1e-10));
        // Stieltjes sum over a fine discretization
        const auto pmf = discretize(D, 10000);
        double sum = 0.0, mass = 0.0, cell = 0.0;
        for (const auto& p : pmf.points()) {
            cell = std::max(cell, p.mass);
            if (p.score <= tau) {
                sum += p.score * p.mass;
                mass += p.mass;
            }
        }
        const double slack = 2.0 * cell * std::max(1.0, std::abs(tau));
        CHECK_THAT(sum + I, WithinAbs(tau * g, slack + 1e-10));
        CHECK_THAT(mass, WithinAbs(g, slack + 1e-10));
    }
}

TEST_CASE("property: cdf_integral is convex", "[property]") {
    Rng rng(102);
    for (int c = 0; c < 300; ++c) {
        const auto D = random_mixed(rng);
        double xs[3] = {uniform(rng, -0.1, 1.1), uniform(rng, -0.1, 1.1), uniform(rng, -0.1, 1.1)};
        std::sort(xs, xs + 3);
        if (!(xs[0] < xs[2])) continue;
        const double chord = ((xs[2] - xs[1]) * D.integral(xs[0]) + (xs[1] - xs[0]) * D.integral(xs[2])) / (xs[2] - xs[0]);
        CHECK(D.integral(xs[1]) <= chord + 1e-12);
    }
}

TEST_CASE("property: discretize is a contraction with the same mean", "[property]") {
    Rng rng(103);
    for (int c = 0; c < 200; ++c) {
        const auto D = random_mixed(rng);
        const int n = uniform_int(rng, 2, 64);
        const auto pmf = discretize(D, n);
        CHECK_THAT(pmf.mean(), WithinAbs(D.mean(), 1e-10));
        const auto G = MixedDistribution::from_pmf(pmf, D.lower(), D.upper());
        CHECK(is_mpc(G, D, 1e-9).holds);
    }
}

TEST_CASE("property: option value identity", "[property]") {
    Rng rng(104);
    for (int c = 0; c < 300; ++c) {
        const auto D = random_mixed(rng);
        const double x = uniform(rng, -0.2, 1.2);
        const double direct = x >= D.upper() ? 0.0 : (D.upper() - x) - (D.integral(D.upper()) - D.integral(x));
        CHECK_THAT(option_value(D, x), WithinAbs(std::max(0.0, direct), 1e-12));
        // and through the discretized pmf (Stieltjes form)
        const auto pmf = discretize(D, 2000);
        double s = 0.0, cell = 0.0;
        for (const auto& p : pmf.points()) {
            s += p.mass * std::max(0.0, p.score - x);
            cell = std::max(cell, p.mass);
        }
        // the cell-mean placement makes the pmf a contraction: its option value is lower
        CHECK(s <= option_value(D, x) + 1e-12);
        CHECK(s >= option_value(D, x) - cell - 1e-12);
    }
}
