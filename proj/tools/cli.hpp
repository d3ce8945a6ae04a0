#pragma once

// Command logic for the testfee binary. Kept in a header so the test suite
// can drive it in process.

#include "testfee/testfee.hpp"
#include "testfee/literal.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace testfee::cli {

enum Exit { kOk = 0, kUsage = 2, kInfeasible = 3, kVerifyFailed = 4 };

inline double r9(double x) { return std::strtod(fmt9(x).c_str(), nullptr); }

inline std::string describe(const ThresholdSet& s) {
    std::string o = "points=[";
    for (std::size_t i = 0; i < s.points.size(); ++i) o += (i ? "," : "") + fmt9(s.points[i]);
    o += "] intervals=[";
    for (std::size_t i = 0; i < s.intervals.size(); ++i) {
        const auto& iv = s.intervals[i];
        o += (i ? "," : "") + std::string("[") + fmt9(iv.lo) + "," + fmt9(iv.hi) + (iv.hi_attained ? "]" : ")");
    }
    return o + "]";
}

inline std::string describe(const EquilibriumOutcome& o) {
    return "tau=" + fmt9(o.tau) + " tested=" + fmt9(o.tested) + " disclosure_prob=" + fmt9(o.disclosure_prob) +
           " nondisclosure_price=" + fmt9(o.nondisclosure_price) + " revenue=" + fmt9(o.revenue);
}

inline json to_json(const EquilibriumOutcome& o) {
    return {{"tau", r9(o.tau)},
            {"tested", r9(o.tested)},
            {"disclosure_prob", r9(o.disclosure_prob)},
            {"nondisclosure_price", r9(o.nondisclosure_price)},
            {"revenue", r9(o.revenue)},
            {"strict", o.strict}};
}

inline std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> out;
    std::stringstream ss(spec);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c, ':'))
        throw InvalidParams("grid must look like a:b:step");
    double lo, hi, step;
    try {
        lo = std::stod(a);
        hi = std::stod(b);
        step = std::stod(c);
    } catch (const std::exception&) {
        throw InvalidParams("grid must look like a:b:step");
    }
    if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi))
        throw InvalidParams("grid is empty");
    const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (n > 1000000) throw InvalidParams("grid too large");
    for (long i = 0; i < n; ++i) out.push_back(r9(lo + step * static_cast<double>(i)));
    return out;
}

inline int cmd_eval(const Scenario& sc, double eps, bool as_json, std::ostream& out, std::ostream& err) {
    if (!sc.test) {
        err << "error: scenario has no test distribution\n";
        return kUsage;
    }
    if (!sc.fees) {
        err << "error: scenario has no fees\n";
        return kUsage;
    }
    const MpcReport mpc = is_mpc(*sc.test, sc.prior, 1e-9);
    if (!mpc.holds) {
        err << "error: test is not a mean-preserving contraction of the prior (violation " << fmt9(mpc.max_violation)
            << " at " << fmt9(mpc.at) << ", mean gap " << fmt9(mpc.mean_gap) << ")\n";
        return kInfeasible;
    }
    const TestFeeStructure tf{*sc.test, *sc.fees};
    const auto part = participation(tf);
    const auto set = equilibrium_thresholds(tf.G, tf.fees.phi_d);
    const auto outcome = adversarial_outcome(tf);
    bool degenerate = false;
    if (!set.empty() && tf.fees.phi_d >= 0.0) degenerate = !highest_threshold(tf.G, tf.fees.phi_d).strict;

    std::optional<TestFeeStructure> shifted;
    std::optional<EquilibriumOutcome> shifted_out;
    if (degenerate) {
        TestFeeStructure s{tf.G, Fees{tf.fees.phi_t, tf.fees.phi_d - eps}};
        if (participation(s).status != Participation::StrictHold) s.fees.phi_t -= eps;
        shifted = s;
        shifted_out = adversarial_outcome(s);
    }

    if (as_json) {
        json j;
        j["participation"] = part.status == Participation::StrictHold ? "strict-hold" : "fail";
        j["slack"] = r9(part.slack);
        j["thresholds"] = describe(set);
        j["outcome"] = to_json(outcome);
        j["revenue"] = r9(outcome.revenue);
        j["interval_degenerate"] = degenerate;
        if (shifted) {
            j["eps"] = r9(eps);
            j["eps_fees"] = {{"phi_t", r9(shifted->fees.phi_t)}, {"phi_d", r9(shifted->fees.phi_d)}};
            j["eps_outcome"] = to_json(*shifted_out);
        }
        out << j.dump(2) << "\n";
    } else {
        out << "fees: phi_t=" << fmt9(tf.fees.phi_t) << " phi_d=" << fmt9(tf.fees.phi_d) << "\n";
        out << "participation: " << (part.status == Participation::StrictHold ? "strict-hold" : "fail")
            << " slack=" << fmt9(part.slack) << "\n";
        out << "thresholds: " << describe(set) << "\n";
        out << "adversarial: " << describe(outcome) << "\n";
        out << "revenue: " << fmt9(outcome.revenue) << "\n";
        if (shifted) {
            out << "warning: interval-degenerate; use --eps\n";
            out << "eps-shifted (eps=" << fmt9(eps) << "): phi_t=" << fmt9(shifted->fees.phi_t)
                << " phi_d=" << fmt9(shifted->fees.phi_d) << " " << describe(*shifted_out) << "\n";
        }
    }
    if (degenerate) err << "warning: interval-degenerate; use --eps\n";
    return kOk;
}

inline int cmd_solve(const Scenario& sc, bool as_json, std::ostream& out) {
    const auto& F = sc.prior;
    const RelaxedSolution sol = optimize(F, sc.optimizer);
    const double ub = upper_bound(F.lower(), F.upper(), F.mean());
    const TestFeeStructure bench = zero_disclosure_benchmark(F);
    const auto& p = sol.params;
    const auto& f = sol.structure.fees;
    const auto& fi = sol.implementable.fees;
    if (as_json) {
        json j;
        j["params"] = {{"tau0", r9(p.tau0)}, {"tau1", r9(p.tau1)}, {"tau2", r9(p.tau2)}, {"tau3", r9(p.tau3)}, {"g", r9(p.g)}};
        j["fees"] = {{"phi_t", r9(f.phi_t)}, {"phi_d", r9(f.phi_d)}};
        j["tau"] = r9(sol.tau);
        j["relaxed_revenue"] = r9(sol.relaxed_revenue);
        j["implementable_fees"] = {{"phi_t", r9(fi.phi_t)}, {"phi_d", r9(fi.phi_d)}};
        j["eps"] = r9(sol.eps);
        j["guaranteed_revenue"] = r9(sol.guaranteed_revenue);
        j["upper_bound"] = r9(ub);
        j["benchmark_phi_t"] = r9(bench.fees.phi_t);
        j["test"] = distribution_to_json(sol.structure.G);
        out << j.dump(2) << "\n";
        return kOk;
    }
    out << "ses: tau0=" << fmt9(p.tau0) << " tau1=" << fmt9(p.tau1) << " tau2=" << fmt9(p.tau2)
        << " tau3=" << fmt9(p.tau3) << " g=" << fmt9(p.g) << "\n";
    out << "fees: phi_t=" << fmt9(f.phi_t) << " phi_d=" << fmt9(f.phi_d) << "\n";
    out << "relaxed: tau=" << fmt9(sol.tau) << " revenue=" << fmt9(sol.relaxed_revenue) << "\n";
    out << "implementable (eps=" << fmt9(sol.eps) << "): phi_t=" << fmt9(fi.phi_t) << " phi_d=" << fmt9(fi.phi_d)
        << " revenue=" << fmt9(sol.guaranteed_revenue) << "\n";
    out << "upper_bound: " << fmt9(ub) << "\n";
    out << "zero-disclosure benchmark: phi_t=" << fmt9(bench.fees.phi_t) << "\n";
    return kOk;
}

inline int cmd_demand(const Scenario& sc, const std::string& grid_spec, const std::string& out_path, std::ostream& out,
                      std::ostream& err) {
    const std::vector<double> grid = parse_grid(grid_spec);
    const MixedDistribution& G = sc.test ? *sc.test : sc.prior;
    if (sc.test) {
        const MpcReport mpc = is_mpc(*sc.test, sc.prior, 1e-9);
        if (!mpc.holds) {
            err << "error: test is not a mean-preserving contraction of the prior\n";
            return kInfeasible;
        }
    }
    const auto pts = demand_correspondence(G, grid);
    for (const auto& dp : pts)
        if (dp.interval) err << "note: continuum of thresholds at phi_d=" << fmt9(dp.phi_d) << " (interval sampled)\n";
    const TariffResult tariff = best_two_part_tariff(G, grid);
    if (out_path.empty()) {
        write_demand_csv(out, pts);
        err << "tariff: phi_t=" << fmt9(tariff.fees.phi_t) << " phi_d=" << fmt9(tariff.fees.phi_d)
            << " revenue=" << fmt9(tariff.revenue) << " (supremum; needs an eps shift)\n";
        return kOk;
    }
    std::ofstream f(out_path);
    if (!f) {
        err << "error: cannot write '" << out_path << "'\n";
        return kUsage;
    }
    write_demand_csv(f, pts);
    out << "wrote " << pts.size() << " rows to " << out_path << "\n";
    out << "tariff: phi_t=" << fmt9(tariff.fees.phi_t) << " phi_d=" << fmt9(tariff.fees.phi_d)
        << " revenue=" << fmt9(tariff.revenue) << " (supremum; needs an eps shift)\n";
    return kOk;
}

struct VerifyReport {
    int cases = 0;
    int agree = 0;
    double max_gap = 0.0;
    int ibp_ok = 0;
    int whe_ok = 0;
    int boundspeed_ok = 0;
};

/// Engine against oracle on random finite instances, plus identity checks
/// on random mixed distributions.
inline VerifyReport run_verify(unsigned long long seed, int cases, double tol) {
    VerifyReport rep;
    rep.cases = cases;
    Rng rng(seed);
    for (int c = 0; c < cases; ++c) {
        const FinitePmf pmf = random_pmf(rng, 12);
        const MixedDistribution G = MixedDistribution::from_pmf(pmf, 0.0, 1.0);
        bool ok = true;
        for (int k = 0; k < 5; ++k) {
            const Fees fees = random_fees(rng, G);
            const double engine = adversarial_outcome({G, fees}).revenue;
            const double oracle = adversarial_revenue_bruteforce(pmf, fees);
            const double gap = std::abs(engine - oracle);
            rep.max_gap = std::max(rep.max_gap, gap);
            if (!(gap <= tol)) ok = false;
        }
        rep.agree += ok ? 1 : 0;
    }
    for (int c = 0; c < cases; ++c) {
        const MixedDistribution D = random_mixed(rng);
        // conditional mean times mass plus area equals tau times mass
        const double tau = uniform(rng, D.support_min(), D.upper());
        const double g = D.cdf(tau);
        bool ibp = true;
        if (g > 0.0) {
            const double lhs = conditional_mean_below(D, tau) * g + D.integral(tau);
            ibp = std::abs(lhs - tau * g) <= 1e-10 && std::abs(D.partial_moment(tau) + D.integral(tau) - tau * g) <= 1e-10;
        }
        rep.ibp_ok += ibp ? 1 : 0;

        const double phi_d = uniform(rng, 1e-3, 0.8);
        const auto h = highest_threshold(D, phi_d);
        const double top = std::max(D.upper(), D.mean() + phi_d);
        bool whe = true;
        for (int i = 1; i <= 200 && top > h.tau; ++i)
            whe = whe && defect(D, phi_d, h.tau + (top - h.tau) * i / 200.0) >= -1e-10;
        rep.whe_ok += whe ? 1 : 0;

        bool speed = true;
        for (int i = 0; i < 20; ++i) {
            double a = uniform(rng, h.tau, top);
            double b = uniform(rng, h.tau, top);
            if (a > b) std::swap(a, b);
            const double ia = D.integral(a);
            const double ib = D.integral(b);
            speed = speed && ib <= std::exp((b - a) / phi_d) * ia * (1.0 + 1e-9) + 1e-15;
        }
        rep.boundspeed_ok += speed ? 1 : 0;
    }
    return rep;
}

inline int cmd_verify(unsigned long long seed, int cases, double tol, std::ostream& out) {
    if (cases < 1) throw InvalidParams("--cases must be positive");
    const VerifyReport r = run_verify(seed, cases, tol);
    out << "seed: " << seed << "\n";
    out << "engine vs oracle: " << r.agree << "/" << r.cases << " agree (5 fees each, max gap " << fmt9(r.max_gap)
        << ", tol " << fmt9(tol) << ")\n";
    out << "integration by parts: " << r.ibp_ok << "/" << r.cases << "\n";
    out << "weak highest threshold: " << r.whe_ok << "/" << r.cases << "\n";
    out << "boundspeed: " << r.boundspeed_ok << "/" << r.cases << "\n";
    const bool pass = r.agree == r.cases && r.ibp_ok == r.cases && r.whe_ok == r.cases && r.boundspeed_ok == r.cases;
    out << (pass ? "verify: ok" : "verify: FAILED") << "\n";
    return pass ? kOk : kVerifyFailed;
}

inline MixedDistribution binary_prior() { return MixedDistribution::from_atoms(0.0, 1.0, {{0.0, 0.5}, {1.0, 0.5}}); }

inline MixedDistribution three_score(double p) {
    return MixedDistribution::from_atoms(0.0, 1.0, {{0.0, (1.0 - p) / 2.0}, {0.75, 2.0 * p}, {1.0, (1.0 - 3.0 * p) / 2.0}});
}

inline std::vector<double> cent_grid(double lo, double hi) {
    std::vector<double> g;
    for (int i = static_cast<int>(std::lround(lo * 100)); i <= static_cast<int>(std::lround(hi * 100)); ++i)
        g.push_back(i / 100.0);
    return g;
}

inline void line(std::ostream& out, const std::string& label, double value, double reference) {
    out << label << ": " << fmt9(value) << " (reference " << fmt9(reference) << ")\n";
}

inline void line(std::ostream& out, const std::string& label, double value) {
    out << label << ": " << fmt9(value) << "\n";
}

inline int cmd_repro(const std::string& which, std::ostream& out, std::ostream& err) {
    const double e = std::exp(1.0);
    if (which == "fig2a") {
        const auto G = binary_prior();
        out << "fully revealing test on the binary prior\n";
        for (double phi_d : {0.1, 0.25, 0.4, 0.49, 0.5, 0.51, 0.6}) {
            const auto dp = demand_at(G, phi_d);
            out << "phi_d=" << fmt9(phi_d) << " robust_prob=" << fmt9(dp.robust_prob)
                << " adversarial_revenue(phi_t=0)=" << fmt9(adversarial_outcome({G, Fees{0.0, phi_d}}).revenue)
                << " n_equilibria=" << dp.disclosure_probs.size() << "\n";
        }
        const auto t = best_two_part_tariff(G, cent_grid(0.0, 1.0));
        line(out, "best tariff revenue (grid 0.01)", t.revenue, 0.25);
        return kOk;
    }
    if (which == "fig2b" || which == "table1") {
        const double p = 1.0 / 9.0;
        const auto G = three_score(p);
        out << "three-score test, p=1/9: masses " << fmt9((1 - p) / 2) << " " << fmt9(2 * p) << " "
            << fmt9((1 - 3 * p) / 2) << " at 0, 0.75, 1\n";
        if (which == "fig2b") {
            for (double phi_d : {0.1, 0.25, 0.45, 0.49, 0.5, 0.6}) {
                const auto dp = demand_at(G, phi_d);
                out << "phi_d=" << fmt9(phi_d) << " robust_prob=" << fmt9(dp.robust_prob)
                    << " robust_revenue=" << fmt9(dp.robust_revenue) << "\n";
            }
        }
        const auto out45 = adversarial_outcome({G, Fees{0.0, 0.45}});
        line(out, "disclosure prob at phi=(0,0.45)", out45.disclosure_prob, 5.0 / 9.0);
        line(out, "revenue at phi=(0,0.45)", out45.revenue, 0.25);
        const auto t = best_two_part_tariff(G, cent_grid(0.0, 1.0));
        line(out, "best tariff revenue (grid 0.01)", t.revenue, 5.0 / 18.0);
        if (which == "table1") {
            const auto bad = three_score(0.2);
            double bad_prob = -1.0;
            for (const auto& eq : enumerate_equilibria(bad.to_pmf(), Fees{0.0, 0.49}))
                if (eq.kind == EqKind::Threshold && eq.conceal_count == 2) bad_prob = eq.disclosure_prob;
            line(out, "p=0.2, phi_d=0.49: disclosure prob with score 3/4 concealed", bad_prob, (1.0 - 0.6) / 2.0);
        }
        return kOk;
    }
    if (which == "fig2c" || which == "fig4") {
        const auto sol = binary_optimal(0.0, 1.0, 0.5);
        const auto& G = sol.structure.G;
        if (which == "fig2c") {
            const auto dp = demand_at(G, 0.5);
            out << "phi_d=0.5: " << dp.disclosure_probs.size() << " sampled disclosure probs in ["
                << fmt9(dp.disclosure_probs.front()) << ", " << fmt9(dp.disclosure_probs.back()) << "]\n";
            line(out, "robust prob at phi_d=0.49", demand_at(G, 0.49).robust_prob, 1.0 - 1.0 / e);
            const auto t = best_two_part_tariff(G, cent_grid(0.0, 1.0));
            line(out, "best tariff revenue (grid 0.01)", t.revenue, 0.5 * (1.0 - 1.0 / e));
            line(out, "relaxed revenue", sol.relaxed_revenue, 0.5 * (1.0 - 1.0 / e));
            return kOk;
        }
        line(out, "atom at 0", G.atom_at(0.0), 1.0 / e);
        line(out, "G(0.3)", G.cdf(0.3), 1.0 / e);
        line(out, "G(0.75)", G.cdf(0.75), std::exp(-0.5));
        line(out, "phi_d", sol.structure.fees.phi_d, 0.5);
        line(out, "phi_t", sol.structure.fees.phi_t, 0.0);
        line(out, "relaxed revenue", sol.relaxed_revenue, 0.5 * (1.0 - 1.0 / e));
        line(out, "upper bound", upper_bound(0.0, 1.0, 0.5), 0.5 * (1.0 - 1.0 / e));
        line(out, "exact structure adversarial revenue", adversarial_outcome(sol.structure).revenue, 0.0);
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            const auto impl = epsilon_implement(sol, eps);
            line(out, "eps=" + fmt9(eps) + " implementable revenue", adversarial_outcome(impl).revenue);
        }
        return kOk;
    }
    if (which == "prop1") {
        const double lo = 0.0, hi = 1.0, mu = 0.5;
        line(out, "eps*", witness_eps_star(lo, hi, mu), 0.0625);
        for (double eps : {0.01, 0.04}) line(out, "delta(" + fmt9(eps) + ")", witness_delta(lo, hi, mu, eps));
        const TestFeeStructure tf{binary_prior(), Fees{0.5, 0.0}};
        const Witness w = low_revenue_witness(tf, 0.04);
        line(out, "max equilibrium revenue at phi=(0.5,0)", max_equilibrium_revenue(tf), 0.5);
        out << "witness: " << to_string(w.equilibrium.kind) << " revenue=" << fmt9(w.equilibrium.revenue)
            << " bound=" << fmt9(w.bound) << "\n";
        return kOk;
    }
    err << "error: unknown example '" << which << "' (fig2a, fig2b, fig2c, fig4, table1, prop1)\n";
    return kUsage;
}

/// Entry point; args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Test-fee structure solver"};
    app.require_subcommand(1);
    std::string scenario_path, grid, out_path, example;
    bool as_json = false;
    unsigned long long seed = 1;
    int cases = 500;
    double eps = 1e-4;
    double tol = 1e-9;

    auto* eval = app.add_subcommand("eval", "Adversarial outcome of the scenario's test and fees");
    eval->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    eval->add_option("--eps", eps, "Disclosure-fee shift for interval-degenerate structures");
    eval->add_flag("--json", as_json, "Machine-readable output");

    auto* solve = app.add_subcommand("solve", "Search the step-exponential-step family for the prior");
    solve->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    auto* solve_seed = solve->add_option("--seed", seed, "Optimizer seed");
    auto* solve_eps = solve->add_option("--eps", eps, "Fee shift relative to the value range");
    solve->add_flag("--json", as_json, "Machine-readable output");

    auto* demand = app.add_subcommand("demand", "Demand correspondence over a disclosure-fee grid (CSV)");
    demand->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    demand->add_option("--grid", grid, "a:b:step")->required();
    demand->add_option("--out", out_path, "CSV output path (default stdout)");

    auto* verify = app.add_subcommand("verify", "Engine against oracle on random instances");
    verify->add_option("--seed", seed, "Seed");
    verify->add_option("--cases", cases, "Number of random instances");
    verify->add_option("--tol", tol, "Agreement tolerance");

    auto* repro = app.add_subcommand("repro", "Headline numbers of the worked examples");
    repro->add_option("example", example, "fig2a | fig2b | fig2c | fig4 | table1 | prop1")->required();

    std::vector<std::string> argv_store{"testfee"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (eval->parsed()) return cmd_eval(load_scenario(scenario_path), eps, as_json, out, err);
        if (solve->parsed()) {
            Scenario sc = load_scenario(scenario_path);
            if (solve_seed->count()) sc.optimizer.seed = seed;
            if (solve_eps->count()) sc.optimizer.eps = eps;
            return cmd_solve(sc, as_json, out);
        }
        if (demand->parsed()) return cmd_demand(load_scenario(scenario_path), grid, out_path, out, err);
        if (verify->parsed()) return cmd_verify(seed, cases, tol, out);
        if (repro->parsed()) return cmd_repro(example, out, err);
    } catch (const Infeasible& e) {
        err << "error: " << e.what() << "\n";
        return kInfeasible;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

} // namespace testfee::cli
