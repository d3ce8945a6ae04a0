#pragma once

// JSON form of distributions and scenarios:
//   {"lower": 0, "upper": 1,
//    "atoms": [{"x": 0, "mass": 0.5}, ...],
//    "segments": [{"a": 0, "b": 0.5, "form": "flat", "params": {"value": 0.5}}, ...]}
// Segment params are absolute CDF pieces: flat {value}, affine {value, slope}
// (value at a), expcdf {coeff, scale} (coeff = G(a)). Without segments the
// atoms alone define the distribution.

#include "testfee/designer.hpp"
#include "testfee/equilibrium.hpp"
#include "testfee/errors.hpp"
#include "testfee/measure.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace testfee {

using json = nlohmann::json;

namespace detail {

inline double num(const json& j, const char* key, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_number())
        throw InvalidDistribution(ctx + ": missing numeric field '" + key + "'");
    return j.at(key).get<double>();
}

} // namespace detail

inline MixedDistribution distribution_from_json(const json& j) {
    if (!j.is_object()) throw InvalidDistribution("distribution literal must be an object");
    const double lo = detail::num(j, "lower", "distribution");
    const double hi = detail::num(j, "upper", "distribution");
    std::vector<Atom> atoms;
    if (j.contains("atoms")) {
        if (!j.at("atoms").is_array()) throw InvalidDistribution("atoms must be an array");
        for (const auto& a : j.at("atoms")) atoms.push_back({detail::num(a, "x", "atom"), detail::num(a, "mass", "atom")});
    }
    const bool has_segments = j.contains("segments") && j.at("segments").is_array() && !j.at("segments").empty();
    if (!has_segments) {
        if (atoms.empty()) throw InvalidDistribution("distribution needs atoms or segments");
        return MixedDistribution::from_atoms(lo, hi, atoms);
    }
    std::vector<Piece> pieces;
    for (const auto& s : j.at("segments")) {
        const double a = detail::num(s, "a", "segment");
        const double b = detail::num(s, "b", "segment");
        if (!s.contains("form") || !s.at("form").is_string()) throw InvalidDistribution("segment: missing form");
        const std::string form = s.at("form").get<std::string>();
        const json params = s.value("params", json::object());
        if (form == "flat") {
            pieces.push_back({a, b, Flat{detail::num(params, "value", "flat")}});
        } else if (form == "affine") {
            pieces.push_back({a, b, Affine{detail::num(params, "value", "affine"), detail::num(params, "slope", "affine")}});
        } else if (form == "expcdf") {
            pieces.push_back({a, b, ExpCdf{detail::num(params, "coeff", "expcdf"), detail::num(params, "scale", "expcdf")}});
        } else {
            throw InvalidDistribution("segment: unknown form '" + form + "'");
        }
    }
    MixedDistribution d(lo, hi, std::move(pieces));
    for (const auto& at : atoms) {
        if (std::abs(d.atom_at(at.x) - at.mass) > 1e-9)
            throw InvalidDistribution("listed atom at " + std::to_string(at.x) + " does not match the CDF jump");
    }
    for (const auto& at : d.atoms()) {
        if (at.mass <= 1e-9) continue;
        bool listed = false;
        for (const auto& l : atoms) listed = listed || std::abs(l.x - at.x) <= 1e-12;
        if (!listed) throw InvalidDistribution("CDF jump at " + std::to_string(at.x) + " is not listed in atoms");
    }
    return d;
}

inline json distribution_to_json(const MixedDistribution& d) {
    json j;
    j["lower"] = d.lower();
    j["upper"] = d.upper();
    j["atoms"] = json::array();
    for (const auto& at : d.atoms()) j["atoms"].push_back({{"x", at.x}, {"mass", at.mass}});
    j["segments"] = json::array();
    for (const auto& p : d.pieces()) {
        json s{{"a", p.a}, {"b", p.b}};
        if (const auto* f = std::get_if<Flat>(&p.form)) {
            s["form"] = "flat";
            s["params"] = {{"value", f->value}};
        } else if (const auto* f = std::get_if<Affine>(&p.form)) {
            s["form"] = "affine";
            s["params"] = {{"value", f->value}, {"slope", f->slope}};
        } else if (const auto* f = std::get_if<ExpCdf>(&p.form)) {
            s["form"] = "expcdf";
            s["params"] = {{"coeff", f->coeff}, {"scale", f->scale}};
        }
        j["segments"].push_back(s);
    }
    return j;
}

struct Scenario {
    MixedDistribution prior;
    std::optional<MixedDistribution> test;
    std::optional<Fees> fees;
    OptimizerConfig optimizer;
};

inline Scenario scenario_from_json(const json& j) {
    if (!j.is_object() || !j.contains("prior")) throw InvalidDistribution("scenario: missing prior");
    Scenario sc{distribution_from_json(j.at("prior")), std::nullopt, std::nullopt, OptimizerConfig{}};
    if (j.contains("test") && !j.at("test").is_null()) sc.test = distribution_from_json(j.at("test"));
    if (j.contains("fees") && !j.at("fees").is_null()) {
        const auto& f = j.at("fees");
        sc.fees = Fees{detail::num(f, "phi_t", "fees"), detail::num(f, "phi_d", "fees")};
    }
    if (j.contains("optimizer") && j.at("optimizer").is_object()) {
        const auto& o = j.at("optimizer");
        auto& c = sc.optimizer;
        c.starts = o.value("starts", c.starts);
        c.seed = o.value("seed", c.seed);
        c.max_iter = o.value("max_iter", c.max_iter);
        c.xtol = o.value("xtol", c.xtol);
        c.penalty_weight = o.value("penalty_weight", c.penalty_weight);
        c.eps = o.value("eps", c.eps);
    }
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidDistribution("cannot open scenario file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidDistribution(std::string("scenario parse error: ") + e.what());
    }
    return scenario_from_json(j);
}

} // namespace testfee
