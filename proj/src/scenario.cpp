#include "weakline/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "weakline/errors.hpp"

namespace weakline {

namespace {

using nlohmann::json;

void require_object_keys(const json& j, const std::set<std::string>& keys, const std::string& ctx) {
    if (!j.is_object()) {
        throw ValidationError(ctx + ": expected a JSON object");
    }
    for (const auto& item : j.items()) {
        if (keys.count(item.key()) == 0) {
            throw ValidationError(ctx + ": unknown key \"" + item.key() + "\"");
        }
    }
    for (const auto& k : keys) {
        if (!j.contains(k)) {
            throw ValidationError(ctx + ": missing key \"" + k + "\"");
        }
    }
}

double number_at(const json& j, const std::string& key, const std::string& ctx) {
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw ValidationError(ctx + ": \"" + key + "\" must be a number");
    }
    return v.get<double>();
}

CoherentLabel coherent_label(const json& j, const std::string& ctx) {
    require_object_keys(j, {"q", "p"}, ctx);
    return CoherentLabel{number_at(j, "q", ctx), number_at(j, "p", ctx)};
}

SpinLabel spin_label(const json& j, const std::string& ctx) {
    require_object_keys(j, {"theta", "phi"}, ctx);
    return SpinLabel{number_at(j, "theta", ctx), number_at(j, "phi", ctx)};
}

PolynomialSymbol hamiltonian_from_json(const json& j, BoundaryKind kind) {
    if (kind == BoundaryKind::spin) {
        if (!j.is_string() || j.get<std::string>() != "zero") {
            throw ValidationError("hamiltonian: spin scenarios require the string \"zero\"");
        }
        return PolynomialSymbol::zero();
    }
    if (!j.is_array()) {
        throw ValidationError("hamiltonian: expected an array of [m, n, re, im] rows");
    }
    PolynomialSymbol h;
    std::set<PolynomialSymbol::Key> seen;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != 4) {
            throw ValidationError("hamiltonian: each term must be a [m, n, re, im] array");
        }
        if (!row[0].is_number_integer() || !row[1].is_number_integer()) {
            throw ValidationError("hamiltonian: powers m, n must be integers");
        }
        const int m = row[0].get<int>();
        const int n = row[1].get<int>();
        if (m < 0 || n < 0) {
            throw ValidationError("hamiltonian: powers m, n must be non-negative");
        }
        if (!row[2].is_number() || !row[3].is_number()) {
            throw ValidationError("hamiltonian: coefficients re, im must be numbers");
        }
        const double re = row[2].get<double>();
        const double im = row[3].get<double>();
        if (im != 0.0) {
            throw ValidationError("hamiltonian: coefficients must be real for Hermitian physics");
        }
        if (!seen.insert({m, n}).second) {
            throw ValidationError("hamiltonian: duplicate (m, n) term");
        }
        h.add_term(m, n, re);
    }
    return h;
}

}  // namespace

const char* boundary_kind_name(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::coherent: return "coherent";
        case BoundaryKind::spin: return "spin";
        case BoundaryKind::position: return "position";
    }
    return "unknown";
}

BoundaryKind Scenario::kind() const {
    if (std::holds_alternative<CoherentBoundary>(boundary)) return BoundaryKind::coherent;
    if (std::holds_alternative<SpinBoundary>(boundary)) return BoundaryKind::spin;
    return BoundaryKind::position;
}

const CoherentBoundary& Scenario::coherent() const {
    if (!std::holds_alternative<CoherentBoundary>(boundary)) {
        throw ValidationError("scenario boundary is not coherent");
    }
    return std::get<CoherentBoundary>(boundary);
}

const SpinBoundary& Scenario::spin() const {
    if (!std::holds_alternative<SpinBoundary>(boundary)) {
        throw ValidationError("scenario boundary is not spin");
    }
    return std::get<SpinBoundary>(boundary);
}

const PositionBoundary& Scenario::position() const {
    if (!std::holds_alternative<PositionBoundary>(boundary)) {
        throw ValidationError("scenario boundary is not position");
    }
    return std::get<PositionBoundary>(boundary);
}

Scenario scenario_from_json(const nlohmann::json& j) {
    require_object_keys(j, {"boundary", "hamiltonian", "hbar", "t_start", "t_end"}, "scenario");

    const auto& bj = j.at("boundary");
    require_object_keys(bj, {"kind", "pre", "post"}, "boundary");
    if (!bj.at("kind").is_string()) {
        throw ValidationError("boundary: \"kind\" must be a string");
    }
    const std::string kind = bj.at("kind").get<std::string>();

    Scenario s;
    BoundaryKind bk;
    if (kind == "coherent") {
        bk = BoundaryKind::coherent;
        s.boundary = CoherentBoundary{coherent_label(bj.at("pre"), "boundary.pre"),
                                      coherent_label(bj.at("post"), "boundary.post")};
    } else if (kind == "spin") {
        bk = BoundaryKind::spin;
        s.boundary = SpinBoundary{spin_label(bj.at("pre"), "boundary.pre"),
                                  spin_label(bj.at("post"), "boundary.post")};
    } else if (kind == "position") {
        bk = BoundaryKind::position;
        if (!bj.at("pre").is_number() || !bj.at("post").is_number()) {
            throw ValidationError("boundary: position labels must be numbers");
        }
        s.boundary = PositionBoundary{bj.at("pre").get<double>(), bj.at("post").get<double>()};
    } else {
        throw ValidationError("boundary: unknown kind \"" + kind + "\"");
    }

    s.hamiltonian = hamiltonian_from_json(j.at("hamiltonian"), bk);
    s.hbar = number_at(j, "hbar", "scenario");
    s.t_start = number_at(j, "t_start", "scenario");
    s.t_end = number_at(j, "t_end", "scenario");

    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open scenario file: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("scenario JSON parse error: " + std::string(e.what()));
    }
    return scenario_from_json(j);
}

nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    nlohmann::json bj;
    switch (s.kind()) {
        case BoundaryKind::coherent: {
            const auto& b = s.coherent();
            bj = {{"kind", "coherent"},
                  {"pre", {{"q", b.pre.q}, {"p", b.pre.p}}},
                  {"post", {{"q", b.post.q}, {"p", b.post.p}}}};
            break;
        }
        case BoundaryKind::spin: {
            const auto& b = s.spin();
            bj = {{"kind", "spin"},
                  {"pre", {{"theta", b.pre.theta}, {"phi", b.pre.phi}}},
                  {"post", {{"theta", b.post.theta}, {"phi", b.post.phi}}}};
            break;
        }
        case BoundaryKind::position: {
            const auto& b = s.position();
            bj = {{"kind", "position"}, {"pre", b.q_pre}, {"post", b.q_post}};
            break;
        }
    }
    j["boundary"] = bj;
    if (s.kind() == BoundaryKind::spin) {
        j["hamiltonian"] = "zero";
    } else {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& [key, c] : s.hamiltonian.terms()) {
            terms.push_back({key.first, key.second, c.real(), c.imag()});
        }
        j["hamiltonian"] = terms;
    }
    j["hbar"] = s.hbar;
    j["t_start"] = s.t_start;
    j["t_end"] = s.t_end;
    return j;
}

void validate_scenario(const Scenario& s) {
    if (!(s.hbar > 0.0) || !std::isfinite(s.hbar)) {
        throw ValidationError("scenario: hbar must be positive and finite");
    }
    if (!std::isfinite(s.t_start) || !std::isfinite(s.t_end) || !(s.t_end > s.t_start)) {
        throw ValidationError("scenario: t_end must exceed t_start");
    }
    if (!s.hamiltonian.coefficients_real()) {
        throw ValidationError("scenario: Hamiltonian coefficients must be real");
    }
    if (s.kind() == BoundaryKind::spin) {
        if (!s.hamiltonian.is_zero()) {
            throw ValidationError("scenario: spin scenarios support only the zero Hamiltonian");
        }
        for (const SpinLabel& l : {s.spin().pre, s.spin().post}) {
            if (!std::isfinite(l.theta) || l.theta < 0.0 || l.theta >= M_PI) {
                throw ValidationError(
                    "scenario: spin theta must lie in [0, pi); the south pole needs a rotated convention");
            }
            if (!std::isfinite(l.phi) || l.phi < 0.0 || l.phi >= 2.0 * M_PI) {
                throw ValidationError("scenario: spin phi must lie in [0, 2*pi)");
            }
        }
    }
    if (s.kind() == BoundaryKind::coherent) {
        for (const CoherentLabel& l : {s.coherent().pre, s.coherent().post}) {
            if (!std::isfinite(l.q) || !std::isfinite(l.p)) {
                throw ValidationError("scenario: coherent labels must be finite");
            }
        }
    }
    if (s.kind() == BoundaryKind::position) {
        const auto& b = s.position();
        if (!std::isfinite(b.q_pre) || !std::isfinite(b.q_post)) {
            throw ValidationError("scenario: position labels must be finite");
        }
    }
}

}  // namespace weakline
