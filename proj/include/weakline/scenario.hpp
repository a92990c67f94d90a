#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include <json.hpp>

#include "weakline/labels.hpp"
#include "weakline/polynomial_symbol.hpp"

namespace weakline {

enum class BoundaryKind { coherent, spin, position };

const char* boundary_kind_name(BoundaryKind k);

struct CoherentBoundary {
    CoherentLabel pre;
    CoherentLabel post;
};

struct SpinBoundary {
    SpinLabel pre;
    SpinLabel post;
};

struct PositionBoundary {
    double q_pre = 0.0;
    double q_post = 0.0;
};

using Boundary = std::variant<CoherentBoundary, SpinBoundary, PositionBoundary>;

// One weak-value ensemble: pre/postselection labels,
// Hamiltonian, hbar and the time window [t', t''].
struct Scenario {
    Boundary boundary = CoherentBoundary{};
    PolynomialSymbol hamiltonian;  // spin scenarios carry the zero symbol
    double hbar = 1.0;
    double t_start = 0.0;
    double t_end = 1.0;

    BoundaryKind kind() const;
    double duration() const { return t_end - t_start; }

    const CoherentBoundary& coherent() const;
    const SpinBoundary& spin() const;
    const PositionBoundary& position() const;
};

// Strict schema: the exact key sets below, nothing else (unknown keys fail
// closed). Top level: {"boundary", "hamiltonian", "hbar", "t_start",
// "t_end"}. boundary: {"kind", "pre", "post"} with kind-specific labels;
// hamiltonian: array of [m, n, re, im] rows (im must be 0 for Hermitian
// physics), or the string "zero" for spin scenarios.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& s);

// Validates field invariants (window order, hbar > 0, spin label ranges,
// real Hamiltonian coefficients). Throws ValidationError.
void validate_scenario(const Scenario& s);

}  // namespace weakline
