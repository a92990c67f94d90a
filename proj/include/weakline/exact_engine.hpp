#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "weakline/scenario.hpp"
#include "weakline/weak_value_result.hpp"

namespace weakline::exact {

// Finite-dimensional model of the Hilbert space: a qubit for spin
// scenarios, a truncated Fock ladder for coherent ones.
struct HilbertSpec {
    enum class Kind { qubit, fock };
    Kind kind = Kind::fock;
    int dim = 2;

    static HilbertSpec qubit() { return HilbertSpec{Kind::qubit, 2}; }
    static HilbertSpec fock(int dim);
};

struct OperatorMatrix {
    int dim = 0;
    Eigen::MatrixXcd entries;
};

OperatorMatrix identity_operator(int dim);
OperatorMatrix pauli_x();
OperatorMatrix pauli_y();
OperatorMatrix pauli_z();

// Piecewise-constant source zeta(t): ordered, non-overlapping bins inside
// the scenario window. An empty bin list means zeta == 0.
struct SourceBin {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double strength = 0.0;
};

struct SourceProfile {
    std::vector<SourceBin> bins;
};

// Poisson weight sum_{n >= dim} e^{-lambda} lambda^n / n! of the dropped
// coherent tail with lambda = |alpha|^2.
double coherent_tail_weight(double alpha_sq, int dim);

// Truncation rule: smallest level count whose dropped tail is below 1e-14
// for every label in the scenario, plus 8 guard levels for operator action.
int recommended_fock_dim(const Scenario& s, int min_dim = 2);

// Weyl-symmetrized quantization of each monomial q^m p^n on the truncated
// ladder, with qhat = sqrt(hbar/2)(a + a+), phat = -i sqrt(hbar/2)(a - a+).
OperatorMatrix build_operator(const PolynomialSymbol& s, const HilbertSpec& space, double hbar);

// Normalized truncated expansion of the displaced vacuum, alpha = (q + ip)/sqrt(2 hbar).
Eigen::VectorXcd state_vector(const CoherentLabel& label, const HilbertSpec& space, double hbar);
// (cos(theta/2), e^{i phi} sin(theta/2)) in the {up, down} basis.
Eigen::VectorXcd state_vector(const SpinLabel& label, const HilbertSpec& space);
// Dispatch on the boundary variant; position labels are rejected here
// (position eigenstates are not normalizable).
Eigen::VectorXcd state_vector(const Boundary& boundary, bool post_side, const HilbertSpec& space,
                              double hbar);

// exp(-i H dt / hbar) via Hermitian eigendecomposition.
OperatorMatrix propagate(const OperatorMatrix& h, double dt, double hbar);

// Scenario Hamiltonian as a matrix on the given space (zero matrix for spin).
OperatorMatrix scenario_hamiltonian_operator(const Scenario& s, const HilbertSpec& space);

// <psi''| U(t'', t) A U(t, t') |psi'> / <psi''| U(t'', t') |psi'>.
WeakValueResult weak_value_exact(const Scenario& s, const OperatorMatrix& a, double t,
                                 const HilbertSpec& space);

// W({A - W(A)}^2); internally cross-checked against W(A^2) - W(A)^2.
Complex weak_variance_exact(const Scenario& s, const OperatorMatrix& a, double t,
                            const HilbertSpec& space);

// <psi''| T-ordered product of exp(-i dt (H - zeta_k A)/hbar) |psi'> on a
// uniform n_steps grid; every bin edge must sit on a step boundary.
Complex generating_functional(const Scenario& s, const OperatorMatrix& a,
                              const SourceProfile& zeta, const HilbertSpec& space, int n_steps);

// -i hbar dln Z / dzeta(t), discretized with a source bin of the given width
// starting at t and central differencing in epsilon.
WeakValueResult weak_value_via_gf(const Scenario& s, const OperatorMatrix& a, double t,
                                  const HilbertSpec& space, double epsilon, double bin_width);

// (W(sigma_x), W(sigma_y), W(sigma_z)) on the two-dimensional space.
std::array<Complex, 3> spin_weak_values_exact(const SpinLabel& pre, const SpinLabel& post,
                                              const Eigen::Matrix2cd& h_spin, double t,
                                              double t_start = 0.0, double t_end = 1.0,
                                              double hbar = 1.0);

// (U(t,t') |pre>, U(t,t'') |post>): both boundary states carried to the
// intermediate time t. Their inner product is the postselection denominator.
std::pair<Eigen::VectorXcd, Eigen::VectorXcd> evolved_states(const Scenario& s,
                                                             const HilbertSpec& space, double t);

}  // namespace weakline::exact
