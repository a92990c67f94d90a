#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "weakline/scenario.hpp"
#include "weakline/weak_value_result.hpp"

namespace weakline::semiclassical {

struct IntegratorOptions {
    double local_tol = 1e-12;   // step-doubling error control target
    double escape_norm = 1e8;   // complexified flows may blow up in finite time
    long max_steps = 2000000;
};

struct ShootingOptions {
    double residual_tol = 1e-12;
    int max_newton_iters = 50;
    int multistart_grid = 5;      // grid points per axis around the seed
    double multistart_radius = 2.0;
    int n_samples = 129;          // stored trajectory nodes
    IntegratorOptions integrator;
};

// A converged complex trajectory over [t', t''] together with its variational
// (monodromy) data, accumulated action and shooting diagnostics.
struct TrajectorySolution {
    std::vector<double> times;
    std::vector<ComplexPhasePoint> points;
    Eigen::Matrix2cd monodromy;         // d(q'', p'') / d(q', p')
    Complex action{0.0, 0.0};           // S = int (p qdot - H) dt at zeta == 0
    std::optional<Complex> amplitude;   // E, position boundaries only
    double residual = 0.0;              // boundary-condition violation norm
    int newton_iters = 0;
    bool multi_root_flag = false;
    std::vector<Complex> roots;         // every distinct converged Q(t') root

    // provenance, so evaluation at interior times can re-integrate exactly
    PolynomialSymbol hamiltonian;
    double t_start = 0.0;
    double t_end = 1.0;
    double hbar = 1.0;
    ComplexPhasePoint initial_point;
    BoundaryKind boundary_kind = BoundaryKind::coherent;
};

struct IntegrationResult {
    std::vector<double> times;
    std::vector<ComplexPhasePoint> points;
    Eigen::Matrix2cd monodromy;
    Complex action{0.0, 0.0};
};

// Integrates dq/dt = dH/dp, dp/dt = -dH/dq with complex state, the 2x2
// variational system M' = J Hess(H) M, and the action S' = p dH/dp - H,
// using an adaptive 4th-order one-step method with step doubling.
IntegrationResult integrate_complex_trajectory(const PolynomialSymbol& h, ComplexPhasePoint start,
                                               double t0, double t1, int n_samples = 129,
                                               const IntegratorOptions& opts = {});

// d Q(t'') / d Q(t') at fixed P(t'): the (Q,Q) entry of the monodromy
// conjugated into KMS coordinates.
Complex kms_qq_derivative(const Eigen::Matrix2cd& monodromy);

// Newton shooting for Klauder's boundary conditions P(t') = (p'-iq')/sqrt(2),
// Q(t'') = (q''-ip'')/sqrt(2). The unknown is the single complex number
// Q(t'); the Newton derivative comes from the integrated variational system.
// A multi-start sweep around the seed detects additional roots and raises
// multi_root_flag.
TrajectorySolution shoot_coherent_bvp(const Scenario& s, const ShootingOptions& opts = {});

// Position boundaries q(t') = q', q(t'') = q''; quadratic Hamiltonians only
// (the flow is linear, so the boundary problem is a closed-form solve).
TrajectorySolution solve_position_bvp(const Scenario& s, const ShootingOptions& opts = {});

// A(q(t), p(t)) on the complex trajectory.
WeakValueResult weak_value_semiclassical(const TrajectorySolution& traj, const PolynomialSymbol& a,
                                         double t);

// W(A^2) - W(A)^2 via symbol algebra; identically zero at leading order. The
// value exists to expose the O(hbar) gap against weak_variance_exact.
Complex weak_variance_semiclassical(const TrajectorySolution& traj, const PolynomialSymbol& a,
                                    double t);

// (S, E): accumulated action, and for position boundaries the amplitude
// E = 1/sqrt(2 pi hbar dq''/dp') on the principal branch. Coherent
// boundaries report no amplitude; see caustic_diagnostic for their M_QQ.
std::pair<Complex, std::optional<Complex>> action_and_amplitude(const TrajectorySolution& traj);

struct CausticReport {
    double indicator = 0.0;  // |M_QQ| (coherent) or |M_qp| (position)
    bool flagged = false;    // indicator < 0.1 or multiple roots found
};

CausticReport caustic_diagnostic(const TrajectorySolution& traj);

// Forward and backward stereographic variables of the spin boundary problem;
// constant in time for the vanishing spin Hamiltonian.
struct SpinTrajectory {
    Complex z{0.0, 0.0};  // z(t') = e^{i phi'} tan(theta'/2)
    Complex w{0.0, 0.0};  // w(t'') = e^{-i phi''} tan(theta''/2)
};

SpinTrajectory solve_spin_h0(const SpinLabel& pre, const SpinLabel& post);

// Analytically continued spin-coherent symbols on the H == 0 trajectory:
//   W(sigma_x) = (z+w)/(1+zw), W(sigma_y) = i(w-z)/(1+zw),
//   W(sigma_z) = (1-zw)/(1+zw).
std::array<Complex, 3> spin_weak_values_semiclassical(const SpinLabel& pre, const SpinLabel& post);

// H == 0 closed form: q = (q''+q')/2 - i(p''-p')/2, p = (p''+p')/2 + i(q''-q')/2.
ComplexPhasePoint closed_form_h0(const CoherentLabel& pre, const CoherentLabel& post);

}  // namespace weakline::semiclassical
