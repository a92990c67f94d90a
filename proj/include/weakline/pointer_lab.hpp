#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "weakline/exact_engine.hpp"
#include "weakline/weak_value_result.hpp"

namespace weakline::pointer {

struct PointerConfig {
    double g = 0.0;       // pointer shift per eigenvalue unit
    double sigma = 1.0;   // pointer position spread (> 0)
    double hbar = 1.0;
};

// One shifted-Gaussian branch of the postselected pointer wavefunction.
struct PointerComponent {
    Complex weight{0.0, 0.0};  // <post| Pi_j |pre>
    double center = 0.0;       // g * a_j
};

// phi(x) = sum_j weight_j G(x - center_j), G a normalized Gaussian of spread
// sigma. norm is <phi|phi> from the closed-form Gaussian overlap algebra.
struct PointerState {
    std::vector<PointerComponent> components;
    double sigma = 1.0;
    double hbar = 1.0;
    double norm = 1.0;
};

// Impulsive coupling exp(-i g A p_x / hbar) on |pre> x |G>, then projection
// onto |post>. Degenerate eigenvalues of A are merged into one projector.
PointerState couple_and_postselect(const Eigen::VectorXcd& pre, const Eigen::VectorXcd& post,
                                   const exact::OperatorMatrix& a, const PointerConfig& cfg);

struct PointerMoments {
    double mean_x = 0.0;
    double mean_p = 0.0;
    double var_x = 0.0;
};

// Exact first/second position and first momentum moments from closed-form
// equal-width Gaussian overlap integrals; no grids.
PointerMoments pointer_moments(const PointerState& ps);

// Linear-response constant kappa with mean_p ~ g * kappa * Im W, obtained by
// first-order expansion of the exact Gaussian moments: kappa = hbar/(2 sigma^2).
double momentum_response_constant(double sigma, double hbar);

// Re W from the g -> 0 limit of mean_x / g and Im W from mean_p / (g kappa),
// Richardson-extrapolated over the coupling ladder (>= 4 values).
WeakValueResult recover_weak_value(const Eigen::VectorXcd& pre, const Eigen::VectorXcd& post,
                                   const exact::OperatorMatrix& a, double sigma, double hbar,
                                   std::span<const double> g_ladder, double time = 0.0);

// n independent draws from |phi(x)|^2 / norm by rejection against the
// Gaussian-mixture envelope; deterministic for a fixed seed.
std::vector<double> sample_readouts(const PointerState& ps, std::size_t n, std::uint64_t seed);

// |phi(x)|^2 / norm and its closed-form CDF.
double readout_density(const PointerState& ps, double x);
double readout_cdf(const PointerState& ps, double x);

}  // namespace weakline::pointer
