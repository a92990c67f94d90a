#include "weakline/semiclassical_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "weakline/errors.hpp"

namespace weakline::semiclassical {

namespace {

constexpr Complex kI{0.0, 1.0};

// Flattened symbol for the integrator's inner loop.
struct CompiledSymbol {
    struct Term {
        int m;
        int n;
        Complex c;
    };
    std::vector<Term> terms;

    static CompiledSymbol compile(const PolynomialSymbol& s) {
        CompiledSymbol out;
        out.terms.reserve(s.terms().size());
        for (const auto& [key, c] : s.terms()) {
            out.terms.push_back({key.first, key.second, c});
        }
        return out;
    }

    Complex eval(Complex q, Complex p) const {
        Complex acc{0.0, 0.0};
        for (const Term& t : terms) {
            Complex v = t.c;
            for (int i = 0; i < t.m; ++i) v *= q;
            for (int i = 0; i < t.n; ++i) v *= p;
            acc += v;
        }
        return acc;
    }
};

// State layout: q, p, m00, m01, m10, m11, S.
using State = std::array<Complex, 7>;

struct FlowSystem {
    CompiledSymbol h, hq, hp, hqq, hqp, hpp;

    explicit FlowSystem(const PolynomialSymbol& ham)
        : h(CompiledSymbol::compile(ham)),
          hq(CompiledSymbol::compile(ham.dq())),
          hp(CompiledSymbol::compile(ham.dp())),
          hqq(CompiledSymbol::compile(ham.dq().dq())),
          hqp(CompiledSymbol::compile(ham.dq().dp())),
          hpp(CompiledSymbol::compile(ham.dp().dp())) {}

    State deriv(const State& y) const {
        const Complex q = y[0];
        const Complex p = y[1];
        const Complex dhq = hq.eval(q, p);
        const Complex dhp = hp.eval(q, p);
        const Complex dqq = hqq.eval(q, p);
        const Complex dqp = hqp.eval(q, p);
        const Complex dpp = hpp.eval(q, p);
        State dy;
        dy[0] = dhp;
        dy[1] = -dhq;
        // M' = [[hqp, hpp], [-hqq, -hqp]] M (variational system J Hess(H) M)
        dy[2] = dqp * y[2] + dpp * y[4];
        dy[3] = dqp * y[3] + dpp * y[5];
        dy[4] = -dqq * y[2] - dqp * y[4];
        dy[5] = -dqq * y[3] - dqp * y[5];
        dy[6] = p * dhp - h.eval(q, p);
        return dy;
    }
};

State rk4_step(const FlowSystem& sys, const State& y, double h) {
    const State k1 = sys.deriv(y);
    State tmp;
    for (int i = 0; i < 7; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    const State k2 = sys.deriv(tmp);
    for (int i = 0; i < 7; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    const State k3 = sys.deriv(tmp);
    for (int i = 0; i < 7; ++i) tmp[i] = y[i] + h * k3[i];
    const State k4 = sys.deriv(tmp);
    State out;
    for (int i = 0; i < 7; ++i) {
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

bool state_finite(const State& y) {
    for (const Complex& v : y) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
}

struct Stepper {
    const FlowSystem& sys;
    const IntegratorOptions& opts;
    double h;
    long steps_taken = 0;

    Stepper(const FlowSystem& s, const IntegratorOptions& o, double span)
        : sys(s), opts(o), h(span / 64.0) {}

    // Advances y from t to t_target with step-doubling control. The
    // preferred step size h persists across segments; a cap imposed by a
    // segment end does not shrink it.
    void advance(State& y, double t, double t_target) {
        const double span = std::abs(t_target - t);
        if (span == 0.0) return;
        const double h_min = 1e-13 * (1.0 + span);
        while (t < t_target) {
            if (++steps_taken > opts.max_steps) {
                throw StepFailure("integrator exceeded max step count");
            }
            const double remaining = t_target - t;
            if (remaining <= 0.0) break;
            const bool capped = remaining <= h;
            const double h_try = capped ? remaining : h;
            const State big = rk4_step(sys, y, h_try);
            State half = rk4_step(sys, y, 0.5 * h_try);
            half = rk4_step(sys, half, 0.5 * h_try);
            if (!state_finite(half) || !state_finite(big)) {
                h = 0.25 * h_try;
                if (h < h_min) {
                    throw StepFailure("integrator step underflow on non-finite state");
                }
                continue;
            }
            double err = 0.0;
            for (int i = 0; i < 7; ++i) {
                err = std::max(err, std::abs(half[i] - big[i]) / (1.0 + std::abs(half[i])));
            }
            if (err <= opts.local_tol) {
                for (int i = 0; i < 7; ++i) {
                    y[i] = half[i] + (half[i] - big[i]) / 15.0;  // 5th-order combination
                }
                t = capped ? t_target : t + h_try;
                if (std::abs(y[0]) > opts.escape_norm || std::abs(y[1]) > opts.escape_norm) {
                    throw StepFailure("trajectory escaped: |q| or |p| above escape norm");
                }
                const double grow =
                    err == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(opts.local_tol / err, 0.2));
                if (!capped) {
                    h = h_try * grow;
                }
            } else {
                h = std::max(0.1 * h_try, 0.9 * h_try * std::pow(opts.local_tol / err, 0.2));
                if (h < h_min) {
                    throw StepFailure("integrator cannot reach local tolerance");
                }
            }
        }
    }
};

State initial_state(const ComplexPhasePoint& start) {
    State y;
    y[0] = start.q;
    y[1] = start.p;
    y[2] = 1.0;  // M = I
    y[3] = 0.0;
    y[4] = 0.0;
    y[5] = 1.0;
    y[6] = 0.0;  // S
    return y;
}

Eigen::Matrix2cd monodromy_of(const State& y) {
    Eigen::Matrix2cd m;
    m << y[2], y[3], y[4], y[5];
    return m;
}

// Endpoint-only integration used by the Newton iteration.
State integrate_endpoint(const FlowSystem& sys, const ComplexPhasePoint& start, double t0,
                         double t1, const IntegratorOptions& opts) {
    State y = initial_state(start);
    if (t1 == t0) return y;
    Stepper stepper(sys, opts, t1 - t0);
    stepper.advance(y, t0, t1);
    return y;
}

IntegrationResult integrate_sampled(const FlowSystem& sys, const ComplexPhasePoint& start,
                                    double t0, double t1, int n_samples,
                                    const IntegratorOptions& opts) {
    IntegrationResult out;
    out.times.resize(static_cast<std::size_t>(n_samples));
    out.points.resize(static_cast<std::size_t>(n_samples));
    State y = initial_state(start);
    out.times[0] = t0;
    out.points[0] = start;
    Stepper stepper(sys, opts, std::max(t1 - t0, 1e-12));
    for (int j = 1; j < n_samples; ++j) {
        const double ta = t0 + (t1 - t0) * (j - 1) / (n_samples - 1);
        const double tb = t0 + (t1 - t0) * j / (n_samples - 1);
        stepper.advance(y, ta, tb);
        out.times[static_cast<std::size_t>(j)] = tb;
        out.points[static_cast<std::size_t>(j)] = ComplexPhasePoint{y[0], y[1]};
    }
    out.monodromy = monodromy_of(y);
    out.action = y[6];
    return out;
}

struct NewtonOutcome {
    bool converged = false;
    Complex root{0.0, 0.0};
    double residual = std::numeric_limits<double>::infinity();
    int iters = 0;
};

// One Newton run for the coherent Klauder problem, unknown Q(t').
NewtonOutcome newton_from(const FlowSystem& sys, Complex q0_start, Complex p_fixed,
                          Complex q_target, double t0, double t1, const ShootingOptions& opts) {
    NewtonOutcome out;
    Complex q0 = q0_start;
    for (int it = 0; it <= opts.max_newton_iters; ++it) {
        State end;
        try {
            const ComplexPhasePoint start = kms_inverse(KMSPoint{q0, p_fixed});
            end = integrate_endpoint(sys, start, t0, t1, opts.integrator);
        } catch (const StepFailure&) {
            return out;  // escaped or stalled; not a root from this start
        }
        const Complex q_end = kms_transform(ComplexPhasePoint{end[0], end[1]}).Q;
        const Complex f = q_end - q_target;
        const double res = std::abs(f);
        if (res < out.residual) {
            out.residual = res;
            out.root = q0;
        }
        if (res < opts.residual_tol) {
            out.converged = true;
            out.root = q0;
            out.residual = res;
            out.iters = it;
            return out;
        }
        if (it == opts.max_newton_iters) break;
        const Complex df = kms_qq_derivative(monodromy_of(end));
        if (std::abs(df) < 1e-300 || !std::isfinite(std::abs(df))) {
            return out;  // flat derivative; Newton step undefined
        }
        q0 -= f / df;
        out.iters = it + 1;
    }
    return out;
}

double semiclassical_overlap_abs(const TrajectorySolution& traj) {
    // Exponential part of |E exp(iS/hbar)|; the amplitude prefactor enters
    // only where it is defined (position boundaries).
    double mag = std::exp(-traj.action.imag() / traj.hbar);
    if (traj.amplitude) {
        mag *= std::abs(*traj.amplitude);
    }
    return mag;
}

ComplexPhasePoint point_at_time(const TrajectorySolution& traj, double t) {
    const double slack = 1e-12 * (1.0 + std::abs(traj.t_end - traj.t_start));
    if (t < traj.t_start - slack || t > traj.t_end + slack) {
        throw ValidationError("evaluation time outside the trajectory window");
    }
    if (traj.residual > 1e-6) {
        throw ValidationError("trajectory is not converged");
    }
    if (t <= traj.t_start) return traj.initial_point;
    const FlowSystem sys(traj.hamiltonian);
    IntegratorOptions opts;
    const State end = integrate_endpoint(sys, traj.initial_point, traj.t_start, t, opts);
    return ComplexPhasePoint{end[0], end[1]};
}

void attach_diagnostics(WeakValueResult& r, const TrajectorySolution& traj) {
    const CausticReport caustic = caustic_diagnostic(traj);
    r.diagnostics["overlap_abs"] = semiclassical_overlap_abs(traj);
    r.diagnostics["residual"] = traj.residual;
    r.diagnostics["caustic_indicator"] = caustic.indicator;
    r.diagnostics["multi_root"] = traj.multi_root_flag ? 1.0 : 0.0;
    r.diagnostics["newton_iters"] = static_cast<double>(traj.newton_iters);
    if (traj.boundary_kind == BoundaryKind::coherent) {
        const Complex mqq = kms_qq_derivative(traj.monodromy);
        r.diagnostics["m_qq_re"] = mqq.real();
        r.diagnostics["m_qq_im"] = mqq.imag();
    }
}

}  // namespace

IntegrationResult integrate_complex_trajectory(const PolynomialSymbol& h, ComplexPhasePoint start,
                                               double t0, double t1, int n_samples,
                                               const IntegratorOptions& opts) {
    if (n_samples < 16) {
        throw ValidationError("integrate_complex_trajectory needs n_samples >= 16");
    }
    if (!(t1 >= t0)) {
        throw ValidationError("integrate_complex_trajectory needs t1 >= t0");
    }
    const FlowSystem sys(h);
    return integrate_sampled(sys, start, t0, t1, n_samples, opts);
}

Complex kms_qq_derivative(const Eigen::Matrix2cd& m) {
    // (T M T^{-1})_{00} with T the KMS matrix.
    return 0.5 * ((m(0, 0) + m(1, 1)) + kI * (m(0, 1) - m(1, 0)));
}

TrajectorySolution shoot_coherent_bvp(const Scenario& s, const ShootingOptions& opts) {
    if (s.kind() != BoundaryKind::coherent) {
        throw ValidationError("shoot_coherent_bvp needs a coherent boundary");
    }
    const auto& b = s.coherent();
    const FlowSystem sys(s.hamiltonian);
    const Complex p_fixed = klauder_p_label(b.pre);
    const Complex q_target = klauder_q_label(b.post);
    const Complex seed = klauder_q_label(CoherentLabel{b.pre.q, b.pre.p});

    struct Root {
        Complex q0;
        double residual;
        int iters;
    };
    std::vector<Root> roots;
    double best_residual = std::numeric_limits<double>::infinity();

    auto consider = [&](Complex start) {
        const NewtonOutcome r =
            newton_from(sys, start, p_fixed, q_target, s.t_start, s.t_end, opts);
        best_residual = std::min(best_residual, r.residual);
        if (!r.converged) return;
        for (const Root& known : roots) {
            if (std::abs(known.q0 - r.root) < 1e-6 * (1.0 + std::abs(known.q0))) {
                return;
            }
        }
        roots.push_back(Root{r.root, r.residual, r.iters});
    };

    consider(seed);
    const int g = std::max(opts.multistart_grid, 1);
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            if (g == 1) continue;
            const double fx = -1.0 + 2.0 * i / (g - 1);
            const double fy = -1.0 + 2.0 * j / (g - 1);
            if (fx == 0.0 && fy == 0.0) continue;  // the seed itself, already tried
            consider(seed + opts.multistart_radius * Complex{fx, fy});
        }
    }

    if (roots.empty()) {
        throw NoConvergence("coherent shooting failed on every start", best_residual);
    }

    // The single-term assumption picks the trajectory continuously connected
    // to the real one: keep the root closest to the seed, flag the rest.
    std::size_t pick = 0;
    for (std::size_t k = 1; k < roots.size(); ++k) {
        if (std::abs(roots[k].q0 - seed) < std::abs(roots[pick].q0 - seed)) {
            pick = k;
        }
    }

    // The flag counts only roots inside the multistart search disk. Far-field
    // complex solutions exist at every window size for anharmonic flows and
    // carry exponentially suppressed weight; they are reported in roots but
    // do not signal a competing trajectory.
    int in_disk = 0;
    for (const Root& r : roots) {
        if (std::abs(r.q0 - seed) <= opts.multistart_radius) {
            ++in_disk;
        }
    }

    TrajectorySolution traj;
    traj.hamiltonian = s.hamiltonian;
    traj.t_start = s.t_start;
    traj.t_end = s.t_end;
    traj.hbar = s.hbar;
    traj.boundary_kind = BoundaryKind::coherent;
    traj.initial_point = kms_inverse(KMSPoint{roots[pick].q0, p_fixed});
    traj.newton_iters = roots[pick].iters;
    traj.multi_root_flag = in_disk > 1;
    for (const Root& r : roots) {
        traj.roots.push_back(r.q0);
    }

    const IntegrationResult fine = integrate_sampled(sys, traj.initial_point, s.t_start, s.t_end,
                                                     std::max(opts.n_samples, 2), opts.integrator);
    traj.times = fine.times;
    traj.points = fine.points;
    traj.monodromy = fine.monodromy;
    traj.action = fine.action;
    traj.residual = std::abs(kms_transform(fine.points.back()).Q - q_target);
    return traj;
}

TrajectorySolution solve_position_bvp(const Scenario& s, const ShootingOptions& opts) {
    if (s.kind() != BoundaryKind::position) {
        throw ValidationError("solve_position_bvp needs a position boundary");
    }
    if (s.hamiltonian.degree() > 2) {
        throw ValidationError(
            "position boundaries are implemented only for quadratic Hamiltonians");
    }
    const auto& b = s.position();
    const FlowSystem sys(s.hamiltonian);

    // Quadratic H: the flow is affine and the monodromy start-independent, so
    // one probe integration determines the unique p(t').
    const State probe = integrate_endpoint(sys, ComplexPhasePoint{b.q_pre, 0.0}, s.t_start,
                                           s.t_end, opts.integrator);
    const Eigen::Matrix2cd m = monodromy_of(probe);
    const Complex m_qp = m(0, 1);
    if (std::abs(m_qp) < 1e-12) {
        throw CausticError("dq''/dp' vanishes; position boundary problem is caustic");
    }
    const Complex p_start = (Complex{b.q_post, 0.0} - probe[0]) / m_qp;

    TrajectorySolution traj;
    traj.hamiltonian = s.hamiltonian;
    traj.t_start = s.t_start;
    traj.t_end = s.t_end;
    traj.hbar = s.hbar;
    traj.boundary_kind = BoundaryKind::position;
    traj.initial_point = ComplexPhasePoint{b.q_pre, p_start};
    traj.newton_iters = 1;

    const IntegrationResult fine = integrate_sampled(sys, traj.initial_point, s.t_start, s.t_end,
                                                     std::max(opts.n_samples, 2), opts.integrator);
    traj.times = fine.times;
    traj.points = fine.points;
    traj.monodromy = fine.monodromy;
    traj.action = fine.action;
    traj.residual = std::abs(fine.points.back().q - b.q_post);
    traj.amplitude = 1.0 / std::sqrt(2.0 * M_PI * s.hbar * fine.monodromy(0, 1));
    return traj;
}

WeakValueResult weak_value_semiclassical(const TrajectorySolution& traj, const PolynomialSymbol& a,
                                         double t) {
    const ComplexPhasePoint pt = point_at_time(traj, t);
    WeakValueResult out;
    out.value = a.eval(pt);
    out.time = t;
    out.method = Method::semiclassical;
    attach_diagnostics(out, traj);
    return out;
}

Complex weak_variance_semiclassical(const TrajectorySolution& traj, const PolynomialSymbol& a,
                                    double t) {
    const ComplexPhasePoint pt = point_at_time(traj, t);
    const Complex w = a.eval(pt);
    return (a * a).eval(pt) - w * w;
}

std::pair<Complex, std::optional<Complex>> action_and_amplitude(const TrajectorySolution& traj) {
    if (traj.boundary_kind == BoundaryKind::position) {
        const Complex m_qp = traj.monodromy(0, 1);
        if (std::abs(m_qp) < 1e-12) {
            throw CausticError("dq''/dp' vanishes; amplitude divergent");
        }
        return {traj.action, 1.0 / std::sqrt(2.0 * M_PI * traj.hbar * m_qp)};
    }
    return {traj.action, std::nullopt};
}

CausticReport caustic_diagnostic(const TrajectorySolution& traj) {
    CausticReport out;
    if (traj.boundary_kind == BoundaryKind::position) {
        out.indicator = std::abs(traj.monodromy(0, 1));
    } else {
        out.indicator = std::abs(kms_qq_derivative(traj.monodromy));
    }
    out.flagged = out.indicator < 0.1 || traj.multi_root_flag;
    return out;
}

SpinTrajectory solve_spin_h0(const SpinLabel& pre, const SpinLabel& post) {
    SpinTrajectory traj;
    traj.z = spin_stereographic(pre);
    traj.w = std::conj(spin_stereographic(post));
    return traj;
}

std::array<Complex, 3> spin_weak_values_semiclassical(const SpinLabel& pre, const SpinLabel& post) {
    const SpinTrajectory traj = solve_spin_h0(pre, post);
    const Complex den = 1.0 + traj.z * traj.w;
    if (std::abs(den) < 1e-14) {
        throw OrthogonalPostselection("1 + z w vanishes; spin postselection orthogonal");
    }
    return {(traj.z + traj.w) / den, kI * (traj.w - traj.z) / den, (1.0 - traj.z * traj.w) / den};
}

ComplexPhasePoint closed_form_h0(const CoherentLabel& pre, const CoherentLabel& post) {
    return ComplexPhasePoint{
        Complex{0.5 * (post.q + pre.q), -0.5 * (post.p - pre.p)},
        Complex{0.5 * (post.p + pre.p), 0.5 * (post.q - pre.q)},
    };
}

}  // namespace weakline::semiclassical
