#include "weakline/exact_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "weakline/errors.hpp"

namespace weakline::exact {

namespace {

constexpr Complex kI{0.0, 1.0};

void check_hermitian(const Eigen::MatrixXcd& m, const char* ctx) {
    const double scale = 1.0 + m.cwiseAbs().maxCoeff();
    const double dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (dev > 1e-10 * scale) {
        throw ValidationError(std::string(ctx) + ": matrix is not Hermitian");
    }
}

// Eigendecomposition reused for every evolution with the same generator.
struct HermitianEigen {
    Eigen::VectorXd evals;
    Eigen::MatrixXcd evecs;

    // exp(-i H dt / hbar) v
    Eigen::VectorXcd evolve(const Eigen::VectorXcd& v, double dt, double hbar) const {
        Eigen::VectorXcd phases(evals.size());
        for (Eigen::Index k = 0; k < evals.size(); ++k) {
            phases[k] = std::exp(-kI * evals[k] * dt / hbar);
        }
        return evecs * (phases.asDiagonal() * (evecs.adjoint() * v));
    }

    Eigen::MatrixXcd exponential(double dt, double hbar) const {
        Eigen::VectorXcd phases(evals.size());
        for (Eigen::Index k = 0; k < evals.size(); ++k) {
            phases[k] = std::exp(-kI * evals[k] * dt / hbar);
        }
        return evecs * phases.asDiagonal() * evecs.adjoint();
    }
};

HermitianEigen decompose(const Eigen::MatrixXcd& h, const char* ctx) {
    check_hermitian(h, ctx);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    if (es.info() != Eigen::Success) {
        throw Error(std::string(ctx) + ": eigendecomposition failed");
    }
    return HermitianEigen{es.eigenvalues(), es.eigenvectors()};
}

void check_space_matches(const Scenario& s, const HilbertSpec& space) {
    switch (s.kind()) {
        case BoundaryKind::spin:
            if (space.kind != HilbertSpec::Kind::qubit) {
                throw ValidationError("spin boundaries require a qubit space");
            }
            break;
        case BoundaryKind::coherent:
            if (space.kind != HilbertSpec::Kind::fock) {
                throw ValidationError("coherent boundaries require a fock space");
            }
            break;
        case BoundaryKind::position:
            throw UnsupportedBoundary(
                "position boundaries have no normalizable state vector; use the semiclassical engine");
    }
}

void check_time_in_window(const Scenario& s, double t) {
    const double slack = 1e-12 * (1.0 + std::abs(s.duration()));
    if (t < s.t_start - slack || t > s.t_end + slack) {
        throw ValidationError("evaluation time outside [t_start, t_end]");
    }
}

// Shared core of weak_value_exact / weak_variance_exact; a is any matrix.
struct EvolvedPair {
    Eigen::VectorXcd bra_at_t;  // U(t, t'') |post>
    Eigen::VectorXcd ket_at_t;  // U(t, t') |pre>
    Complex denominator;
};

EvolvedPair evolved_pair(const Scenario& s, const HilbertSpec& space, double t) {
    check_space_matches(s, space);
    check_time_in_window(s, t);
    const Eigen::VectorXcd psi_pre = state_vector(s.boundary, false, space, s.hbar);
    const Eigen::VectorXcd psi_post = state_vector(s.boundary, true, space, s.hbar);
    const OperatorMatrix h = scenario_hamiltonian_operator(s, space);
    const HermitianEigen eig = decompose(h.entries, "scenario Hamiltonian");
    EvolvedPair out;
    out.ket_at_t = eig.evolve(psi_pre, t - s.t_start, s.hbar);
    out.bra_at_t = eig.evolve(psi_post, t - s.t_end, s.hbar);
    out.denominator = out.bra_at_t.dot(out.ket_at_t);
    return out;
}

Complex weak_value_of_matrix(const EvolvedPair& pair, const Eigen::MatrixXcd& a) {
    return pair.bra_at_t.dot(a * pair.ket_at_t) / pair.denominator;
}

void check_operator_dim(const OperatorMatrix& a, const HilbertSpec& space, const char* ctx) {
    if (a.dim != space.dim || a.entries.rows() != space.dim || a.entries.cols() != space.dim) {
        throw ValidationError(std::string(ctx) + ": operator dimension does not match the space");
    }
}

}  // namespace

HilbertSpec HilbertSpec::fock(int dim) {
    if (dim < 2) {
        throw ValidationError("fock space needs dim >= 2");
    }
    return HilbertSpec{Kind::fock, dim};
}

OperatorMatrix identity_operator(int dim) {
    return OperatorMatrix{dim, Eigen::MatrixXcd::Identity(dim, dim)};
}

OperatorMatrix pauli_x() {
    Eigen::MatrixXcd m(2, 2);
    m << 0, 1, 1, 0;
    return OperatorMatrix{2, m};
}

OperatorMatrix pauli_y() {
    Eigen::MatrixXcd m(2, 2);
    m << Complex{0, 0}, Complex{0, -1}, Complex{0, 1}, Complex{0, 0};
    return OperatorMatrix{2, m};
}

OperatorMatrix pauli_z() {
    Eigen::MatrixXcd m(2, 2);
    m << 1, 0, 0, -1;
    return OperatorMatrix{2, m};
}

double coherent_tail_weight(double alpha_sq, int dim) {
    if (alpha_sq <= 0.0) {
        return 0.0;
    }
    const double lambda = alpha_sq;
    double log_term =
        static_cast<double>(dim) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(dim) + 1.0);
    double term = std::exp(log_term);
    double sum = 0.0;
    for (int n = dim; n < dim + 2000; ++n) {
        sum += term;
        term *= lambda / static_cast<double>(n + 1);
        if (term < sum * 1e-19 + 1e-320) {
            break;
        }
    }
    return sum;
}

int recommended_fock_dim(const Scenario& s, int min_dim) {
    int dim = std::max(min_dim, 2);
    if (s.kind() != BoundaryKind::coherent) {
        return dim;
    }
    const auto& b = s.coherent();
    double lambda_max = 0.0;
    for (const CoherentLabel& l : {b.pre, b.post}) {
        lambda_max = std::max(lambda_max, (l.q * l.q + l.p * l.p) / (2.0 * s.hbar));
    }
    int levels = 1;
    while (levels < 65536 && coherent_tail_weight(lambda_max, levels) > 1e-14) {
        ++levels;
    }
    const int h_need = s.hamiltonian.degree() + 1;  // matches the build_operator guard
    return std::max({dim, levels + 8, h_need});
}

OperatorMatrix build_operator(const PolynomialSymbol& s, const HilbertSpec& space, double hbar) {
    if (space.kind != HilbertSpec::Kind::fock) {
        throw ValidationError("build_operator requires a fock space");
    }
    const int dim = space.dim;
    for (const auto& [key, c] : s.terms()) {
        (void)c;
        // Levels below m+n+1 would make the monomial matrix pure truncation
        // artifact in every entry.
        if (dim < key.first + key.second + 1) {
            throw TruncationError("fock dim " + std::to_string(dim) + " too small for monomial q^" +
                                  std::to_string(key.first) + " p^" + std::to_string(key.second));
        }
    }

    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    const Eigen::MatrixXcd adag = a.adjoint();
    const double root = std::sqrt(hbar / 2.0);
    const Eigen::MatrixXcd qhat = root * (a + adag);
    const Eigen::MatrixXcd phat = -kI * root * (a - adag);

    int max_m = s.max_q_power();
    std::vector<Eigen::MatrixXcd> qpow(static_cast<std::size_t>(max_m) + 1);
    qpow[0] = Eigen::MatrixXcd::Identity(dim, dim);
    for (int k = 1; k <= max_m; ++k) {
        qpow[static_cast<std::size_t>(k)] = qpow[static_cast<std::size_t>(k - 1)] * qhat;
    }
    std::map<int, Eigen::MatrixXcd> ppow;
    ppow[0] = Eigen::MatrixXcd::Identity(dim, dim);

    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& [key, c] : s.terms()) {
        const int m = key.first;
        const int n = key.second;
        if (!ppow.count(n)) {
            int have = ppow.rbegin()->first;
            Eigen::MatrixXcd cur = ppow.rbegin()->second;
            while (have < n) {
                cur = cur * phat;
                ++have;
                ppow[have] = cur;
            }
        }
        // McCoy's form of the Weyl-symmetrized monomial:
        //   2^{-m} sum_k C(m,k) q^k p^n q^{m-k}
        Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(dim, dim);
        double binom = 1.0;
        for (int k = 0; k <= m; ++k) {
            w += binom * qpow[static_cast<std::size_t>(k)] * ppow[n] *
                 qpow[static_cast<std::size_t>(m - k)];
            binom = binom * static_cast<double>(m - k) / static_cast<double>(k + 1);
        }
        out += c * std::pow(0.5, m) * w;
    }
    return OperatorMatrix{dim, out};
}

Eigen::VectorXcd state_vector(const CoherentLabel& label, const HilbertSpec& space, double hbar) {
    if (space.kind != HilbertSpec::Kind::fock) {
        throw ValidationError("coherent labels need a fock space");
    }
    const Complex alpha = Complex{label.q, label.p} / std::sqrt(2.0 * hbar);
    const double alpha_sq = std::norm(alpha);
    const double tail = coherent_tail_weight(alpha_sq, space.dim);
    if (tail > 1e-14) {
        throw TailError("dropped coherent tail " + std::to_string(tail) + " above 1e-14 at dim " +
                        std::to_string(space.dim));
    }
    Eigen::VectorXcd v(space.dim);
    v[0] = std::exp(-0.5 * alpha_sq);
    for (int n = 1; n < space.dim; ++n) {
        v[n] = v[n - 1] * alpha / std::sqrt(static_cast<double>(n));
    }
    return v / v.norm();
}

Eigen::VectorXcd state_vector(const SpinLabel& label, const HilbertSpec& space) {
    if (space.kind != HilbertSpec::Kind::qubit) {
        throw ValidationError("spin labels need a qubit space");
    }
    Eigen::VectorXcd v(2);
    v[0] = std::cos(label.theta / 2.0);
    v[1] = Complex{std::cos(label.phi), std::sin(label.phi)} * std::sin(label.theta / 2.0);
    return v;
}

Eigen::VectorXcd state_vector(const Boundary& boundary, bool post_side, const HilbertSpec& space,
                              double hbar) {
    if (std::holds_alternative<CoherentBoundary>(boundary)) {
        const auto& b = std::get<CoherentBoundary>(boundary);
        return state_vector(post_side ? b.post : b.pre, space, hbar);
    }
    if (std::holds_alternative<SpinBoundary>(boundary)) {
        const auto& b = std::get<SpinBoundary>(boundary);
        return state_vector(post_side ? b.post : b.pre, space);
    }
    throw UnsupportedBoundary("position eigenstates are not normalizable; no exact-engine state");
}

OperatorMatrix propagate(const OperatorMatrix& h, double dt, double hbar) {
    if (dt < 0.0) {
        throw ValidationError("propagate requires dt >= 0");
    }
    const HermitianEigen eig = decompose(h.entries, "propagate");
    return OperatorMatrix{h.dim, eig.exponential(dt, hbar)};
}

OperatorMatrix scenario_hamiltonian_operator(const Scenario& s, const HilbertSpec& space) {
    if (s.kind() == BoundaryKind::spin) {
        if (space.kind != HilbertSpec::Kind::qubit) {
            throw ValidationError("spin scenario on a non-qubit space");
        }
        return OperatorMatrix{2, Eigen::MatrixXcd::Zero(2, 2)};
    }
    return build_operator(s.hamiltonian, space, s.hbar);
}

WeakValueResult weak_value_exact(const Scenario& s, const OperatorMatrix& a, double t,
                                 const HilbertSpec& space) {
    check_operator_dim(a, space, "weak_value_exact");
    const EvolvedPair pair = evolved_pair(s, space, t);
    if (std::abs(pair.denominator) < 1e-300) {
        throw OrthogonalPostselection("postselection orthogonal to evolved preselection");
    }
    WeakValueResult out;
    out.value = weak_value_of_matrix(pair, a.entries);
    out.time = t;
    out.method = Method::exact;
    out.diagnostics["overlap_abs"] = std::abs(pair.denominator);
    return out;
}

Complex weak_variance_exact(const Scenario& s, const OperatorMatrix& a, double t,
                            const HilbertSpec& space) {
    check_operator_dim(a, space, "weak_variance_exact");
    const EvolvedPair pair = evolved_pair(s, space, t);
    if (std::abs(pair.denominator) < 1e-300) {
        throw OrthogonalPostselection("postselection orthogonal to evolved preselection");
    }
    const Complex w = weak_value_of_matrix(pair, a.entries);
    const Eigen::MatrixXcd centered =
        a.entries - w * Eigen::MatrixXcd::Identity(a.dim, a.dim);
    const Complex via_centered = weak_value_of_matrix(pair, centered * centered);
    const Complex via_moments = weak_value_of_matrix(pair, a.entries * a.entries) - w * w;
    if (std::abs(via_centered - via_moments) > 1e-10) {
        throw Error("weak_variance_exact: centered and moment routes disagree beyond 1e-10");
    }
    return via_centered;
}

Complex generating_functional(const Scenario& s, const OperatorMatrix& a,
                              const SourceProfile& zeta, const HilbertSpec& space, int n_steps) {
    check_space_matches(s, space);
    check_operator_dim(a, space, "generating_functional");
    if (n_steps < 1) {
        throw ValidationError("generating_functional needs n_steps >= 1");
    }
    const double span = s.duration();
    const double slack = 1e-9 * (1.0 + std::abs(span));
    double prev_hi = s.t_start - slack;
    for (const SourceBin& b : zeta.bins) {
        if (!(b.t_lo < b.t_hi)) {
            throw ValidationError("source bin must have t_lo < t_hi");
        }
        if (b.t_lo < s.t_start - slack || b.t_hi > s.t_end + slack) {
            throw ValidationError("source bin outside [t_start, t_end]");
        }
        if (b.t_lo < prev_hi - slack) {
            throw ValidationError("source bins must be ordered and non-overlapping");
        }
        prev_hi = b.t_hi;
    }

    const double dt = span / n_steps;
    for (const SourceBin& b : zeta.bins) {
        for (double edge : {b.t_lo, b.t_hi}) {
            const double u = (edge - s.t_start) / dt;
            if (std::abs(u - std::round(u)) > 1e-6) {
                throw AlignmentError("source bin edge does not sit on a step boundary");
            }
        }
    }

    // Per-step strength, from the bin containing the step midpoint.
    std::vector<double> strength(static_cast<std::size_t>(n_steps), 0.0);
    for (int k = 0; k < n_steps; ++k) {
        const double mid = s.t_start + (k + 0.5) * dt;
        for (const SourceBin& b : zeta.bins) {
            if (mid >= b.t_lo && mid < b.t_hi) {
                strength[static_cast<std::size_t>(k)] = b.strength;
                break;
            }
        }
    }

    const OperatorMatrix h = scenario_hamiltonian_operator(s, space);
    const Eigen::VectorXcd psi_pre = state_vector(s.boundary, false, space, s.hbar);
    const Eigen::VectorXcd psi_post = state_vector(s.boundary, true, space, s.hbar);

    std::map<double, HermitianEigen> generators;
    Eigen::VectorXcd v = psi_pre;
    int k = 0;
    while (k < n_steps) {
        const double z = strength[static_cast<std::size_t>(k)];
        int run = 1;
        while (k + run < n_steps && strength[static_cast<std::size_t>(k + run)] == z) {
            ++run;
        }
        auto it = generators.find(z);
        if (it == generators.end()) {
            const Eigen::MatrixXcd gen = h.entries - z * a.entries;
            it = generators.emplace(z, decompose(gen, "generating_functional")).first;
        }
        v = it->second.evolve(v, dt * run, s.hbar);
        k += run;
    }
    return psi_post.dot(v);
}

WeakValueResult weak_value_via_gf(const Scenario& s, const OperatorMatrix& a, double t,
                                  const HilbertSpec& space, double epsilon, double bin_width) {
    if (!(epsilon > 0.0)) {
        throw ValidationError("weak_value_via_gf needs epsilon > 0");
    }
    if (!(bin_width > 0.0)) {
        throw ValidationError("weak_value_via_gf needs bin_width > 0");
    }
    const double slack = 1e-12 * (1.0 + std::abs(s.duration()));
    // The perturbed bin is [t, t + bin_width]; a half-width margin below t is
    // demanded as well so the estimate stays an interior-time object.
    if (t - 0.5 * bin_width < s.t_start - slack || t + bin_width > s.t_end + slack) {
        throw ValidationError("source bin [t, t + bin_width] does not fit inside the window");
    }

    const double span = s.duration();
    int n_steps = 0;
    for (int n = 1; n <= (1 << 16); ++n) {
        const double dt = span / n;
        const double u1 = (t - s.t_start) / dt;
        const double u2 = (t + bin_width - s.t_start) / dt;
        if (std::abs(u1 - std::round(u1)) < 1e-6 && std::abs(u2 - std::round(u2)) < 1e-6 &&
            std::round(u2) > std::round(u1)) {
            n_steps = n;
            break;
        }
    }
    if (n_steps == 0) {
        throw AlignmentError("no step grid aligns with the requested bin");
    }

    SourceProfile plus{{SourceBin{t, t + bin_width, epsilon}}};
    SourceProfile minus{{SourceBin{t, t + bin_width, -epsilon}}};
    const Complex z_plus = generating_functional(s, a, plus, space, n_steps);
    const Complex z_minus = generating_functional(s, a, minus, space, n_steps);
    const Complex z_zero = generating_functional(s, a, SourceProfile{}, space, n_steps);

    if (z_plus == Complex{0.0, 0.0} || z_minus == Complex{0.0, 0.0}) {
        throw LogBranchError("generating functional vanished at a perturbed source");
    }
    const Complex ratio = z_plus / z_minus;
    if (!(ratio.real() > 0.0)) {
        throw LogBranchError(
            "generating functional crossed zero between the +/-epsilon evaluations; log branch ambiguous");
    }

    WeakValueResult out;
    out.value = -kI * s.hbar * std::log(ratio) / (2.0 * epsilon * bin_width);
    out.time = t;
    out.method = Method::generating_functional;
    out.diagnostics["overlap_abs"] = std::abs(z_zero);
    out.diagnostics["epsilon"] = epsilon;
    out.diagnostics["bin_width"] = bin_width;
    out.diagnostics["n_steps"] = static_cast<double>(n_steps);
    return out;
}

std::array<Complex, 3> spin_weak_values_exact(const SpinLabel& pre, const SpinLabel& post,
                                              const Eigen::Matrix2cd& h_spin, double t,
                                              double t_start, double t_end, double hbar) {
    const HilbertSpec space = HilbertSpec::qubit();
    const Eigen::VectorXcd psi_pre = state_vector(pre, space);
    const Eigen::VectorXcd psi_post = state_vector(post, space);
    const HermitianEigen eig = decompose(h_spin, "spin Hamiltonian");
    const Eigen::VectorXcd ket = eig.evolve(psi_pre, t - t_start, hbar);
    const Eigen::VectorXcd bra = eig.evolve(psi_post, t - t_end, hbar);
    const Complex den = bra.dot(ket);
    if (std::abs(den) < 1e-300) {
        throw OrthogonalPostselection("postselection orthogonal to evolved preselection");
    }
    return {bra.dot(pauli_x().entries * ket) / den, bra.dot(pauli_y().entries * ket) / den,
            bra.dot(pauli_z().entries * ket) / den};
}

std::pair<Eigen::VectorXcd, Eigen::VectorXcd> evolved_states(const Scenario& s,
                                                             const HilbertSpec& space, double t) {
    const EvolvedPair pair = evolved_pair(s, space, t);
    return {pair.ket_at_t, pair.bra_at_t};
}

}  // namespace weakline::exact
