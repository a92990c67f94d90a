#include "weakline/pointer_lab.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "weakline/errors.hpp"

namespace weakline::pointer {

namespace {

// <G_a|G_b> for normalized width-sigma Gaussians centered at a and b.
double gaussian_overlap(double a, double b, double sigma) {
    const double d = a - b;
    return std::exp(-d * d / (8.0 * sigma * sigma));
}

double mixture_norm(const std::vector<PointerComponent>& comps, double sigma) {
    double norm = 0.0;
    for (std::size_t j = 0; j < comps.size(); ++j) {
        norm += std::norm(comps[j].weight);
        for (std::size_t k = j + 1; k < comps.size(); ++k) {
            norm += 2.0 *
                    (std::conj(comps[j].weight) * comps[k].weight).real() *
                    gaussian_overlap(comps[j].center, comps[k].center, sigma);
        }
    }
    return norm;
}

// Normalized Gaussian wavefunction value, (2 pi sigma^2)^{-1/4} e^{-(x-c)^2/(4 sigma^2)}.
double gaussian_wf(double x, double c, double sigma) {
    const double d = x - c;
    return std::pow(2.0 * M_PI * sigma * sigma, -0.25) * std::exp(-d * d / (4.0 * sigma * sigma));
}

double uniform01(std::mt19937_64& rng) {
    // 53-bit mantissa draw in [0, 1); stdlib-independent for reproducibility
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double neville_at_zero(std::vector<double> x, std::vector<double> y) {
    const std::size_t n = x.size();
    for (std::size_t k = 1; k < n; ++k) {
        for (std::size_t i = 0; i + k < n; ++i) {
            y[i] = ((0.0 - x[i + k]) * y[i] - (0.0 - x[i]) * y[i + 1]) / (x[i] - x[i + k]);
        }
    }
    return y[0];
}

}  // namespace

PointerState couple_and_postselect(const Eigen::VectorXcd& pre, const Eigen::VectorXcd& post,
                                   const exact::OperatorMatrix& a, const PointerConfig& cfg) {
    if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) {
        throw ValidationError("pointer sigma must be positive and finite");
    }
    if (!std::isfinite(cfg.g)) {
        throw ValidationError("pointer coupling g must be finite");
    }
    if (!(cfg.hbar > 0.0)) {
        throw ValidationError("pointer hbar must be positive");
    }
    if (pre.size() != a.dim || post.size() != a.dim) {
        throw ValidationError("state dimensions do not match the observable");
    }
    const double scale = 1.0 + a.entries.cwiseAbs().maxCoeff();
    if ((a.entries - a.entries.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw ValidationError("pointer observable must be Hermitian");
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a.entries);
    if (es.info() != Eigen::Success) {
        throw Error("couple_and_postselect: eigendecomposition failed");
    }
    const Eigen::VectorXd evals = es.eigenvalues();
    const Eigen::MatrixXcd evecs = es.eigenvectors();

    // Group degenerate eigenvalues into single projectors.
    const double merge_tol = 1e-9 * (1.0 + evals.cwiseAbs().maxCoeff());
    std::vector<PointerComponent> comps;
    int i = 0;
    while (i < a.dim) {
        int j = i;
        double sum = 0.0;
        Complex weight{0.0, 0.0};
        while (j < a.dim && evals[j] - evals[i] <= merge_tol) {
            weight += post.dot(evecs.col(j)) * evecs.col(j).dot(pre);
            sum += evals[j];
            ++j;
        }
        comps.push_back(PointerComponent{weight, cfg.g * sum / (j - i)});
        i = j;
    }

    // Equal centers collapse to one branch (covers g == 0 exactly).
    std::vector<PointerComponent> merged;
    for (const PointerComponent& c : comps) {
        bool absorbed = false;
        for (PointerComponent& m : merged) {
            if (std::abs(m.center - c.center) <= 1e-15 * (1.0 + std::abs(m.center))) {
                m.weight += c.weight;
                absorbed = true;
                break;
            }
        }
        if (!absorbed) merged.push_back(c);
    }

    PointerState ps;
    ps.components = std::move(merged);
    ps.sigma = cfg.sigma;
    ps.hbar = cfg.hbar;
    ps.norm = mixture_norm(ps.components, ps.sigma);
    if (!(ps.norm > 1e-300)) {
        throw ZeroNorm("postselected pointer state vanished");
    }
    return ps;
}

PointerMoments pointer_moments(const PointerState& ps) {
    if (!(ps.norm > 0.0)) {
        throw ZeroNorm("pointer state has non-positive norm");
    }
    const double s2 = ps.sigma * ps.sigma;
    double num_x = 0.0;
    double num_p = 0.0;
    double num_xx = 0.0;
    for (std::size_t j = 0; j < ps.components.size(); ++j) {
        for (std::size_t k = 0; k < ps.components.size(); ++k) {
            const Complex wjk = std::conj(ps.components[j].weight) * ps.components[k].weight;
            const double cj = ps.components[j].center;
            const double ck = ps.components[k].center;
            const double ov = gaussian_overlap(cj, ck, ps.sigma);
            const double mu = 0.5 * (cj + ck);
            num_x += (wjk * mu * ov).real();
            // <G_j|p|G_k> = i hbar (c_j - c_k) / (4 sigma^2) <G_j|G_k>
            num_p += (wjk * Complex{0.0, 1.0} * ps.hbar * (cj - ck) / (4.0 * s2) * ov).real();
            num_xx += (wjk * (s2 + mu * mu) * ov).real();
        }
    }
    PointerMoments out;
    out.mean_x = num_x / ps.norm;
    out.mean_p = num_p / ps.norm;
    out.var_x = num_xx / ps.norm - out.mean_x * out.mean_x;
    return out;
}

double momentum_response_constant(double sigma, double hbar) {
    return hbar / (2.0 * sigma * sigma);
}

WeakValueResult recover_weak_value(const Eigen::VectorXcd& pre, const Eigen::VectorXcd& post,
                                   const exact::OperatorMatrix& a, double sigma, double hbar,
                                   std::span<const double> g_ladder, double time) {
    if (g_ladder.size() < 4) {
        throw ValidationError("recover_weak_value needs a coupling ladder of at least 4 values");
    }
    std::vector<double> gs(g_ladder.begin(), g_ladder.end());
    std::sort(gs.begin(), gs.end(), std::greater<>());
    for (std::size_t k = 0; k < gs.size(); ++k) {
        if (!(gs[k] > 0.0) || !std::isfinite(gs[k])) {
            throw ValidationError("coupling ladder values must be positive and finite");
        }
        if (k > 0 && gs[k] == gs[k - 1]) {
            throw ValidationError("coupling ladder values must be distinct");
        }
    }

    const double kappa = momentum_response_constant(sigma, hbar);
    std::vector<double> g_sq, re_est, im_est;
    double max_center = 0.0;
    for (double g : gs) {
        const PointerState ps =
            couple_and_postselect(pre, post, a, PointerConfig{g, sigma, hbar});
        const PointerMoments m = pointer_moments(ps);
        for (const PointerComponent& c : ps.components) {
            max_center = std::max(max_center, std::abs(c.center));
        }
        g_sq.push_back(g * g);
        re_est.push_back(m.mean_x / g);
        im_est.push_back(m.mean_p / (g * kappa));
    }

    // Both estimators are even series in g; extrapolate to g^2 -> 0.
    WeakValueResult out;
    out.value = Complex{neville_at_zero(g_sq, re_est), neville_at_zero(g_sq, im_est)};
    out.time = time;
    out.method = Method::pointer;
    out.diagnostics["overlap_abs"] = std::abs(post.dot(pre));
    out.diagnostics["kappa"] = kappa;
    out.diagnostics["g_max"] = gs.front();
    out.diagnostics["g_min"] = gs.back();
    // weak-regime check: the largest pointer shift against sigma/25; above 1
    // the quadratic corrections start eating into the percent-level budget
    out.diagnostics["weak_regime_ratio"] = max_center / (sigma / 25.0);
    return out;
}

std::vector<double> sample_readouts(const PointerState& ps, std::size_t n, std::uint64_t seed) {
    std::vector<double> out;
    if (n == 0) return out;
    if (!(ps.norm > 0.0)) {
        throw ZeroNorm("pointer state has non-positive norm");
    }
    out.reserve(n);

    double w_tot = 0.0;
    std::vector<double> cum;
    cum.reserve(ps.components.size());
    for (const PointerComponent& c : ps.components) {
        w_tot += std::abs(c.weight);
        cum.push_back(w_tot);
    }
    if (w_tot <= 0.0) {
        throw ZeroNorm("pointer state has no weight to sample");
    }

    std::mt19937_64 rng(seed);
    while (out.size() < n) {
        // Envelope draw: component by |weight|, then the Gaussian |G_j|^2.
        const double pick = uniform01(rng) * w_tot;
        std::size_t j = static_cast<std::size_t>(
            std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin());
        if (j >= ps.components.size()) j = ps.components.size() - 1;
        const double u1 = 1.0 - uniform01(rng);  // (0, 1]
        const double u2 = uniform01(rng);
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        const double x = ps.components[j].center + ps.sigma * z;

        // Accept with |phi(x)|^2 / (W_tot sum_k |w_k| G_k(x)^2).
        Complex phi{0.0, 0.0};
        double envelope = 0.0;
        for (const PointerComponent& c : ps.components) {
            const double gj = gaussian_wf(x, c.center, ps.sigma);
            phi += c.weight * gj;
            envelope += std::abs(c.weight) * gj * gj;
        }
        envelope *= w_tot;
        if (envelope <= 0.0) continue;
        if (uniform01(rng) * envelope <= std::norm(phi)) {
            out.push_back(x);
        }
    }
    return out;
}

double readout_density(const PointerState& ps, double x) {
    Complex phi{0.0, 0.0};
    for (const PointerComponent& c : ps.components) {
        phi += c.weight * gaussian_wf(x, c.center, ps.sigma);
    }
    return std::norm(phi) / ps.norm;
}

double readout_cdf(const PointerState& ps, double x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < ps.components.size(); ++j) {
        for (std::size_t k = 0; k < ps.components.size(); ++k) {
            const Complex wjk = std::conj(ps.components[j].weight) * ps.components[k].weight;
            const double cj = ps.components[j].center;
            const double ck = ps.components[k].center;
            const double ov = gaussian_overlap(cj, ck, ps.sigma);
            const double mu = 0.5 * (cj + ck);
            const double phi_cdf = 0.5 * std::erfc(-(x - mu) / (ps.sigma * std::sqrt(2.0)));
            acc += (wjk * ov).real() * phi_cdf;
        }
    }
    return acc / ps.norm;
}

}  // namespace weakline::pointer
