#pragma once

#include <cmath>
#include <complex>

namespace weakline {

using Complex = std::complex<double>;

// One point (q, p) of a complexified phase-space trajectory.
struct ComplexPhasePoint {
    Complex q{0.0, 0.0};
    Complex p{0.0, 0.0};

    bool finite() const {
        return std::isfinite(q.real()) && std::isfinite(q.imag()) &&
               std::isfinite(p.real()) && std::isfinite(p.imag());
    }
};

// Coordinates after the complex symplectic (KMS) transform. Quantizing Q and
// P yields the creation and annihilation operators of a harmonic oscillator.
struct KMSPoint {
    Complex Q{0.0, 0.0};
    Complex P{0.0, 0.0};
};

// (q, p) -> (Q, P) with Q = (q - ip)/sqrt(2), P = (-iq + p)/sqrt(2).
// The 2x2 matrix has determinant exactly 1.
inline KMSPoint kms_transform(const ComplexPhasePoint& pt) {
    constexpr double inv_sqrt2 = 0.7071067811865475244008443621048490;
    const Complex i{0.0, 1.0};
    return KMSPoint{(pt.q - i * pt.p) * inv_sqrt2, (-i * pt.q + pt.p) * inv_sqrt2};
}

// Algebraic inverse: q = (Q + iP)/sqrt(2), p = (iQ + P)/sqrt(2).
inline ComplexPhasePoint kms_inverse(const KMSPoint& kp) {
    constexpr double inv_sqrt2 = 0.7071067811865475244008443621048490;
    const Complex i{0.0, 1.0};
    return ComplexPhasePoint{(kp.Q + i * kp.P) * inv_sqrt2, (i * kp.Q + kp.P) * inv_sqrt2};
}

}  // namespace weakline
