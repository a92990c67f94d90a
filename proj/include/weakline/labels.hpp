#pragma once

#include <cmath>

#include "weakline/errors.hpp"
#include "weakline/phase_space.hpp"

namespace weakline {

// Phase-space center of a coherent state. The Klauder boundary data derived
// from it are P' = (p - iq)/sqrt(2) and Q'' = (q - ip)/sqrt(2).
struct CoherentLabel {
    double q = 0.0;
    double p = 0.0;
};

// Eigenvalue label fixed at t': P(t') = (p' - iq')/sqrt(2).
inline Complex klauder_p_label(const CoherentLabel& label) {
    return kms_transform(ComplexPhasePoint{label.q, label.p}).P;
}

// Eigenvalue label fixed at t'': Q(t'') = (q'' - ip'')/sqrt(2).
inline Complex klauder_q_label(const CoherentLabel& label) {
    return kms_transform(ComplexPhasePoint{label.q, label.p}).Q;
}

// Spin-coherent orientation in polar coordinates. theta = pi (south pole) is
// outside the single stereographic chart used here; scenarios that need it
// must rotate conventions upstream.
struct SpinLabel {
    double theta = 0.0;  // radians, [0, pi)
    double phi = 0.0;    // radians, [0, 2*pi)
};

// z = e^{i phi} tan(theta/2). Throws PoleError at theta = pi.
inline Complex spin_stereographic(const SpinLabel& label) {
    if (label.theta == M_PI) {
        throw PoleError("spin_stereographic: theta = pi is the stereographic pole");
    }
    const double t = std::tan(label.theta / 2.0);
    return Complex{std::cos(label.phi), std::sin(label.phi)} * t;
}

}  // namespace weakline
