#pragma once

#include <map>
#include <string>

#include "weakline/phase_space.hpp"

namespace weakline {

enum class Method {
    exact,
    generating_functional,
    semiclassical,
    closed_form,
    pointer,
};

// A single weak-value evaluation. diagnostics always carries "overlap_abs":
// the magnitude of the postselection denominator (exact engines) or its
// semiclassical analog exp(-Im S / hbar) times |E| where available, so
// near-orthogonal postselection stays visible to callers.
struct WeakValueResult {
    Complex value{0.0, 0.0};
    double time = 0.0;
    Method method = Method::exact;
    std::map<std::string, double> diagnostics;

    double overlap_abs() const {
        auto it = diagnostics.find("overlap_abs");
        return it == diagnostics.end() ? 0.0 : it->second;
    }
};

inline const char* method_name(Method m) {
    switch (m) {
        case Method::exact: return "exact";
        case Method::generating_functional: return "generating_functional";
        case Method::semiclassical: return "semiclassical";
        case Method::closed_form: return "closed_form";
        case Method::pointer: return "pointer";
    }
    return "unknown";
}

}  // namespace weakline
