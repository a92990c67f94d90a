#pragma once

#include <map>
#include <string>
#include <utility>

#include "weakline/phase_space.hpp"

namespace weakline {

// Classical observable / Hamiltonian A(q,p) = sum c_{mn} q^m p^n as a finite
// monomial table. Polynomials are entire, so evaluation at complex (q,p) is
// the holomorphic continuation used by the trajectory engine.
class PolynomialSymbol {
public:
    using Key = std::pair<int, int>;  // (m, n): powers of q and p
    using TermMap = std::map<Key, Complex>;

    PolynomialSymbol() = default;

    static PolynomialSymbol zero() { return PolynomialSymbol{}; }
    static PolynomialSymbol constant(Complex c);
    static PolynomialSymbol q();
    static PolynomialSymbol p();
    static PolynomialSymbol monomial(int m, int n, Complex c);
    // (q^2 + p^2)/2
    static PolynomialSymbol harmonic_oscillator();

    // Accumulates c into the (m,n) coefficient; exact-zero results are erased
    // so the term map never stores dead keys.
    void add_term(int m, int n, Complex c);

    Complex eval(Complex q, Complex p) const;
    Complex eval(const ComplexPhasePoint& pt) const { return eval(pt.q, pt.p); }

    // Exact term-wise partial derivatives.
    PolynomialSymbol dq() const;
    PolynomialSymbol dp() const;

    PolynomialSymbol operator+(const PolynomialSymbol& rhs) const;
    PolynomialSymbol operator-(const PolynomialSymbol& rhs) const;
    PolynomialSymbol operator*(const PolynomialSymbol& rhs) const;
    PolynomialSymbol operator*(Complex scale) const;

    bool is_zero() const { return terms_.empty(); }
    bool coefficients_real(double tol = 0.0) const;
    int degree() const;       // max m+n, -1 for the zero symbol
    int max_q_power() const;
    int max_p_power() const;

    const TermMap& terms() const { return terms_; }

    bool operator==(const PolynomialSymbol& rhs) const { return terms_ == rhs.terms_; }

    std::string to_string() const;

private:
    TermMap terms_;
};

// (dS/dq, dS/dp) as exact term-wise differentiated symbols.
std::pair<PolynomialSymbol, PolynomialSymbol> symbol_gradient(const PolynomialSymbol& s);

}  // namespace weakline
