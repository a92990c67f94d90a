#include "weakline/polynomial_symbol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace weakline {

PolynomialSymbol PolynomialSymbol::constant(Complex c) {
    PolynomialSymbol s;
    s.add_term(0, 0, c);
    return s;
}

PolynomialSymbol PolynomialSymbol::q() { return monomial(1, 0, 1.0); }

PolynomialSymbol PolynomialSymbol::p() { return monomial(0, 1, 1.0); }

PolynomialSymbol PolynomialSymbol::monomial(int m, int n, Complex c) {
    PolynomialSymbol s;
    s.add_term(m, n, c);
    return s;
}

PolynomialSymbol PolynomialSymbol::harmonic_oscillator() {
    PolynomialSymbol s;
    s.add_term(2, 0, 0.5);
    s.add_term(0, 2, 0.5);
    return s;
}

void PolynomialSymbol::add_term(int m, int n, Complex c) {
    if (m < 0 || n < 0) {
        return;  // derivative of a constant lands here; nothing to store
    }
    if (c == Complex{0.0, 0.0}) {
        return;
    }
    auto key = Key{m, n};
    auto it = terms_.find(key);
    if (it == terms_.end()) {
        terms_.emplace(key, c);
        return;
    }
    it->second += c;
    if (it->second == Complex{0.0, 0.0}) {
        terms_.erase(it);
    }
}

Complex PolynomialSymbol::eval(Complex q, Complex p) const {
    if (terms_.empty()) {
        return {0.0, 0.0};
    }
    const int mq = max_q_power();
    const int np = max_p_power();
    std::vector<Complex> qpow(static_cast<std::size_t>(mq) + 1);
    std::vector<Complex> ppow(static_cast<std::size_t>(np) + 1);
    qpow[0] = 1.0;
    for (int k = 1; k <= mq; ++k) qpow[static_cast<std::size_t>(k)] = qpow[static_cast<std::size_t>(k - 1)] * q;
    ppow[0] = 1.0;
    for (int k = 1; k <= np; ++k) ppow[static_cast<std::size_t>(k)] = ppow[static_cast<std::size_t>(k - 1)] * p;

    Complex acc{0.0, 0.0};
    for (const auto& [key, c] : terms_) {
        acc += c * qpow[static_cast<std::size_t>(key.first)] * ppow[static_cast<std::size_t>(key.second)];
    }
    return acc;
}

PolynomialSymbol PolynomialSymbol::dq() const {
    PolynomialSymbol out;
    for (const auto& [key, c] : terms_) {
        if (key.first > 0) {
            out.add_term(key.first - 1, key.second, c * static_cast<double>(key.first));
        }
    }
    return out;
}

PolynomialSymbol PolynomialSymbol::dp() const {
    PolynomialSymbol out;
    for (const auto& [key, c] : terms_) {
        if (key.second > 0) {
            out.add_term(key.first, key.second - 1, c * static_cast<double>(key.second));
        }
    }
    return out;
}

PolynomialSymbol PolynomialSymbol::operator+(const PolynomialSymbol& rhs) const {
    PolynomialSymbol out = *this;
    for (const auto& [key, c] : rhs.terms_) {
        out.add_term(key.first, key.second, c);
    }
    return out;
}

PolynomialSymbol PolynomialSymbol::operator-(const PolynomialSymbol& rhs) const {
    PolynomialSymbol out = *this;
    for (const auto& [key, c] : rhs.terms_) {
        out.add_term(key.first, key.second, -c);
    }
    return out;
}

PolynomialSymbol PolynomialSymbol::operator*(const PolynomialSymbol& rhs) const {
    PolynomialSymbol out;
    for (const auto& [ka, ca] : terms_) {
        for (const auto& [kb, cb] : rhs.terms_) {
            out.add_term(ka.first + kb.first, ka.second + kb.second, ca * cb);
        }
    }
    return out;
}

PolynomialSymbol PolynomialSymbol::operator*(Complex scale) const {
    PolynomialSymbol out;
    for (const auto& [key, c] : terms_) {
        out.add_term(key.first, key.second, c * scale);
    }
    return out;
}

bool PolynomialSymbol::coefficients_real(double tol) const {
    return std::all_of(terms_.begin(), terms_.end(), [tol](const auto& kv) {
        return std::abs(kv.second.imag()) <= tol;
    });
}

int PolynomialSymbol::degree() const {
    int d = -1;
    for (const auto& [key, c] : terms_) {
        (void)c;
        d = std::max(d, key.first + key.second);
    }
    return d;
}

int PolynomialSymbol::max_q_power() const {
    int m = 0;
    for (const auto& [key, c] : terms_) {
        (void)c;
        m = std::max(m, key.first);
    }
    return m;
}

int PolynomialSymbol::max_p_power() const {
    int n = 0;
    for (const auto& [key, c] : terms_) {
        (void)c;
        n = std::max(n, key.second);
    }
    return n;
}

std::string PolynomialSymbol::to_string() const {
    if (terms_.empty()) {
        return "0";
    }
    std::ostringstream os;
    bool first = true;
    for (const auto& [key, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << "(" << c.real();
        if (c.imag() != 0.0) os << (c.imag() > 0 ? "+" : "") << c.imag() << "i";
        os << ")";
        if (key.first > 0) os << " q^" << key.first;
        if (key.second > 0) os << " p^" << key.second;
    }
    return os.str();
}

std::pair<PolynomialSymbol, PolynomialSymbol> symbol_gradient(const PolynomialSymbol& s) {
    return {s.dq(), s.dp()};
}

}  // namespace weakline
