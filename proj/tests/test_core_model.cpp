#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "weakline/errors.hpp"
#include "weakline/labels.hpp"
#include "weakline/phase_space.hpp"
#include "weakline/polynomial_symbol.hpp"
#include "weakline/scenario.hpp"

#include "test_support.hpp"

using namespace weakline;
using weakline::testing::close;
using weakline::testing::horner_eval;
using weakline::testing::Rng;

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
}

TEST_CASE("kms_transform matches the complex symplectic matrix columns") {
    const KMSPoint origin = kms_transform(ComplexPhasePoint{0.0, 0.0});
    CHECK(origin.Q == Complex{0.0, 0.0});
    CHECK(origin.P == Complex{0.0, 0.0});

    const KMSPoint col_q = kms_transform(ComplexPhasePoint{1.0, 0.0});
    CHECK(close(col_q.Q, Complex{kInvSqrt2, 0.0}, 1e-15));
    CHECK(close(col_q.P, Complex{0.0, -kInvSqrt2}, 1e-15));

    const KMSPoint col_p = kms_transform(ComplexPhasePoint{0.0, 1.0});
    CHECK(close(col_p.Q, Complex{0.0, -kInvSqrt2}, 1e-15));
    CHECK(close(col_p.P, Complex{kInvSqrt2, 0.0}, 1e-15));
}

TEST_CASE("kms matrix is symplectic: determinant 1") {
    // det of [[1, -i], [-i, 1]]/sqrt(2) as complex arithmetic
    const Complex a{kInvSqrt2, 0.0}, b{0.0, -kInvSqrt2};
    const Complex det = a * a - b * b;
    CHECK(std::abs(det - Complex{1.0, 0.0}) < 1e-15);
}

TEST_CASE("kms_inverse inverts the transform") {
    const ComplexPhasePoint back = kms_inverse(KMSPoint{0.0, 0.0});
    CHECK(back.q == Complex{0.0, 0.0});
    CHECK(back.p == Complex{0.0, 0.0});

    const ComplexPhasePoint unit = kms_inverse(KMSPoint{Complex{kInvSqrt2, 0.0}, Complex{0.0, -kInvSqrt2}});
    CHECK(close(unit.q, Complex{1.0, 0.0}, 1e-15));
    CHECK(close(unit.p, Complex{0.0, 0.0}, 1e-15));
}

TEST_CASE("kms round trip is the identity on random complex points") {
    Rng rng(0xC0FFEE);
    for (int k = 0; k < 200; ++k) {
        const ComplexPhasePoint pt{rng.complex_box(5.0), rng.complex_box(5.0)};
        const ComplexPhasePoint back = kms_inverse(kms_transform(pt));
        CHECK(std::abs(back.q - pt.q) < 1e-15 * (1.0 + std::abs(pt.q)));
        CHECK(std::abs(back.p - pt.p) < 1e-15 * (1.0 + std::abs(pt.p)));
        const KMSPoint kp{rng.complex_box(5.0), rng.complex_box(5.0)};
        const KMSPoint fwd = kms_transform(kms_inverse(kp));
        CHECK(std::abs(fwd.Q - kp.Q) < 1e-15 * (1.0 + std::abs(kp.Q)));
        CHECK(std::abs(fwd.P - kp.P) < 1e-15 * (1.0 + std::abs(kp.P)));
    }
}

TEST_CASE("eval_symbol on the worked examples") {
    CHECK(close(PolynomialSymbol::q().eval(Complex{2.0, 1.0}, 0.0), Complex{2.0, 1.0}, 1e-15));
    CHECK(close(PolynomialSymbol::harmonic_oscillator().eval(0.0, 3.0), Complex{4.5, 0.0}, 1e-15));
    // q^2 p at (1+i, 2): (1+i)^2 * 2 = 4i, cross-checked against the Horner oracle
    const PolynomialSymbol s = PolynomialSymbol::monomial(2, 1, 1.0);
    const Complex got = s.eval(Complex{1.0, 1.0}, 2.0);
    CHECK(close(got, Complex{0.0, 4.0}, 1e-15));
    CHECK(close(horner_eval(s, Complex{1.0, 1.0}, 2.0), Complex{0.0, 4.0}, 1e-15));
}

TEST_CASE("eval_symbol agrees with an independent Horner evaluation") {
    Rng rng(0xBEEF);
    for (int k = 0; k < 200; ++k) {
        const PolynomialSymbol s = testing::random_symbol(rng, 4, false);
        const Complex q = rng.complex_box(2.0);
        const Complex p = rng.complex_box(2.0);
        const Complex a = s.eval(q, p);
        const Complex b = horner_eval(s, q, p);
        CHECK(std::abs(a - b) < 1e-12 * (1.0 + std::abs(b)));
    }
}

TEST_CASE("evaluation at the origin picks out c00") {
    PolynomialSymbol s;
    s.add_term(0, 0, Complex{0.25, -1.5});
    s.add_term(3, 1, 2.0);
    CHECK(close(s.eval(0.0, 0.0), Complex{0.25, -1.5}, 0.0));
}

TEST_CASE("symbol_gradient on the worked examples") {
    auto [dq1, dp1] = symbol_gradient(PolynomialSymbol::monomial(2, 0, 1.0));
    CHECK(dq1 == PolynomialSymbol::monomial(1, 0, 2.0));
    CHECK(dp1 == PolynomialSymbol::zero());

    auto [dq2, dp2] = symbol_gradient(PolynomialSymbol::harmonic_oscillator());
    CHECK(dq2 == PolynomialSymbol::q());
    CHECK(dp2 == PolynomialSymbol::p());

    auto [dq3, dp3] = symbol_gradient(PolynomialSymbol::monomial(3, 2, 1.0));
    CHECK(dq3 == PolynomialSymbol::monomial(2, 2, 3.0));
    CHECK(dp3 == PolynomialSymbol::monomial(3, 1, 2.0));
}

TEST_CASE("mixed partials commute term by term") {
    Rng rng(0x5EED);
    for (int k = 0; k < 50; ++k) {
        const PolynomialSymbol s = testing::random_symbol(rng, 5, false);
        CHECK(s.dq().dp() == s.dp().dq());
    }
}

TEST_CASE("symbol derivatives match central differences") {
    Rng rng(0xD1FF);
    const double h = 1e-5;
    for (int k = 0; k < 100; ++k) {
        const PolynomialSymbol s = testing::random_symbol(rng, 4, false);
        const Complex q = rng.complex_box(1.5);
        const Complex p = rng.complex_box(1.5);
        const Complex fd_q = (s.eval(q + h, p) - s.eval(q - h, p)) / (2.0 * h);
        const Complex fd_p = (s.eval(q, p + h) - s.eval(q, p - h)) / (2.0 * h);
        const Complex an_q = s.dq().eval(q, p);
        const Complex an_p = s.dp().eval(q, p);
        CHECK(std::abs(fd_q - an_q) <= 1e-8 * (1.0 + std::abs(an_q)));
        CHECK(std::abs(fd_p - an_p) <= 1e-8 * (1.0 + std::abs(an_p)));
    }
}

TEST_CASE("symbol algebra: product and scalar multiples") {
    const PolynomialSymbol q = PolynomialSymbol::q();
    const PolynomialSymbol p = PolynomialSymbol::p();
    CHECK(q * p == PolynomialSymbol::monomial(1, 1, 1.0));
    CHECK((q + p) * (q - p) == PolynomialSymbol::monomial(2, 0, 1.0) - PolynomialSymbol::monomial(0, 2, 1.0));
    CHECK(q * Complex{2.0, 0.0} == PolynomialSymbol::monomial(1, 0, 2.0));
}

TEST_CASE("spin_stereographic on the worked examples") {
    CHECK(close(spin_stereographic(SpinLabel{0.0, 1.234}), Complex{0.0, 0.0}, 1e-16));
    // postselection (pi/2, pi): e^{i pi} tan(pi/4) = -1
    CHECK(close(spin_stereographic(SpinLabel{M_PI / 2.0, M_PI}), Complex{-1.0, 0.0}, 1e-15));
    // preselection (2 alpha, 0) with alpha = pi/6: tan(pi/6) = 1/sqrt(3)
    CHECK(close(spin_stereographic(SpinLabel{M_PI / 3.0, 0.0}),
                Complex{1.0 / std::sqrt(3.0), 0.0}, 1e-15));
}

TEST_CASE("spin_stereographic rejects the south pole") {
    CHECK_THROWS_AS(spin_stereographic(SpinLabel{M_PI, 0.0}), PoleError);
}

TEST_CASE("stereographic involution: z conj(z) = tan^2(theta/2)") {
    Rng rng(0x7A9);
    for (int k = 0; k < 100; ++k) {
        const SpinLabel label{rng.uniform(0.0, M_PI - 0.05), rng.uniform(0.0, 2.0 * M_PI - 1e-9)};
        const Complex z = spin_stereographic(label);
        const double want = std::pow(std::tan(label.theta / 2.0), 2);
        CHECK(std::abs((z * std::conj(z)).real() - want) <= 1e-12 * (1.0 + want));
    }
}

TEST_CASE("coherent label reconstruction from the derived Klauder labels") {
    Rng rng(0xF00D);
    for (int k = 0; k < 100; ++k) {
        const CoherentLabel label{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        const Complex pp = klauder_p_label(label);  // (p - iq)/sqrt(2)
        const Complex qq = klauder_q_label(label);  // (q - ip)/sqrt(2)
        CHECK(close(pp, Complex{label.p, -label.q} * kInvSqrt2, 1e-15));
        CHECK(close(qq, Complex{label.q, -label.p} * kInvSqrt2, 1e-15));
        // reconstruction: q = (Q'' + iP')/sqrt(2), p = (P' + iQ'')/sqrt(2)
        const Complex q_back = (qq + Complex{0, 1} * pp) * kInvSqrt2;
        const Complex p_back = (pp + Complex{0, 1} * qq) * kInvSqrt2;
        CHECK(close(q_back, Complex{label.q, 0.0}, 1e-14));
        CHECK(close(p_back, Complex{label.p, 0.0}, 1e-14));
    }
}

namespace {

nlohmann::json valid_coherent_json() {
    return nlohmann::json{
        {"boundary",
         {{"kind", "coherent"},
          {"pre", {{"q", 1.0}, {"p", 0.0}}},
          {"post", {{"q", 0.0}, {"p", 1.0}}}}},
        {"hamiltonian", nlohmann::json::array({{0, 2, 0.5, 0.0}, {2, 0, 0.5, 0.0}})},
        {"hbar", 1.0},
        {"t_start", 0.0},
        {"t_end", 1.0}};
}

}  // namespace

TEST_CASE("scenario JSON parses the documented schema") {
    const Scenario s = scenario_from_json(valid_coherent_json());
    CHECK(s.kind() == BoundaryKind::coherent);
    CHECK(s.coherent().pre.q == 1.0);
    CHECK(s.coherent().post.p == 1.0);
    CHECK(s.hamiltonian == PolynomialSymbol::harmonic_oscillator());
    CHECK(s.hbar == 1.0);
    CHECK(s.duration() == 1.0);
}

TEST_CASE("scenario JSON fails closed on unknown keys") {
    auto j = valid_coherent_json();
    j["comment"] = "typo";
    CHECK_THROWS_AS(scenario_from_json(j), ValidationError);

    auto j2 = valid_coherent_json();
    j2["boundary"]["extra"] = 1;
    CHECK_THROWS_AS(scenario_from_json(j2), ValidationError);

    auto j3 = valid_coherent_json();
    j3["boundary"]["pre"]["x"] = 0.0;
    CHECK_THROWS_AS(scenario_from_json(j3), ValidationError);
}

TEST_CASE("scenario JSON rejects invalid physics") {
    auto imag = valid_coherent_json();
    imag["hamiltonian"] = nlohmann::json::array({{2, 0, 0.5, 0.25}});
    CHECK_THROWS_AS(scenario_from_json(imag), ValidationError);

    auto dup = valid_coherent_json();
    dup["hamiltonian"] = nlohmann::json::array({{2, 0, 0.5, 0.0}, {2, 0, 0.25, 0.0}});
    CHECK_THROWS_AS(scenario_from_json(dup), ValidationError);

    auto neg = valid_coherent_json();
    neg["hamiltonian"] = nlohmann::json::array({{-1, 0, 0.5, 0.0}});
    CHECK_THROWS_AS(scenario_from_json(neg), ValidationError);

    auto window = valid_coherent_json();
    window["t_end"] = -1.0;
    CHECK_THROWS_AS(scenario_from_json(window), ValidationError);

    auto hbar = valid_coherent_json();
    hbar["hbar"] = 0.0;
    CHECK_THROWS_AS(scenario_from_json(hbar), ValidationError);
}

TEST_CASE("spin scenarios require the zero Hamiltonian tag and chart-safe labels") {
    nlohmann::json j{
        {"boundary",
         {{"kind", "spin"},
          {"pre", {{"theta", M_PI / 3.0}, {"phi", 0.0}}},
          {"post", {{"theta", M_PI / 2.0}, {"phi", M_PI}}}}},
        {"hamiltonian", "zero"},
        {"hbar", 1.0},
        {"t_start", 0.0},
        {"t_end", 1.0}};
    const Scenario s = scenario_from_json(j);
    CHECK(s.kind() == BoundaryKind::spin);
    CHECK(s.hamiltonian.is_zero());

    auto arr = j;
    arr["hamiltonian"] = nlohmann::json::array();
    CHECK_THROWS_AS(scenario_from_json(arr), ValidationError);

    auto pole = j;
    pole["boundary"]["pre"]["theta"] = M_PI;
    CHECK_THROWS_AS(scenario_from_json(pole), ValidationError);

    auto phi = j;
    phi["boundary"]["post"]["phi"] = 2.0 * M_PI;
    CHECK_THROWS_AS(scenario_from_json(phi), ValidationError);
}

TEST_CASE("coherent scenarios reject the spin zero tag") {
    auto j = valid_coherent_json();
    j["hamiltonian"] = "zero";
    CHECK_THROWS_AS(scenario_from_json(j), ValidationError);
}

TEST_CASE("position scenarios parse numeric labels") {
    nlohmann::json j{{"boundary", {{"kind", "position"}, {"pre", 0.0}, {"post", 1.0}}},
                     {"hamiltonian", nlohmann::json::array({{0, 2, 0.5, 0.0}})},
                     {"hbar", 1.0},
                     {"t_start", 0.0},
                     {"t_end", 2.0}};
    const Scenario s = scenario_from_json(j);
    CHECK(s.kind() == BoundaryKind::position);
    CHECK(s.position().q_post == 1.0);
}

TEST_CASE("scenario JSON round trips through its serialized form") {
    const auto j = valid_coherent_json();
    const Scenario s = scenario_from_json(j);
    CHECK(scenario_to_json(s) == j);
    const Scenario s2 = scenario_from_json(scenario_to_json(s));
    CHECK(scenario_to_json(s2) == j);
}

TEST_CASE("load_scenario reads files and reports parse failures") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "weakline_core_test";
    fs::create_directories(dir);
    const fs::path good = dir / "good.json";
    {
        std::ofstream f(good);
        f << valid_coherent_json().dump(2);
    }
    const Scenario s = load_scenario(good);
    CHECK(s.kind() == BoundaryKind::coherent);

    const fs::path bad = dir / "bad.json";
    {
        std::ofstream f(bad);
        f << "{ not json";
    }
    CHECK_THROWS_AS(load_scenario(bad), ValidationError);
    CHECK_THROWS_AS(load_scenario(dir / "missing.json"), ValidationError);
}
