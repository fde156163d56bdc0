#include "omsync/model.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace omsync;
using omsync::testing::uniform;

namespace {

const cplx I(0.0, 1.0);

CouplingMatrix random_general() {
    EnvCoupling env(uniform(0, 0.3), uniform(-4, 4), uniform(-4, 4));
    CoherentCoupling coh({uniform(0, 0.3), uniform(0, 0.3), uniform(0, 0.3)},
                         {uniform(-4, 4), uniform(-4, 4), uniform(-4, 4)});
    return build_coupling_matrix(env, coh);
}

}  // namespace

TEST_CASE("angles normalize into (-pi, pi]") {
    CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(0.5 * kPi + 2 * kPi) == doctest::Approx(0.5 * kPi));
    CHECK(normalize_angle(-0.8 * kPi) == doctest::Approx(-0.8 * kPi));
    EnvCoupling env(0.1, 2.5 * kPi, -1.5 * kPi);
    CHECK(env.theta() == doctest::Approx(0.5 * kPi));
    CHECK(env.phi() == doctest::Approx(0.5 * kPi));
}

TEST_CASE("circuit config validation names the field") {
    CircuitConfig c;
    CHECK_NOTHROW(c.validate());
    c.gamma = 0;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("gamma"), std::invalid_argument);
    c = {};
    c.Gamma = -1;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("Gamma"), std::invalid_argument);
    c = {};
    c.Delta = 1.0;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("Delta"), std::invalid_argument);
    c = {};
    c.epsilon = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("coupling matrix entries") {
    SUBCASE("coherent only") {
        auto k = build_coupling_matrix(EnvCoupling(0, 0, 0), CoherentCoupling({0.15, 0, 0}, {0, 0, 0}));
        CHECK(std::abs(k(0, 1) - 0.15) < 1e-15);
        CHECK(std::abs(k(1, 0) - 0.15) < 1e-15);
        CHECK(std::abs(k(0, 2)) + std::abs(k(2, 0)) + std::abs(k(1, 2)) + std::abs(k(2, 1)) == 0.0);
    }
    SUBCASE("dissipative only, theta = phi = pi/2") {
        auto k = build_coupling_matrix(EnvCoupling(0.11, 0.5 * kPi, 0.5 * kPi), CoherentCoupling::none());
        CHECK(std::abs(k(0, 1) - 0.11) < 1e-15);
        CHECK(std::abs(k(1, 0) - 0.11) < 1e-15);
        CHECK(std::abs(k(0, 2) - 0.11 * I) < 1e-15);
        CHECK(std::abs(k(2, 0) - 0.11 * I) < 1e-15);
    }
    SUBCASE("diagonal is zero") {
        for (int n = 0; n < 20; ++n) {
            auto k = random_general();
            for (int j = 0; j < kModes; ++j) CHECK(k(j, j) == cplx(0.0));
        }
    }
    SUBCASE("g1 = J, phi1 = theta + pi/2 silences 2 -> 1") {
        for (double theta : {0.0, 0.2 * kPi, 0.7 * kPi, -0.4 * kPi}) {
            auto k = build_coupling_matrix(EnvCoupling(0.15, theta, 0.1),
                                           CoherentCoupling({0.15, 0, 0}, {theta + 0.5 * kPi, 0, 0}));
            CHECK(std::abs(k(0, 1)) < 1e-12);
            CHECK(std::abs(std::abs(k(1, 0)) - 2 * 0.15 * std::abs(std::cos(theta))) < 1e-12);
        }
    }
}

TEST_CASE("hermitian without environment, complex-symmetric without couplers") {
    for (int n = 0; n < 100; ++n) {
        CoherentCoupling coh({uniform(0, 0.3), uniform(0, 0.3), uniform(0, 0.3)},
                             {uniform(-4, 4), uniform(-4, 4), uniform(-4, 4)});
        auto h = build_coupling_matrix(EnvCoupling(0, uniform(-4, 4), uniform(-4, 4)), coh);
        CHECK(h.max_abs_diff(h.adjoint()) < 1e-15);

        const double J = uniform(0, 0.3), th = uniform(-4, 4), ph = uniform(-4, 4);
        auto s = build_coupling_matrix(EnvCoupling(J, th, ph), CoherentCoupling::none());
        CHECK(s.max_abs_diff(s.transpose()) < 1e-15);
        CHECK(std::abs(s(0, 1) - (-I * J * std::exp(I * th))) < 1e-15);
        CHECK(std::abs(s(1, 2) - (-I * J * std::exp(I * ph))) < 1e-15);
        CHECK(std::abs(s(0, 2) - (-I * J * std::exp(I * (th + ph)))) < 1e-15);
    }
}

TEST_CASE("output port circuit") {
    SUBCASE("examples") {
        auto k = output_port_circuit(EnvCoupling(0.18, 0.5 * kPi, -0.8 * kPi), 0.18, 0.7 * kPi);
        CHECK(std::abs(k(2, 0)) == 0.0);
        CHECK(std::abs(k(2, 1)) == 0.0);
        auto k0 = output_port_circuit(EnvCoupling(0.2, 0, 0), 0, 0);
        CHECK(std::abs(k0(0, 2) - (-0.4 * I)) < 1e-15);
        CHECK(std::abs(k0(1, 2) - (-0.4 * I)) < 1e-15);
        auto kd = output_port_circuit(EnvCoupling(0.17, 0, 0.5 * kPi), 0, 0);
        CHECK(std::abs(kd(1, 2)) < 1e-15);
        CHECK(std::abs(kd(0, 2)) < 1e-15);
    }
    SUBCASE("matches the general builder with substituted couplers") {
        for (int n = 0; n < 100; ++n) {
            EnvCoupling env(uniform(0, 0.5), uniform(-4, 4), uniform(-4, 4));
            const double g1 = uniform(0, 0.5), p1 = uniform(-4, 4);
            auto k = output_port_circuit(env, g1, p1);
            auto ref = build_coupling_matrix(
                env, CoherentCoupling({g1, env.J(), env.J()},
                                      {p1, -env.phi() - 0.5 * kPi, env.phi() + env.theta() + 0.5 * kPi}));
            CHECK(k.max_abs_diff(ref) < 1e-12);
            CHECK(k.max_abs_diff(build_for_preset(CircuitPreset::OutputPort, env,
                                                  CoherentCoupling({g1, 0, 0}, {p1, 0, 0}))) == 0.0);
        }
    }
}

TEST_CASE("input port circuit") {
    auto k = input_port_circuit(EnvCoupling(0.16, 0.2 * kPi, 0.2 * kPi), 0.16, 0.2 * kPi);
    CHECK(std::abs(k(0, 1)) == 0.0);
    CHECK(std::abs(k(2, 1)) == 0.0);
    CHECK(std::abs(input_port_circuit(EnvCoupling(0.16, 0.5 * kPi, 0), 0, 0)(1, 0)) < 1e-15);
    auto k2 = input_port_circuit(EnvCoupling(0.2, 0.2 * kPi, -0.7 * kPi), 0, 0);
    CHECK(std::abs(k2(1, 0) - (-2.0 * I * 0.2 * std::cos(0.2 * kPi))) < 1e-15);
    CHECK(std::abs(k2(1, 2) - (-2.0 * I * 0.2 * std::cos(-0.7 * kPi))) < 1e-15);
    for (int n = 0; n < 100; ++n) {
        EnvCoupling env(uniform(0, 0.5), uniform(-4, 4), uniform(-4, 4));
        const double g3 = uniform(0, 0.5), p3 = uniform(-4, 4);
        auto ref = build_coupling_matrix(
            env, CoherentCoupling({env.J(), env.J(), g3}, {env.theta() + 0.5 * kPi, -env.phi() - 0.5 * kPi, p3}));
        CHECK(input_port_circuit(env, g3, p3).max_abs_diff(ref) < 1e-12);
    }
}

TEST_CASE("unidirectional circuit") {
    auto k = unidirectional_circuit(EnvCoupling(0.56, 0.9 * kPi, kPi));
    for (int r = 0; r < kModes; ++r) {
        for (int c = 0; c < kModes; ++c) {
            const bool allowed = (r == 0 && c == 2) || (r == 1 && c == 0) || (r == 1 && c == 2);
            if (!allowed) CHECK(k(r, c) == cplx(0.0));
        }
    }
    CHECK(std::abs(unidirectional_circuit(EnvCoupling(0.3, 0.2 * kPi, 0.3 * kPi))(0, 2)) < 1e-15);
    auto k1 = unidirectional_circuit(EnvCoupling(1, 0, 0));
    CHECK(std::abs(k1(0, 2) + 2.0 * I) < 1e-15);
    CHECK(std::abs(k1(1, 0) + 2.0 * I) < 1e-15);
    CHECK(std::abs(k1(1, 2) + 2.0 * I) < 1e-15);
    for (int n = 0; n < 100; ++n) {
        EnvCoupling env(uniform(0, 0.7), uniform(-4, 4), uniform(-4, 4));
        const double J = env.J();
        auto ref = build_coupling_matrix(
            env, CoherentCoupling({J, J, J}, {env.theta() + 0.5 * kPi, -env.phi() - 0.5 * kPi,
                                              env.phi() + env.theta() + 0.5 * kPi}));
        CHECK(unidirectional_circuit(env).max_abs_diff(ref) < 1e-12);
    }
}

TEST_CASE("nonreciprocity") {
    auto herm = build_coupling_matrix(EnvCoupling(0, 0, 0), CoherentCoupling({0.1, 0, 0}, {0.3 * kPi, 0, 0}));
    auto r = nonreciprocity(herm, {1, 2});
    CHECK(r.forward == doctest::Approx(0.1));
    CHECK(r.backward == doctest::Approx(0.1));
    CHECK_FALSE(r.nonreciprocal);
    CHECK_FALSE(r.unidirectional);

    auto uni = build_coupling_matrix(EnvCoupling(0.15, 0.2 * kPi, 0),
                                     CoherentCoupling({0.15, 0, 0}, {0.7 * kPi, 0, 0}));
    r = nonreciprocity(uni, {1, 2});
    CHECK(r.forward < 1e-12);
    CHECK(std::abs(r.backward - 2 * 0.15 * std::cos(0.2 * kPi)) < 1e-12);
    CHECK(r.unidirectional);

    // brute-force complex arithmetic for the forward and backward amplitudes
    const double g = 0.15, J = 0.15, p1 = 0.8 * kPi, th = 0.5 * kPi;
    auto k = build_coupling_matrix(EnvCoupling(J, th, 0), CoherentCoupling({g, 0, 0}, {p1, 0, 0}));
    r = nonreciprocity(k, {1, 2});
    const double fwd = std::hypot(g * std::cos(p1) + J * std::sin(th), g * std::sin(p1) - J * std::cos(th));
    const double bwd = std::hypot(g * std::cos(p1) + J * std::sin(th), -g * std::sin(p1) - J * std::cos(th));
    CHECK(r.forward == doctest::Approx(fwd).epsilon(1e-14));
    CHECK(r.backward == doctest::Approx(bwd).epsilon(1e-14));
    // at theta = pi/2 the dissipative term is real, so the two directions are conjugate
    CHECK_FALSE(r.nonreciprocal);
    k = build_coupling_matrix(EnvCoupling(J, 0.3 * kPi, 0), CoherentCoupling({g, 0, 0}, {p1, 0, 0}));
    r = nonreciprocity(k, {1, 2});
    const cplx f = g * std::exp(I * p1) - I * J * std::exp(I * 0.3 * kPi);
    const cplx b = g * std::exp(-I * p1) - I * J * std::exp(I * 0.3 * kPi);
    CHECK(r.forward == doctest::Approx(std::abs(f)).epsilon(1e-14));
    CHECK(r.backward == doctest::Approx(std::abs(b)).epsilon(1e-14));
    CHECK(r.nonreciprocal);

    CHECK_THROWS_AS(nonreciprocity(k, {2, 1}), std::invalid_argument);
    CHECK_THROWS_AS(nonreciprocity(k, {1, 4}), std::invalid_argument);
}

TEST_CASE("nonreciprocity is unchanged by adding 2 pi to any angle") {
    for (int n = 0; n < 50; ++n) {
        const double J = uniform(0, 0.3), th = uniform(-3, 3), ph = uniform(-3, 3);
        std::array<double, 3> g{uniform(0, 0.3), uniform(0, 0.3), uniform(0, 0.3)};
        std::array<double, 3> p{uniform(-3, 3), uniform(-3, 3), uniform(-3, 3)};
        auto a = build_coupling_matrix(EnvCoupling(J, th, ph), CoherentCoupling(g, p));
        auto b = build_coupling_matrix(EnvCoupling(J, th + 2 * kPi, ph - 2 * kPi),
                                       CoherentCoupling(g, {p[0] + 2 * kPi, p[1] - 4 * kPi, p[2] + 2 * kPi}));
        for (auto pair : {std::pair{1, 2}, std::pair{2, 3}, std::pair{3, 1}}) {
            CHECK(std::abs(nonreciprocity(a, pair).forward - nonreciprocity(b, pair).forward) < 1e-13);
            CHECK(std::abs(nonreciprocity(a, pair).backward - nonreciprocity(b, pair).backward) < 1e-13);
        }
    }
}

TEST_CASE("linear stability") {
    CircuitConfig c;
    SUBCASE("uncoupled") {
        auto ev = linear_stability(c, CouplingMatrix{});
        std::array<cplx, 3> want{cplx(-0.1, 0.05), cplx(-0.1, 0), cplx(-0.1, -0.05)};
        CHECK(testing::set_distance(ev, want) < 1e-14);
        CHECK_FALSE(has_linear_gain(ev));
    }
    SUBCASE("hermitian coupling only shifts frequencies") {
        c.delta = 0;
        auto k = build_coupling_matrix(EnvCoupling(0, 0, 0), CoherentCoupling({0.15, 0.15, 0.15}, {0.3, -1, 2}));
        for (auto e : linear_stability(c, k)) CHECK(e.real() == doctest::Approx(-0.1).epsilon(1e-12));
    }
    SUBCASE("characteristic polynomial oracle") {
        for (int n = 0; n < 30; ++n) {
            CouplingMatrix k = n == 0 ? build_coupling_matrix(EnvCoupling(0.2, 0, 0), CoherentCoupling::none())
                                      : random_general();
            cplx m[3][3];
            for (int r = 0; r < 3; ++r) {
                for (int s = 0; s < 3; ++s) m[r][s] = -I * k(r, s);
                m[r][r] += I * c.microwave_detuning(r) - c.gamma;
            }
            const cplx tr = m[0][0] + m[1][1] + m[2][2];
            const cplx minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] +
                                m[1][1] * m[2][2] - m[1][2] * m[2][1];
            const cplx det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                             m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            auto roots = testing::cubic_roots(-tr, minors, -det);
            auto ev = linear_stability(c, k);
            CHECK(testing::set_distance(ev, roots) < 1e-9);
            CHECK(testing::set_distance(roots, ev) < 1e-9);
        }
    }
    SUBCASE("relabeling 1 <-> 3 with delta -> -delta and transposed K") {
        for (int n = 0; n < 30; ++n) {
            auto k = random_general();
            CouplingMatrix::Array sw{};
            for (int r = 0; r < 3; ++r)
                for (int s = 0; s < 3; ++s) sw[2 - r][2 - s] = k(s, r);
            CircuitConfig flipped = c;
            flipped.delta = -c.delta;
            auto a = linear_stability(c, k);
            auto b = linear_stability(flipped, CouplingMatrix(sw));
            CHECK(testing::set_distance(a, b) < 1e-9);
        }
    }
    SUBCASE("gain is reported") {
        auto k = build_coupling_matrix(EnvCoupling(0, 0, 0), CoherentCoupling({0.5, 0, 0}, {0, 0, 0}));
        CouplingMatrix::Array a = k.entries();
        a[0][1] = 0.5 * I;
        a[1][0] = 0.5 * I;  // -iK has +0.5 on the off-diagonal: eigenvalue -gamma + 0.5
        CHECK(has_linear_gain(linear_stability(c, CouplingMatrix(a))));
    }
}

TEST_CASE("presets parse") {
    CHECK(parse_preset("fig4a") == CircuitPreset::General);
    CHECK(parse_preset("fig4b") == CircuitPreset::OutputPort);
    CHECK(parse_preset("fig4c") == CircuitPreset::InputPort);
    CHECK(parse_preset("fig4d") == CircuitPreset::Unidirectional);
    CHECK_FALSE(parse_preset("fig4e"));
    CHECK(preset_name(CircuitPreset::OutputPort) == "fig4b");
}
