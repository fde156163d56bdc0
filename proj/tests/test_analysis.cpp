#include "omsync/analysis.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace omsync;
using omsync::testing::uniform;

namespace {

constexpr double kSpacing = 0.05;

// Trajectory whose intensities are the given functions of tau (a_j = sqrt(I_j), b_j = q_j).
Trajectory synthetic(std::size_t n, const std::array<std::function<double(double)>, 3>& intensity,
                     double scale = 1.0) {
    std::vector<CircuitState> states(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = kSpacing * static_cast<double>(i);
        for (int j = 0; j < kModes; ++j) {
            const double v = intensity[j](tau);
            states[i].a[j] = std::sqrt(scale * v);
            states[i].b[j] = v;
        }
    }
    return Trajectory(0.0, kSpacing, states);
}

std::function<double(double)> tone(double omega, double depth = 0.5, double phase = 0.0) {
    return [=](double t) { return 1.0 + depth * std::cos(omega * t + phase); };
}

std::vector<double> naive_power(const std::vector<double>& w) {
    const std::size_t n = w.size();
    std::vector<double> p(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            acc += w[m] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * m % n) / static_cast<double>(n));
        }
        const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
        p[k] = (edge ? 1.0 : 2.0) * std::norm(acc) / static_cast<double>(n);
    }
    return p;
}

}  // namespace

TEST_CASE("unit angular frequency lands on f/f0 = 1") {
    const std::size_t n = 400000;
    auto t = synthetic(n, {[](double x) { return 2 + std::cos(x); }, tone(2.0), tone(3.0)});
    auto s = power_spectrum(t, intensity_signals());
    CHECK(s.f_over_f0.front() == 0.0);
    CHECK(s.bin_width() == doctest::Approx(2 * kPi / (n * kSpacing)));
    auto peaks = dominant_peaks(s, 0);
    REQUIRE(peaks.size() == 1);
    CHECK(std::abs(peaks[0].frequency - 1.0) < s.bin_width());
    CHECK(s.bins() == n / 2 + 1);
}

TEST_CASE("constant signal has no power away from DC") {
    auto t = synthetic(8192, {[](double) { return 3.7; }, [](double) { return 1e6; }, tone(1.0)});
    auto s = power_spectrum(t, intensity_signals());
    for (int c = 0; c < 2; ++c) {
        const double level = c == 0 ? 3.7 : 1e6;
        for (std::size_t k = 1; k < s.bins(); ++k) CHECK(s.power[c][k] <= 1e-24 * level * level * 8192);
    }
    for (double v : s.power[2]) CHECK(v >= 0.0);
}

TEST_CASE("one-sided power matches a naive DFT") {
    for (std::size_t n : {64u, 97u, 128u}) {
        std::vector<double> x(n);
        for (auto& v : x) v = uniform(-1, 1);
        auto fast = one_sided_power(x);
        auto slow = naive_power(windowed(x));
        REQUIRE(fast.size() == slow.size());
        for (std::size_t k = 0; k < fast.size(); ++k) CHECK(fast[k] == doctest::Approx(slow[k]).epsilon(1e-10));
    }
}

TEST_CASE("Parseval holds for the windowed signal") {
    for (std::size_t n : {4096u, 5001u, 8192u}) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = kSpacing * static_cast<double>(i);
            x[i] = 3 + std::cos(1.3 * t) + 0.2 * std::sin(0.37 * t + 1) + 0.01 * uniform(-1, 1);
        }
        const auto w = windowed(x);
        double energy = 0;
        for (double v : w) energy += v * v;
        double total = 0;
        for (double v : one_sided_power(x)) total += v;
        CHECK(std::abs(total / energy - 1) < 1e-9);
    }
}

TEST_CASE("peaks") {
    SUBCASE("two tones sorted by power") {
        auto t = synthetic(16384, {[](double x) { return 5 + std::cos(x) + std::sqrt(0.5) * std::cos(0.5 * x); },
                                   tone(1.0), tone(1.0)});
        auto s = power_spectrum(t, intensity_signals());
        auto p = dominant_peaks(s, 0);
        REQUIRE(p.size() == 2);
        CHECK(p[0].frequency == doctest::Approx(1.0).epsilon(0.01));
        CHECK(p[1].frequency == doctest::Approx(0.5).epsilon(0.01));
        CHECK(p[0].prominence == 1.0);
        CHECK(p[1].prominence == doctest::Approx(0.5).epsilon(0.05));
    }
    SUBCASE("flat spectrum gives no peaks") {
        Spectrum s;
        s.f_over_f0 = {0, 1, 2, 3, 4};
        s.signals = {Signal::I1};
        s.power = {{0, 0, 0, 0, 0}};
        CHECK(dominant_peaks(s, 0).empty());
        s.power = {{}};
        CHECK_THROWS_AS(dominant_peaks(s, 0), std::invalid_argument);
    }
    SUBCASE("interpolation within a tenth of a bin") {
        const std::size_t n = 8192;
        const double bin = 2 * kPi / (n * kSpacing);
        for (int trial = 0; trial < 40; ++trial) {
            const double f = bin * uniform(10, 3000);
            auto t = synthetic(n, {[f](double x) { return 2 + std::cos(f * x + 0.3); }, tone(1), tone(1)});
            auto s = power_spectrum(t, {Signal::I1});
            auto p = dominant_peaks(s, 0);
            REQUIRE_FALSE(p.empty());
            CHECK(std::abs(p[0].frequency - f) < 0.1 * bin);
        }
    }
}

TEST_CASE("harmonic fundamental") {
    const double bin = 0.001;
    PeakList p{{2.0, 1.0, 1.0, 0}, {1.0, 0.5, 0.5, 0}, {3.0, 0.1, 0.1, 0}};
    auto f = harmonic_fundamental(p, bin);
    REQUIRE(f);
    CHECK(f->first == doctest::Approx(1.0));
    CHECK(f->second == 2);
    PeakList q{{1.0, 1.0, 1.0, 0}, {1.37, 0.5, 0.5, 0}};
    CHECK_FALSE(harmonic_fundamental(q, 0.01));
    // a weak stray line is ignored on the second pass
    PeakList r{{1.0, 1.0, 1.0, 0}, {2.0, 0.4, 0.4, 0}, {1.37, 0.06, 0.06, 0}};
    auto g = harmonic_fundamental(r, 0.01);
    REQUIRE(g);
    CHECK(g->first == doctest::Approx(1.0));
}

TEST_CASE("classification of synthetic signals") {
    const std::size_t n = 8192;
    SUBCASE("equal frequencies are synchronized") {
        auto t = synthetic(n, {tone(1.0, 0.5, 0.0), tone(1.0, 0.3, 1.0), tone(1.0, 0.7, 2.0)});
        auto c = classify(power_spectrum(t, intensity_signals()), t, true);
        CHECK(c.state == SyncState::Synchronized);
        REQUIRE(c.sync_frequency);
        CHECK(*c.sync_frequency == doctest::Approx(1.0).epsilon(0.005));
        CHECK(c.members == std::vector<int>{1, 2, 3});
        CHECK(c.evidence.size() == 3);
    }
    SUBCASE("distinct frequencies without coupling are independent") {
        auto t = synthetic(n, {tone(0.9), tone(1.0), tone(1.1)});
        auto c = classify(power_spectrum(t, intensity_signals()), t, false);
        CHECK(c.state == SyncState::Independent);
        auto c2 = classify(power_spectrum(t, intensity_signals()), t, true);
        CHECK(c2.state == SyncState::Unsynchronized);
    }
    SUBCASE("two members at a quarter of the third") {
        auto t = synthetic(n, {tone(0.5), tone(0.5, 0.2, 0.4), tone(2.0)});
        auto c = classify(power_spectrum(t, intensity_signals()), t, true);
        CHECK(c.state == SyncState::PartialSync);
        CHECK(c.members == std::vector<int>{1, 2});
        CHECK(c.subharmonic_order == 4);
        CHECK(c.subharmonic_reference == 3);
    }
    SUBCASE("constant intensities are oscillation death") {
        auto t = synthetic(n, {[](double) { return 4.0; }, [](double) { return 2.0; }, [](double) { return 1.0; }});
        auto c = classify(power_spectrum(t, intensity_signals()), t, true);
        CHECK(c.state == SyncState::OscillationDeath);
        for (const auto& r : c.resonators) CHECK(r.dead);
    }
    SUBCASE("one dead resonator leaves a partial group") {
        auto t = synthetic(n, {tone(1.0), tone(1.0, 0.2), [](double) { return 2.0; }});
        auto c = classify(power_spectrum(t, intensity_signals()), t, true);
        CHECK(c.state == SyncState::PartialSync);
        CHECK(c.members == std::vector<int>{1, 2});
        CHECK(c.resonators[2].dead);
    }
    SUBCASE("quasi-periodic signal is unsynchronized") {
        auto qp = [](double x) { return 3 + std::cos(x) + 0.8 * std::cos(std::sqrt(2.0) * x) + 0.6 * std::cos(0.77 * x); };
        auto t = synthetic(n, {qp, tone(1.0), tone(1.0)});
        auto c = classify(power_spectrum(t, intensity_signals()), t, true);
        CHECK(c.state != SyncState::Synchronized);
        CHECK(c.evidence[0].size() >= 3);
    }
}

TEST_CASE("classification ignores the overall intensity scale") {
    const std::size_t n = 8192;
    std::array<std::function<double(double)>, 3> cases[] = {
        {tone(1.0), tone(1.0, 0.3), tone(1.0, 0.2)},
        {tone(0.9), tone(1.0), tone(1.1)},
        {tone(0.5), tone(0.5), tone(2.0)},
    };
    for (const auto& fs : cases) {
        auto t1 = synthetic(n, fs, 1.0);
        auto c1 = classify(power_spectrum(t1, intensity_signals()), t1, true);
        for (double scale : {1e-3, 7.0, 1e6}) {
            auto t2 = synthetic(n, fs, scale);
            auto c2 = classify(power_spectrum(t2, intensity_signals()), t2, true);
            CHECK(c1.state == c2.state);
            CHECK(c1.members == c2.members);
            CHECK(c1.subharmonic_order == c2.subharmonic_order);
            REQUIRE(c1.sync_frequency.has_value() == c2.sync_frequency.has_value());
            if (c1.sync_frequency) CHECK(*c1.sync_frequency == doctest::Approx(*c2.sync_frequency));
        }
    }
}

TEST_CASE("sideband spacing") {
    auto mk = [](std::vector<double> fs) {
        PeakList p;
        for (double f : fs) p.push_back({f, 1, 1, 0});
        return p;
    };
    auto s = sideband_spacing(mk({1.00, 0.99, 1.01}));
    REQUIRE(s);
    CHECK(*s == doctest::Approx(0.01));
    CHECK_FALSE(sideband_spacing(mk({1.0, 1.3, 1.35})));
    CHECK_FALSE(sideband_spacing(mk({1.0, 1.1})));
}

TEST_CASE("lissajous and closure") {
    const std::size_t n = 8192;
    auto same = synthetic(n, {tone(1.0), tone(1.0), tone(1.0)});
    for (auto [x, y] : lissajous(same, Signal::I1, Signal::I2)) CHECK(x == y);

    auto locked = synthetic(n, {tone(1.0), tone(1.0, 0.5, 1.2), tone(1.0)});
    const auto pts = lissajous(locked, Signal::I1, Signal::I2);
    const double period = 2 * kPi / kSpacing;  // 125.66 samples
    CHECK(closure_gap(pts, period) < 1e-3);
    CHECK(max_consecutive_gap(pts) < 0.05);

    auto drifting = synthetic(n, {tone(1.0), tone(1.05, 0.5, 1.2), tone(1.0)});
    CHECK(closure_gap(lissajous(drifting, Signal::I1, Signal::I2), period) > 0.05);
    CHECK(std::isinf(closure_gap(pts, 1e9)));
}

TEST_CASE("state names round-trip") {
    for (auto s : {SyncState::Independent, SyncState::Unsynchronized, SyncState::Synchronized, SyncState::PartialSync,
                   SyncState::OscillationDeath, SyncState::Diverged, SyncState::TimedOut}) {
        CHECK(parse_state(state_name(s)) == s);
    }
    CHECK_FALSE(parse_state("Chaos"));
}
