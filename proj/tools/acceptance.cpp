// acceptance: reproduces the reference scenarios and prints one PASS/FAIL line per criterion.
//
// Exit status is 0 when every failing criterion is listed with --known-failure, 1 otherwise.

#include "omsync/analysis.hpp"
#include "omsync/bath_oracle.hpp"
#include "omsync/config.hpp"
#include "omsync/dynamics.hpp"
#include "omsync/export.hpp"
#include "omsync/model.hpp"
#include "omsync/sweep.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace omsync;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass{false};
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    std::function<Outcome()> run;
};

std::string num(double v, int digits = 6) {
    std::ostringstream o;
    o.precision(digits);
    o << v;
    return o.str();
}

struct Run {
    RunConfig cfg;
    Trajectory steady;
    Spectrum intensity;
    SyncClassification cls;
};

Run run_preset(const std::string& preset, const std::vector<std::string>& overrides = {}) {
    auto cfg = parse_config(write_config(preset_config(preset)), overrides);
    cfg.axes.clear();
    auto traj = integrate(cfg.resolved_plan(), cfg.circuit, cfg.coupling());
    auto steady = steady_window(traj, cfg.plan.discard_fraction);
    auto spec = power_spectrum(steady, intensity_signals());
    auto cls = classify(spec, steady, !cfg.coupling().is_zero(kCouplingTol), cfg.thresholds);
    return {cfg, steady, spec, cls};
}

double top_peak(const Spectrum& s, std::size_t column) {
    const auto p = dominant_peaks(s, column);
    return p.empty() ? std::nan("") : p.front().frequency;
}

std::string state_of(const SyncClassification& c) {
    std::string s = state_name(c.state);
    if (c.sync_frequency) {
        s += " f=" + num(*c.sync_frequency, 5);
    }
    return s;
}

// Independent oscillation at the three mechanical frequencies. |a|^2 is dominated by its
// second harmonic, so each resonator's fundamental is what gets compared.
Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_preset("fig2a");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double bin = r.intensity.bin_width();
    const double tol = std::min(bin, 2e-4);
    const double want[3] = {0.995, 1.000, 1.005};
    bool ok = r.cls.state == SyncState::Independent && r.cls.resonators.size() == 3;
    std::string d = state_of(r.cls) + ", bin " + num(bin, 3) + ", fundamentals";
    for (std::size_t j = 0; j < r.cls.resonators.size(); ++j) {
        const double f = r.cls.resonators[j].frequency;
        ok = ok && std::abs(f - want[j]) <= tol;
        d += " " + num(f, 7) + " (" + (f >= want[j] ? "+" : "") + num(f - want[j], 2) + ")";
    }
    d += ", tolerance " + num(tol, 3) + ", " + num(secs, 3) + " s";
    return {ok, d};
}

Outcome criterion2() {
    const auto r = run_preset("fig2b");
    const auto all = power_spectrum(r.steady, all_signals());
    const double bin = all.bin_width();
    std::vector<double> f;
    for (std::size_t c = 0; c < all.power.size(); ++c) {
        f.push_back(top_peak(all, c));
    }
    const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
    const bool shared = !std::isnan(*lo) && !std::isnan(*hi) && *hi - *lo <= 2 * bin;
    const auto pts = lissajous(r.steady, Signal::I1, Signal::I2);
    const double gap = max_consecutive_gap(pts);
    std::string d = state_of(r.cls) + ", six peaks span " + num(*hi - *lo, 3) + " (2 bins = " + num(2 * bin, 3) +
                    "), consecutive gap " + num(100 * gap, 3) + "% of range";
    if (r.cls.sync_frequency) {
        const double period = 2 * kPi / (*r.cls.sync_frequency * r.steady.spacing());
        d += ", closure gap " + num(100 * closure_gap(pts, period), 3) + "%";
    }
    return {r.cls.state == SyncState::Synchronized && shared && gap < 0.05, d};
}

Outcome criterion3() {
    const auto r = run_preset("fig2c");
    std::size_t best = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        std::size_t n = 0;
        for (const auto& p : dominant_peaks(r.intensity, c)) {
            n += p.prominence >= 0.05;
        }
        best = std::max(best, n);
    }
    return {r.cls.state == SyncState::Unsynchronized && best >= 3,
            state_of(r.cls) + ", most peaks with prominence >= 5%: " + std::to_string(best)};
}

Outcome criterion4() {
    struct Point {
        const char* label;
        const char* preset;
        double target;
        double tol;
    };
    const Point pts[] = {{"A", "fig3a", 1.0, 0.10}, {"B", "fig3b_pointB", 0.5, 0.10}, {"C", "fig3c_pointC", 0.1, 0.20}};
    bool ok = true;
    std::string d;
    for (const auto& p : pts) {
        const auto r = run_preset(p.preset);
        const bool good = r.cls.state == SyncState::Synchronized && r.cls.sync_frequency &&
                          std::abs(*r.cls.sync_frequency / p.target - 1) <= p.tol;
        ok = ok && good;
        d += std::string(d.empty() ? "" : "; ") + p.label + " " + state_of(r.cls) + " (want " + num(p.target) +
             " +/- " + num(100 * p.tol) + "%) " + (good ? "ok" : "MISS");
    }
    return {ok, d};
}

Outcome criterion5(std::size_t workers, const std::string& work_dir) {
    auto spec = preset_config("fig3c_pointC");
    // coarser step keeps 441 points tractable; sampling stays at 0.05
    spec.plan.dt = 0.005;
    spec.plan.sample_stride = 10;
    spec.outputs.spectrogram = false;
    SweepOptions o;
    o.workers = workers;
    if (!work_dir.empty()) {
        o.out_dir = work_dir + "/phase_theta_phi";
    }
    const auto res = run_sweep(spec, o);
    const auto d = phase_diagram(res);
    std::size_t sync = 0, unsync = 0;
    for (const auto& row : d.cells) {
        for (auto c : row) {
            (c == PhaseCell::Sync ? sync : unsync) += 1;
        }
    }
    // theta = 0 and phi = 0.2 pi sit on grid lines 10 and 12
    const auto cell = d.cells[10][12];
    const bool at = std::abs(d.row_axis.coordinate(10)) < 1e-12 && std::abs(d.col_axis.coordinate(12) - 0.2) < 1e-12;
    return {sync > 0 && unsync > 0 && at && cell == PhaseCell::Sync,
            std::to_string(sync) + " sync, " + std::to_string(unsync) + " unsync cells; (0, 0.2 pi) is " +
                phase_cell_name(cell)};
}

Outcome criterion6() {
    std::mt19937_64 gen(61);
    std::uniform_real_distribution<double> uj(0.0, 1.0), ut(-kPi, kPi);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
        const double J = uj(gen), theta = ut(gen);
        const auto k = build_coupling_matrix(EnvCoupling(J, theta, ut(gen)),
                                             CoherentCoupling({J, 0, 0}, {theta + 0.5 * kPi, 0, 0}));
        const auto r = nonreciprocity(k, {1, 2});
        worst = std::max({worst, r.forward, std::abs(r.backward - 2 * J * std::abs(std::cos(theta)))});
    }
    return {worst <= 1e-12, "max deviation " + num(worst, 3) + " over 100 draws"};
}

Outcome criterion7() {
    std::mt19937_64 gen(62);
    std::uniform_real_distribution<double> uj(0.0, 1.0), ut(-kPi, kPi);
    double worst = 0.0;
    auto zero = [&](const CouplingMatrix& k, std::initializer_list<std::pair<int, int>> cells) {
        for (auto [r, c] : cells) {
            worst = std::max(worst, std::abs(k(r, c)));
        }
    };
    for (int n = 0; n < 100; ++n) {
        const EnvCoupling env(uj(gen), ut(gen), ut(gen));
        zero(output_port_circuit(env, uj(gen), ut(gen)), {{2, 0}, {2, 1}});
        zero(input_port_circuit(env, uj(gen), ut(gen)), {{0, 1}, {2, 1}});
        zero(unidirectional_circuit(env), {{0, 1}, {2, 0}, {2, 1}});
    }
    return {worst < 1e-12, "largest forbidden entry " + num(worst, 3) + " over 3 x 100 draws"};
}

Outcome criterion8() {
    const double g = 0.05, B = 200 * g;
    const auto spec = bath_for(g, 0.5 * kPi, 0.5 * kPi, {true, true, false}, B, 4001);
    CircuitConfig eff;
    eff.G = 0.0;
    eff.epsilon = 0.0;
    eff.gamma = g;
    const auto r = run_oracle(spec, eff, 5 / g, 0.05 / B);
    const bool ok = r.golden_rule_max_rel_error < 5e-3 && r.max_error < 0.05 && r.phase.passed;
    return {ok, "golden rule " + num(100 * r.golden_rule_max_rel_error, 3) + "%, max e " + num(r.max_error, 3) +
                    ", K21 " + num(r.phase.fitted.real(), 3) + (r.phase.fitted.imag() < 0 ? "" : "+") +
                    num(r.phase.fitted.imag(), 3) + "i -> " + num(r.phase.fitted_flipped.real(), 3) +
                    (r.phase.fitted_flipped.imag() < 0 ? "" : "+") + num(r.phase.fitted_flipped.imag(), 3) +
                    "i under theta + pi"};
}

double max_state_diff(const CircuitState& x, const CircuitState& y) {
    double m = 0.0;
    for (int j = 0; j < kModes; ++j) {
        m = std::max({m, std::abs(x.a[j] - y.a[j]), std::abs(x.b[j] - y.b[j])});
    }
    return m;
}

Outcome criterion9(const std::string& work_dir) {
    std::string d;
    bool ok = true;

    // convergence
    CircuitConfig c;
    const auto k = build_coupling_matrix(EnvCoupling(0.11, 0.5 * kPi, 0.5 * kPi), CoherentCoupling::none());
    auto endpoint = [&](double dt) {
        SimPlan p;
        p.t_total = 200;
        p.dt = dt;
        p.sample_stride = 1;
        p.discard_fraction = 0.0;
        return integrate(p, c, k).states().back();
    };
    const auto ref = endpoint(0.02 / 8);
    const double ratio = max_state_diff(endpoint(0.02), ref) / max_state_diff(endpoint(0.01), ref);
    ok = ok && ratio >= 12 && ratio <= 20;
    d += "dt ratio " + num(ratio, 4);

    // Parseval
    std::mt19937_64 gen(63);
    std::normal_distribution<double> noise;
    std::vector<double> x(8192);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = 2 + std::cos(0.05 * static_cast<double>(i)) + 0.1 * noise(gen);
    }
    double energy = 0.0, total = 0.0;
    for (double v : windowed(x)) energy += v * v;
    for (double v : one_sided_power(x)) total += v;
    const double parseval = std::abs(total / energy - 1);
    ok = ok && parseval < 1e-9;
    d += ", Parseval " + num(parseval, 3);

    // symmetry
    std::uniform_real_distribution<double> u(-kPi, kPi), m(0.0, 1.0);
    double herm = 0.0, sym = 0.0;
    for (int n = 0; n < 100; ++n) {
        const auto kh = build_coupling_matrix(EnvCoupling(0, u(gen), u(gen)),
                                              CoherentCoupling({m(gen), m(gen), m(gen)}, {u(gen), u(gen), u(gen)}));
        herm = std::max(herm, kh.max_abs_diff(kh.adjoint()));
        const auto ks = build_coupling_matrix(EnvCoupling(m(gen), u(gen), u(gen)), CoherentCoupling::none());
        sym = std::max(sym, ks.max_abs_diff(ks.transpose()));
    }
    ok = ok && herm < 1e-15 && sym < 1e-15;
    d += ", K-K^H " + num(herm, 3) + ", K-K^T " + num(sym, 3);

    // sweep determinism
    const auto spec = parse_config(
        "J = 0.11\ntheta_pi = 0.5\nphi_pi = 0.5\nt_total = 500\ndt = 0.01\nsample_stride = 5\n"
        "axis1 = J 0.05 0.11 3\naxis2 = theta_pi 0.2 0.5 2\n");
    auto dump = [&](const SweepResult& r) {
        std::string s;
        for (const auto& rec : r.records) s += record_json(rec, spec.thresholds).dump() + "\n";
        return s;
    };
    SweepOptions serial;
    const auto base = dump(run_sweep(spec, serial));
    SweepOptions par;
    par.workers = 4;
    const bool workers_same = dump(run_sweep(spec, par)) == base;
    bool resume_same = true;
    if (!work_dir.empty()) {
        SweepOptions part;
        part.out_dir = work_dir + "/resume";
        fs::remove_all(part.out_dir);
        part.workers = 2;
        part.stop_after = 3;
        run_sweep(spec, part);
        part.stop_after.reset();
        resume_same = dump(run_sweep(spec, part)) == base;
    }
    ok = ok && workers_same && resume_same;
    d += std::string(", workers ") + (workers_same ? "identical" : "DIFFER") + ", resume " +
         (resume_same ? "identical" : "DIFFER");
    return {ok, d};
}

// Partial synchronization of the output-port circuit near the two reference theta values.
Outcome criterion10() {
    struct Target {
        const char* label;
        const char* preset;
        double theta_pi;
        int order;
    };
    const Target targets[] = {{"C", "fig6d_pointC", -0.835, 4}, {"D", "fig6d_pointD", -0.77, 2}};
    bool ok = true;
    std::string d;
    for (const auto& t : targets) {
        auto matches = [&](double th) {
            const auto r = run_preset(t.preset, {"theta_pi=" + num(th, 17)});
            const bool good = r.cls.state == SyncState::PartialSync && r.cls.members == std::vector<int>{1, 2} &&
                              r.cls.subharmonic_order == t.order && r.cls.subharmonic_reference == 3;
            return std::make_pair(good, r.cls);
        };
        std::optional<double> found;
        SyncClassification cls;
        for (double off : {0.0, -0.01, 0.01, -0.02, 0.02, -0.03, 0.03, -0.04, 0.04, -0.05, 0.05}) {
            auto [good, c] = matches(t.theta_pi + off);
            if (off == 0.0 || good) {
                cls = c;
            }
            if (good) {
                found = t.theta_pi + off;
                break;
            }
        }
        ok = ok && found.has_value();
        d += std::string(d.empty() ? "" : "; ") + t.label + ": ";
        if (found) {
            d += "PartialSync {1,2} order " + std::to_string(t.order) + " vs 3 at theta = " + num(*found, 4) + " pi";
        } else {
            d += "no theta within 0.05 pi gives order " + std::to_string(t.order) + " (at reference: " +
                 state_of(cls) + ")";
        }
    }
    return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::vector<int> only, known;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::string work_dir;
    app.add_option("--only", only, "run just these criteria");
    app.add_option("--known-failure", known, "criteria expected to fail (documented)");
    app.add_option("--workers", workers, "worker threads for the phase diagram");
    app.add_option("--work-dir", work_dir, "scratch directory for sweep output");
    CLI11_PARSE(app, argc, argv);

    if (work_dir.empty()) {
        work_dir = (fs::temp_directory_path() / "omsync_acceptance").string();
    }
    fs::remove_all(work_dir);
    fs::create_directories(work_dir);

    const std::vector<Criterion> all = {
        {1, "uncoupled peaks at the mechanical frequencies", criterion1},
        {2, "synchronized reference point", criterion2},
        {3, "unsynchronized reference point", criterion3},
        {4, "multi-frequency synchronization A, B, C", criterion4},
        {5, "theta-phi phase diagram", [&] { return criterion5(workers, work_dir); }},
        {6, "unidirectional identity", criterion6},
        {7, "special circuit zeros", criterion7},
        {8, "bath oracle", criterion8},
        {9, "property suite", [&] { return criterion9(work_dir); }},
        {10, "partial synchronization of the output-port circuit", criterion10},
    };

    int unexpected = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool expected_fail = std::find(known.begin(), known.end(), c.id) != known.end();
        std::printf("[%s] %2d %s: %s (%.1f s)%s\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(), o.detail.c_str(),
                    secs, !o.pass && expected_fail ? " [known]" : "");
        std::fflush(stdout);
        if (!o.pass && !expected_fail) {
            ++unexpected;
        }
    }
    fs::remove_all(work_dir);
    return unexpected == 0 ? 0 : 1;
}
