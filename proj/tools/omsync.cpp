// omsync command line: presets, single runs, sweeps, phase diagrams and the bath oracle.
//
// Exit status: 0 ok, 1 malformed config or arguments, 2 divergence, 3 I/O failure.

#include "omsync/analysis.hpp"
#include "omsync/bath_oracle.hpp"
#include "omsync/config.hpp"
#include "omsync/dynamics.hpp"
#include "omsync/export.hpp"
#include "omsync/model.hpp"
#include "omsync/sweep.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace omsync;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kBadConfig = 1, kDiverged = 2, kIo = 3 };

struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
    sub->add_option("--config", c.config, "configuration file (key = value)");
    auto* o = sub->add_option("--out", c.out, "output path");
    if (needs_out) {
        o->required();
    }
    sub->add_option("--set", c.overrides, "override key=value (repeatable)")->take_all()->allow_extra_args(false);
    sub->add_option("--seed", c.seed, "seed for the perturbed initial state");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? parse_config("", c.overrides) : load_config(c.config, c.overrides);
    if (c.seed) {
        cfg.seed = *c.seed;
    }
    return cfg;
}

std::vector<std::string> recorded_overrides(const Common& c) {
    auto o = c.overrides;
    if (c.seed) {
        o.push_back("seed=" + std::to_string(*c.seed));
    }
    return o;
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) {
        throw std::ios_base::failure("cannot write " + path);
    }
}

void write_manifest(const std::string& out, const RunConfig& cfg, const Common& c, const std::string& cmd) {
    if (out == "-") {
        return;
    }
    write_text(out + ".manifest.json", manifest_json(cfg, recorded_overrides(c), cmd).dump(2) + "\n");
}

void warn_linear_gain(const RunConfig& cfg) {
    const auto ev = linear_stability(cfg.circuit, cfg.coupling());
    if (has_linear_gain(ev)) {
        std::cerr << "warning: the linearized microwave block has gain (eigenvalue real parts";
        for (const auto& e : ev) {
            std::cerr << ' ' << e.real();
        }
        std::cerr << ")\n";
    }
}

Trajectory simulate(const RunConfig& cfg) {
    warn_linear_gain(cfg);
    return integrate(cfg.resolved_plan(), cfg.circuit, cfg.coupling());
}

// Steady window either from a trajectory file or from a fresh integration.
Trajectory steady_input(const RunConfig& cfg, const std::string& trajectory_path) {
    if (trajectory_path.empty()) {
        return steady_window(simulate(cfg), cfg.plan.discard_fraction);
    }
    std::ifstream in(trajectory_path);
    if (!in) {
        throw std::ios_base::failure("cannot read trajectory " + trajectory_path);
    }
    return steady_window(read_trajectory_csv(in), cfg.plan.discard_fraction);
}

int report(const std::exception& e, int code) {
    std::cerr << "omsync: " << e.what() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Three-resonator optomechanical synchronization simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    Common c;

    auto* preset = app.add_subcommand("preset", "write a built-in configuration");
    std::string preset_name_arg;
    bool list = false;
    preset->add_option("name", preset_name_arg, "preset name");
    preset->add_flag("--list", list, "list preset names");
    preset->add_option("--out", c.out, "output path (default stdout)");

    auto* sim = app.add_subcommand("simulate", "integrate and write the trajectory CSV");
    add_common(sim, c);
    bool steady_only = false;
    sim->add_flag("--steady", steady_only, "write only the samples after the transient discard");

    std::string trajectory_path;
    auto* spec = app.add_subcommand("spectrum", "write the power spectrum CSV");
    add_common(spec, c);
    spec->add_option("--trajectory", trajectory_path, "analyze this trajectory CSV instead of integrating");
    bool with_q = true;
    spec->add_flag("--q,!--no-q", with_q, "include mechanical displacement columns");

    auto* cls = app.add_subcommand("classify", "write the classification JSON");
    add_common(cls, c);
    cls->add_option("--trajectory", trajectory_path, "classify this trajectory CSV instead of integrating");

    auto* sweep = app.add_subcommand("sweep", "run a 1-D or 2-D parameter sweep into a result directory");
    add_common(sweep, c);
    std::size_t workers = 1;
    sweep->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

    auto* phase = app.add_subcommand("phase", "phase-diagram CSV grid from a 2-D sweep directory");
    std::string sweep_dir;
    phase->add_option("sweep_dir", sweep_dir, "result directory of a 2-D sweep")->required();
    phase->add_option("--out", c.out, "output CSV")->required();

    auto* oracle = app.add_subcommand("oracle", "compare the eliminated-environment model with a discretized line");
    add_common(oracle, c);
    std::size_t modes = 4001;
    double gamma_eff = 0.05, band_factor = 200.0, horizon_damping = 5.0;
    int resonators = 2;
    oracle->add_option("--modes", modes, "bath modes per direction (odd)");
    oracle->add_option("--gamma-eff", gamma_eff, "on-site rate 2 pi J_j^2 omega0");
    oracle->add_option("--band-factor", band_factor, "band half-width in units of gamma_eff");
    oracle->add_option("--horizon", horizon_damping, "horizon in units of 1/gamma_eff");
    oracle->add_option("--resonators", resonators, "2 or 3 coupled resonators")->check(CLI::Range(2, 3));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kBadConfig;
    }

    try {
        if (*preset) {
            if (list || preset_name_arg.empty()) {
                for (const auto& n : preset_names()) {
                    std::cout << n << "\n";
                }
                return kOk;
            }
            const auto text = write_config(preset_config(preset_name_arg));
            write_text(c.out.empty() ? "-" : c.out, text);
            return kOk;
        }
        if (*sim) {
            const auto cfg = resolve(c);
            auto traj = simulate(cfg);
            if (steady_only) {
                traj = steady_window(traj, cfg.plan.discard_fraction);
            }
            std::ostringstream o;
            write_trajectory_csv(o, traj);
            write_text(c.out, o.str());
            write_manifest(c.out, cfg, c, "simulate");
            return kOk;
        }
        if (*spec) {
            const auto cfg = resolve(c);
            const auto steady = steady_input(cfg, trajectory_path);
            const auto s = power_spectrum(steady, with_q ? all_signals() : intensity_signals());
            std::ostringstream o;
            write_spectrum_csv(o, s);
            write_text(c.out, o.str());
            write_manifest(c.out, cfg, c, "spectrum");
            return kOk;
        }
        if (*cls) {
            const auto cfg = resolve(c);
            const auto steady = steady_input(cfg, trajectory_path);
            const auto s = power_spectrum(steady, intensity_signals());
            const auto result = classify(s, steady, !cfg.coupling().is_zero(kCouplingTol), cfg.thresholds);
            auto j = classification_json(result, cfg.thresholds);
            j["bin_width"] = s.bin_width();
            write_text(c.out, j.dump(2) + "\n");
            write_manifest(c.out, cfg, c, "classify");
            std::cerr << state_name(result.state);
            if (result.sync_frequency) {
                std::cerr << " f/f0 = " << *result.sync_frequency;
            }
            std::cerr << "\n";
            return kOk;
        }
        if (*sweep) {
            const auto cfg = resolve(c);
            SweepOptions opts;
            opts.workers = workers;
            opts.out_dir = c.out;
            opts.overrides = recorded_overrides(c);
            opts.progress = [](std::size_t done, std::size_t total) {
                std::cerr << "\r" << done << "/" << total << std::flush;
            };
            const auto res = run_sweep(cfg, opts);
            const auto total = grid_size(cfg.axes);
            std::cerr << "\rcompleted " << res.records.size() << "/" << total << " ("
                      << (100 * res.records.size() / total) << "%), " << res.computed << " computed, "
                      << res.resumed << " resumed\n";
            return kOk;
        }
        if (*phase) {
            const auto res = load_sweep(sweep_dir);
            std::ostringstream o;
            write_phase_csv(o, phase_diagram(res));
            write_text(c.out, o.str());
            return kOk;
        }
        if (*oracle) {
            auto cfg = resolve(c);
            const bool env_given = !c.config.empty() || !c.overrides.empty();
            const double theta = env_given ? cfg.env.theta() : 0.5 * kPi;
            const double phi = env_given ? cfg.env.phi() : 0.5 * kPi;
            const double B = band_factor * gamma_eff;
            const auto bspec = bath_for(gamma_eff, theta, phi, {true, true, resonators == 3}, B, modes);
            CircuitConfig eff = cfg.circuit;
            eff.G = 0.0;
            eff.G_site.reset();
            eff.epsilon = 0.0;
            eff.gamma = gamma_eff;
            const double dt = 0.05 / B;
            const auto r = run_oracle(bspec, eff, horizon_damping / gamma_eff, dt);
            const std::string csv = c.out + ".error.csv";
            std::ostringstream e;
            e.precision(17);
            e << "tau,error\n";
            for (std::size_t i = 0; i < r.comparison.tau.size(); i += 10) {
                e << r.comparison.tau[i] << ',' << r.comparison.error[i] << '\n';
            }
            write_text(csv, e.str());
            write_text(c.out, oracle_json(r, fs::path(csv).filename().string()).dump(2) + "\n");
            std::cerr << "max error " << r.max_error << ", golden rule " << r.golden_rule_max_rel_error
                      << ", phase sign " << (r.phase.passed ? "ok" : "FAILED") << "\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        return report(e, kBadConfig);
    } catch (const DivergenceError& e) {
        return report(e, kDiverged);
    } catch (const std::ios_base::failure& e) {
        return report(e, kIo);
    } catch (const fs::filesystem_error& e) {
        return report(e, kIo);
    } catch (const std::invalid_argument& e) {
        return report(e, kBadConfig);
    } catch (const std::exception& e) {
        return report(e, kIo);
    }
    return kOk;
}
