#include "omsync/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace omsync {

namespace {

constexpr double kDivergenceFactor = 1e6;
constexpr std::size_t kDeadlineCheckInterval = 1u << 14;

double divergence_bound(const CircuitConfig& config, const CircuitState& initial) {
    double scale = std::max(config.epsilon / config.gamma, 1.0);
    for (const auto& a : initial.a) {
        scale = std::max(scale, std::abs(a));
    }
    return kDivergenceFactor * scale;
}

void check_state(const CircuitState& s, double tau, double bound) {
    if (!s.finite()) {
        std::ostringstream msg;
        msg << "state became non-finite at tau=" << tau;
        throw DivergenceError(tau, msg.str());
    }
    for (int j = 0; j < kModes; ++j) {
        if (std::abs(s.a[j]) > bound) {
            std::ostringstream msg;
            msg << "|a" << (j + 1) << "| = " << std::abs(s.a[j]) << " exceeded divergence bound "
                << bound << " at tau=" << tau;
            throw DivergenceError(tau, msg.str());
        }
    }
}

void check_deadline(const IntegrateOptions& opts, double tau) {
    if (opts.deadline && std::chrono::steady_clock::now() > *opts.deadline) {
        std::ostringstream msg;
        msg << "wall-clock budget exhausted at tau=" << tau;
        throw TimeoutError(msg.str());
    }
}

CircuitState rk4_step(const CircuitState& y, double h, const CircuitConfig& c, const CouplingMatrix& k) {
    const CircuitState k1 = rhs(y, c, k);
    const CircuitState k2 = rhs(y + (0.5 * h) * k1, c, k);
    const CircuitState k3 = rhs(y + (0.5 * h) * k2, c, k);
    const CircuitState k4 = rhs(y + h * k3, c, k);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate_fixed(const SimPlan& plan, const CircuitConfig& config, const CouplingMatrix& k,
                           const IntegrateOptions& opts) {
    const std::size_t steps = plan.total_steps();
    const double bound = divergence_bound(config, plan.initial);
    std::vector<CircuitState> samples;
    samples.reserve(plan.sample_count());
    CircuitState y = plan.initial;
    samples.push_back(y);
    for (std::size_t n = 1; n <= steps; ++n) {
        y = rk4_step(y, plan.dt, config, k);
        if (n % plan.sample_stride == 0) {
            const double tau = plan.dt * static_cast<double>(n);
            check_state(y, tau, bound);
            samples.push_back(y);
        }
        if (n % kDeadlineCheckInterval == 0) {
            check_deadline(opts, plan.dt * static_cast<double>(n));
        }
    }
    return Trajectory(0.0, plan.sample_spacing(), std::move(samples));
}

double error_norm(const CircuitState& err, const CircuitState& y0, const CircuitState& y1,
                  double rtol, double atol) {
    double acc = 0.0;
    auto term = [&](cplx e, cplx u, cplx v) {
        const double sc = atol + rtol * std::max(std::abs(u), std::abs(v));
        const double r = std::abs(e) / sc;
        acc += r * r;
    };
    for (int j = 0; j < kModes; ++j) {
        term(err.a[j], y0.a[j], y1.a[j]);
        term(err.b[j], y0.b[j], y1.b[j]);
    }
    return std::sqrt(acc / (2.0 * kModes));
}

// Dormand-Prince 5(4); steps are clipped so that every sample time is hit exactly.
Trajectory integrate_adaptive(const SimPlan& plan, const CircuitConfig& config, const CouplingMatrix& k,
                              const IntegrateOptions& opts) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2; (void)c3; (void)c4; (void)c5;

    const double spacing = plan.sample_spacing();
    const std::size_t n_samples = plan.sample_count();
    const double bound = divergence_bound(config, plan.initial);
    const double h_min = 1e-14 * std::max(1.0, plan.t_total);

    std::vector<CircuitState> samples;
    samples.reserve(n_samples);
    CircuitState y = plan.initial;
    samples.push_back(y);
    double t = 0.0;
    double h = plan.dt;
    CircuitState f = rhs(y, config, k);
    std::size_t attempts = 0;

    for (std::size_t s = 1; s < n_samples; ++s) {
        const double target = spacing * static_cast<double>(s);
        while (t < target) {
            if (++attempts % kDeadlineCheckInterval == 0) {
                check_deadline(opts, t);
            }
            bool last = false;
            double step = h;
            if (t + step >= target) {
                step = target - t;
                last = true;
            }
            const CircuitState k1 = f;
            const CircuitState k2 = rhs(y + (step * a21) * k1, config, k);
            const CircuitState k3 = rhs(y + (step * a31) * k1 + (step * a32) * k2, config, k);
            const CircuitState k4 =
                rhs(y + (step * a41) * k1 + (step * a42) * k2 + (step * a43) * k3, config, k);
            const CircuitState k5 = rhs(y + (step * a51) * k1 + (step * a52) * k2 + (step * a53) * k3 +
                                            (step * a54) * k4,
                                        config, k);
            const CircuitState k6 = rhs(y + (step * a61) * k1 + (step * a62) * k2 + (step * a63) * k3 +
                                            (step * a64) * k4 + (step * a65) * k5,
                                        config, k);
            const CircuitState y1 = y + (step * b1) * k1 + (step * b3) * k3 + (step * b4) * k4 +
                                    (step * b5) * k5 + (step * b6) * k6;
            const CircuitState k7 = rhs(y1, config, k);
            const CircuitState err = (step * e1) * k1 + (step * e3) * k3 + (step * e4) * k4 +
                                     (step * e5) * k5 + (step * e6) * k6 + (step * e7) * k7;
            const double en = error_norm(err, y, y1, plan.rel_tol, plan.abs_tol);
            if (!std::isfinite(en)) {
                check_state(y1, t + step, bound);
            }
            if (en <= 1.0) {
                t = last ? target : t + step;
                y = y1;
                f = k7;
                const double grow = en == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(en, -0.2));
                if (!last) {
                    h = step * std::max(1.0, grow);
                }
            } else {
                h = step * std::max(0.2, 0.9 * std::pow(en, -0.2));
                if (h < h_min) {
                    std::ostringstream msg;
                    msg << "adaptive step underflow at tau=" << t << " (h=" << h << ")";
                    throw StepUnderflowError(msg.str());
                }
            }
        }
        check_state(y, target, bound);
        samples.push_back(y);
    }
    return Trajectory(0.0, spacing, std::move(samples));
}

}  // namespace

bool CircuitState::finite() const {
    for (int j = 0; j < kModes; ++j) {
        if (!std::isfinite(a[j].real()) || !std::isfinite(a[j].imag()) ||
            !std::isfinite(b[j].real()) || !std::isfinite(b[j].imag())) {
            return false;
        }
    }
    return true;
}

CircuitState& CircuitState::operator+=(const CircuitState& o) {
    for (int j = 0; j < kModes; ++j) {
        a[j] += o.a[j];
        b[j] += o.b[j];
    }
    return *this;
}

CircuitState& CircuitState::operator*=(double s) {
    for (int j = 0; j < kModes; ++j) {
        a[j] *= s;
        b[j] *= s;
    }
    return *this;
}

void SimPlan::validate() const {
    auto require = [](bool ok, const char* key, const std::string& what) {
        if (!ok) {
            throw std::invalid_argument(std::string(key) + ": " + what);
        }
    };
    require(std::isfinite(t_total) && t_total > 0.0, "t_total", "must be > 0");
    require(std::isfinite(dt) && dt > 0.0 && dt <= t_total, "dt", "must be in (0, t_total]");
    require(sample_stride >= 1, "sample_stride", "must be >= 1");
    require(discard_fraction >= 0.0 && discard_fraction < 1.0, "discard_fraction", "must be in [0, 1)");
    if (adaptive) {
        require(rel_tol > 0.0, "rel_tol", "must be > 0");
        require(abs_tol > 0.0, "abs_tol", "must be > 0");
    }
    require(initial.finite(), "initial", "must be finite");
    const auto n = sample_count();
    const auto kept = n - static_cast<std::size_t>(std::floor(discard_fraction * static_cast<double>(n)));
    require(kept >= kMinSteadySamples, "t_total",
            "too short: " + std::to_string(kept) + " samples after discard, need " +
                std::to_string(kMinSteadySamples));
}

std::size_t SimPlan::total_steps() const {
    return static_cast<std::size_t>(std::llround(t_total / dt));
}

std::size_t SimPlan::sample_count() const {
    return total_steps() / sample_stride + 1;
}

CircuitState perturbed_initial(const CircuitConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const double mag = 1e-6 * config.epsilon / config.gamma;
    CircuitState s;
    for (auto& a : s.a) {
        a = std::polar(mag, phase(rng));
    }
    return s;
}

Trajectory::Trajectory(double tau0, double spacing, std::vector<CircuitState> states)
    : tau0_(tau0), spacing_(spacing), states_(std::move(states)) {
    for (int j = 0; j < kModes; ++j) {
        intensity_[j].resize(states_.size());
        displacement_[j].resize(states_.size());
    }
    for (std::size_t n = 0; n < states_.size(); ++n) {
        for (int j = 0; j < kModes; ++j) {
            intensity_[j][n] = std::norm(states_[n].a[j]);
            displacement_[j][n] = states_[n].b[j].real();
        }
    }
}

Trajectory Trajectory::tail(std::size_t first) const {
    first = std::min(first, states_.size());
    std::vector<CircuitState> kept(states_.begin() + static_cast<std::ptrdiff_t>(first), states_.end());
    return Trajectory(tau(first), spacing_, std::move(kept));
}

CircuitState rhs(const CircuitState& s, const CircuitConfig& c, const CouplingMatrix& k) {
    const cplx i{0.0, 1.0};
    CircuitState d;
    for (int j = 0; j < kModes; ++j) {
        const double x = 2.0 * s.b[j].real();  // b + b*
        const double Gj = c.G_of(j);
        cplx coupling{0.0, 0.0};
        for (int m = 0; m < kModes; ++m) {
            if (m != j) {
                coupling += k(j, m) * s.a[m];
            }
        }
        d.a[j] = cplx(-c.gamma, c.microwave_detuning(j) + Gj * x) * s.a[j] + c.epsilon - i * coupling;
        d.b[j] = cplx(-c.Gamma, -c.mechanical_frequency(j)) * s.b[j] + cplx(0.0, Gj * std::norm(s.a[j]));
    }
    return d;
}

Trajectory integrate(const SimPlan& plan, const CircuitConfig& config, const CouplingMatrix& k,
                     const IntegrateOptions& opts) {
    plan.validate();
    config.validate();
    return plan.adaptive ? integrate_adaptive(plan, config, k, opts)
                         : integrate_fixed(plan, config, k, opts);
}

Trajectory steady_window(const Trajectory& traj, double discard_fraction) {
    if (!(discard_fraction >= 0.0 && discard_fraction < 1.0)) {
        throw std::invalid_argument("discard_fraction: must be in [0, 1)");
    }
    const auto n = traj.size();
    const auto first = static_cast<std::size_t>(std::floor(discard_fraction * static_cast<double>(n)));
    if (n - first < kMinSteadySamples) {
        throw std::invalid_argument("steady window too short: " + std::to_string(n - first) +
                                    " samples, need " + std::to_string(kMinSteadySamples));
    }
    if (first == 0) {
        return traj;
    }
    return traj.tail(first);
}

}  // namespace omsync
