// dynamics.hpp: mean-field equations of motion and their time integration

#pragma once

#include "omsync/model.hpp"

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace omsync {

/// Microwave amplitudes (drive frame) and mechanical amplitudes (lab frame).
struct CircuitState {
    std::array<cplx, kModes> a{};
    std::array<cplx, kModes> b{};

    bool finite() const;

    CircuitState& operator+=(const CircuitState& o);
    CircuitState& operator*=(double s);
    friend CircuitState operator+(CircuitState l, const CircuitState& r) { return l += r; }
    friend CircuitState operator*(double s, CircuitState v) { return v *= s; }
};

/// Raised when the state stops being finite or escapes the divergence guard.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double tau, const std::string& what)
        : std::runtime_error(what), tau_(tau) {}
    double tau() const { return tau_; }

private:
    double tau_;
};

/// Adaptive stepping could not meet tolerance above the minimum step.
class StepUnderflowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The wall-clock deadline passed before integration finished.
class TimeoutError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Short windows cannot resolve the Delta-spaced mechanical lines.
inline constexpr std::size_t kMinSteadySamples = 4096;

struct SimPlan {
    double t_total{2.0e4};
    double dt{1e-3};
    std::size_t sample_stride{50};
    double discard_fraction{0.5};
    bool adaptive{false};
    double rel_tol{1e-9};
    double abs_tol{1e-12};
    CircuitState initial{};

    /// Throws std::invalid_argument; also enforces kMinSteadySamples after discard.
    void validate() const;

    double sample_spacing() const { return dt * static_cast<double>(sample_stride); }
    std::size_t total_steps() const;
    std::size_t sample_count() const;  // including tau = 0
};

/// Small seeded perturbation of magnitude 1e-6 * epsilon / gamma on every microwave mode.
CircuitState perturbed_initial(const CircuitConfig& config, std::uint64_t seed);

/// Uniformly sampled trajectory. Derived signals I_j = |a_j|^2 and q_j = Re(b_j) are
/// stored alongside the states.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(double tau0, double spacing, std::vector<CircuitState> states);

    std::size_t size() const { return states_.size(); }
    double spacing() const { return spacing_; }
    double tau(std::size_t i) const { return tau0_ + spacing_ * static_cast<double>(i); }
    double tau0() const { return tau0_; }
    const std::vector<CircuitState>& states() const { return states_; }
    const std::vector<double>& intensity(int j) const { return intensity_[j]; }
    const std::vector<double>& displacement(int j) const { return displacement_[j]; }

    /// Trailing sub-range [first, size()).
    Trajectory tail(std::size_t first) const;

private:
    double tau0_{0.0};
    double spacing_{1.0};
    std::vector<CircuitState> states_;
    std::array<std::vector<double>, kModes> intensity_;
    std::array<std::vector<double>, kModes> displacement_;
};

CircuitState rhs(const CircuitState& s, const CircuitConfig& config, const CouplingMatrix& k);

struct IntegrateOptions {
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Fixed-step classical RK4 by default, Dormand-Prince 5(4) when plan.adaptive is set.
/// Records every sample_stride-th step starting at tau = 0; nothing is discarded.
Trajectory integrate(const SimPlan& plan, const CircuitConfig& config, const CouplingMatrix& k,
                     const IntegrateOptions& opts = {});

/// Drops the leading `discard_fraction` of samples; throws std::invalid_argument if fewer
/// than kMinSteadySamples remain.
Trajectory steady_window(const Trajectory& traj, double discard_fraction);

}  // namespace omsync
