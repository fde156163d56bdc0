// bath_oracle.hpp: full system + discretized transmission-line model, used to check the
// effective dissipative couplings obtained by eliminating the line.

#pragma once

#include "omsync/model.hpp"

#include <json.hpp>

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace omsync {

/// Root of Si(x) = pi/2. A propagation delay of this many inverse band half-widths makes the
/// band-limited kernel's anti-causal weight vanish.
inline constexpr double kSiHalfPiRoot = 1.9264476603173704;

struct BathSpec {
    std::array<double, kModes> J_site{0.0, 0.0, 0.0};  // on-site rate is 2 pi J_j^2 omega0
    std::array<double, kModes> positions{0.0, 0.0, 0.0};  // accumulated phases: 0, theta, theta + phi
    double band_halfwidth{10.0};                           // modes span detunings [-B, B]
    std::size_t n_modes{4001};                             // per direction, odd
    double omega0{1.0};
    /// Propagation delay of each resonator's contact point. Defaults to j * kSiHalfPiRoot / B.
    std::optional<std::array<double, kModes>> delays;

    /// Throws std::invalid_argument.
    void validate() const;
    std::array<double, kModes> resolved_delays() const;
    double onsite_rate(int j) const;
};

/// Positions (0, theta, theta + phi) with equal couplings chosen so that the on-site rate is
/// gamma_eff on every resonator listed in `active` (others uncoupled).
BathSpec bath_for(double gamma_eff, double theta, double phi, std::array<bool, kModes> active,
                  double band_halfwidth, std::size_t n_modes);

struct DiscreteBath {
    std::vector<double> detuning;  // nu_m, shared by both directions
    double spacing{0.0};
    // coupling[j][m]: amplitude with which mode m of each direction drives resonator j.
    std::array<std::vector<cplx>, kModes> left;
    std::array<std::vector<cplx>, kModes> right;
};

DiscreteBath discretize_bath(const BathSpec& spec);

/// pi times the band-averaged spectral density of resonator j, summed over both directions.
double golden_rule_rate(const DiscreteBath& bath, int j);

struct SystemTrajectory {
    std::vector<double> tau;
    std::vector<std::array<cplx, kModes>> a;
};

/// Classical RK4 on system + 2 n_modes bath amplitudes, bath initially empty, G = 0,
/// epsilon = 0. Records every `stride` steps. Rejects dt * B > 0.1.
SystemTrajectory simulate_full(const BathSpec& spec, const std::array<double, kModes>& detunings,
                               double horizon, double dt, const std::array<cplx, kModes>& initial,
                               std::size_t stride = 1);

/// Coupling matrix the elimination predicts: K(j,k) = -i 2 pi J_j J_k omega0 e^{i (p_hi - p_lo)}
/// with lo < hi the two resonator indices.
CouplingMatrix effective_coupling(const BathSpec& spec);

struct ModelComparison {
    std::vector<double> tau;
    std::vector<double> error;  // e(tau), normalized by max_j |a_j(0)|
    double max_error{0.0};
};

/// Integrates the full and effective models from `initial` and compares them.
/// `config` must carry gamma equal to the on-site rate of every coupled resonator.
ModelComparison compare_models(const BathSpec& spec, const CircuitConfig& config, double horizon, double dt,
                               const std::array<cplx, kModes>& initial, std::size_t stride = 1);

struct PhaseSignCheck {
    cplx fitted{};          // K(2,1) extracted from the full model at theta
    cplx fitted_flipped{};  // same at theta + pi
    cplx expected{};        // -i J e^{i theta}
    double relative_mismatch{0.0};  // |fitted + fitted_flipped| / |fitted|
    bool passed{false};
};

/// Fits the cross coupling of resonators 1 -> 2 from two-resonator dynamics at theta and theta + pi.
PhaseSignCheck phase_sign_check(const BathSpec& spec, double horizon, double dt);

struct OracleReport {
    std::size_t n_modes{0};
    double B{0.0};
    double horizon{0.0};
    double max_error{0.0};
    std::array<double, kModes> golden_rule_rate{};
    std::array<double, kModes> golden_rule_expected{};
    double golden_rule_max_rel_error{0.0};
    PhaseSignCheck phase;
    ModelComparison comparison;
};

/// Runs the golden-rule, trajectory and phase-sign checks at the given scale.
OracleReport run_oracle(const BathSpec& spec, const CircuitConfig& config, double horizon, double dt);

nlohmann::json oracle_json(const OracleReport& r, const std::string& per_tau_error_csv_path);

}  // namespace omsync
