// model.hpp: circuit parameters and the effective inter-resonator coupling matrix

#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace omsync {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr int kModes = 3;

// Absolute tolerance used for "exactly zero" coupling entries and reciprocity checks.
inline constexpr double kCouplingTol = 1e-12;

/// Maps an angle into (-pi, pi].
double normalize_angle(double radians);

/// Dimensionless parameters of the three-resonator circuit. All rates are in units of
/// the central mechanical frequency; time is measured in tau = Omega_0 * t.
///
/// Resonator j has microwave detuning (+delta, 0, -delta) in the drive frame and
/// mechanical frequency (1 - Delta, 1, 1 + Delta).
struct CircuitConfig {
    double delta{0.05};     // microwave detuning
    double Delta{5e-3};     // mechanical detuning
    double G{4e-5};         // single-photon optomechanical coupling
    double epsilon{800.0};  // drive amplitude, identical and real on every mode
    double gamma{0.1};      // total microwave damping (intrinsic + environment on-site)
    double Gamma{8e-5};     // mechanical damping
    std::optional<std::array<double, kModes>> G_site;  // per-resonator override of G

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    double G_of(int j) const { return G_site ? (*G_site)[j] : G; }

    /// Microwave detuning of resonator j (0-based) as it enters da_j/dtau.
    double microwave_detuning(int j) const;
    /// Mechanical angular frequency of resonator j (0-based).
    double mechanical_frequency(int j) const;
};

/// Dissipative coupling through the common transmission line. Angles are stored in (-pi, pi].
class EnvCoupling {
public:
    EnvCoupling() = default;
    EnvCoupling(double J, double theta, double phi);

    double J() const { return J_; }
    double theta() const { return theta_; }
    double phi() const { return phi_; }

private:
    double J_{0.0};
    double theta_{0.0};
    double phi_{0.0};
};

/// Coherent (Hermitian) couplers g_1 (1<->2), g_2 (2<->3), g_3 (3<->1) with phases.
class CoherentCoupling {
public:
    CoherentCoupling() = default;
    CoherentCoupling(std::array<double, kModes> g, std::array<double, kModes> phase);

    static CoherentCoupling none() { return {}; }

    const std::array<double, kModes>& g() const { return g_; }
    const std::array<double, kModes>& phase() const { return phase_; }

private:
    std::array<double, kModes> g_{0.0, 0.0, 0.0};
    std::array<double, kModes> phase_{0.0, 0.0, 0.0};
};

/// K(i, j) is the amplitude with which mode j drives mode i: the coefficient of
/// a_i^dagger a_j in the effective interaction Hamiltonian. Indices are 0-based.
class CouplingMatrix {
public:
    using Array = std::array<std::array<cplx, kModes>, kModes>;

    CouplingMatrix() = default;
    explicit CouplingMatrix(const Array& k);

    const cplx& operator()(int receiver, int source) const { return k_[receiver][source]; }
    const Array& entries() const { return k_; }

    bool is_zero(double tol = 0.0) const;
    CouplingMatrix transpose() const;
    CouplingMatrix adjoint() const;
    double max_abs_diff(const CouplingMatrix& other) const;

private:
    Array k_{};
};

enum class CircuitPreset { General, OutputPort, InputPort, Unidirectional };

std::string_view preset_name(CircuitPreset p);                 // "general", "fig4b", ...
std::optional<CircuitPreset> parse_preset(std::string_view s);  // accepts fig4a..fig4d, general

CouplingMatrix build_coupling_matrix(const EnvCoupling& env, const CoherentCoupling& coh);

/// Resonator 3 is unaffected by 1 and 2 (g2 = g3 = J with phases locked to the environment).
CouplingMatrix output_port_circuit(const EnvCoupling& env, double g1, double phi1);
/// Resonator 2 feeds nothing back (g1 = g2 = J with phases locked to the environment).
CouplingMatrix input_port_circuit(const EnvCoupling& env, double g3, double phi3);
/// Only 3->1, 1->2 and 3->2 survive.
CouplingMatrix unidirectional_circuit(const EnvCoupling& env);

/// Coherent couplers implied by a preset; entries the preset does not pin come from `coh`.
CoherentCoupling preset_couplers(CircuitPreset preset, const EnvCoupling& env,
                                 const CoherentCoupling& coh);
CouplingMatrix build_for_preset(CircuitPreset preset, const EnvCoupling& env,
                                const CoherentCoupling& coh);

struct Reciprocity {
    double forward{0.0};   // |K(i, j)|
    double backward{0.0};  // |K(j, i)|
    bool nonreciprocal{false};
    bool unidirectional{false};
};

/// `pair` uses 1-based labels and must be one of (1,2), (2,3), (3,1).
Reciprocity nonreciprocity(const CouplingMatrix& k, std::pair<int, int> pair);

/// Eigenvalues of the undriven, G = 0 microwave block: diag(i delta_j - gamma) - i K.
std::array<cplx, kModes> linear_stability(const CircuitConfig& config, const CouplingMatrix& k);
bool has_linear_gain(const std::array<cplx, kModes>& eigenvalues);

}  // namespace omsync
