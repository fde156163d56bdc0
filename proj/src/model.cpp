#include "omsync/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace omsync {

double normalize_angle(double radians) {
    double r = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
    if (r <= -kPi) {
        r += 2.0 * kPi;
    }
    return r;
}

void CircuitConfig::validate() const {
    auto require = [](bool ok, const char* key, const char* what) {
        if (!ok) {
            throw std::invalid_argument(std::string(key) + ": " + what);
        }
    };
    require(std::isfinite(delta), "delta", "must be finite");
    require(std::isfinite(Delta) && Delta < 1.0, "Delta", "must be finite and < 1");
    require(std::isfinite(G) && G >= 0.0, "G", "must be >= 0");
    require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon", "must be >= 0");
    require(std::isfinite(gamma) && gamma > 0.0, "gamma", "must be > 0");
    require(std::isfinite(Gamma) && Gamma > 0.0, "Gamma", "must be > 0");
    if (G_site) {
        for (double g : *G_site) {
            require(std::isfinite(g) && g >= 0.0, "G_site", "entries must be >= 0");
        }
    }
}

double CircuitConfig::microwave_detuning(int j) const {
    static constexpr std::array<double, kModes> sign{1.0, 0.0, -1.0};
    return sign[j] * delta;
}

double CircuitConfig::mechanical_frequency(int j) const {
    static constexpr std::array<double, kModes> sign{-1.0, 0.0, 1.0};
    return 1.0 + sign[j] * Delta;
}

EnvCoupling::EnvCoupling(double J, double theta, double phi)
    : J_(J), theta_(normalize_angle(theta)), phi_(normalize_angle(phi)) {}

CoherentCoupling::CoherentCoupling(std::array<double, kModes> g, std::array<double, kModes> phase)
    : g_(g) {
    for (int i = 0; i < kModes; ++i) {
        phase_[i] = normalize_angle(phase[i]);
    }
}

CouplingMatrix::CouplingMatrix(const Array& k) : k_(k) {}

bool CouplingMatrix::is_zero(double tol) const {
    for (const auto& row : k_) {
        for (const auto& v : row) {
            if (std::abs(v) > tol) {
                return false;
            }
        }
    }
    return true;
}

CouplingMatrix CouplingMatrix::transpose() const {
    Array t{};
    for (int i = 0; i < kModes; ++i) {
        for (int j = 0; j < kModes; ++j) {
            t[i][j] = k_[j][i];
        }
    }
    return CouplingMatrix(t);
}

CouplingMatrix CouplingMatrix::adjoint() const {
    Array t{};
    for (int i = 0; i < kModes; ++i) {
        for (int j = 0; j < kModes; ++j) {
            t[i][j] = std::conj(k_[j][i]);
        }
    }
    return CouplingMatrix(t);
}

double CouplingMatrix::max_abs_diff(const CouplingMatrix& other) const {
    double m = 0.0;
    for (int i = 0; i < kModes; ++i) {
        for (int j = 0; j < kModes; ++j) {
            m = std::max(m, std::abs(k_[i][j] - other.k_[i][j]));
        }
    }
    return m;
}

std::string_view preset_name(CircuitPreset p) {
    switch (p) {
        case CircuitPreset::General: return "general";
        case CircuitPreset::OutputPort: return "fig4b";
        case CircuitPreset::InputPort: return "fig4c";
        case CircuitPreset::Unidirectional: return "fig4d";
    }
    return "general";
}

std::optional<CircuitPreset> parse_preset(std::string_view s) {
    if (s == "general" || s == "fig4a") return CircuitPreset::General;
    if (s == "fig4b") return CircuitPreset::OutputPort;
    if (s == "fig4c") return CircuitPreset::InputPort;
    if (s == "fig4d") return CircuitPreset::Unidirectional;
    return std::nullopt;
}

CouplingMatrix build_coupling_matrix(const EnvCoupling& env, const CoherentCoupling& coh) {
    const cplx i{0.0, 1.0};
    const auto& g = coh.g();
    const auto& ph = coh.phase();
    const double J = env.J();
    const cplx d12 = -i * J * std::exp(i * env.theta());
    const cplx d23 = -i * J * std::exp(i * env.phi());
    const cplx d13 = -i * J * std::exp(i * (env.theta() + env.phi()));

    CouplingMatrix::Array k{};
    k[0][1] = g[0] * std::exp(i * ph[0]) + d12;
    k[1][0] = g[0] * std::exp(-i * ph[0]) + d12;
    k[1][2] = g[1] * std::exp(i * ph[1]) + d23;
    k[2][1] = g[1] * std::exp(-i * ph[1]) + d23;
    k[2][0] = g[2] * std::exp(i * ph[2]) + d13;
    k[0][2] = g[2] * std::exp(-i * ph[2]) + d13;
    return CouplingMatrix(k);
}

CoherentCoupling preset_couplers(CircuitPreset preset, const EnvCoupling& env,
                                 const CoherentCoupling& coh) {
    auto g = coh.g();
    auto ph = coh.phase();
    const double J = env.J();
    const double half_pi = 0.5 * kPi;
    const bool pin1 = preset == CircuitPreset::InputPort || preset == CircuitPreset::Unidirectional;
    const bool pin2 = preset != CircuitPreset::General;
    const bool pin3 = preset == CircuitPreset::OutputPort || preset == CircuitPreset::Unidirectional;
    if (pin1) {
        g[0] = J;
        ph[0] = env.theta() + half_pi;
    }
    if (pin2) {
        g[1] = J;
        ph[1] = -env.phi() - half_pi;
    }
    if (pin3) {
        g[2] = J;
        ph[2] = env.phi() + env.theta() + half_pi;
    }
    return CoherentCoupling(g, ph);
}

// The pinned couplers cancel one direction of each affected pair analytically; the
// closed forms below are used for the surviving entries so that the cancelled ones are
// exactly zero rather than rounding residue.
CouplingMatrix output_port_circuit(const EnvCoupling& env, double g1, double phi1) {
    const cplx i{0.0, 1.0};
    const double J = env.J();
    auto k = build_coupling_matrix(env, CoherentCoupling({g1, 0.0, 0.0}, {phi1, 0.0, 0.0})).entries();
    k[2][0] = 0.0;
    k[2][1] = 0.0;
    k[0][2] = -2.0 * i * J * std::cos(env.theta() + env.phi());
    k[1][2] = -2.0 * i * J * std::cos(env.phi());
    return CouplingMatrix(k);
}

CouplingMatrix input_port_circuit(const EnvCoupling& env, double g3, double phi3) {
    const cplx i{0.0, 1.0};
    const double J = env.J();
    auto k = build_coupling_matrix(env, CoherentCoupling({0.0, 0.0, g3}, {0.0, 0.0, phi3})).entries();
    k[0][1] = 0.0;
    k[2][1] = 0.0;
    k[1][0] = -2.0 * i * J * std::cos(env.theta());
    k[1][2] = -2.0 * i * J * std::cos(env.phi());
    return CouplingMatrix(k);
}

CouplingMatrix unidirectional_circuit(const EnvCoupling& env) {
    const cplx i{0.0, 1.0};
    const double J = env.J();
    CouplingMatrix::Array k{};
    k[0][2] = -2.0 * i * J * std::cos(env.theta() + env.phi());
    k[1][0] = -2.0 * i * J * std::cos(env.theta());
    k[1][2] = -2.0 * i * J * std::cos(env.phi());
    return CouplingMatrix(k);
}

CouplingMatrix build_for_preset(CircuitPreset preset, const EnvCoupling& env,
                                const CoherentCoupling& coh) {
    switch (preset) {
        case CircuitPreset::General:
            return build_coupling_matrix(env, coh);
        case CircuitPreset::OutputPort:
            return output_port_circuit(env, coh.g()[0], coh.phase()[0]);
        case CircuitPreset::InputPort:
            return input_port_circuit(env, coh.g()[2], coh.phase()[2]);
        case CircuitPreset::Unidirectional:
            return unidirectional_circuit(env);
    }
    return build_coupling_matrix(env, coh);
}

Reciprocity nonreciprocity(const CouplingMatrix& k, std::pair<int, int> pair) {
    const auto [a, b] = pair;
    const bool valid = (a == 1 && b == 2) || (a == 2 && b == 3) || (a == 3 && b == 1);
    if (!valid) {
        throw std::invalid_argument("nonreciprocity: pair must be (1,2), (2,3) or (3,1)");
    }
    Reciprocity r;
    r.forward = std::abs(k(a - 1, b - 1));
    r.backward = std::abs(k(b - 1, a - 1));
    r.nonreciprocal = std::abs(r.forward - r.backward) > kCouplingTol;
    r.unidirectional = (r.forward < kCouplingTol) != (r.backward < kCouplingTol);
    return r;
}

std::array<cplx, kModes> linear_stability(const CircuitConfig& config, const CouplingMatrix& k) {
    const cplx i{0.0, 1.0};
    Eigen::Matrix3cd m;
    for (int r = 0; r < kModes; ++r) {
        for (int c = 0; c < kModes; ++c) {
            m(r, c) = -i * k(r, c);
        }
        m(r, r) += i * config.microwave_detuning(r) - config.gamma;
    }
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> solver(m, false);
    const auto& ev = solver.eigenvalues();
    return {ev(0), ev(1), ev(2)};
}

bool has_linear_gain(const std::array<cplx, kModes>& eigenvalues) {
    for (const auto& e : eigenvalues) {
        if (e.real() > 0.0) {
            return true;
        }
    }
    return false;
}

}  // namespace omsync
