// config.hpp: flat key=value run configuration, built-in presets and overrides

#pragma once

#include "omsync/analysis.hpp"
#include "omsync/dynamics.hpp"
#include "omsync/model.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace omsync {

/// Malformed or invalid configuration. key() names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& message)
        : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// One swept parameter. With pi_units the endpoints are multiples of pi.
struct SweepAxis {
    std::string name;  // J, theta, phi, g1..g3, phi1..phi3, delta, Delta, epsilon, gamma
    double start{0.0};
    double stop{0.0};
    std::size_t count{2};
    bool pi_units{false};

    /// Parameter value (radians for angles) at grid index i.
    double value(std::size_t i) const;
    /// Coordinate in the units the axis was written in.
    double coordinate(std::size_t i) const;
    std::string label() const { return pi_units ? name + "_pi" : name; }

    bool operator==(const SweepAxis&) const = default;
};

struct SweepOutputs {
    bool classification{true};
    bool peaks{true};
    bool spectrogram{false};

    bool operator==(const SweepOutputs&) const = default;
};

/// Everything a run needs: circuit, couplers, numerics, classifier thresholds and,
/// for sweeps, the axes.
struct RunConfig {
    std::string name;
    CircuitConfig circuit;
    EnvCoupling env;
    CoherentCoupling coh;
    CircuitPreset preset{CircuitPreset::General};
    SimPlan plan;
    std::optional<std::uint64_t> seed;  // perturbed initial state when set
    Thresholds thresholds;
    std::vector<SweepAxis> axes;
    SweepOutputs outputs;
    double point_budget_s{120.0};

    CouplingMatrix coupling() const { return build_for_preset(preset, env, coh); }
    /// plan with the initial state replaced by the seeded perturbation when a seed is set.
    SimPlan resolved_plan() const;
    /// Throws ConfigError.
    void validate() const;
};

bool same_parameters(const RunConfig& a, const RunConfig& b);

/// Ordered key=value pairs as read from a file. Later duplicates are rejected.
using KeyValues = std::map<std::string, std::string>;

/// Parses the dialect: one key = value per line, '#' starts a comment, blank lines ignored.
KeyValues parse_key_values(const std::string& text);

/// Applies "key=value" overrides on top of file values. An override of theta_pi replaces a
/// file value of theta and vice versa.
void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides);

RunConfig config_from_key_values(const KeyValues& kv);
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Canonical text form. Parsing it back yields an identical parameter set.
std::string write_config(const RunConfig& cfg);

/// Sets a sweepable parameter by axis name (angles in radians).
void set_parameter(RunConfig& cfg, const std::string& name, double value);
bool is_sweepable(const std::string& name);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
RunConfig preset_config(const std::string& name);

}  // namespace omsync
