// export.hpp: CSV/JSON writers, manifests and content hashing

#pragma once

#include "omsync/analysis.hpp"
#include "omsync/config.hpp"
#include "omsync/dynamics.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace omsync {

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr int kSchemaVersion = 1;

/// Header: tau, re/im of a1..a3 and b1..b3, I1..I3, q1..q3. 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Reads what write_trajectory_csv wrote. Throws std::invalid_argument on a malformed file or
/// non-uniform sampling.
Trajectory read_trajectory_csv(std::istream& in);
/// Header: f_over_f0 followed by S_<signal> for every analyzed column.
void write_spectrum_csv(std::ostream& out, const Spectrum& spec);

nlohmann::json peaks_json(const PeakList& peaks);
nlohmann::json thresholds_json(const Thresholds& th);
nlohmann::json classification_json(const SyncClassification& cls, const Thresholds& th);
/// Inverse of classification_json for the fields a sweep record keeps.
SyncClassification classification_from_json(const nlohmann::json& j);

/// Exact resolved parameters, overrides in order of application, tool and schema version.
nlohmann::json manifest_json(const RunConfig& cfg, const std::vector<std::string>& overrides,
                             const std::string& command);

std::string sha256_hex(const std::string& data);

/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace omsync
