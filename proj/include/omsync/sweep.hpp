// sweep.hpp: parallel, resumable parameter sweeps and phase diagrams

#pragma once

#include "omsync/analysis.hpp"
#include "omsync/config.hpp"

#include <json.hpp>

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace omsync {

/// Spectrogram columns keep at most this many bins over f/f0 in [0, kSpectrogramMaxF].
inline constexpr std::size_t kSpectrogramBins = 4096;
inline constexpr double kSpectrogramMaxF = 2.5;

struct PointRecord {
    std::size_t index{0};
    std::vector<std::size_t> grid;  // per-axis index
    std::vector<double> coords;     // per-axis coordinate, in the axis' own units
    SyncClassification classification;
    double elapsed_s{0.0};          // not part of the determinism contract
};

/// Record fields that must agree bit for bit between runs (excludes timing).
nlohmann::json record_json(const PointRecord& r, const Thresholds& th);
PointRecord record_from_json(const nlohmann::json& j);

struct SweepResult {
    std::vector<SweepAxis> axes;
    std::vector<PointRecord> records;  // row-major over (axis1, axis2)
    std::size_t computed{0};           // points integrated by this call
    std::size_t resumed{0};            // points taken from the checkpoint
};

struct SweepOptions {
    std::size_t workers{1};
    std::string out_dir;               // empty: keep everything in memory
    std::vector<std::string> overrides;  // recorded in the manifest
    std::optional<std::size_t> stop_after;  // finish at most this many new points (interruption tests)
    std::function<void(std::size_t done, std::size_t total)> progress;
};

std::size_t grid_size(const std::vector<SweepAxis>& axes);
/// Row-major decomposition of a flat index into per-axis indices.
std::vector<std::size_t> grid_index(const std::vector<SweepAxis>& axes, std::size_t flat);

/// Configuration of one grid point.
RunConfig point_config(const RunConfig& spec, const std::vector<std::size_t>& grid);

/// Integrates and classifies one configuration, recording divergence and timeouts in the state.
/// When `spectrogram` is non-null it receives the max-pooled intensity spectra.
SyncClassification run_point(const RunConfig& cfg, std::vector<std::vector<double>>* spectrogram = nullptr);

/// Canonical text whose SHA-256 identifies the sweep in the checkpoint.
std::string sweep_spec_text(const RunConfig& spec);

/// Throws std::invalid_argument for a spec without axes; std::runtime_error when the checkpoint
/// in out_dir belongs to a different spec.
SweepResult run_sweep(const RunConfig& spec, const SweepOptions& opts);

enum class PhaseCell { Sync, Unsync, Death, Diverged, TimedOut };
std::string phase_cell_name(PhaseCell c);

struct PhaseDiagram {
    SweepAxis row_axis;
    SweepAxis col_axis;
    std::vector<std::vector<PhaseCell>> cells;  // cells[row][col]
};

/// Collapses every state except Synchronized into unsync (death, diverged and timed-out kept
/// as diagnostics). Throws std::invalid_argument for 1-D sweeps.
PhaseDiagram phase_diagram(const SweepResult& result);

void write_phase_csv(std::ostream& out, const PhaseDiagram& d);

/// Reads a finished or partial result directory.
SweepResult load_sweep(const std::string& out_dir);

}  // namespace omsync
