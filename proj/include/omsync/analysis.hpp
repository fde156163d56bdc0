// analysis.hpp: power spectra, peak detection and oscillation-state classification

#pragma once

#include "omsync/dynamics.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace omsync {

/// Analyzed signals. Intensities I_j = |a_j|^2 and displacements q_j = Re(b_j).
enum class Signal { I1, I2, I3, q1, q2, q3 };

std::string signal_name(Signal s);
std::vector<Signal> intensity_signals();
std::vector<Signal> all_signals();

/// One-sided power spectra on an f/f0 axis, where f0 is the central mechanical frequency
/// (a unit angular frequency in tau). Bin k sits at f/f0 = 2 pi k / (N dtau).
struct Spectrum {
    std::vector<double> f_over_f0;
    std::vector<Signal> signals;
    std::vector<std::vector<double>> power;  // power[column][bin]

    double bin_width() const { return f_over_f0.size() > 1 ? f_over_f0[1] - f_over_f0[0] : 0.0; }
    std::size_t bins() const { return f_over_f0.size(); }
    /// Column index of `s`; throws std::out_of_range if the signal was not analyzed.
    std::size_t column(Signal s) const;
};

/// Mean-subtracted, Hann-windowed, one-sided power. With w the window and x the signal,
/// sum_k power[k] == sum_n (w[n] (x[n] - mean))^2.
Spectrum power_spectrum(const Trajectory& traj, const std::vector<Signal>& signals);

/// Same transform applied to an arbitrary uniformly sampled series.
std::vector<double> one_sided_power(const std::vector<double>& samples);
/// Hann-windowed, mean-subtracted copy of `samples` (the sequence whose energy the power sums to).
std::vector<double> windowed(const std::vector<double>& samples);

struct Peak {
    double frequency{0.0};   // f/f0, refined by 3-point parabolic interpolation
    double power{0.0};       // power in the peak bin
    double prominence{0.0};  // power / global maximum of the column
    std::size_t bin{0};
};

using PeakList = std::vector<Peak>;

struct Thresholds {
    double sync_tolerance_bins{2.0};
    double secondary_prominence{0.20};
    double noise_floor{1e-6};
    double death_relative_std{1e-4};
    double min_prominence{0.05};
    int max_subharmonic{16};
    double min_fundamental_bins{20.0};  // slower "fundamentals" make any line look harmonic
};

/// Local maxima (DC excluded) above noise_floor * max and with prominence >= min_prominence,
/// sorted by descending power. Throws std::invalid_argument for an empty column.
PeakList dominant_peaks(const Spectrum& spec, std::size_t column, const Thresholds& th = {});

enum class SyncState { Independent, Unsynchronized, Synchronized, PartialSync, OscillationDeath, Diverged, TimedOut };

std::string state_name(SyncState s);
std::optional<SyncState> parse_state(const std::string& s);

/// Per-resonator summary used by the classifier.
struct ResonatorReport {
    bool dead{false};
    double relative_std{0.0};
    double top_frequency{0.0};  // frequency of the strongest peak (0 if none)
    double frequency{0.0};      // fundamental when the spectrum is harmonic, else top_frequency
    int harmonic_order{0};      // top_frequency / frequency; 0 if the spectrum is not harmonic
    bool periodic{false};
};

struct SyncClassification {
    SyncState state{SyncState::Unsynchronized};
    std::optional<double> sync_frequency;
    std::vector<int> members;  // 1-based
    int subharmonic_order{1};
    std::optional<int> subharmonic_reference;  // 1-based resonator the order is measured against
    std::vector<PeakList> evidence;            // one list per resonator intensity
    std::vector<ResonatorReport> resonators;
    std::string detail;                        // diagnostic text for diverged/timed-out points
};

/// Relative standard deviation std(x) / |mean(x)| (std(x) when the mean vanishes).
double relative_std(const std::vector<double>& x);

/// Fundamental frequency of a harmonic peak set: the largest f = top / N (N <= max_subharmonic)
/// such that every listed peak lies on an integer multiple of f. Tries all listed peaks
/// first, then only those above the secondary-prominence threshold.
std::optional<std::pair<double, int>> harmonic_fundamental(const PeakList& peaks, double bin_width,
                                                           const Thresholds& th = {});

/// `coupled` is false when the coupling matrix is identically zero.
SyncClassification classify(const Spectrum& intensity_spectra, const Trajectory& traj, bool coupled,
                            const Thresholds& th = {});

/// Median spacing of consecutive peaks (sorted by frequency) when all spacings agree within 10%.
std::optional<double> sideband_spacing(const PeakList& peaks);

/// Ordered (x, y) samples of two signals, no smoothing.
std::vector<std::pair<double, double>> lissajous(const Trajectory& traj, Signal x, Signal y);

/// Max distance between points one period apart (fractional periods interpolated), divided
/// by the larger coordinate range. A closed Lissajous figure gives a value near zero.
double closure_gap(const std::vector<std::pair<double, double>>& points, double period_samples);

/// Largest distance between consecutive points, divided by the larger coordinate range.
double max_consecutive_gap(const std::vector<std::pair<double, double>>& points);

const std::vector<double>& signal_samples(const Trajectory& traj, Signal s);

}  // namespace omsync
