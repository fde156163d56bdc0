#include "omsync/analysis.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace omsync {

namespace {

// FFTW planning is not thread-safe; execution with distinct buffers is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwBuffers {
    explicit FftwBuffers(std::size_t n)
        : n(n),
          in(fftw_alloc_real(n)),
          out(fftw_alloc_complex(n / 2 + 1)) {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    }
    ~FftwBuffers() {
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(plan);
        }
        fftw_free(in);
        fftw_free(out);
    }
    FftwBuffers(const FftwBuffers&) = delete;
    FftwBuffers& operator=(const FftwBuffers&) = delete;

    std::size_t n;
    double* in;
    fftw_complex* out;
    fftw_plan plan{};
};

std::vector<double> power_of(FftwBuffers& fft, const std::vector<double>& x) {
    const auto w = windowed(x);
    std::copy(w.begin(), w.end(), fft.in);
    fftw_execute(fft.plan);
    const std::size_t n = fft.n;
    const std::size_t half = n / 2;
    std::vector<double> p(half + 1);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k <= half; ++k) {
        const double re = fft.out[k][0];
        const double im = fft.out[k][1];
        const bool edge = k == 0 || (n % 2 == 0 && k == half);
        p[k] = (edge ? 1.0 : 2.0) * (re * re + im * im) * inv_n;
    }
    return p;
}

bool near_multiple(double f, double base, double tol, int& multiple) {
    const double r = f / base;
    const long m = std::lround(r);
    if (m < 1) {
        return false;
    }
    multiple = static_cast<int>(m);
    return std::abs(f - static_cast<double>(m) * base) <= tol;
}

}  // namespace

std::string signal_name(Signal s) {
    switch (s) {
        case Signal::I1: return "I1";
        case Signal::I2: return "I2";
        case Signal::I3: return "I3";
        case Signal::q1: return "q1";
        case Signal::q2: return "q2";
        case Signal::q3: return "q3";
    }
    return "?";
}

std::vector<Signal> intensity_signals() { return {Signal::I1, Signal::I2, Signal::I3}; }

std::vector<Signal> all_signals() {
    return {Signal::I1, Signal::I2, Signal::I3, Signal::q1, Signal::q2, Signal::q3};
}

std::size_t Spectrum::column(Signal s) const {
    const auto it = std::find(signals.begin(), signals.end(), s);
    if (it == signals.end()) {
        throw std::out_of_range("spectrum has no column " + signal_name(s));
    }
    return static_cast<std::size_t>(it - signals.begin());
}

const std::vector<double>& signal_samples(const Trajectory& traj, Signal s) {
    const int idx = static_cast<int>(s);
    return idx < kModes ? traj.intensity(idx) : traj.displacement(idx - kModes);
}

std::vector<double> windowed(const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    std::vector<double> out(n);
    if (n == 0) {
        return out;
    }
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    const double denom = static_cast<double>(n);  // periodic Hann
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / denom);
        out[i] = w * (samples[i] - mean);
    }
    return out;
}

std::vector<double> one_sided_power(const std::vector<double>& samples) {
    if (samples.size() < 2) {
        throw std::invalid_argument("power spectrum needs at least 2 samples");
    }
    FftwBuffers fft(samples.size());
    return power_of(fft, samples);
}

Spectrum power_spectrum(const Trajectory& traj, const std::vector<Signal>& signals) {
    const std::size_t n = traj.size();
    if (n < kMinSteadySamples) {
        throw std::invalid_argument("power_spectrum: " + std::to_string(n) + " samples, need " +
                                    std::to_string(kMinSteadySamples));
    }
    if (!(traj.spacing() > 0.0) || !std::isfinite(traj.spacing())) {
        throw std::invalid_argument("power_spectrum: non-uniform or invalid sample spacing");
    }
    Spectrum spec;
    spec.signals = signals;
    const std::size_t half = n / 2;
    spec.f_over_f0.resize(half + 1);
    const double df = 2.0 * kPi / (static_cast<double>(n) * traj.spacing());
    for (std::size_t k = 0; k <= half; ++k) {
        spec.f_over_f0[k] = df * static_cast<double>(k);
    }
    FftwBuffers fft(n);
    for (Signal s : signals) {
        spec.power.push_back(power_of(fft, signal_samples(traj, s)));
    }
    return spec;
}

PeakList dominant_peaks(const Spectrum& spec, std::size_t column, const Thresholds& th) {
    if (column >= spec.power.size() || spec.power[column].size() < 3) {
        throw std::invalid_argument("dominant_peaks: empty spectrum");
    }
    const auto& p = spec.power[column];
    const double global = *std::max_element(p.begin() + 1, p.end());
    PeakList peaks;
    if (!(global > 0.0)) {
        return peaks;
    }
    const double floor = th.noise_floor * global;
    const double df = spec.bin_width();
    for (std::size_t k = 1; k + 1 < p.size(); ++k) {
        if (!(p[k] > p[k - 1] && p[k] >= p[k + 1])) {
            continue;
        }
        if (p[k] <= floor || p[k] / global < th.min_prominence) {
            continue;
        }
        double offset = 0.0;
        if (p[k - 1] > 0.0 && p[k + 1] > 0.0) {
            const double l = std::log(p[k - 1]);
            const double c = std::log(p[k]);
            const double r = std::log(p[k + 1]);
            const double denom = l - 2.0 * c + r;
            if (denom < 0.0) {
                offset = std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
            }
        }
        peaks.push_back({spec.f_over_f0[k] + offset * df, p[k], p[k] / global, k});
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        return a.power != b.power ? a.power > b.power : a.bin < b.bin;
    });
    return peaks;
}

std::string state_name(SyncState s) {
    switch (s) {
        case SyncState::Independent: return "Independent";
        case SyncState::Unsynchronized: return "Unsynchronized";
        case SyncState::Synchronized: return "Synchronized";
        case SyncState::PartialSync: return "PartialSync";
        case SyncState::OscillationDeath: return "OscillationDeath";
        case SyncState::Diverged: return "Diverged";
        case SyncState::TimedOut: return "TimedOut";
    }
    return "?";
}

std::optional<SyncState> parse_state(const std::string& s) {
    for (auto st : {SyncState::Independent, SyncState::Unsynchronized, SyncState::Synchronized,
                    SyncState::PartialSync, SyncState::OscillationDeath, SyncState::Diverged,
                    SyncState::TimedOut}) {
        if (state_name(st) == s) {
            return st;
        }
    }
    return std::nullopt;
}

double relative_std(const std::vector<double>& x) {
    if (x.empty()) {
        return 0.0;
    }
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / n);
    return mean != 0.0 ? sd / std::abs(mean) : sd;
}

std::optional<std::pair<double, int>> harmonic_fundamental(const PeakList& peaks, double bin_width,
                                                           const Thresholds& th) {
    if (peaks.empty()) {
        return std::nullopt;
    }
    const double tol = th.sync_tolerance_bins * bin_width;
    const double top = peaks.front().frequency;
    auto fits = [&](double base, double min_prom) {
        for (const auto& pk : peaks) {
            if (pk.prominence < min_prom) {
                continue;
            }
            int m = 0;
            if (!near_multiple(pk.frequency, base, tol, m)) {
                return false;
            }
        }
        return true;
    };
    for (double min_prom : {0.0, th.secondary_prominence}) {
        for (int n = 1; n <= th.max_subharmonic; ++n) {
            const double base = top / n;
            if (base < th.min_fundamental_bins * bin_width) {
                break;
            }
            if (fits(base, min_prom)) {
                return std::make_pair(base, n);
            }
        }
    }
    return std::nullopt;
}

SyncClassification classify(const Spectrum& spectra, const Trajectory& traj, bool coupled,
                            const Thresholds& th) {
    SyncClassification out;
    const double bin = spectra.bin_width();
    const double tol = th.sync_tolerance_bins * bin;
    std::vector<int> live;
    for (int j = 0; j < kModes; ++j) {
        const Signal sig = static_cast<Signal>(j);
        ResonatorReport rep;
        rep.relative_std = relative_std(traj.intensity(j));
        rep.dead = rep.relative_std < th.death_relative_std;
        PeakList peaks = dominant_peaks(spectra, spectra.column(sig), th);
        if (!peaks.empty()) {
            rep.top_frequency = peaks.front().frequency;
            rep.frequency = rep.top_frequency;
        }
        if (!rep.dead && !peaks.empty()) {
            if (auto fund = harmonic_fundamental(peaks, bin, th)) {
                rep.periodic = true;
                rep.frequency = fund->first;
                rep.harmonic_order = fund->second;
            }
            live.push_back(j);
        }
        out.evidence.push_back(std::move(peaks));
        out.resonators.push_back(rep);
    }

    if (live.empty()) {
        out.state = SyncState::OscillationDeath;
        return out;
    }

    // Two periodic resonators agree when either their fundamentals or their strongest
    // lines coincide; the second case covers members whose spectra lack odd harmonics.
    auto agree = [&](int a, int b) {
        const auto& ra = out.resonators[a];
        const auto& rb = out.resonators[b];
        return ra.periodic && rb.periodic &&
               (std::abs(ra.frequency - rb.frequency) <= tol ||
                std::abs(ra.top_frequency - rb.top_frequency) <= tol);
    };
    auto group_freq = [&](const std::vector<int>& group) {
        double f = out.resonators[group.front()].frequency;
        for (int j : group) f = std::min(f, out.resonators[j].frequency);
        return f;
    };
    auto to_labels = [](const std::vector<int>& group) {
        std::vector<int> labels;
        for (int j : group) labels.push_back(j + 1);
        return labels;
    };

    // Largest group of harmonic (periodic) resonators sharing a fundamental.
    std::vector<int> best;
    for (int anchor : live) {
        if (!out.resonators[anchor].periodic) continue;
        std::vector<int> group;
        for (int j : live) {
            if (out.resonators[j].periodic && agree(anchor, j)) group.push_back(j);
        }
        if (group.size() > best.size()) best = group;
    }

    const bool all_live = best.size() == live.size();
    const bool any_dead = live.size() < static_cast<std::size_t>(kModes);
    if (!best.empty() && all_live && (best.size() >= 2 || any_dead)) {
        out.state = any_dead ? SyncState::PartialSync : SyncState::Synchronized;
        out.sync_frequency = group_freq(best);
        out.members = to_labels(best);
        return out;
    }
    if (best.size() >= 2) {
        out.state = SyncState::PartialSync;
        const double f = group_freq(best);
        out.sync_frequency = f;
        out.members = to_labels(best);
        for (int other : live) {
            if (std::find(best.begin(), best.end(), other) != best.end()) continue;
            const double ref = out.resonators[other].frequency;
            for (int n = 2; n <= th.max_subharmonic; ++n) {
                if (std::abs(f - ref / n) <= tol) {
                    out.subharmonic_order = n;
                    out.subharmonic_reference = other + 1;
                    break;
                }
            }
            if (out.subharmonic_reference) break;
        }
        return out;
    }
    out.state = coupled ? SyncState::Unsynchronized : SyncState::Independent;
    return out;
}

std::optional<double> sideband_spacing(const PeakList& peaks) {
    if (peaks.size() < 3) {
        return std::nullopt;
    }
    std::vector<double> f;
    for (const auto& p : peaks) f.push_back(p.frequency);
    std::sort(f.begin(), f.end());
    std::vector<double> gaps;
    for (std::size_t i = 1; i < f.size(); ++i) gaps.push_back(f[i] - f[i - 1]);
    std::vector<double> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    if (!(median > 0.0)) {
        return std::nullopt;
    }
    for (double g : gaps) {
        if (std::abs(g - median) > 0.1 * median) {
            return std::nullopt;
        }
    }
    return median;
}

std::vector<std::pair<double, double>> lissajous(const Trajectory& traj, Signal x, Signal y) {
    const auto& xs = signal_samples(traj, x);
    const auto& ys = signal_samples(traj, y);
    std::vector<std::pair<double, double>> pts(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        pts[i] = {xs[i], ys[i]};
    }
    return pts;
}

namespace {
double coordinate_range(const std::vector<std::pair<double, double>>& pts) {
    if (pts.empty()) return 0.0;
    auto [xmin, xmax] = std::minmax_element(pts.begin(), pts.end(),
                                            [](auto& a, auto& b) { return a.first < b.first; });
    auto [ymin, ymax] = std::minmax_element(pts.begin(), pts.end(),
                                            [](auto& a, auto& b) { return a.second < b.second; });
    return std::max(xmax->first - xmin->first, ymax->second - ymin->second);
}
}  // namespace

double closure_gap(const std::vector<std::pair<double, double>>& points, double period_samples) {
    const auto whole = static_cast<std::size_t>(std::floor(period_samples));
    if (!(period_samples > 0.0) || points.size() <= whole + 1) {
        return std::numeric_limits<double>::infinity();
    }
    const double range = coordinate_range(points);
    if (!(range > 0.0)) {
        return 0.0;
    }
    // The period is generally not a whole number of samples; compare against the
    // linearly interpolated point one period later.
    const double frac = period_samples - static_cast<double>(whole);
    double worst = 0.0;
    for (std::size_t i = 0; i + whole + 1 < points.size(); ++i) {
        const auto& p = points[i];
        const auto& q0 = points[i + whole];
        const auto& q1 = points[i + whole + 1];
        const double qx = q0.first + frac * (q1.first - q0.first);
        const double qy = q0.second + frac * (q1.second - q0.second);
        worst = std::max(worst, std::hypot(p.first - qx, p.second - qy));
    }
    return worst / range;
}

double max_consecutive_gap(const std::vector<std::pair<double, double>>& points) {
    const double range = coordinate_range(points);
    if (!(range > 0.0)) {
        return 0.0;
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        worst = std::max(worst, std::hypot(points[i].first - points[i - 1].first,
                                           points[i].second - points[i - 1].second));
    }
    return worst / range;
}

}  // namespace omsync
