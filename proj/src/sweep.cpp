#include "omsync/sweep.hpp"

#include "omsync/export.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace omsync {

using nlohmann::json;
namespace fs = std::filesystem;

std::size_t grid_size(const std::vector<SweepAxis>& axes) {
    std::size_t n = axes.empty() ? 0 : 1;
    for (const auto& ax : axes) {
        n *= ax.count;
    }
    return n;
}

std::vector<std::size_t> grid_index(const std::vector<SweepAxis>& axes, std::size_t flat) {
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
        idx[k] = flat % axes[k].count;
        flat /= axes[k].count;
    }
    return idx;
}

RunConfig point_config(const RunConfig& spec, const std::vector<std::size_t>& grid) {
    RunConfig cfg = spec;
    for (std::size_t k = 0; k < spec.axes.size(); ++k) {
        set_parameter(cfg, spec.axes[k].name, spec.axes[k].value(grid[k]));
    }
    cfg.axes.clear();
    return cfg;
}

namespace {

std::vector<std::vector<double>> pooled_spectrogram(const Spectrum& spec) {
    std::size_t keep = 0;
    while (keep < spec.bins() && spec.f_over_f0[keep] <= kSpectrogramMaxF) {
        ++keep;
    }
    const std::size_t factor = std::max<std::size_t>(1, (keep + kSpectrogramBins - 1) / kSpectrogramBins);
    const std::size_t out_bins = (keep + factor - 1) / factor;
    std::vector<std::vector<double>> rows(out_bins, std::vector<double>(1 + spec.power.size(), 0.0));
    for (std::size_t b = 0; b < out_bins; ++b) {
        const std::size_t lo = b * factor, hi = std::min(keep, lo + factor);
        rows[b][0] = 0.5 * (spec.f_over_f0[lo] + spec.f_over_f0[hi - 1]);
        for (std::size_t c = 0; c < spec.power.size(); ++c) {
            double m = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                m = std::max(m, spec.power[c][k]);
            }
            rows[b][1 + c] = m;
        }
    }
    return rows;
}

}  // namespace

SyncClassification run_point(const RunConfig& cfg, std::vector<std::vector<double>>* spectrogram) {
    const auto K = cfg.coupling();
    const auto plan = cfg.resolved_plan();
    IntegrateOptions opts;
    opts.deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(cfg.point_budget_s));
    SyncClassification cls;
    Trajectory traj;
    try {
        traj = integrate(plan, cfg.circuit, K, opts);
    } catch (const DivergenceError& e) {
        cls.state = SyncState::Diverged;
        cls.detail = e.what();
        return cls;
    } catch (const StepUnderflowError& e) {
        cls.state = SyncState::Diverged;
        cls.detail = e.what();
        return cls;
    } catch (const TimeoutError& e) {
        cls.state = SyncState::TimedOut;
        cls.detail = e.what();
        return cls;
    }
    const auto steady = steady_window(traj, plan.discard_fraction);
    const auto spec = power_spectrum(steady, intensity_signals());
    if (spectrogram) {
        *spectrogram = pooled_spectrogram(spec);
    }
    return classify(spec, steady, !K.is_zero(kCouplingTol), cfg.thresholds);
}

json record_json(const PointRecord& r, const Thresholds& th) {
    return {{"index", r.index},
            {"grid", r.grid},
            {"coords", r.coords},
            {"classification", classification_json(r.classification, th)}};
}

PointRecord record_from_json(const json& j) {
    PointRecord r;
    r.index = j.at("index").get<std::size_t>();
    r.grid = j.at("grid").get<std::vector<std::size_t>>();
    r.coords = j.at("coords").get<std::vector<double>>();
    r.classification = classification_from_json(j.at("classification"));
    r.elapsed_s = j.value("elapsed_s", 0.0);
    return r;
}

std::string sweep_spec_text(const RunConfig& spec) {
    return write_config(spec);
}

namespace {

std::string phase_of(const SyncClassification& c);

void write_points_csv(const std::string& path, const SweepResult& res) {
    std::ostringstream o;
    o.precision(17);
    o << "index";
    for (const auto& ax : res.axes) {
        o << ',' << ax.label();
    }
    o << ",state,phase,sync_frequency,members,subharmonic_order,top_f1,top_f2,top_f3\n";
    for (const auto& r : res.records) {
        const auto& c = r.classification;
        o << r.index;
        for (double x : r.coords) {
            o << ',' << x;
        }
        o << ',' << state_name(c.state) << ',' << phase_of(c) << ',';
        if (c.sync_frequency) {
            o << *c.sync_frequency;
        }
        o << ',';
        for (std::size_t i = 0; i < c.members.size(); ++i) {
            o << (i ? " " : "") << c.members[i];
        }
        o << ',' << c.subharmonic_order;
        for (int j = 0; j < kModes; ++j) {
            o << ',';
            if (j < static_cast<int>(c.resonators.size())) {
                o << c.resonators[j].top_frequency;
            }
        }
        o << '\n';
    }
    write_file_atomic(path, o.str());
}

void merge_spectra(const std::string& dir, const SweepResult& res) {
    std::ofstream out(dir + "/spectra.csv.tmp", std::ios::trunc);
    out << "index,f_over_f0,S_I1,S_I2,S_I3\n";
    for (const auto& r : res.records) {
        std::ifstream in(dir + "/spectra/point_" + std::to_string(r.index) + ".csv");
        std::string line;
        while (std::getline(in, line)) {
            out << r.index << ',' << line << '\n';
        }
    }
    out.close();
    fs::rename(dir + "/spectra.csv.tmp", dir + "/spectra.csv");
}

json manifest(const RunConfig& spec, const SweepOptions& opts, const std::string& hash, std::size_t done) {
    json axes = json::array();
    for (const auto& ax : spec.axes) {
        axes.push_back({{"name", ax.name},
                        {"pi_units", ax.pi_units},
                        {"start", ax.start},
                        {"stop", ax.stop},
                        {"count", ax.count}});
    }
    json m = manifest_json(spec, opts.overrides, "sweep");
    m["spec_sha256"] = hash;
    m["axes"] = axes;
    m["points"] = grid_size(spec.axes);
    m["completed"] = done;
    m["workers"] = opts.workers;
    return m;
}

}  // namespace

SweepResult run_sweep(const RunConfig& spec, const SweepOptions& opts) {
    if (spec.axes.empty()) {
        throw std::invalid_argument("axis1: a sweep needs at least one axis");
    }
    spec.validate();
    const std::size_t total = grid_size(spec.axes);
    const std::string hash = sha256_hex(sweep_spec_text(spec));
    const bool persist = !opts.out_dir.empty();
    const std::string dir = opts.out_dir;

    std::map<std::size_t, PointRecord> done;
    std::ofstream records_log, checkpoint;
    if (persist) {
        fs::create_directories(dir);
        if (spec.outputs.spectrogram) {
            fs::create_directories(dir + "/spectra");
        }
        const std::string ck = dir + "/checkpoint.log";
        if (fs::exists(ck)) {
            std::ifstream in(ck);
            std::string tag, stored;
            in >> tag >> stored;
            if (tag != "spec_sha256" || stored != hash) {
                throw std::runtime_error("checkpoint in " + dir + " belongs to a different sweep spec (" + stored +
                                         " != " + hash + ")");
            }
            std::set<std::size_t> indices;
            std::size_t idx = 0;
            while (in >> idx) {
                indices.insert(idx);
            }
            std::ifstream rec(dir + "/records.jsonl");
            std::string line;
            while (std::getline(rec, line)) {
                if (line.empty()) {
                    continue;
                }
                json j;
                try {
                    j = json::parse(line);
                } catch (const json::parse_error&) {
                    continue;  // torn final line of an interrupted run
                }
                auto r = record_from_json(j);
                if (indices.count(r.index)) {
                    done[r.index] = std::move(r);
                }
            }
            checkpoint.open(ck, std::ios::app);
        } else {
            checkpoint.open(ck, std::ios::trunc);
            checkpoint << "spec_sha256 " << hash << "\n";
            checkpoint.flush();
            std::ofstream(dir + "/records.jsonl", std::ios::trunc).close();
        }
        const bool torn = [&] {
            std::ifstream rec(dir + "/records.jsonl", std::ios::binary | std::ios::ate);
            if (!rec || rec.tellg() <= 0) {
                return false;
            }
            rec.seekg(-1, std::ios::end);
            return rec.get() != '\n';
        }();
        records_log.open(dir + "/records.jsonl", std::ios::app);
        if (torn) {
            records_log << '\n';  // keep new records off the partial line
        }
        if (!checkpoint || !records_log) {
            throw std::ios_base::failure("cannot write to " + dir);
        }
        write_file_atomic(dir + "/manifest.json", manifest(spec, opts, hash, done.size()).dump(2) + "\n");
    }

    SweepResult res;
    res.axes = spec.axes;
    res.resumed = done.size();

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < total; ++i) {
        if (!done.count(i)) {
            pending.push_back(i);
        }
    }
    if (opts.stop_after && pending.size() > *opts.stop_after) {
        pending.resize(*opts.stop_after);
    }

    std::mutex writer;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto work = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= pending.size()) {
                return;
            }
            PointRecord r;
            r.index = pending[k];
            r.grid = grid_index(spec.axes, r.index);
            for (std::size_t a = 0; a < spec.axes.size(); ++a) {
                r.coords.push_back(spec.axes[a].coordinate(r.grid[a]));
            }
            std::vector<std::vector<double>> spectro;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                r.classification =
                    run_point(point_config(spec, r.grid), spec.outputs.spectrogram ? &spectro : nullptr);
            } catch (...) {
                std::lock_guard lock(writer);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = pending.size();
                return;
            }
            r.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            std::lock_guard lock(writer);
            if (persist) {
                if (!spectro.empty()) {
                    std::ostringstream s;
                    s.precision(17);
                    for (const auto& row : spectro) {
                        for (std::size_t c = 0; c < row.size(); ++c) {
                            s << (c ? "," : "") << row[c];
                        }
                        s << '\n';
                    }
                    write_file_atomic(dir + "/spectra/point_" + std::to_string(r.index) + ".csv", s.str());
                }
                auto j = record_json(r, spec.thresholds);
                j["elapsed_s"] = r.elapsed_s;
                records_log << j.dump() << '\n';
                records_log.flush();
                checkpoint << r.index << '\n';
                checkpoint.flush();
            }
            done[r.index] = std::move(r);
            ++res.computed;
            if (opts.progress) {
                opts.progress(done.size(), total);
            }
        }
    };

    const std::size_t nthreads = std::max<std::size_t>(1, std::min(opts.workers, pending.size()));
    if (nthreads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) {
            pool.emplace_back(work);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    for (auto& [idx, r] : done) {
        res.records.push_back(r);
    }
    if (persist) {
        write_points_csv(dir + "/points.csv", res);
        if (spec.outputs.spectrogram) {
            merge_spectra(dir, res);
        }
        write_file_atomic(dir + "/manifest.json", manifest(spec, opts, hash, done.size()).dump(2) + "\n");
    }
    return res;
}

std::string phase_cell_name(PhaseCell c) {
    switch (c) {
        case PhaseCell::Sync: return "sync";
        case PhaseCell::Unsync: return "unsync";
        case PhaseCell::Death: return "death";
        case PhaseCell::Diverged: return "diverged";
        case PhaseCell::TimedOut: return "timeout";
    }
    return "?";
}

namespace {

PhaseCell cell_of(const SyncClassification& c) {
    switch (c.state) {
        case SyncState::Synchronized: return PhaseCell::Sync;
        case SyncState::OscillationDeath: return PhaseCell::Death;
        case SyncState::Diverged: return PhaseCell::Diverged;
        case SyncState::TimedOut: return PhaseCell::TimedOut;
        default: return PhaseCell::Unsync;
    }
}

std::string phase_of(const SyncClassification& c) {
    return phase_cell_name(cell_of(c));
}

}  // namespace

PhaseDiagram phase_diagram(const SweepResult& result) {
    if (result.axes.size() != 2) {
        throw std::invalid_argument("phase diagram needs a 2-D sweep, got " + std::to_string(result.axes.size()) +
                                    " axis");
    }
    PhaseDiagram d;
    d.row_axis = result.axes[0];
    d.col_axis = result.axes[1];
    d.cells.assign(d.row_axis.count, std::vector<PhaseCell>(d.col_axis.count, PhaseCell::Unsync));
    if (result.records.size() != d.row_axis.count * d.col_axis.count) {
        throw std::invalid_argument("phase diagram needs a complete sweep (" + std::to_string(result.records.size()) +
                                    " of " + std::to_string(d.row_axis.count * d.col_axis.count) + " points)");
    }
    for (const auto& r : result.records) {
        d.cells[r.grid[0]][r.grid[1]] = cell_of(r.classification);
    }
    return d;
}

void write_phase_csv(std::ostream& out, const PhaseDiagram& d) {
    out.precision(17);
    out << d.row_axis.label() << '\\' << d.col_axis.label();
    for (std::size_t c = 0; c < d.col_axis.count; ++c) {
        out << ',' << d.col_axis.coordinate(c);
    }
    out << '\n';
    for (std::size_t r = 0; r < d.row_axis.count; ++r) {
        out << d.row_axis.coordinate(r);
        for (std::size_t c = 0; c < d.col_axis.count; ++c) {
            out << ',' << phase_cell_name(d.cells[r][c]);
        }
        out << '\n';
    }
}

SweepResult load_sweep(const std::string& out_dir) {
    std::ifstream mf(out_dir + "/manifest.json");
    if (!mf) {
        throw std::ios_base::failure("no manifest.json in " + out_dir);
    }
    const json m = json::parse(mf);
    const RunConfig spec = parse_config(m.at("config").get<std::string>());
    SweepResult res;
    res.axes = spec.axes;

    std::set<std::size_t> indices;
    {
        std::ifstream ck(out_dir + "/checkpoint.log");
        std::string tag, hash;
        ck >> tag >> hash;
        std::size_t idx = 0;
        while (ck >> idx) {
            indices.insert(idx);
        }
    }
    std::map<std::size_t, PointRecord> recs;
    std::ifstream in(out_dir + "/records.jsonl");
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        try {
            auto r = record_from_json(json::parse(line));
            if (indices.count(r.index)) {
                recs[r.index] = std::move(r);
            }
        } catch (const json::parse_error&) {
        }
    }
    for (auto& [i, r] : recs) {
        res.records.push_back(std::move(r));
    }
    res.resumed = res.records.size();
    return res;
}

}  // namespace omsync
