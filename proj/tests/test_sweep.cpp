#include "omsync/sweep.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace omsync;
namespace fs = std::filesystem;

namespace {

// Short runs: 10000 samples at spacing 0.05, half kept.
RunConfig small_sweep() {
    return parse_config(
        "J = 0.11\ntheta_pi = 0.5\nphi_pi = 0.5\n"
        "t_total = 500\ndt = 0.01\nsample_stride = 5\n"
        "axis1 = J 0 0.11 2\naxis2 = theta_pi 0.2 0.5 2\n");
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("omsync_" + tag)) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string dump_records(const SweepResult& r, const Thresholds& th) {
    std::string s;
    for (const auto& rec : r.records) s += record_json(rec, th).dump() + "\n";
    return s;
}

std::set<std::size_t> checkpoint_indices(const fs::path& dir) {
    std::ifstream in(dir / "checkpoint.log");
    std::string tag, hash;
    in >> tag >> hash;
    std::set<std::size_t> out;
    std::size_t i = 0;
    while (in >> i) out.insert(i);
    return out;
}

}  // namespace

TEST_CASE("grid indexing is row-major") {
    std::vector<SweepAxis> axes{{"J", 0, 1, 3, false}, {"theta", 0, 1, 4, true}};
    CHECK(grid_size(axes) == 12);
    CHECK(grid_index(axes, 0) == std::vector<std::size_t>{0, 0});
    CHECK(grid_index(axes, 5) == std::vector<std::size_t>{1, 1});
    CHECK(grid_index(axes, 11) == std::vector<std::size_t>{2, 3});
    RunConfig spec;
    spec.axes = axes;
    auto p = point_config(spec, {2, 3});
    CHECK(p.env.J() == 1.0);
    CHECK(p.env.theta() == doctest::Approx(kPi));
    CHECK(p.axes.empty());
}

TEST_CASE("in-memory sweep covers the grid and ignores the worker count") {
    const auto spec = small_sweep();
    SweepOptions one;
    const auto r1 = run_sweep(spec, one);
    REQUIRE(r1.records.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(r1.records[i].index == i);
        CHECK(r1.records[i].grid == grid_index(spec.axes, i));
    }
    CHECK(r1.records[2].coords == std::vector<double>{0.11, 0.2});
    CHECK(r1.computed == 4);

    SweepOptions four;
    four.workers = 4;
    const auto r4 = run_sweep(spec, four);
    CHECK(dump_records(r1, spec.thresholds) == dump_records(r4, spec.thresholds));
}

TEST_CASE("interrupted sweep resumes to the same result") {
    const auto spec = small_sweep();
    TempDir full("sweep_full"), part("sweep_part");

    SweepOptions o;
    o.out_dir = full.str();
    const auto uninterrupted = run_sweep(spec, o);

    SweepOptions p;
    p.out_dir = part.str();
    p.workers = 2;
    p.stop_after = 2;
    const auto first = run_sweep(spec, p);
    CHECK(first.computed == 2);
    CHECK(first.records.size() == 2);
    const auto before = checkpoint_indices(part.path);
    CHECK(before.size() == 2);

    // a torn trailing line from a crash must not break the resume
    {
        std::ofstream rec(part.path / "records.jsonl", std::ios::app);
        rec << "{\"index\": 3, \"grid\"";
    }

    p.stop_after.reset();
    const auto second = run_sweep(spec, p);
    CHECK(second.resumed == 2);
    CHECK(second.computed == 2);
    const auto after = checkpoint_indices(part.path);
    for (auto i : before) CHECK(after.count(i) == 1);
    CHECK(after.size() == 4);
    CHECK(dump_records(second, spec.thresholds) == dump_records(uninterrupted, spec.thresholds));

    const auto again = run_sweep(spec, p);
    CHECK(again.computed == 0);
    CHECK(again.resumed == 4);

    const auto loaded = load_sweep(part.str());
    CHECK(dump_records(loaded, spec.thresholds) == dump_records(uninterrupted, spec.thresholds));
    CHECK(fs::exists(part.path / "points.csv"));
    CHECK(fs::exists(part.path / "manifest.json"));

    auto changed = spec;
    changed.circuit.delta = 0.06;
    CHECK_THROWS_AS(run_sweep(changed, p), std::runtime_error);
}

TEST_CASE("1-D sweep writes a spectrogram") {
    auto spec = parse_config("J = 0.11\ntheta_pi = 0.5\nphi_pi = 0.5\nt_total = 500\ndt = 0.01\nsample_stride = 5\n"
                             "axis1 = J 0.1 0.11 2\n");
    TempDir d("sweep_1d");
    SweepOptions o;
    o.out_dir = d.str();
    run_sweep(spec, o);
    std::ifstream in(d.path / "spectra.csv");
    REQUIRE(in);
    std::string header;
    std::getline(in, header);
    CHECK(header.find("f_over_f0") != std::string::npos);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows > 100);
    CHECK(rows <= kSpectrogramBins);
    CHECK_THROWS_AS(phase_diagram(load_sweep(d.str())), std::invalid_argument);
}

TEST_CASE("phase diagram") {
    SweepResult res;
    res.axes = {{"theta", -1, 1, 2, true}, {"phi", 0, 1, 2, true}};
    const SyncState states[] = {SyncState::Synchronized, SyncState::PartialSync, SyncState::Diverged,
                                SyncState::OscillationDeath};
    for (std::size_t i = 0; i < 4; ++i) {
        PointRecord r;
        r.index = i;
        r.grid = grid_index(res.axes, i);
        r.coords = {res.axes[0].coordinate(r.grid[0]), res.axes[1].coordinate(r.grid[1])};
        r.classification.state = states[i];
        res.records.push_back(r);
    }
    const auto d = phase_diagram(res);
    CHECK(d.cells[0][0] == PhaseCell::Sync);
    CHECK(d.cells[0][1] == PhaseCell::Unsync);
    CHECK(d.cells[1][0] == PhaseCell::Diverged);
    CHECK(d.cells[1][1] == PhaseCell::Death);
    std::ostringstream o;
    write_phase_csv(o, d);
    CHECK(o.str().rfind("theta_pi\\phi_pi,0,1\n-1,", 0) == 0);
    CHECK(o.str().find("diverged") != std::string::npos);

    res.records.pop_back();
    CHECK_THROWS_AS(phase_diagram(res), std::invalid_argument);
    CHECK_THROWS_AS(run_sweep(RunConfig{}, SweepOptions{}), std::invalid_argument);
}

TEST_CASE("point failures are recorded, not thrown") {
    auto cfg = parse_config("J = 0.11\ntheta_pi = 0.5\nphi_pi = 0.5\nt_total = 500\ndt = 0.01\nsample_stride = 5\n"
                            "point_budget_s = 1e-6\n");
    CHECK(run_point(cfg).state == SyncState::TimedOut);
    auto hot = parse_config("J = 0.11\ntheta_pi = 0.5\nphi_pi = 0.5\nt_total = 5000\ndt = 0.5\nsample_stride = 1\n"
                            "G = 10\nepsilon = 1e6\n");
    const auto s = run_point(hot).state;
    CHECK(s == SyncState::Diverged);
}
