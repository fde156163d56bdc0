#include "omsync/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <system_error>

namespace omsync {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) {
        out.push_back(tok);
    }
    return out;
}

double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ConfigError(key, "expected a finite number, got '" + text + "'");
    }
    return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        return false;
    }
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

const std::set<std::string>& angle_keys() {
    static const std::set<std::string> keys{"theta", "phi", "phi1", "phi2", "phi3"};
    return keys;
}

// Base name of a key: "theta_pi" -> "theta".
std::string base_key(const std::string& key) {
    constexpr std::string_view suffix = "_pi";
    if (key.size() > suffix.size() && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const auto base = key.substr(0, key.size() - suffix.size());
        if (angle_keys().count(base)) {
            return base;
        }
    }
    return key;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "name", "preset", "delta", "Delta", "G", "epsilon", "gamma", "Gamma", "G_site",
        "J", "theta", "phi", "g1", "g2", "g3", "phi1", "phi2", "phi3",
        "t_total", "dt", "sample_stride", "discard_fraction", "adaptive", "rel_tol", "abs_tol", "seed",
        "sync_tolerance_bins", "secondary_prominence", "noise_floor", "death_relative_std",
        "min_prominence", "max_subharmonic", "min_fundamental_bins",
        "axis1", "axis2", "classification", "peaks", "spectrogram", "point_budget_s"};
    return keys;
}

void check_key(const std::string& key) {
    if (!known_keys().count(base_key(key))) {
        throw ConfigError(key, "unknown key");
    }
}

// Reads an angle given either as `key` (radians) or `key_pi` (multiples of pi).
std::optional<double> read_angle(const KeyValues& kv, const std::string& key) {
    auto rad = kv.find(key);
    auto pi = kv.find(key + "_pi");
    if (rad != kv.end() && pi != kv.end()) {
        throw ConfigError(key, "given both in radians and as " + key + "_pi");
    }
    if (rad != kv.end()) {
        return to_double(key, rad->second);
    }
    if (pi != kv.end()) {
        return to_double(pi->first, pi->second) * kPi;
    }
    return std::nullopt;
}

// Writes an angle in pi units when that representation reads back bit-exactly.
std::string angle_line(const std::string& key, double radians) {
    const std::string pi_text = fmt(radians / kPi);
    if (normalize_angle(std::stod(pi_text) * kPi) == radians) {
        return key + "_pi = " + pi_text + "\n";
    }
    return key + " = " + fmt(radians) + "\n";
}

SweepAxis parse_axis(const std::string& key, const std::string& text) {
    const auto tok = split_ws(text);
    if (tok.size() != 4) {
        throw ConfigError(key, "expected 'name start stop count', got '" + text + "'");
    }
    SweepAxis ax;
    const auto base = base_key(tok[0]);
    ax.pi_units = base != tok[0];
    ax.name = base;
    if (!is_sweepable(ax.name)) {
        throw ConfigError(key, "parameter '" + tok[0] + "' cannot be swept");
    }
    ax.start = to_double(key, tok[1]);
    ax.stop = to_double(key, tok[2]);
    ax.count = to_unsigned(key, tok[3]);
    if (ax.count < 2) {
        throw ConfigError(key, "count must be >= 2");
    }
    return ax;
}

}  // namespace

double SweepAxis::coordinate(std::size_t i) const {
    if (i + 1 == count) {
        return stop;
    }
    return start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
}

double SweepAxis::value(std::size_t i) const {
    const double c = coordinate(i);
    return pi_units ? c * kPi : c;
}

SimPlan RunConfig::resolved_plan() const {
    SimPlan p = plan;
    if (seed) {
        p.initial = perturbed_initial(circuit, *seed);
    }
    return p;
}

void RunConfig::validate() const {
    auto rethrow = [](const std::invalid_argument& e) {
        const std::string what = e.what();
        const auto colon = what.find(':');
        throw ConfigError(colon == std::string::npos ? "config" : what.substr(0, colon),
                          colon == std::string::npos ? what : trim(what.substr(colon + 1)));
    };
    try {
        circuit.validate();
        plan.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        rethrow(e);
    }
    if (!(env.J() >= 0.0)) {
        throw ConfigError("J", "must be >= 0");
    }
    for (int j = 0; j < kModes; ++j) {
        if (!(coh.g()[j] >= 0.0)) {
            throw ConfigError("g" + std::to_string(j + 1), "must be >= 0");
        }
    }
    const auto& t = thresholds;
    if (!(t.sync_tolerance_bins > 0.0)) throw ConfigError("sync_tolerance_bins", "must be > 0");
    if (!(t.secondary_prominence > 0.0 && t.secondary_prominence <= 1.0))
        throw ConfigError("secondary_prominence", "must be in (0, 1]");
    if (!(t.noise_floor >= 0.0 && t.noise_floor < 1.0)) throw ConfigError("noise_floor", "must be in [0, 1)");
    if (!(t.death_relative_std >= 0.0)) throw ConfigError("death_relative_std", "must be >= 0");
    if (!(t.min_prominence > 0.0 && t.min_prominence <= 1.0))
        throw ConfigError("min_prominence", "must be in (0, 1]");
    if (t.max_subharmonic < 1) throw ConfigError("max_subharmonic", "must be >= 1");
    if (!(t.min_fundamental_bins >= 0.0)) throw ConfigError("min_fundamental_bins", "must be >= 0");
    if (axes.size() > 2) {
        throw ConfigError("axis3", "at most two sweep axes");
    }
    if (axes.size() == 2 && axes[0].name == axes[1].name) {
        throw ConfigError("axis2", "swept parameters must be distinct");
    }
    if (!(point_budget_s > 0.0)) {
        throw ConfigError("point_budget_s", "must be > 0");
    }
}

bool same_parameters(const RunConfig& a, const RunConfig& b) {
    auto eq_state = [](const CircuitState& x, const CircuitState& y) { return x.a == y.a && x.b == y.b; };
    auto eq_th = [](const Thresholds& x, const Thresholds& y) {
        return x.sync_tolerance_bins == y.sync_tolerance_bins &&
               x.secondary_prominence == y.secondary_prominence && x.noise_floor == y.noise_floor &&
               x.death_relative_std == y.death_relative_std && x.min_prominence == y.min_prominence &&
               x.max_subharmonic == y.max_subharmonic && x.min_fundamental_bins == y.min_fundamental_bins;
    };
    const auto &c = a.circuit, &d = b.circuit;
    const auto &p = a.plan, &q = b.plan;
    return a.name == b.name && a.preset == b.preset && c.delta == d.delta && c.Delta == d.Delta &&
           c.G == d.G && c.epsilon == d.epsilon && c.gamma == d.gamma && c.Gamma == d.Gamma &&
           c.G_site == d.G_site && a.env.J() == b.env.J() && a.env.theta() == b.env.theta() &&
           a.env.phi() == b.env.phi() && a.coh.g() == b.coh.g() && a.coh.phase() == b.coh.phase() &&
           p.t_total == q.t_total && p.dt == q.dt && p.sample_stride == q.sample_stride &&
           p.discard_fraction == q.discard_fraction && p.adaptive == q.adaptive &&
           p.rel_tol == q.rel_tol && p.abs_tol == q.abs_tol && eq_state(p.initial, q.initial) &&
           a.seed == b.seed && eq_th(a.thresholds, b.thresholds) && a.axes == b.axes &&
           a.outputs == b.outputs && a.point_budget_s == b.point_budget_s;
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno), "missing key");
        }
        check_key(key);
        if (!kv.emplace(key, value).second) {
            throw ConfigError(key, "given twice");
        }
    }
    return kv;
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(o, "override must be key=value");
        }
        const auto key = trim(o.substr(0, eq));
        const auto value = trim(o.substr(eq + 1));
        check_key(key);
        const auto base = base_key(key);
        kv.erase(base);
        kv.erase(base + "_pi");
        kv[key] = value;
    }
}

RunConfig config_from_key_values(const KeyValues& kv) {
    RunConfig cfg;
    auto get = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto num = [&](const std::string& key, double& target) {
        if (auto v = get(key)) {
            target = to_double(key, *v);
        }
    };
    auto flag = [&](const std::string& key, bool& target) {
        if (auto v = get(key)) {
            target = to_bool(key, *v);
        }
    };

    if (auto v = get("name")) {
        cfg.name = *v;
    }
    if (auto v = get("preset")) {
        auto p = parse_preset(*v);
        if (!p) {
            throw ConfigError("preset", "unknown circuit '" + *v + "' (general, fig4a, fig4b, fig4c, fig4d)");
        }
        cfg.preset = *p;
    }

    auto& c = cfg.circuit;
    num("delta", c.delta);
    num("Delta", c.Delta);
    num("G", c.G);
    num("epsilon", c.epsilon);
    num("gamma", c.gamma);
    num("Gamma", c.Gamma);
    if (auto v = get("G_site")) {
        const auto tok = split_ws(*v);
        if (tok.size() != 3) {
            throw ConfigError("G_site", "expected three values");
        }
        c.G_site = std::array<double, kModes>{to_double("G_site", tok[0]), to_double("G_site", tok[1]),
                                              to_double("G_site", tok[2])};
    }

    double J = 0.0;
    num("J", J);
    const double theta = read_angle(kv, "theta").value_or(0.0);
    const double phi = read_angle(kv, "phi").value_or(0.0);
    cfg.env = EnvCoupling(J, theta, phi);

    std::array<double, kModes> g{0.0, 0.0, 0.0}, ph{0.0, 0.0, 0.0};
    for (int j = 0; j < kModes; ++j) {
        num("g" + std::to_string(j + 1), g[j]);
        ph[j] = read_angle(kv, "phi" + std::to_string(j + 1)).value_or(0.0);
    }
    cfg.coh = CoherentCoupling(g, ph);

    auto& p = cfg.plan;
    num("t_total", p.t_total);
    num("dt", p.dt);
    if (auto v = get("sample_stride")) {
        p.sample_stride = to_unsigned("sample_stride", *v);
    }
    num("discard_fraction", p.discard_fraction);
    flag("adaptive", p.adaptive);
    num("rel_tol", p.rel_tol);
    num("abs_tol", p.abs_tol);
    if (auto v = get("seed")) {
        cfg.seed = to_unsigned("seed", *v);
    }

    auto& t = cfg.thresholds;
    num("sync_tolerance_bins", t.sync_tolerance_bins);
    num("secondary_prominence", t.secondary_prominence);
    num("noise_floor", t.noise_floor);
    num("death_relative_std", t.death_relative_std);
    num("min_prominence", t.min_prominence);
    num("min_fundamental_bins", t.min_fundamental_bins);
    if (auto v = get("max_subharmonic")) {
        t.max_subharmonic = static_cast<int>(to_unsigned("max_subharmonic", *v));
    }

    if (auto v = get("axis1")) {
        cfg.axes.push_back(parse_axis("axis1", *v));
    }
    if (auto v = get("axis2")) {
        if (cfg.axes.empty()) {
            throw ConfigError("axis2", "given without axis1");
        }
        cfg.axes.push_back(parse_axis("axis2", *v));
    }
    flag("classification", cfg.outputs.classification);
    flag("peaks", cfg.outputs.peaks);
    cfg.outputs.spectrogram = cfg.axes.size() == 1;
    flag("spectrogram", cfg.outputs.spectrogram);
    num("point_budget_s", cfg.point_budget_s);

    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
    auto kv = parse_key_values(text);
    apply_overrides(kv, overrides);
    return config_from_key_values(kv);
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw std::ios_base::failure("cannot read config " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides);
}

std::string write_config(const RunConfig& cfg) {
    std::ostringstream o;
    if (!cfg.name.empty()) {
        o << "name = " << cfg.name << "\n";
    }
    o << "preset = " << preset_name(cfg.preset) << "\n";
    const auto& c = cfg.circuit;
    o << "\n# circuit, rates in units of Omega_0\n";
    o << "delta = " << fmt(c.delta) << "\n";
    o << "Delta = " << fmt(c.Delta) << "\n";
    o << "G = " << fmt(c.G) << "\n";
    o << "epsilon = " << fmt(c.epsilon) << "\n";
    o << "gamma = " << fmt(c.gamma) << "\n";
    o << "Gamma = " << fmt(c.Gamma) << "\n";
    if (c.G_site) {
        o << "G_site = " << fmt((*c.G_site)[0]) << " " << fmt((*c.G_site)[1]) << " " << fmt((*c.G_site)[2])
          << "\n";
    }
    o << "\n# common environment\n";
    o << "J = " << fmt(cfg.env.J()) << "\n";
    o << angle_line("theta", cfg.env.theta());
    o << angle_line("phi", cfg.env.phi());
    o << "\n# coherent couplers\n";
    for (int j = 0; j < kModes; ++j) {
        o << "g" << j + 1 << " = " << fmt(cfg.coh.g()[j]) << "\n";
        o << angle_line("phi" + std::to_string(j + 1), cfg.coh.phase()[j]);
    }
    const auto& p = cfg.plan;
    o << "\n# numerics\n";
    o << "t_total = " << fmt(p.t_total) << "\n";
    o << "dt = " << fmt(p.dt) << "\n";
    o << "sample_stride = " << p.sample_stride << "\n";
    o << "discard_fraction = " << fmt(p.discard_fraction) << "\n";
    o << "adaptive = " << (p.adaptive ? "true" : "false") << "\n";
    o << "rel_tol = " << fmt(p.rel_tol) << "\n";
    o << "abs_tol = " << fmt(p.abs_tol) << "\n";
    if (cfg.seed) {
        o << "seed = " << *cfg.seed << "\n";
    }
    const auto& t = cfg.thresholds;
    o << "\n# classifier\n";
    o << "sync_tolerance_bins = " << fmt(t.sync_tolerance_bins) << "\n";
    o << "secondary_prominence = " << fmt(t.secondary_prominence) << "\n";
    o << "noise_floor = " << fmt(t.noise_floor) << "\n";
    o << "death_relative_std = " << fmt(t.death_relative_std) << "\n";
    o << "min_prominence = " << fmt(t.min_prominence) << "\n";
    o << "max_subharmonic = " << t.max_subharmonic << "\n";
    o << "min_fundamental_bins = " << fmt(t.min_fundamental_bins) << "\n";
    if (!cfg.axes.empty()) {
        o << "\n# sweep\n";
        for (std::size_t i = 0; i < cfg.axes.size(); ++i) {
            const auto& ax = cfg.axes[i];
            o << "axis" << i + 1 << " = " << ax.label() << " " << fmt(ax.start) << " " << fmt(ax.stop) << " "
              << ax.count << "\n";
        }
    }
    o << "classification = " << (cfg.outputs.classification ? "true" : "false") << "\n";
    o << "peaks = " << (cfg.outputs.peaks ? "true" : "false") << "\n";
    o << "spectrogram = " << (cfg.outputs.spectrogram ? "true" : "false") << "\n";
    o << "point_budget_s = " << fmt(cfg.point_budget_s) << "\n";
    return o.str();
}

bool is_sweepable(const std::string& name) {
    static const std::set<std::string> names{"J",  "theta", "phi",  "g1",    "g2",      "g3",   "phi1",
                                             "phi2", "phi3", "delta", "Delta", "epsilon", "gamma"};
    return names.count(name) > 0;
}

void set_parameter(RunConfig& cfg, const std::string& name, double value) {
    const auto& e = cfg.env;
    auto g = cfg.coh.g();
    auto ph = cfg.coh.phase();
    if (name == "J") {
        cfg.env = EnvCoupling(value, e.theta(), e.phi());
    } else if (name == "theta") {
        cfg.env = EnvCoupling(e.J(), value, e.phi());
    } else if (name == "phi") {
        cfg.env = EnvCoupling(e.J(), e.theta(), value);
    } else if (name.size() == 2 && name[0] == 'g' && name[1] >= '1' && name[1] <= '3') {
        g[name[1] - '1'] = value;
        cfg.coh = CoherentCoupling(g, ph);
    } else if (name.size() == 4 && name.rfind("phi", 0) == 0 && name[3] >= '1' && name[3] <= '3') {
        ph[name[3] - '1'] = value;
        cfg.coh = CoherentCoupling(g, ph);
    } else if (name == "delta") {
        cfg.circuit.delta = value;
    } else if (name == "Delta") {
        cfg.circuit.Delta = value;
    } else if (name == "epsilon") {
        cfg.circuit.epsilon = value;
    } else if (name == "gamma") {
        cfg.circuit.gamma = value;
    } else {
        throw ConfigError(name, "parameter cannot be swept");
    }
}

namespace {

struct PresetEntry {
    const char* name;
    const char* text;
};

// Circuit parameters of the reference scenarios; the numerics and classifier keep their defaults.
// The a-panels of Figs. 5-8 are J scans: J holds the representative point and axis1 the scan.
const PresetEntry kPresets[] = {
    {"fig2a", "name = fig2a\nJ = 0\ntheta_pi = 0.5\nphi_pi = 0.5\n"},
    {"fig2b", "name = fig2b\nJ = 0.11\ntheta_pi = 0.5\nphi_pi = 0.5\n"},
    {"fig2c", "name = fig2c\nJ = 0.11\ntheta_pi = 0.6\nphi_pi = 0.8\n"},
    {"fig3a", "name = fig3a\nJ = 0.1\ntheta_pi = 0.2\nphi_pi = -0.8\naxis1 = J 0 0.11 12\n"},
    {"fig3b_pointB", "name = fig3b_pointB\nJ = 0.18\ntheta_pi = 0.2\nphi_pi = -0.8\naxis1 = J 0.14 0.2 13\n"},
    {"fig3c_pointC",
     "name = fig3c_pointC\nJ = 0.11\ntheta_pi = 0\nphi_pi = 0.2\n"
     "axis1 = theta_pi -1 1 21\naxis2 = phi_pi -1 1 21\n"},
    {"fig5a",
     "name = fig5a\nJ = 0.15\ntheta_pi = 0.5\nphi_pi = 0.9\n"
     "g1 = 0.15\ng2 = 0.15\ng3 = 0.15\nphi1_pi = 0.8\nphi2_pi = 0.8\nphi3_pi = 0.8\naxis1 = J 0 0.2 21\n"},
    {"fig6a",
     "name = fig6a\npreset = fig4b\nJ = 0.19\ntheta_pi = 0.5\nphi_pi = -0.8\ng1 = 0.18\nphi1_pi = 0.7\n"
     "axis1 = J 0 0.2 21\n"},
    {"fig6d_pointC",
     "name = fig6d_pointC\npreset = fig4b\nJ = 0.2\ntheta_pi = -0.835\nphi_pi = 0.3\ng1 = 0.1\nphi1_pi = 0.6\n"},
    {"fig6d_pointD",
     "name = fig6d_pointD\npreset = fig4b\nJ = 0.2\ntheta_pi = -0.77\nphi_pi = 0.3\ng1 = 0.1\nphi1_pi = 0.6\n"},
    {"fig7a",
     "name = fig7a\npreset = fig4c\nJ = 0.2\ntheta_pi = 0.2\nphi_pi = -0.7\ng3 = 0.2\nphi3_pi = 0.7\n"
     "axis1 = J 0 0.2 21\n"},
    {"fig8a", "name = fig8a\npreset = fig4d\nJ = 0.57\ntheta_pi = 0.9\nphi_pi = 1\naxis1 = J 0 0.6 31\n"},
};

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& p : kPresets) {
        out.emplace_back(p.name);
    }
    return out;
}

RunConfig preset_config(const std::string& name) {
    for (const auto& p : kPresets) {
        if (name == p.name) {
            return parse_config(p.text);
        }
    }
    std::string known;
    for (const auto& p : kPresets) {
        known += known.empty() ? p.name : std::string(", ") + p.name;
    }
    throw ConfigError("preset", "unknown preset '" + name + "' (" + known + ")");
}

}  // namespace omsync
