#include "omsync/export.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace omsync {

using nlohmann::json;

namespace {

void put(std::ostream& out, double v) {
    char buf[40];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.write(buf, n);
}

json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "tau,re_a1,im_a1,re_a2,im_a2,re_a3,im_a3,re_b1,im_b1,re_b2,im_b2,re_b3,im_b3,I1,I2,I3,q1,q2,q3\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj.states()[i];
        put(out, traj.tau(i));
        for (const auto* arr : {&s.a, &s.b}) {
            for (const auto& z : *arr) {
                out << ',';
                put(out, z.real());
                out << ',';
                put(out, z.imag());
            }
        }
        for (int j = 0; j < kModes; ++j) {
            out << ',';
            put(out, traj.intensity(j)[i]);
        }
        for (int j = 0; j < kModes; ++j) {
            out << ',';
            put(out, traj.displacement(j)[i]);
        }
        out << '\n';
    }
}

Trajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("tau,re_a1", 0) != 0) {
        throw std::invalid_argument("trajectory: missing or unexpected header");
    }
    std::vector<double> tau;
    std::vector<CircuitState> states;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        double v[13];
        const char* p = line.c_str();
        for (int c = 0; c < 13; ++c) {
            char* end = nullptr;
            v[c] = std::strtod(p, &end);
            if (end == p) {
                throw std::invalid_argument("trajectory: bad number in row " + std::to_string(row));
            }
            p = *end == ',' ? end + 1 : end;
        }
        CircuitState s;
        for (int j = 0; j < kModes; ++j) {
            s.a[j] = {v[1 + 2 * j], v[2 + 2 * j]};
            s.b[j] = {v[7 + 2 * j], v[8 + 2 * j]};
        }
        tau.push_back(v[0]);
        states.push_back(s);
    }
    if (tau.size() < 2) {
        throw std::invalid_argument("trajectory: fewer than 2 samples");
    }
    const double h = (tau.back() - tau.front()) / static_cast<double>(tau.size() - 1);
    for (std::size_t i = 1; i < tau.size(); ++i) {
        if (std::abs(tau[i] - tau[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(tau[i]))) {
            throw std::invalid_argument("trajectory: non-uniform sampling at row " + std::to_string(i + 2));
        }
    }
    return Trajectory(tau.front(), h, std::move(states));
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spec) {
    out << "f_over_f0";
    for (auto s : spec.signals) {
        out << ",S_" << signal_name(s);
    }
    out << '\n';
    for (std::size_t k = 0; k < spec.bins(); ++k) {
        put(out, spec.f_over_f0[k]);
        for (const auto& col : spec.power) {
            out << ',';
            put(out, col[k]);
        }
        out << '\n';
    }
}

json peaks_json(const PeakList& peaks) {
    json arr = json::array();
    for (const auto& p : peaks) {
        arr.push_back({{"frequency", p.frequency}, {"power", p.power}, {"prominence", p.prominence}, {"bin", p.bin}});
    }
    return arr;
}

json thresholds_json(const Thresholds& th) {
    return {{"sync_tolerance_bins", th.sync_tolerance_bins},
            {"secondary_prominence", th.secondary_prominence},
            {"noise_floor", th.noise_floor},
            {"death_relative_std", th.death_relative_std},
            {"min_prominence", th.min_prominence},
            {"max_subharmonic", th.max_subharmonic},
            {"min_fundamental_bins", th.min_fundamental_bins}};
}

json classification_json(const SyncClassification& cls, const Thresholds& th) {
    json peaks = json::array();
    for (const auto& pl : cls.evidence) {
        peaks.push_back(peaks_json(pl));
    }
    json res = json::array();
    for (const auto& r : cls.resonators) {
        res.push_back({{"dead", r.dead},
                       {"relative_std", r.relative_std},
                       {"top_frequency", r.top_frequency},
                       {"frequency", r.frequency},
                       {"harmonic_order", r.harmonic_order},
                       {"periodic", r.periodic}});
    }
    json j = {{"schema_version", kSchemaVersion},
              {"state", state_name(cls.state)},
              {"sync_frequency", optional_number(cls.sync_frequency)},
              {"members", cls.members},
              {"subharmonic_order", cls.subharmonic_order},
              {"subharmonic_reference",
               cls.subharmonic_reference ? json(*cls.subharmonic_reference) : json(nullptr)},
              {"peaks", peaks},
              {"resonators", res},
              {"thresholds", thresholds_json(th)}};
    if (!cls.detail.empty()) {
        j["detail"] = cls.detail;
    }
    return j;
}

SyncClassification classification_from_json(const json& j) {
    SyncClassification cls;
    auto st = parse_state(j.at("state").get<std::string>());
    if (!st) {
        throw std::invalid_argument("unknown state " + j.at("state").dump());
    }
    cls.state = *st;
    if (!j.at("sync_frequency").is_null()) {
        cls.sync_frequency = j.at("sync_frequency").get<double>();
    }
    cls.members = j.at("members").get<std::vector<int>>();
    cls.subharmonic_order = j.at("subharmonic_order").get<int>();
    if (!j.at("subharmonic_reference").is_null()) {
        cls.subharmonic_reference = j.at("subharmonic_reference").get<int>();
    }
    for (const auto& pl : j.at("peaks")) {
        PeakList list;
        for (const auto& p : pl) {
            list.push_back({p.at("frequency").get<double>(), p.at("power").get<double>(),
                            p.at("prominence").get<double>(), p.at("bin").get<std::size_t>()});
        }
        cls.evidence.push_back(std::move(list));
    }
    for (const auto& r : j.at("resonators")) {
        ResonatorReport rep;
        rep.dead = r.at("dead").get<bool>();
        rep.relative_std = r.at("relative_std").get<double>();
        rep.top_frequency = r.at("top_frequency").get<double>();
        rep.frequency = r.at("frequency").get<double>();
        rep.harmonic_order = r.at("harmonic_order").get<int>();
        rep.periodic = r.at("periodic").get<bool>();
        cls.resonators.push_back(rep);
    }
    cls.detail = j.value("detail", std::string{});
    return cls;
}

json manifest_json(const RunConfig& cfg, const std::vector<std::string>& overrides, const std::string& command) {
    const auto text = write_config(cfg);
    return {{"schema_version", kSchemaVersion},
            {"tool", "omsync"},
            {"tool_version", kToolVersion},
            {"command", command},
            {"overrides", overrides},
            {"config_sha256", sha256_hex(text)},
            {"config", text}};
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::ios_base::failure("cannot write " + tmp);
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::ios_base::failure("write failed: " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace omsync
