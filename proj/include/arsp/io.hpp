#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "arsp/fxp.hpp"
#include "arsp/isac.hpp"

namespace arsp {

using json = nlohmann::json;

/// Bad or unreadable configuration; the CLI maps it to exit code 2.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw config_error(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw config_error(where + ": unknown key '" + key + "'");
    }
}

// JSON has no infinities, so "inf" and "-inf" strings stand in for them.
inline double number(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw config_error(where + ": expected a number");
}

inline std::size_t count(const json& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw config_error(where + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

inline bool boolean(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw config_error(where + ": expected true or false");
    return v.get<bool>();
}

inline std::string text(const json& v, const std::string& where) {
    if (!v.is_string()) throw config_error(where + ": expected a string");
    return v.get<std::string>();
}

inline json encode(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace detail

inline RadarConfig radar_from_json(const json& j, RadarConfig c = {}) {
    using namespace detail;
    check_keys(j, {"P", "L", "M", "sample_period", "pri", "wavelength", "element_spacing", "fov_min_deg", "fov_max_deg",
                   "angle_step_deg", "integration_factor", "integration_mode", "alternation"},
               "radar");
    if (j.contains("P")) c.P = count(j["P"], "radar.P");
    if (j.contains("L")) c.L = count(j["L"], "radar.L");
    if (j.contains("M")) c.M = count(j["M"], "radar.M");
    if (j.contains("sample_period")) c.sample_period = number(j["sample_period"], "radar.sample_period");
    if (j.contains("pri")) c.pri = number(j["pri"], "radar.pri");
    if (j.contains("wavelength")) c.wavelength = number(j["wavelength"], "radar.wavelength");
    if (j.contains("element_spacing")) c.element_spacing = number(j["element_spacing"], "radar.element_spacing");
    if (j.contains("fov_min_deg")) c.fov_min_deg = number(j["fov_min_deg"], "radar.fov_min_deg");
    if (j.contains("fov_max_deg")) c.fov_max_deg = number(j["fov_max_deg"], "radar.fov_max_deg");
    if (j.contains("angle_step_deg")) c.angle_step_deg = number(j["angle_step_deg"], "radar.angle_step_deg");
    if (j.contains("integration_factor"))
        c.integration_factor = count(j["integration_factor"], "radar.integration_factor");
    else if (c.P >= 2 && (c.integration_factor > c.P || c.P % c.integration_factor != 0))
        c.integration_factor = c.P / 2;  // keep the default P/2 ratio when only P changes
    if (j.contains("integration_mode")) {
        const auto m = text(j["integration_mode"], "radar.integration_mode");
        if (m == "first") c.integration_mode = IntegrationMode::first;
        else if (m == "strided") c.integration_mode = IntegrationMode::strided;
        else throw config_error("radar.integration_mode: expected 'first' or 'strided'");
    }
    if (j.contains("alternation")) {
        const auto m = text(j["alternation"], "radar.alternation");
        if (m == "alternate") c.alternation = PulseAlternation::alternate;
        else if (m == "repeat") c.alternation = PulseAlternation::repeat;
        else throw config_error("radar.alternation: expected 'alternate' or 'repeat'");
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    return c;
}

inline json to_json(const RadarConfig& c) {
    return {{"P", c.P},
            {"L", c.L},
            {"M", c.M},
            {"sample_period", c.sample_period},
            {"pri", c.pri},
            {"wavelength", c.wavelength},
            {"element_spacing", c.element_spacing},
            {"fov_min_deg", c.fov_min_deg},
            {"fov_max_deg", c.fov_max_deg},
            {"angle_step_deg", c.angle_step_deg},
            {"integration_factor", c.integration_factor},
            {"integration_mode", c.integration_mode == IntegrationMode::first ? "first" : "strided"},
            {"alternation", c.alternation == PulseAlternation::alternate ? "alternate" : "repeat"}};
}

inline ChannelModel channel_from_json(const json& j, ChannelModel c = {}) {
    using namespace detail;
    check_keys(j, {"kappa_db", "noise_dbm", "clutter_dbm", "ps_ref_dbm", "swerling", "rng_seed"}, "channel");
    if (j.contains("kappa_db")) c.kappa_db = number(j["kappa_db"], "channel.kappa_db");
    if (j.contains("noise_dbm")) c.noise_dbm = number(j["noise_dbm"], "channel.noise_dbm");
    if (j.contains("clutter_dbm")) c.clutter_dbm = number(j["clutter_dbm"], "channel.clutter_dbm");
    if (j.contains("ps_ref_dbm")) c.ps_ref_dbm = number(j["ps_ref_dbm"], "channel.ps_ref_dbm");
    if (j.contains("swerling")) c.swerling = boolean(j["swerling"], "channel.swerling");
    if (j.contains("rng_seed")) c.rng_seed = count(j["rng_seed"], "channel.rng_seed");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    return c;
}

inline json to_json(const ChannelModel& c) {
    return {{"kappa_db", detail::encode(c.kappa_db)},
            {"noise_dbm", detail::encode(c.noise_dbm)},
            {"clutter_dbm", detail::encode(c.clutter_dbm)},
            {"ps_ref_dbm", c.ps_ref_dbm},
            {"swerling", c.swerling},
            {"rng_seed", c.rng_seed}};
}

inline Target target_from_json(const json& j) {
    using namespace detail;
    check_keys(j, {"r", "phi", "v", "sigma_mean", "is_clutter"}, "target");
    if (!j.contains("r") || !j.contains("phi")) throw config_error("target: 'r' and 'phi' are required");
    Target t;
    t.range_m = number(j["r"], "target.r");
    t.azimuth_deg = number(j["phi"], "target.phi");
    if (j.contains("v")) t.velocity_mps = number(j["v"], "target.v");
    if (j.contains("sigma_mean")) t.sigma_mean = number(j["sigma_mean"], "target.sigma_mean");
    if (j.contains("is_clutter")) t.is_clutter = boolean(j["is_clutter"], "target.is_clutter");
    if (!(t.range_m > 0.0) || !(t.sigma_mean >= 0.0)) throw config_error("target: range must be positive, RCS non-negative");
    return t;
}

inline json to_json(const Target& t) {
    return {{"r", t.range_m}, {"phi", t.azimuth_deg}, {"v", t.velocity_mps}, {"sigma_mean", t.sigma_mean},
            {"is_clutter", t.is_clutter}};
}

struct SceneScenario {
    RadarConfig radar{};
    ChannelModel channel{};
    std::vector<Target> targets;
};

inline SceneScenario scene_from_json(const json& j) {
    detail::check_keys(j, {"radar", "channel", "targets"}, "scenario");
    SceneScenario s;
    if (j.contains("radar")) s.radar = radar_from_json(j["radar"]);
    if (j.contains("channel")) s.channel = channel_from_json(j["channel"]);
    if (j.contains("targets")) {
        if (!j["targets"].is_array()) throw config_error("targets: expected an array");
        for (const auto& t : j["targets"]) s.targets.push_back(target_from_json(t));
    }
    return s;
}

inline json to_json(const SceneScenario& s) {
    json t = json::array();
    for (const auto& x : s.targets) t.push_back(to_json(x));
    return {{"radar", to_json(s.radar)}, {"channel", to_json(s.channel)}, {"targets", t}};
}

inline StageFormats formats_from_json(const json& j, StageFormats f = {}) {
    detail::check_keys(j, {"dbf", "fft", "cm", "ifft", "msg"}, "formats");
    auto parse = [&](const char* key, FixedPointFormat& out) {
        if (!j.contains(key)) return;
        try {
            out = parse_format(detail::text(j[key], std::string("formats.") + key));
        } catch (const std::invalid_argument& e) {
            throw config_error(std::string("formats.") + key + ": " + e.what());
        }
    };
    parse("dbf", f.dbf);
    parse("fft", f.fft);
    parse("cm", f.cm);
    parse("ifft", f.ifft);
    parse("msg", f.msg);
    return f;
}

inline SwitchPolicy policy_from_json(const json& j, SwitchPolicy p = {}) {
    using namespace detail;
    check_keys(j, {"thresholds", "sarp_if"}, "policy");
    if (j.contains("thresholds")) {
        const auto& t = j["thresholds"];
        if (!t.is_object()) throw config_error("policy.thresholds: expected an object of tier -> dBm");
        p.thresholds.clear();
        for (const auto& [tier, dbm] : t.items()) {
            int k = 0;
            try {
                std::size_t used = 0;
                k = std::stoi(tier, &used);
                if (used != tier.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw config_error("policy.thresholds: tier '" + tier + "' is not an integer");
            }
            p.thresholds[k] = number(dbm, "policy.thresholds." + tier);
        }
    }
    if (j.contains("sarp_if")) p.sarp_if = count(j["sarp_if"], "policy.sarp_if");
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    return p;
}

inline MuTrajectory trajectory_from_json(const json& j) {
    using namespace detail;
    check_keys(j, {"x", "y", "vx", "vy", "rcs_mean", "is_clutter"}, "mu");
    if (!j.contains("x") || !j.contains("y")) throw config_error("mu: 'x' and 'y' are required");
    MuTrajectory m;
    m.x0 = number(j["x"], "mu.x");
    m.y0 = number(j["y"], "mu.y");
    if (j.contains("vx")) m.vx = number(j["vx"], "mu.vx");
    if (j.contains("vy")) m.vy = number(j["vy"], "mu.vy");
    if (j.contains("rcs_mean")) m.rcs_mean = number(j["rcs_mean"], "mu.rcs_mean");
    if (j.contains("is_clutter")) m.is_clutter = boolean(j["is_clutter"], "mu.is_clutter");
    return m;
}

inline json to_json(const MuTrajectory& m) {
    return {{"x", m.x0}, {"y", m.y0}, {"vx", m.vx}, {"vy", m.vy}, {"rcs_mean", m.rcs_mean}, {"is_clutter", m.is_clutter}};
}

/// Fields absent from `j` keep the values of `base`.
inline IsacScenario isac_from_json(const json& j, IsacScenario sc = default_isac_scenario()) {
    using namespace detail;
    check_keys(j, {"mus", "horizon_s", "quantum_s", "symbol_rate", "beamwidth_deg", "static_speed_mps", "radar", "channel",
                   "latency", "baseline", "policy", "seed"},
               "isac");
    if (j.contains("mus")) {
        if (!j["mus"].is_array()) throw config_error("isac.mus: expected an array");
        sc.mus.clear();
        for (const auto& m : j["mus"]) sc.mus.push_back(trajectory_from_json(m));
    }
    if (j.contains("horizon_s")) sc.horizon_s = number(j["horizon_s"], "isac.horizon_s");
    if (j.contains("quantum_s")) sc.quantum_s = number(j["quantum_s"], "isac.quantum_s");
    if (j.contains("symbol_rate")) sc.symbol_rate = number(j["symbol_rate"], "isac.symbol_rate");
    if (j.contains("beamwidth_deg")) sc.beamwidth_deg = number(j["beamwidth_deg"], "isac.beamwidth_deg");
    if (j.contains("static_speed_mps")) sc.static_speed_mps = number(j["static_speed_mps"], "isac.static_speed_mps");
    if (j.contains("radar")) sc.radar = radar_from_json(j["radar"], sc.radar);
    if (j.contains("channel")) sc.channel = channel_from_json(j["channel"], sc.channel);
    if (j.contains("latency")) {
        const auto& l = j["latency"];
        check_keys(l, {"unit_s", "jarp", "mjarp", "sarp"}, "isac.latency");
        if (l.contains("unit_s")) sc.latency.unit_s = number(l["unit_s"], "isac.latency.unit_s");
        if (l.contains("jarp")) sc.latency.jarp = number(l["jarp"], "isac.latency.jarp");
        if (l.contains("mjarp")) sc.latency.mjarp = number(l["mjarp"], "isac.latency.mjarp");
        if (l.contains("sarp")) sc.latency.sarp = number(l["sarp"], "isac.latency.sarp");
    }
    if (j.contains("baseline")) {
        const auto& b = j["baseline"];
        check_keys(b, {"sectors", "per_sector_s"}, "isac.baseline");
        if (b.contains("sectors")) sc.baseline.sectors = count(b["sectors"], "isac.baseline.sectors");
        if (b.contains("per_sector_s")) sc.baseline.per_sector_s = number(b["per_sector_s"], "isac.baseline.per_sector_s");
    }
    if (j.contains("policy")) sc.policy = policy_from_json(j["policy"], sc.policy);
    if (j.contains("seed")) sc.seed = count(j["seed"], "isac.seed");
    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    return sc;
}

inline json to_json(const IsacScenario& sc) {
    json mus = json::array();
    for (const auto& m : sc.mus) mus.push_back(to_json(m));
    json thr = json::object();
    for (const auto& [tier, dbm] : sc.policy.thresholds) thr[std::to_string(tier)] = dbm;
    return {{"mus", mus},
            {"horizon_s", sc.horizon_s},
            {"quantum_s", sc.quantum_s},
            {"symbol_rate", sc.symbol_rate},
            {"beamwidth_deg", sc.beamwidth_deg},
            {"static_speed_mps", sc.static_speed_mps},
            {"radar", to_json(sc.radar)},
            {"channel", to_json(sc.channel)},
            {"latency",
             {{"unit_s", sc.latency.unit_s}, {"jarp", sc.latency.jarp}, {"mjarp", sc.latency.mjarp}, {"sarp", sc.latency.sarp}}},
            {"baseline", {{"sectors", sc.baseline.sectors}, {"per_sector_s", sc.baseline.per_sector_s}}},
            {"policy", {{"thresholds", thr}, {"sarp_if", sc.policy.sarp_if}}},
            {"seed", sc.seed}};
}

inline json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error("config '" + path.string() + "': " + e.what());
    }
}

/// Ten significant digits (the program never changes the C locale), so CSVs
/// are byte-identical across runs.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { append(header); }

    CsvWriter& row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw std::invalid_argument("CsvWriter: row width does not match the header");
        append(cells);
        return *this;
    }

    std::string str() const { return out_.str(); }

    void save(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
        f << out_.str();
    }

private:
    void append(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << escape(cells[i]);
        out_ << '\n';
    }
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }

    std::size_t columns_;
    std::ostringstream out_;
};

struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace detail

/// Line plot as a standalone SVG. Returns false instead of throwing; a
/// missing plot never fails an experiment.
inline bool write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& xlabel,
                           const std::string& ylabel, const std::vector<PlotSeries>& series) noexcept {
    try {
        double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
        for (const auto& s : series)
            for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                x0 = std::min(x0, s.x[i]);
                x1 = std::max(x1, s.x[i]);
                y0 = std::min(y0, s.y[i]);
                y1 = std::max(y1, s.y[i]);
            }
        if (!(x1 >= x0) || !(y1 >= y0)) return false;
        if (x1 == x0) x1 = x0 + 1.0;
        if (y1 == y0) y1 = y0 + 1.0;

        const double W = 640, H = 420, ml = 70, mr = 150, mt = 40, mb = 50;
        const double pw = W - ml - mr, ph = H - mt - mb;
        auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
        auto py = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };
        static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

        std::ostringstream o;
        o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
        o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::xml_escape(title)
          << "</text>\n";
        o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
          << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
            o << "<text x=\"" << px(xv) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
              << format_number(xv) << "</text>\n";
            o << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
              << format_number(yv) << "</text>\n";
        }
        o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
          << detail::xml_escape(xlabel) << "</text>\n";
        o << "<text transform=\"translate(16," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">"
          << detail::xml_escape(ylabel) << "</text>\n";
        for (std::size_t s = 0; s < series.size(); ++s) {
            const char* col = colors[s % std::size(colors)];
            o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
            const auto& sr = series[s];
            for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i)
                if (std::isfinite(sr.x[i]) && std::isfinite(sr.y[i])) o << px(sr.x[i]) << ',' << py(sr.y[i]) << ' ';
            o << "\"/>\n";
            o << "<text x=\"" << ml + pw + 10 << "\" y=\"" << mt + 14 + 16 * static_cast<double>(s) << "\" fill=\"" << col
              << "\" font-size=\"11\">" << detail::xml_escape(sr.name) << "</text>\n";
        }
        o << "</svg>\n";

        std::ofstream f(path, std::ios::binary);
        if (!f) return false;
        f << o.str();
        return static_cast<bool>(f);
    } catch (...) {
        return false;
    }
}

}  // namespace arsp
