#include "mg/scenario.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mg {

namespace {

[[noreturn]] void fail(const std::string& coord, const std::string& what) {
    throw ParseError(coord + ": " + what);
}

double to_double(const std::string& s, const std::string& coord) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        fail(coord, "expected a number, got '" + s + "'");
    return v;
}

int to_int(const std::string& s, const std::string& coord) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        fail(coord, "expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s, const std::string& coord) {
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    fail(coord, "expected a boolean, got '" + s + "'");
}

std::vector<double> to_double_list(const std::string& s, const std::string& coord) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(to_double(tok, coord));
    if (out.empty())
        fail(coord, "expected at least one number");
    return out;
}

using Setter = std::function<void(ScenarioConfig&, const std::string& value,
                                  const std::string& coord)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"sim.mode",
         [](ScenarioConfig& c, const std::string& v, const std::string& coord) {
             if (v == "energy")
                 c.sim.mode = SimConfig::Mode::Energy;
             else if (v == "transient")
                 c.sim.mode = SimConfig::Mode::Transient;
             else
                 fail(coord, "expected 'energy' or 'transient'");
         }},
        {"sim.dt", [](auto& c, const auto& v, const auto& k) { c.sim.dt = to_double(v, k); }},
        {"sim.duration",
         [](auto& c, const auto& v, const auto& k) { c.sim.duration = to_double(v, k); }},
        {"sim.realtime",
         [](auto& c, const auto& v, const auto& k) { c.sim.realtime_pacing = to_bool(v, k); }},
        {"sim.seed", [](auto& c, const auto& v, const auto& k) { c.sim.seed = to_int(v, k); }},
        {"sim.v_setpoint",
         [](auto& c, const auto& v, const auto& k) { c.sim.v_grid_setpoint = to_double(v, k); }},
        {"sim.bus_capacitance",
         [](auto& c, const auto& v, const auto& k) { c.sim.bus_capacitance = to_double(v, k); }},
        {"sim.droop_v_per_w",
         [](auto& c, const auto& v, const auto& k) { c.sim.droop_v_per_w = to_double(v, k); }},
        {"sim.settle_window",
         [](auto& c, const auto& v, const auto& k) { c.sim.settle_window = to_double(v, k); }},
        {"pv.series", [](auto& c, const auto& v, const auto& k) { c.pv.series = to_int(v, k); }},
        {"pv.parallel",
         [](auto& c, const auto& v, const auto& k) { c.pv.parallel = to_int(v, k); }},
        {"pv.rated_power",
         [](auto& c, const auto& v, const auto& k) { c.pv.rated_power = to_double(v, k); }},
        {"pv.rated_voltage",
         [](auto& c, const auto& v, const auto& k) { c.pv.rated_voltage = to_double(v, k); }},
        {"nodes.count",
         [](auto& c, const auto& v, const auto& k) { c.nodes.count = to_int(v, k); }},
        {"nodes.capacity_ah",
         [](auto& c, const auto& v, const auto& k) { c.nodes.capacity_ah = to_double(v, k); }},
        {"nodes.ocv", [](auto& c, const auto& v, const auto& k) { c.nodes.ocv = to_double(v, k); }},
        {"nodes.internal_r",
         [](auto& c, const auto& v, const auto& k) { c.nodes.internal_r = to_double(v, k); }},
        {"nodes.soc_min",
         [](auto& c, const auto& v, const auto& k) { c.nodes.soc_min = to_double(v, k); }},
        {"nodes.soc_max",
         [](auto& c, const auto& v, const auto& k) { c.nodes.soc_max = to_double(v, k); }},
        {"nodes.soc_init",
         [](auto& c, const auto& v, const auto& k) { c.nodes.soc_init = to_double_list(v, k); }},
        {"nodes.converter_rating",
         [](auto& c, const auto& v, const auto& k) { c.nodes.converter_rating = to_double(v, k); }},
        {"supercap.enabled",
         [](auto& c, const auto& v, const auto& k) { c.supercap.enabled = to_bool(v, k); }},
        {"supercap.capacitance",
         [](auto& c, const auto& v, const auto& k) { c.supercap.capacitance = to_double(v, k); }},
        {"supercap.esr",
         [](auto& c, const auto& v, const auto& k) { c.supercap.esr = to_double(v, k); }},
        {"supercap.v_init",
         [](auto& c, const auto& v, const auto& k) { c.supercap.v_init = to_double(v, k); }},
        {"supercap.i_max",
         [](auto& c, const auto& v, const auto& k) { c.supercap.i_max = to_double(v, k); }},
        {"supercap.kp",
         [](auto& c, const auto& v, const auto& k) { c.supercap.kp = to_double(v, k); }},
        {"supercap.ki",
         [](auto& c, const auto& v, const auto& k) { c.supercap.ki = to_double(v, k); }},
        {"supercap.deadband",
         [](auto& c, const auto& v, const auto& k) { c.supercap.deadband = to_double(v, k); }},
        {"flex.mode",
         [](ScenarioConfig& c, const std::string& v, const std::string& coord) {
             if (v == "disabled")
                 c.flex.mode = FlexMode::Disabled;
             else if (v == "full")
                 c.flex.mode = FlexMode::Full;
             else if (v == "partial")
                 c.flex.mode = FlexMode::Partial;
             else
                 fail(coord, "expected 'disabled', 'full' or 'partial'");
         }},
        {"flex.gamma",
         [](auto& c, const auto& v, const auto& k) { c.flex.gamma = to_double(v, k); }},
        {"flex.p_max",
         [](auto& c, const auto& v, const auto& k) { c.flex.p_max = to_double(v, k); }},
        {"profiles.load",
         [](auto& c, const auto& v, const auto&) { c.load_profile = v; }},
        {"profiles.env", [](auto& c, const auto& v, const auto&) { c.env_profile = v; }},
        {"interchange.enabled",
         [](auto& c, const auto& v, const auto& k) { c.interchange.enabled = to_bool(v, k); }},
        {"interchange.base_port",
         [](auto& c, const auto& v, const auto& k) { c.interchange.base_port = to_int(v, k); }},
        {"interchange.status_interval",
         [](auto& c, const auto& v, const auto& k) {
             c.interchange.status_interval = to_double(v, k);
         }},
        {"interchange.i_max",
         [](auto& c, const auto& v, const auto& k) { c.interchange.i_max = to_double(v, k); }},
        {"interchange.v_max",
         [](auto& c, const auto& v, const auto& k) { c.interchange.v_max = to_double(v, k); }},
    };
    return table;
}

} // namespace

void ScenarioConfig::validate() const {
    sim.validate();
    flex.validate();
    if (nodes.count < 1)
        throw ParseError("nodes.count: must be >= 1");
    if (!(nodes.soc_min < nodes.soc_max) || nodes.soc_min < 0 || nodes.soc_max > 1)
        throw ParseError("nodes.soc_min/soc_max: need 0 <= soc_min < soc_max <= 1");
    if (nodes.soc_init.size() > 1 && int(nodes.soc_init.size()) != nodes.count)
        throw ParseError("nodes.soc_init: give one value or exactly nodes.count values");
    for (double s : nodes.soc_init)
        if (s < 0 || s > 1)
            throw ParseError("nodes.soc_init: values must be in [0,1]");
    if (pv.series < 1 || pv.parallel < 1)
        throw ParseError("pv.series/pv.parallel: must be >= 1");
    for (const auto& cmd : injections)
        check_injection(cmd, nodes.count);
}

ScenarioConfig parse_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw ParseError("cannot open scenario file " + file.string());
    ScenarioConfig cfg;
    std::string line, section;
    std::map<std::string, InjectionCommand> pending_injections;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos)
            continue;
        const auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);
        if (line[0] == '#' || line[0] == ';')
            continue;
        const std::string coord_prefix = file.string() + ":" + std::to_string(ln);
        if (line.front() == '[') {
            if (line.back() != ']')
                fail(coord_prefix, "unterminated section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(coord_prefix, "expected 'key = value'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            if (a == std::string::npos)
                return std::string();
            const auto b = s.find_last_not_of(" \t");
            return s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            fail(coord_prefix, "key '" + key + "' outside any [section]");
        const std::string coord = section + "." + key;
        if (section.rfind("inject.", 0) == 0) {
            auto& cmd = pending_injections[section];
            if (key == "at")
                cmd.apply_at = to_double(value, coord);
            else if (key == "path")
                cmd.path = value;
            else if (key == "value")
                cmd.value = to_double(value, coord);
            else
                fail(coord, "unknown injection key (use at, path, value)");
            continue;
        }
        auto it = setters().find(coord);
        if (it == setters().end())
            fail(coord, "unknown key");
        it->second(cfg, value, coord);
    }
    for (auto& [name, cmd] : pending_injections) {
        if (cmd.path.empty())
            fail(name + ".path", "missing");
        cfg.injections.push_back(cmd);
    }
    // resolve profile paths against the scenario directory
    const auto dir = file.parent_path();
    auto resolve = [&](std::filesystem::path& p) {
        if (!p.empty() && p.is_relative())
            p = dir / p;
        if (!p.empty() && !std::filesystem::exists(p))
            throw ParseError(file.string() + ": referenced profile does not exist: " +
                             p.string());
    };
    resolve(cfg.load_profile);
    resolve(cfg.env_profile);
    cfg.validate();
    return cfg;
}

void apply_override(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end())
        throw ParseError("override: unknown key '" + key + "'");
    it->second(cfg, value, "override " + key);
}

World build_world(const ScenarioConfig& cfg) {
    World w;
    w.sim = cfg.sim;

    PvArrayConfig pv;
    pv.series_count = cfg.pv.series;
    pv.parallel_count = cfg.pv.parallel;
    pv.rated_power = cfg.pv.rated_power;
    pv.rated_voltage = cfg.pv.rated_voltage;
    const PvArrayConfig dflt{};
    if (pv.series_count == dflt.series_count && pv.parallel_count == dflt.parallel_count &&
        pv.rated_power == dflt.rated_power && pv.rated_voltage == dflt.rated_voltage)
        w.pv = default_pv_array(); // calibrated once, shared
    else
        w.pv = calibrate_pv_array(pv);

    for (int i = 0; i < cfg.nodes.count; ++i) {
        BessNode n;
        n.id = i;
        n.params = {cfg.nodes.ocv, cfg.nodes.internal_r, cfg.nodes.capacity_ah,
                    cfg.nodes.soc_min, cfg.nodes.soc_max};
        const double soc0 = cfg.nodes.soc_init.empty()
                                ? 0.5
                                : cfg.nodes.soc_init.size() == 1
                                      ? cfg.nodes.soc_init[0]
                                      : cfg.nodes.soc_init[std::size_t(i)];
        n.state = {soc0, cfg.nodes.ocv, 0.0};
        n.converter.power_rating = cfg.nodes.converter_rating;
        w.nodes.push_back(n);
    }

    w.supercap_enabled = cfg.supercap.enabled;
    w.sc_params = {cfg.supercap.capacitance, cfg.supercap.esr, cfg.supercap.v_init};
    w.sc_cfg.v_ref = cfg.sim.v_grid_setpoint;
    w.sc_cfg.deadband = cfg.supercap.deadband;
    w.sc_cfg.i_max = cfg.supercap.i_max;
    w.sc_cfg.pi = {cfg.supercap.kp, cfg.supercap.ki, -cfg.supercap.i_max,
                   cfg.supercap.i_max};

    w.flex = cfg.flex;
    if (!cfg.load_profile.empty())
        w.load_profile = parse_load_csv(cfg.load_profile);
    if (!cfg.env_profile.empty())
        w.env_profile = parse_env_csv(cfg.env_profile);
    return w;
}

OrchestratorPolicy orchestrator_policy(const ScenarioConfig& cfg) {
    OrchestratorPolicy p;
    p.soc_min = cfg.nodes.soc_min;
    p.soc_max = cfg.nodes.soc_max;
    p.i_max = cfg.interchange.i_max;
    p.v_max = cfg.interchange.v_max;
    p.v_grid_setpoint = cfg.sim.v_grid_setpoint;
    return p;
}

} // namespace mg
