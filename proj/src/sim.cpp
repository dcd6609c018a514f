#include "mg/sim.hpp"

#include "mg/wire.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace mg {

namespace {

constexpr double k_residual_eps = 1e-9;

double node_power_limit(const BessNode& n) { return n.converter.power_rating; }

// Limits a battery-port power so one step of dt cannot push the SoC past its
// bounds: the implied current is clamped to what the remaining headroom allows.
double clip_power_to_soc(const BessNode& n, double p, double dt) {
    const double amps_per_soc = 3600.0 * n.params.capacity_ah / dt;
    const double i_max = (n.params.soc_max - n.state.soc) * amps_per_soc;
    const double i_min = -(n.state.soc - n.params.soc_min) * amps_per_soc;
    const double i = std::clamp(battery_current_for_power(n.params, p),
                                std::min(i_min, 0.0), std::max(i_max, 0.0));
    return i * battery_terminal_voltage(n.params, i);
}

// Signed battery-port power for a CC node, after rating and SoC clipping.
double cc_node_power(const BessNode& n, double dt) {
    if (n.mode.kind != ConverterModeKind::CC)
        return 0.0;
    double i = n.mode.i_setpoint;
    if (n.mode.direction == CcDirection::Discharge)
        i = -i;
    double p = i * battery_terminal_voltage(n.params, i);
    p = std::clamp(p, -node_power_limit(n), node_power_limit(n));
    return clip_power_to_soc(n, p, dt);
}

double charge_headroom(const BessNode& n) { return n.params.soc_max - n.state.soc; }
double discharge_headroom(const BessNode& n) { return n.state.soc - n.params.soc_min; }

} // namespace

void SimConfig::validate() const {
    if (dt <= 0)
        throw std::invalid_argument("SimConfig: dt must be > 0");
    if (duration < dt)
        throw std::invalid_argument("SimConfig: duration must be >= dt");
    if (v_grid_setpoint <= 0)
        throw std::invalid_argument("SimConfig: v_grid_setpoint must be > 0");
    if (mode == Mode::Transient && bus_capacitance <= 0)
        throw std::invalid_argument("SimConfig: bus_capacitance must be > 0 in transient mode");
}

double World::irradiance() const {
    if (irradiance_override)
        return *irradiance_override;
    if (env_profile)
        return env_profile->at(t).irradiance_wm2;
    return 0.0;
}

double World::temperature_k() const {
    if (temperature_override)
        return *temperature_override;
    if (env_profile)
        return env_profile->at(t).temp_c + 273.15;
    return 298.15;
}

double World::nonflex_power(double v_bus) const {
    if (nonflex_power_override)
        return *nonflex_power_override;
    if (load_profile)
        return load_profile->at(t);
    return nonflex_load_power(v_bus, nonflex_current);
}

void finish_world_setup(World& w) {
    w.sim.validate();
    w.pv.validate();
    w.flex.validate();
    if (w.nodes.empty())
        throw std::invalid_argument("World: at least one BESS node required");
    for (auto& n : w.nodes)
        n.params.validate();
    w.v_grid = w.sim.v_grid_setpoint;
    const double voc = pv_cell_open_circuit_voltage(1361.0, 298.15, w.pv.cell) *
                       w.pv.series_count * 1.2;
    w.mppt.v_max = voc;
    w.mppt.v_ref = std::min(w.pv.rated_voltage, voc);
    w.mppt.step_size = 0.5;
    w.mppt_every_steps = std::max(1, int(std::lround(0.01 / w.sim.dt)));
    w.sc_state = {w.sc_params.v_init, w.sc_params.v_init, 0.0};
    w.sc_cfg.v_ref = w.sim.v_grid_setpoint;
    const bool have_cv = std::any_of(w.nodes.begin(), w.nodes.end(), [](const BessNode& n) {
        return n.mode.kind == ConverterModeKind::CV;
    });
    if (!have_cv)
        w.nodes.front().mode = ConverterMode::cv(w.sim.v_grid_setpoint);
    // transient CV loop current limits from the converter rating
    const double i_lim = w.nodes.front().converter.power_rating / w.sim.v_grid_setpoint;
    w.cv_pi.u_min = -i_lim;
    w.cv_pi.u_max = i_lim;
}

std::vector<std::string> injection_paths(int node_count) {
    std::vector<std::string> p = {"env.irradiance",     "env.temperature",
                                  "load.nonflex_power", "load.nonflex_current",
                                  "flex.gamma",         "flex.p_max",
                                  "flex.mode",          "supercap.enabled"};
    for (int i = 0; i < node_count; ++i) {
        const std::string base = "node." + std::to_string(i) + ".";
        p.push_back(base + "soc");
        p.push_back(base + "mode_cv");
        p.push_back(base + "mode_cc_charge");
        p.push_back(base + "mode_cc_discharge");
        p.push_back(base + "mode_idle");
    }
    return p;
}

namespace {

struct PathInfo {
    bool known = false;
    int node = -1;
    std::string field;
};

PathInfo parse_path(const std::string& path, int node_count) {
    PathInfo info;
    if (path.rfind("node.", 0) == 0) {
        const auto rest = path.substr(5);
        const auto dot = rest.find('.');
        if (dot == std::string::npos)
            return info;
        try {
            info.node = std::stoi(rest.substr(0, dot));
        } catch (...) {
            return info;
        }
        if (info.node < 0 || info.node >= node_count)
            return info;
        info.field = rest.substr(dot + 1);
        info.known = info.field == "soc" || info.field == "mode_cv" ||
                     info.field == "mode_cc_charge" || info.field == "mode_cc_discharge" ||
                     info.field == "mode_idle";
        return info;
    }
    static const char* flat[] = {"env.irradiance",     "env.temperature",
                                 "load.nonflex_power", "load.nonflex_current",
                                 "flex.gamma",         "flex.p_max",
                                 "flex.mode",          "supercap.enabled"};
    for (const char* f : flat)
        if (path == f) {
            info.known = true;
            info.field = path;
            return info;
        }
    return info;
}

[[noreturn]] void unknown_path(const std::string& path, int node_count) {
    std::string msg = "unknown injection path '" + path + "'; valid paths:";
    for (const auto& p : injection_paths(node_count))
        msg += " " + p;
    throw std::invalid_argument(msg);
}

void check_value(const std::string& path, double v) {
    auto reject = [&](const std::string& bound) {
        throw std::invalid_argument("injection " + path + "=" + std::to_string(v) +
                                    " out of range: " + bound);
    };
    if (path == "env.irradiance" && v < 0)
        reject("irradiance must be >= 0");
    if (path == "env.temperature" && v <= 0)
        reject("temperature must be > 0 K");
    if ((path == "load.nonflex_power" || path == "load.nonflex_current" ||
         path == "flex.gamma" || path == "flex.p_max") &&
        v < 0)
        reject("value must be >= 0");
    if (path == "flex.mode" && v != 0 && v != 1 && v != 2)
        reject("flex.mode must be 0 (disabled), 1 (full) or 2 (partial)");
    if (path == "supercap.enabled" && v != 0 && v != 1)
        reject("supercap.enabled must be 0 or 1");
    if (path.rfind("node.", 0) == 0) {
        if (path.ends_with(".soc") && (v < 0 || v > 1))
            reject("soc must be in [0,1]");
        if (path.ends_with(".mode_cv") && v <= 0)
            reject("CV setpoint must be > 0");
        if ((path.ends_with(".mode_cc_charge") || path.ends_with(".mode_cc_discharge")) &&
            v < 0)
            reject("CC setpoint must be >= 0");
    }
}

} // namespace

void check_injection(const InjectionCommand& cmd, int node_count) {
    if (!parse_path(cmd.path, node_count).known)
        unknown_path(cmd.path, node_count);
    check_value(cmd.path, cmd.value);
}

void apply_injection(World& w, const InjectionCommand& cmd) {
    const auto info = parse_path(cmd.path, int(w.nodes.size()));
    if (!info.known)
        unknown_path(cmd.path, int(w.nodes.size()));
    check_value(cmd.path, cmd.value);
    if (info.node >= 0) {
        auto& node = w.nodes[info.node];
        if (info.field == "soc")
            node.state.soc = cmd.value;
        else if (info.field == "mode_cv")
            node.mode = ConverterMode::cv(cmd.value);
        else if (info.field == "mode_cc_charge")
            node.mode = ConverterMode::cc(cmd.value, CcDirection::Charge);
        else if (info.field == "mode_cc_discharge")
            node.mode = ConverterMode::cc(cmd.value, CcDirection::Discharge);
        else if (info.field == "mode_idle")
            node.mode = ConverterMode::idle();
        return;
    }
    if (cmd.path == "env.irradiance")
        w.irradiance_override = cmd.value;
    else if (cmd.path == "env.temperature")
        w.temperature_override = cmd.value;
    else if (cmd.path == "load.nonflex_power")
        w.nonflex_power_override = cmd.value;
    else if (cmd.path == "load.nonflex_current") {
        w.nonflex_current = cmd.value;
        w.nonflex_power_override.reset();
        w.load_profile.reset();
    } else if (cmd.path == "flex.gamma")
        w.flex.gamma = cmd.value;
    else if (cmd.path == "flex.p_max")
        w.flex.p_max = cmd.value;
    else if (cmd.path == "flex.mode")
        w.flex.mode = cmd.value == 0 ? FlexMode::Disabled
                    : cmd.value == 1 ? FlexMode::Full
                                     : FlexMode::Partial;
    else if (cmd.path == "supercap.enabled")
        w.supercap_enabled = cmd.value != 0;
}

void designate_cv(World& w, double residual_w) {
    auto cv = std::find_if(w.nodes.begin(), w.nodes.end(), [](const BessNode& n) {
        return n.mode.kind == ConverterModeKind::CV;
    });
    // A node may hold the bus only if it can absorb the whole residual this
    // step; a node with a sliver of headroom would otherwise cause a one-step
    // droop spike before handing off.
    auto can_hold = [&](const BessNode& n) {
        const double want =
            std::clamp(residual_w, -node_power_limit(n), node_power_limit(n));
        const double got = clip_power_to_soc(n, want, w.sim.dt);
        return std::abs(got - want) <= std::max(1e-9, 1e-12 * std::abs(want));
    };
    auto headroom = [&](const BessNode& n) {
        if (!can_hold(n))
            return 0.0;
        if (residual_w > k_residual_eps)
            return charge_headroom(n);
        if (residual_w < -k_residual_eps)
            return discharge_headroom(n);
        return 1.0; // no residual: anyone can hold the bus
    };
    if (cv != w.nodes.end() && headroom(*cv) > 0) {
        w.islanding_fault = false;
        return;
    }
    auto best = w.nodes.end();
    for (auto it = w.nodes.begin(); it != w.nodes.end(); ++it)
        if (headroom(*it) > 0 && (best == w.nodes.end() || headroom(*it) > headroom(*best)))
            best = it;
    if (best == w.nodes.end()) {
        if (!w.islanding_fault)
            w.events.push_back("t=" + std::to_string(w.t) +
                               " islanding fault: no node can hold CV");
        w.islanding_fault = true;
        if (cv != w.nodes.end())
            cv->mode = ConverterMode::idle();
        return;
    }
    if (cv != w.nodes.end() && cv != best) {
        cv->mode = ConverterMode::idle();
        w.events.push_back("t=" + std::to_string(w.t) + " CV handoff to node " +
                           std::to_string(best->id));
    } else if (cv == w.nodes.end()) {
        w.events.push_back("t=" + std::to_string(w.t) + " CV restored on node " +
                           std::to_string(best->id));
    }
    best->mode = ConverterMode::cv(w.sim.v_grid_setpoint);
    best->pi = PiState{};
    w.islanding_fault = false;
}

BalancePreview balance_preview(const World& w) {
    BalancePreview b;
    b.p_pv = pv_array_mpp(w.irradiance(), w.temperature_k(), w.pv).power;
    b.p_nonflex = w.nonflex_power(w.sim.v_grid_setpoint);
    b.p_flex = flex_actuation(b.p_pv, b.p_nonflex, w.flex);
    return b;
}

StepRecord step_energy(World& w, double dt) {
    const auto bal = balance_preview(w);

    std::vector<double> p_node(w.nodes.size(), 0.0);
    double p_cc_sum = 0;
    for (std::size_t i = 0; i < w.nodes.size(); ++i) {
        p_node[i] = cc_node_power(w.nodes[i], dt);
        p_cc_sum += p_node[i];
    }
    const double residual = bal.p_pv - bal.p_nonflex - bal.p_flex - p_cc_sum;

    designate_cv(w, residual);

    double excess = residual;
    for (std::size_t i = 0; i < w.nodes.size(); ++i) {
        auto& n = w.nodes[i];
        if (n.mode.kind != ConverterModeKind::CV)
            continue;
        double p = std::clamp(residual, -node_power_limit(n), node_power_limit(n));
        p = clip_power_to_soc(n, p, dt);
        p_node[i] = p;
        excess = residual - p;
    }
    w.v_grid = w.sim.v_grid_setpoint + w.sim.droop_v_per_w * excess;
    if (std::abs(excess) > 1e-6)
        w.events.push_back("t=" + std::to_string(w.t) + " droop: unabsorbed residual " +
                           std::to_string(excess) + " W");

    StepRecord rec;
    rec.t = w.t;
    rec.v_grid = w.v_grid;
    rec.p_pv = bal.p_pv;
    rec.p_nonflex = bal.p_nonflex;
    rec.p_flex = bal.p_flex;
    rec.p_sc = 0;
    for (std::size_t i = 0; i < w.nodes.size(); ++i) {
        auto& n = w.nodes[i];
        const double current = battery_current_for_power(n.params, p_node[i]);
        n.state = battery_soc_step(n.state, current, dt, n.params);
        rec.nodes.push_back({p_node[i], n.state.soc, std::string(to_string(n.mode.kind))});
    }
    w.t += dt;
    return rec;
}

StepRecord step_transient(World& w, double dt) {
    const double g = w.irradiance();
    const double temp = w.temperature_k();

    if (++w.mppt_counter >= w.mppt_every_steps) {
        w.mppt_counter = 0;
        const double p_meas =
            std::max(0.0, pv_array_output(g, temp, w.mppt.v_ref, w.pv).power);
        w.mppt = mppt_step(w.mppt, w.mppt.v_ref, p_meas);
    }
    const double p_pv = std::max(0.0, pv_array_output(g, temp, w.mppt.v_ref, w.pv).power);
    // floor the conversion voltage so a deep sag cannot blow up the implied currents
    const double v_conv = std::max(w.v_grid, 1.0);
    const double i_pv = p_pv / v_conv;

    const double p_nonflex = w.nonflex_power(w.v_grid);
    const double p_flex = flex_actuation(p_pv, p_nonflex, w.flex);
    const double i_load = (p_nonflex + p_flex) / v_conv;

    double i_nodes = 0;
    std::vector<double> p_node(w.nodes.size(), 0.0);
    for (std::size_t i = 0; i < w.nodes.size(); ++i) {
        auto& n = w.nodes[i];
        double i_bus = 0; // positive injects into the bus
        if (n.mode.kind == ConverterModeKind::CV) {
            auto [ns, u] = pi_step(w.cv_pi, n.pi, n.mode.v_setpoint - w.v_grid, dt);
            n.pi = ns;
            i_bus = u;
        } else if (n.mode.kind == ConverterModeKind::CC) {
            i_bus = n.mode.direction == CcDirection::Discharge ? n.mode.i_setpoint
                                                               : -n.mode.i_setpoint;
        }
        double p = -i_bus * w.v_grid; // charging-positive battery power
        if (p > 0 && n.state.soc >= n.params.soc_max) { p = 0; i_bus = 0; }
        if (p < 0 && n.state.soc <= n.params.soc_min) { p = 0; i_bus = 0; }
        p_node[i] = p;
        i_nodes += i_bus;
    }

    double i_sc = 0, p_sc = 0;
    if (w.supercap_enabled) {
        auto [ns, cmd] = sc_regulator_step(w.sc_cfg, w.sc_pi, w.v_grid, dt);
        w.sc_pi = ns;
        i_sc = cmd;
        w.sc_state = supercap_step(w.sc_state, i_sc, dt, w.sc_params);
        p_sc = i_sc * w.v_grid;
    }

    StepRecord rec;
    rec.t = w.t;
    rec.v_grid = w.v_grid;
    rec.p_pv = p_pv;
    rec.p_nonflex = p_nonflex;
    rec.p_flex = p_flex;
    rec.p_sc = p_sc;
    for (std::size_t i = 0; i < w.nodes.size(); ++i) {
        auto& n = w.nodes[i];
        const double current = battery_current_for_power(n.params, p_node[i]);
        n.state = battery_soc_step(n.state, current, dt, n.params);
        rec.nodes.push_back({p_node[i], n.state.soc, std::string(to_string(n.mode.kind))});
    }

    w.v_grid += dt * (i_pv + i_nodes + i_sc - i_load) / w.sim.bus_capacitance;
    w.t += dt;
    return rec;
}

void InjectionQueue::push(InjectionCommand cmd) {
    std::lock_guard lock(mu_);
    q_.push_back(std::move(cmd));
}

std::vector<InjectionCommand> InjectionQueue::drain() {
    std::lock_guard lock(mu_);
    std::vector<InjectionCommand> out(q_.begin(), q_.end());
    q_.clear();
    return out;
}

RunResult run(World w, std::vector<InjectionCommand> injections, const RunHooks& hooks) {
    finish_world_setup(w);
    std::stable_sort(injections.begin(), injections.end(),
                     [](const auto& a, const auto& b) { return a.apply_at < b.apply_at; });
    for (const auto& cmd : injections)
        check_injection(cmd, int(w.nodes.size()));

    const long n_steps = std::lround(w.sim.duration / w.sim.dt);
    RunResult result;
    result.trace.reserve(std::size_t(n_steps));
    std::size_t next_injection = 0;

    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();

    for (long step = 0; step < n_steps; ++step) {
        if (hooks.cancelled && hooks.cancelled())
            break;
        while (next_injection < injections.size() &&
               injections[next_injection].apply_at <= w.t + 1e-12)
            apply_injection(w, injections[next_injection++]);
        if (hooks.live_injections)
            for (const auto& cmd : hooks.live_injections->drain()) {
                try {
                    apply_injection(w, cmd);
                } catch (const std::exception& e) {
                    w.events.push_back("t=" + std::to_string(w.t) +
                                       " rejected live injection: " + e.what());
                }
            }
        if (hooks.on_step_begin)
            hooks.on_step_begin(w, balance_preview(w));

        StepRecord rec;
        try {
            rec = w.sim.mode == SimConfig::Mode::Energy ? step_energy(w, w.sim.dt)
                                                        : step_transient(w, w.sim.dt);
        } catch (const std::exception& e) {
            throw std::runtime_error("step " + std::to_string(step) + " (t=" +
                                     std::to_string(w.t) + "): " + e.what());
        }
        if (!std::isfinite(rec.v_grid))
            throw std::runtime_error("step " + std::to_string(step) +
                                     ": non-finite grid voltage");
        for (const auto& n : rec.nodes)
            if (!std::isfinite(n.soc) || !std::isfinite(n.p_batt))
                throw std::runtime_error("step " + std::to_string(step) +
                                         ": non-finite node state");
        if (hooks.on_record)
            hooks.on_record(rec, w);
        result.trace.push_back(std::move(rec));

        if (w.sim.realtime_pacing) {
            const auto target = wall_start + std::chrono::duration_cast<clock::duration>(
                                                 std::chrono::duration<double>(
                                                     (double(step) + 1) * w.sim.dt));
            std::this_thread::sleep_until(target);
        }
    }
    result.events = std::move(w.events);
    return result;
}

} // namespace mg
