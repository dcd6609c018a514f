#include "mg/control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mg {

void PiConfig::validate() const {
    if (!(u_min < u_max))
        throw std::invalid_argument("PiConfig: u_min must be < u_max");
    if (ki < 0)
        throw std::invalid_argument("PiConfig: ki must be >= 0");
}

PiResult pi_step(const PiConfig& cfg, PiState s, double error, double dt) {
    if (dt <= 0)
        throw std::invalid_argument("pi_step: dt must be > 0");
    s.integrator = std::clamp(s.integrator + cfg.ki * error * dt, cfg.u_min, cfg.u_max);
    const double u = std::clamp(cfg.kp * error + s.integrator, cfg.u_min, cfg.u_max);
    return {s, u};
}

MpptState mppt_step(MpptState s, double v_meas, double p_meas) {
    if (v_meas < 0 || p_meas < 0)
        throw std::invalid_argument("mppt_step: measurements must be >= 0");
    if (p_meas < s.prev_power)
        s.direction = -s.direction;
    s.v_ref = std::clamp(s.v_ref + s.direction * s.step_size, 0.0, s.v_max);
    s.prev_power = p_meas;
    s.prev_voltage = v_meas;
    return s;
}

ConverterMode ConverterMode::cv(double v_setpoint) {
    if (v_setpoint <= 0)
        throw std::invalid_argument("ConverterMode: CV setpoint must be > 0");
    ConverterMode m;
    m.kind = ConverterModeKind::CV;
    m.v_setpoint = v_setpoint;
    return m;
}

ConverterMode ConverterMode::cc(double i_setpoint, CcDirection dir) {
    if (i_setpoint < 0)
        throw std::invalid_argument("ConverterMode: CC setpoint must be >= 0");
    ConverterMode m;
    m.kind = ConverterModeKind::CC;
    m.i_setpoint = i_setpoint;
    m.direction = dir;
    return m;
}

void FlexLoadConfig::validate() const {
    if (gamma < 0)
        throw std::invalid_argument("FlexLoadConfig: gamma must be >= 0");
    if (mode == FlexMode::Full && gamma != 0)
        throw std::invalid_argument("FlexLoadConfig: Full mode forces gamma = 0");
    if (mode != FlexMode::Disabled && p_max < 0)
        throw std::invalid_argument("FlexLoadConfig: p_max must be >= 0");
}

double flex_load_power(double p_pv, const FlexLoadConfig& cfg) {
    if (p_pv < 0)
        throw std::invalid_argument("flex_load_power: p_pv must be >= 0");
    if (cfg.mode == FlexMode::Disabled)
        return 0.0;
    return std::clamp(p_pv - cfg.gamma, 0.0, cfg.p_max);
}

double nonflex_load_power(double v_grid, double i_nflx) {
    return v_grid * i_nflx;
}

double total_power(std::span<const double> powers) {
    return std::accumulate(powers.begin(), powers.end(), 0.0);
}

double flex_actuation(double p_pv, double p_nonflex, const FlexLoadConfig& cfg) {
    if (p_pv < 0 || p_nonflex < 0)
        throw std::invalid_argument("flex_actuation: inputs must be >= 0");
    const double surplus = std::max(0.0, p_pv - p_nonflex);
    return flex_load_power(surplus, cfg);
}

void ScRegulatorConfig::validate() const {
    if (deadband <= 0)
        throw std::invalid_argument("ScRegulatorConfig: deadband must be > 0");
    if (i_max <= 0)
        throw std::invalid_argument("ScRegulatorConfig: i_max must be > 0");
    pi.validate();
}

ScRegulatorResult sc_regulator_step(const ScRegulatorConfig& cfg, PiState s,
                                    double v_grid, double dt) {
    if (dt <= 0)
        throw std::invalid_argument("sc_regulator_step: dt must be > 0");
    if (std::abs(v_grid - cfg.v_ref) <= cfg.deadband) {
        // first-order bleed, tau = 0.1 s
        s.integrator *= std::max(0.0, 1.0 - dt / 0.1);
        return {s, 0.0};
    }
    auto [ns, u] = pi_step(cfg.pi, s, cfg.v_ref - v_grid, dt);
    return {ns, std::clamp(u, -cfg.i_max, cfg.i_max)};
}

} // namespace mg
