#pragma once

#include <span>
#include <stdexcept>
#include <string>

namespace mg {

struct PiConfig {
    double kp = 0;
    double ki = 0;    // 1/s
    double u_min = 0;
    double u_max = 0;

    void validate() const;
};

struct PiState {
    double integrator = 0.0;
};

struct PiResult {
    PiState state;
    double output;
};

// Discrete PI with integrator clamping as anti-windup; the output is
// clamped to [u_min, u_max].
PiResult pi_step(const PiConfig& cfg, PiState s, double error, double dt);

struct MpptState {
    double v_ref = 0;
    double prev_power = 0;
    double prev_voltage = 0;
    double step_size = 0.5; // V
    int direction = +1;     // +1 or -1
    double v_max = 0;       // open-circuit bound for v_ref
};

// Perturb and observe: keep direction while power rises, flip when it
// falls; ties keep the current direction.
MpptState mppt_step(MpptState s, double v_meas, double p_meas);

enum class ConverterModeKind { CV, CC, Idle };
enum class CcDirection { Charge, Discharge };

struct ConverterMode {
    ConverterModeKind kind = ConverterModeKind::Idle;
    double v_setpoint = 0;  // CV
    double i_setpoint = 0;  // CC, >= 0
    CcDirection direction = CcDirection::Charge;

    static ConverterMode cv(double v_setpoint);
    static ConverterMode cc(double i_setpoint, CcDirection dir);
    static ConverterMode idle() { return {}; }
};

enum class FlexMode { Disabled, Full, Partial };

struct FlexLoadConfig {
    FlexMode mode = FlexMode::Disabled;
    double gamma = 0;  // W reserved away from flexible loads
    double p_max = 0;  // W rating

    void validate() const;
};

// PV-following flexible load demand, clamped to [0, p_max].
double flex_load_power(double p_pv, const FlexLoadConfig& cfg);

double nonflex_load_power(double v_grid, double i_nflx);

double total_power(std::span<const double> powers);

// Surplus-based actuation: flexible loads see only PV power in excess of
// the non-flexible demand.
double flex_actuation(double p_pv, double p_nonflex, const FlexLoadConfig& cfg);

struct ScRegulatorConfig {
    double v_ref = 100.0;  // V
    double deadband = 1.0; // V
    PiConfig pi{10.0, 100.0, -100.0, 100.0};
    double i_max = 100.0;  // A

    void validate() const;
};

struct ScRegulatorResult {
    PiState state;
    double i_command; // A, positive injects into the bus
};

// Grid-voltage watchdog: commands supercapacitor current only outside the
// deadband; inside it the command is zero and the integrator bleeds off.
ScRegulatorResult sc_regulator_step(const ScRegulatorConfig& cfg, PiState s,
                                    double v_grid, double dt);

} // namespace mg
