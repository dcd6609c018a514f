#pragma once

#include <stdexcept>
#include <string>

namespace mg {

inline constexpr double k_elementary_charge = 1.602176634e-19; // C
inline constexpr double k_boltzmann = 1.380649e-23;            // J/K

// Single-diode PV model without a series element: the junction voltage is
// the terminal voltage. "Cell" here is the smallest modeled unit (one
// module of the array).
struct PvCellParams {
    double area_cell;        // m^2, effective
    double efficiency;       // (0,1]
    double sat_current;      // A, reverse saturation
    double ideality;         // >= 1
    double shunt_resistance; // ohm, > 0

    void validate() const;
};

struct PvArrayConfig {
    PvCellParams cell{};
    int series_count = 3;
    int parallel_count = 10;
    double rated_power = 5000.0;  // W
    double rated_voltage = 69.0;  // V

    void validate() const;
};

struct PvInput {
    double irradiance;       // W/m^2, >= 0
    double temperature;      // K, > 0
    double terminal_voltage; // V
};

double pv_cell_current(const PvInput& in, const PvCellParams& p);

struct PvOutput {
    double current; // A
    double power;   // W
};

PvOutput pv_array_output(double irradiance, double temperature_k,
                         double v_array, const PvArrayConfig& cfg);

// Root of pv_cell_current in v, found by bisection on [0, v_hi].
double pv_cell_open_circuit_voltage(double irradiance, double temperature_k,
                                    const PvCellParams& p);

struct PvMpp {
    double voltage; // V, array terminal
    double power;   // W
};

// Maximum of the array P-V curve by golden-section search on [0, v_oc].
PvMpp pv_array_mpp(double irradiance, double temperature_k,
                   const PvArrayConfig& cfg);

// Fits area_cell*efficiency and the module-level ideality so that the
// array MPP at G=1000 W/m^2, T=298.15 K lands on (rated_voltage,
// rated_power). sat_current and shunt_resistance are kept as given.
PvArrayConfig calibrate_pv_array(PvArrayConfig cfg);

// Calibrated 3s10p array rated 5 kW at 69 V.
const PvArrayConfig& default_pv_array();

struct BatteryParams {
    double open_circuit_voltage; // V
    double internal_resistance;  // ohm, >= 0
    double capacity_ah;          // A*h, > 0
    double soc_min = 0.0;        // fraction
    double soc_max = 1.0;        // fraction

    void validate() const;
};

// Charging-positive sign convention: current > 0 charges the battery and
// raises the terminal voltage above the open-circuit voltage.
struct BatteryState {
    double soc;              // [0,1]
    double terminal_voltage; // V
    double current;          // A, charging-positive
};

double battery_terminal_voltage(const BatteryParams& p, double current);

// Charging-positive current I such that I * (E + I*R_i) == power.
double battery_current_for_power(const BatteryParams& p, double power);

// Coulomb counting; soc clamped to [0,1] silently.
BatteryState battery_soc_step(const BatteryState& s, double current,
                              double dt, const BatteryParams& p);

struct SupercapParams {
    double capacitance; // F, > 0
    double esr;         // ohm, >= 0
    double v_init = 0;  // V

    void validate() const;
};

// Discharging-positive: current > 0 flows out of the capacitor.
struct SupercapState {
    double stored_voltage;   // V, integral term
    double terminal_voltage; // V
    double current;          // A
};

SupercapState supercap_step(const SupercapState& s, double current,
                            double dt, const SupercapParams& p);

struct ConverterRating {
    double v_in = 69.0;           // V
    double v_out = 100.0;         // V
    double i_out = 50.0;          // A
    double switching_freq = 1000; // Hz
    double power_rating = 5000;   // W

    void validate() const;
};

struct ConverterSizing {
    double ripple_current; // A
    double ripple_voltage; // V
    double inductance;     // H
    double capacitance;    // F
};

// Boost filter sizing at 1% current and voltage ripple.
ConverterSizing size_converter(const ConverterRating& r);

} // namespace mg
