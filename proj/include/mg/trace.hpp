#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mg {

struct NodeRecord {
    double p_batt = 0; // W, charging-positive
    double soc = 0;    // fraction
    std::string mode;  // CV | CC | IDLE
};

struct StepRecord {
    double t = 0;         // s
    double v_grid = 0;    // V
    double p_pv = 0;      // W
    double p_nonflex = 0; // W
    double p_flex = 0;    // W
    double p_sc = 0;      // W, positive = supercap delivers to bus
    std::vector<NodeRecord> nodes;
};

using Trace = std::vector<StepRecord>;

// CSV with header t,v_grid,p_pv,p_nonflex,p_flex,p_sc,p_batt_<i>,soc_<i>,mode_<i>...
// floats at 9 significant digits.
void write_trace_csv(const Trace& trace, const std::filesystem::path& file);
Trace read_trace_csv(const std::filesystem::path& file);

struct SummaryMetrics {
    double energy_pv_kwh = 0;
    double energy_to_flex_kwh = 0;
    double energy_to_bess_kwh = 0;
    double energy_from_bess_kwh = 0;
    double energy_to_loads_kwh = 0;
    double energy_spilled_kwh = 0; // balance residual, nonzero only under droop
    double max_voltage_deviation = 0; // V
    double pv_utilization = 0;        // [0,1]
    std::vector<double> soc_final;

    std::string to_text() const;
};

// Trapezoidal integration of the trace power columns.
SummaryMetrics summarize(const Trace& trace, double v_setpoint = 100.0);

// Standalone SVG with four stacked panels: total load, BESS power,
// flexible-load power, SoC.
void emit_plot(const Trace& trace, const std::filesystem::path& file);

} // namespace mg
