#include "mg/components.hpp"

#include <algorithm>
#include <cmath>

namespace mg {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok)
        throw std::invalid_argument(what);
}

} // namespace

void PvCellParams::validate() const {
    require(efficiency > 0 && efficiency <= 1, "PvCellParams: efficiency must be in (0,1]");
    require(shunt_resistance > 0, "PvCellParams: shunt_resistance must be > 0");
    require(sat_current > 0, "PvCellParams: sat_current must be > 0");
    require(ideality >= 1, "PvCellParams: ideality must be >= 1");
    require(area_cell > 0, "PvCellParams: area_cell must be > 0");
}

void PvArrayConfig::validate() const {
    cell.validate();
    require(series_count >= 1 && parallel_count >= 1,
            "PvArrayConfig: series_count and parallel_count must be >= 1");
    require(rated_power > 0, "PvArrayConfig: rated_power must be > 0");
}

double pv_cell_current(const PvInput& in, const PvCellParams& p) {
    require(in.irradiance >= 0, "pv_cell_current: irradiance must be >= 0");
    require(in.temperature > 0, "pv_cell_current: temperature must be > 0");
    const double photo = in.irradiance * p.area_cell * p.efficiency;
    const double vt = p.ideality * k_boltzmann * in.temperature / k_elementary_charge;
    const double diode = p.sat_current * std::expm1(in.terminal_voltage / vt);
    const double shunt = in.terminal_voltage / p.shunt_resistance;
    const double i = photo - diode - shunt;
    if (!std::isfinite(i))
        throw std::domain_error("pv_cell_current: non-finite current at v=" +
                                std::to_string(in.terminal_voltage));
    return i;
}

PvOutput pv_array_output(double irradiance, double temperature_k,
                         double v_array, const PvArrayConfig& cfg) {
    require(v_array >= 0, "pv_array_output: v_array must be >= 0");
    const double v_cell = v_array / cfg.series_count;
    const double i_cell = pv_cell_current({irradiance, temperature_k, v_cell}, cfg.cell);
    const double i = cfg.parallel_count * i_cell;
    return {i, v_array * i};
}

double pv_cell_open_circuit_voltage(double irradiance, double temperature_k,
                                    const PvCellParams& p) {
    const double photo = irradiance * p.area_cell * p.efficiency;
    if (photo <= 0)
        return 0.0;
    const double vt = p.ideality * k_boltzmann * temperature_k / k_elementary_charge;
    // Diode-only bound, then widen for the shunt contribution.
    double hi = vt * std::log1p(photo / p.sat_current) * 1.1 + 1e-9;
    double lo = 0.0;
    auto f = [&](double v) { return pv_cell_current({irradiance, temperature_k, v}, p); };
    while (f(hi) > 0)
        hi *= 2;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

PvMpp pv_array_mpp(double irradiance, double temperature_k, const PvArrayConfig& cfg) {
    if (irradiance <= 0)
        return {0.0, 0.0};
    const double v_oc_cell =
        pv_cell_open_circuit_voltage(irradiance, temperature_k, cfg.cell);
    double a = 0.0, b = v_oc_cell * cfg.series_count;
    auto power = [&](double v) { return pv_array_output(irradiance, temperature_k, v, cfg).power; };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = power(x1), f2 = power(x2);
    for (int it = 0; it < 120; ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (b - a); f2 = power(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - phi * (b - a); f1 = power(x1);
        }
    }
    const double v = 0.5 * (a + b);
    return {v, power(v)};
}

PvArrayConfig calibrate_pv_array(PvArrayConfig cfg) {
    constexpr double g_stc = 1000.0, t_stc = 298.15;

    // area*efficiency moves the MPP power, ideality moves the MPP voltage;
    // the couplings are weak (logarithmic), so alternating bisections converge.
    auto fit_area = [&](PvArrayConfig c) {
        double lo = 1e-6, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            c.cell.area_cell = mid;
            (pv_array_mpp(g_stc, t_stc, c).power < c.rated_power ? lo : hi) = mid;
        }
        c.cell.area_cell = 0.5 * (lo + hi);
        return c;
    };
    auto fit_ideality = [&](PvArrayConfig c) {
        double lo = 1.0, hi = 200.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            c.cell.ideality = mid;
            (pv_array_mpp(g_stc, t_stc, c).voltage < c.rated_voltage ? lo : hi) = mid;
        }
        c.cell.ideality = 0.5 * (lo + hi);
        return c;
    };

    cfg.cell.efficiency = 1.0; // fold the product into area_cell
    cfg.cell.area_cell = 0.01;
    if (cfg.cell.sat_current <= 0)
        cfg.cell.sat_current = 1e-9;
    if (cfg.cell.shunt_resistance <= 0)
        cfg.cell.shunt_resistance = 500.0;
    cfg.cell.ideality = 40.0;
    for (int round = 0; round < 8; ++round) {
        cfg = fit_area(cfg);
        cfg = fit_ideality(cfg);
    }
    cfg = fit_area(cfg);
    cfg.validate();
    return cfg;
}

const PvArrayConfig& default_pv_array() {
    static const PvArrayConfig cfg = calibrate_pv_array(PvArrayConfig{});
    return cfg;
}

void BatteryParams::validate() const {
    require(capacity_ah > 0, "BatteryParams: capacity_ah must be > 0");
    require(internal_resistance >= 0, "BatteryParams: internal_resistance must be >= 0");
    require(soc_min >= 0 && soc_max <= 1 && soc_min < soc_max,
            "BatteryParams: need 0 <= soc_min < soc_max <= 1");
}

double battery_terminal_voltage(const BatteryParams& p, double current) {
    return p.open_circuit_voltage + current * p.internal_resistance;
}

double battery_current_for_power(const BatteryParams& p, double power) {
    const double e = p.open_circuit_voltage;
    const double r = p.internal_resistance;
    if (r == 0)
        return power / e;
    const double disc = e * e + 4.0 * r * power;
    if (disc <= 0)
        return -e / (2.0 * r); // maximum-discharge-power limit
    return (-e + std::sqrt(disc)) / (2.0 * r);
}

BatteryState battery_soc_step(const BatteryState& s, double current,
                              double dt, const BatteryParams& p) {
    require(dt > 0, "battery_soc_step: dt must be > 0");
    BatteryState out;
    out.soc = std::clamp(s.soc + current * dt / (p.capacity_ah * 3600.0), 0.0, 1.0);
    out.current = current;
    out.terminal_voltage = battery_terminal_voltage(p, current);
    return out;
}

void SupercapParams::validate() const {
    require(capacitance > 0, "SupercapParams: capacitance must be > 0");
    require(esr >= 0, "SupercapParams: esr must be >= 0");
}

SupercapState supercap_step(const SupercapState& s, double current,
                            double dt, const SupercapParams& p) {
    require(dt > 0, "supercap_step: dt must be > 0");
    SupercapState out;
    out.stored_voltage = std::max(0.0, s.stored_voltage - current * dt / p.capacitance);
    out.current = current;
    out.terminal_voltage = out.stored_voltage - p.esr * current;
    return out;
}

void ConverterRating::validate() const {
    require(v_in > 0 && v_out > v_in, "ConverterRating: need v_out > v_in > 0 (boost)");
    require(power_rating > 0, "ConverterRating: power_rating must be > 0");
    require(switching_freq > 0, "ConverterRating: switching_freq must be > 0");
}

ConverterSizing size_converter(const ConverterRating& r) {
    r.validate();
    ConverterSizing s;
    s.ripple_current = 0.01 * r.i_out * (r.v_out / r.v_in);
    s.ripple_voltage = 0.01 * r.v_out;
    s.inductance = r.v_in * (r.v_out - r.v_in) /
                   (s.ripple_current * r.switching_freq * r.v_out) * 1.5;
    s.capacitance = r.i_out * (1.0 - r.v_in / r.v_out) /
                    (r.switching_freq * s.ripple_voltage);
    return s;
}

} // namespace mg
