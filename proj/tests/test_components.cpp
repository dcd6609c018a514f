#include <doctest.h>

#include <cmath>
#include <random>

#include "mg/components.hpp"

using namespace mg;

namespace {

PvCellParams cell_with_photocurrent(double amps_at_stc) {
    PvCellParams p;
    p.area_cell = amps_at_stc / 1000.0; // G * area * eff = amps at G=1000
    p.efficiency = 1.0;
    p.sat_current = 1e-9;
    p.ideality = 45.0;
    p.shunt_resistance = 500.0;
    return p;
}

// Independent root-find on the cell equation, used as the v_oc oracle.
double bisect_voc(double g, double temp, const PvCellParams& p) {
    double lo = 0.0, hi = 200.0;
    auto f = [&](double v) { return pv_cell_current({g, temp, v}, p); };
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("pv cell current vanishes at zero irradiance and zero voltage") {
    const auto p = cell_with_photocurrent(8.0);
    CHECK(pv_cell_current({0.0, 298.15, 0.0}, p) == doctest::Approx(0.0));
}

TEST_CASE("pv short-circuit current equals the photocurrent") {
    const auto p = cell_with_photocurrent(8.0);
    CHECK(pv_cell_current({1000.0, 298.15, 0.0}, p) == doctest::Approx(8.0));
}

TEST_CASE("pv open-circuit voltage matches an independent bisection") {
    const auto p = cell_with_photocurrent(8.0);
    const double oracle = bisect_voc(1000.0, 298.15, p);
    const double voc = pv_cell_open_circuit_voltage(1000.0, 298.15, p);
    CHECK(voc == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(std::abs(pv_cell_current({1000.0, 298.15, voc}, p)) < 1e-6);
}

TEST_CASE("pv cell current is strictly decreasing in voltage") {
    const auto p = cell_with_photocurrent(8.0);
    const double voc = pv_cell_open_circuit_voltage(1000.0, 298.15, p);
    double prev = pv_cell_current({1000.0, 298.15, 0.0}, p);
    for (int i = 1; i <= 200; ++i) {
        const double v = voc * 1.05 * i / 200.0;
        const double cur = pv_cell_current({1000.0, 298.15, v}, p);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("pv cell current rejects voltages that overflow the exponential") {
    const auto p = cell_with_photocurrent(8.0);
    CHECK_THROWS_AS(pv_cell_current({1000.0, 298.15, 1e6}, p), std::domain_error);
    try {
        pv_cell_current({1000.0, 298.15, 1e6}, p);
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("pv array output is zero at zero voltage") {
    const auto& cfg = default_pv_array();
    CHECK(pv_array_output(1000.0, 298.15, 0.0, cfg).power == doctest::Approx(0.0));
}

TEST_CASE("pv array current is monotone in irradiance below the knee") {
    const auto& cfg = default_pv_array();
    for (double v : {10.0, 30.0, 50.0, 60.0}) {
        const double lo = pv_array_output(500.0, 298.15, v, cfg).current;
        const double hi = pv_array_output(1000.0, 298.15, v, cfg).current;
        CHECK(lo < hi);
    }
}

TEST_CASE("calibrated array hits its nameplate at standard conditions") {
    const auto& cfg = default_pv_array();
    const auto mpp = pv_array_mpp(1000.0, 298.15, cfg);
    CHECK(mpp.power == doctest::Approx(5000.0).epsilon(1e-6));
    CHECK(mpp.voltage == doctest::Approx(69.0).epsilon(1e-4));
}

TEST_CASE("pv power curve has exactly one interior maximum") {
    const auto& cfg = default_pv_array();
    for (double g : {300.0, 700.0, 1000.0}) {
        const double voc = pv_cell_open_circuit_voltage(g, 298.15, cfg.cell) *
                           cfg.series_count;
        int sign_changes = 0;
        double prev_slope = 1.0;
        const int n = 400;
        for (int i = 1; i < n; ++i) {
            const double v0 = voc * (i - 1) / n, v1 = voc * i / n;
            const double slope = pv_array_output(g, 298.15, v1, cfg).power -
                                 pv_array_output(g, 298.15, v0, cfg).power;
            if (slope * prev_slope < 0)
                ++sign_changes;
            if (slope != 0)
                prev_slope = slope;
        }
        CHECK(sign_changes == 1);
    }
}

TEST_CASE("battery terminal voltage follows the internal-resistance drop") {
    BatteryParams p{100.0, 0.1, 10.0};
    CHECK(battery_terminal_voltage(p, 0.0) == doctest::Approx(100.0));
    CHECK(battery_terminal_voltage(p, +10.0) == doctest::Approx(101.0));
    CHECK(battery_terminal_voltage(p, -10.0) == doctest::Approx(99.0));
}

TEST_CASE("battery current for power inverts the terminal relation") {
    BatteryParams p{100.0, 0.05, 100.0};
    for (double power : {-4000.0, -500.0, 0.0, 750.0, 5000.0}) {
        const double i = battery_current_for_power(p, power);
        CHECK(i * battery_terminal_voltage(p, i) == doctest::Approx(power).epsilon(1e-12));
        CHECK(((power > 0) == (i > 0) || power == 0));
    }
}

TEST_CASE("coulomb counting clamps at full charge") {
    BatteryParams p{100.0, 0.1, 10.0};
    BatteryState s{0.5, 100.0, 0.0};
    const auto s2 = battery_soc_step(s, +10.0, 3600.0, p);
    CHECK(s2.soc == doctest::Approx(1.0));
}

TEST_CASE("coulomb counting holds at zero current") {
    BatteryParams p{100.0, 0.1, 10.0};
    BatteryState s{0.5, 100.0, 0.0};
    CHECK(battery_soc_step(s, 0.0, 12345.0, p).soc == doctest::Approx(0.5));
}

TEST_CASE("coulomb counting discharges by the hand-counted amount") {
    BatteryParams p{100.0, 0.1, 10.0};
    BatteryState s{0.5, 100.0, 0.0};
    CHECK(battery_soc_step(s, -5.0, 1800.0, p).soc == doctest::Approx(0.25));
}

TEST_CASE("coulomb counting is additive over arbitrary sub-steps") {
    BatteryParams p{100.0, 0.05, 60.0};
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    for (int trial = 0; trial < 20; ++trial) {
        const double total_t = 1000.0, current = -3.0;
        BatteryState whole{0.7, 0, 0};
        whole = battery_soc_step(whole, current, total_t, p);
        BatteryState split{0.7, 0, 0};
        double done = 0;
        while (done < total_t) {
            const double step = std::min(frac(rng) * 100.0, total_t - done);
            split = battery_soc_step(split, current, step, p);
            done += step;
        }
        CHECK(split.soc == doctest::Approx(whole.soc).epsilon(1e-12));
    }
}

TEST_CASE("supercap state is unchanged at zero current") {
    SupercapParams p{100.0, 0.01, 50.0};
    SupercapState s{50.0, 50.0, 0.0};
    const auto s2 = supercap_step(s, 0.0, 1.0, p);
    CHECK(s2.stored_voltage == doctest::Approx(50.0));
    CHECK(s2.terminal_voltage == doctest::Approx(50.0));
}

TEST_CASE("supercap discharge drops the stored voltage by I*dt/C") {
    SupercapParams p{100.0, 0.0, 50.0};
    SupercapState s{50.0, 50.0, 0.0};
    CHECK(supercap_step(s, 100.0, 1.0, p).stored_voltage == doctest::Approx(49.0));
}

TEST_CASE("supercap terminal voltage includes the ESR drop") {
    SupercapParams p{100.0, 0.01, 50.0};
    SupercapState s{50.0, 50.0, 0.0};
    CHECK(supercap_step(s, 100.0, 1.0, p).terminal_voltage == doctest::Approx(48.0));
}

TEST_CASE("lossless supercap conserves stored energy against delivered energy") {
    SupercapParams p{100.0, 0.0, 60.0};
    SupercapState s{60.0, 60.0, 0.0};
    const double dt = 1e-3;
    double delivered = 0;
    const double e0 = 0.5 * p.capacitance * s.stored_voltage * s.stored_voltage;
    for (int i = 0; i < 5000; ++i) {
        const double current = 40.0 * std::sin(i * 0.01);
        const double v_before = s.stored_voltage;
        s = supercap_step(s, current, dt, p);
        delivered += 0.5 * (v_before + s.stored_voltage) * current * dt;
    }
    const double e1 = 0.5 * p.capacitance * s.stored_voltage * s.stored_voltage;
    CHECK(e0 - e1 == doctest::Approx(delivered).epsilon(1e-9));
}

TEST_CASE("converter sizing matches the hand-evaluated design chain exactly") {
    const auto s = size_converter({});
    const double di = 0.01 * 50.0 * (100.0 / 69.0);
    const double dv = 0.01 * 100.0;
    const double ind = 69.0 * (100.0 - 69.0) / (di * 1000.0 * 100.0) * 1.5;
    const double cap = 50.0 * (1.0 - 69.0 / 100.0) / (1000.0 * dv);
    CHECK(s.ripple_current == doctest::Approx(di).epsilon(1e-9));
    CHECK(s.ripple_voltage == doctest::Approx(dv).epsilon(1e-9));
    CHECK(s.inductance == doctest::Approx(ind).epsilon(1e-9));
    CHECK(s.capacitance == doctest::Approx(cap).epsilon(1e-9));
}

TEST_CASE("converter sizing lands on the published design values within 1%") {
    const auto s = size_converter({});
    CHECK(s.ripple_current == doctest::Approx(0.72704).epsilon(0.01));
    CHECK(s.ripple_voltage == doctest::Approx(1.0).epsilon(0.01));
    CHECK(s.inductance == doctest::Approx(0.044205).epsilon(0.01));
    CHECK(s.capacitance == doctest::Approx(0.01558).epsilon(0.01));
}

TEST_CASE("doubling the switching frequency halves L and C only") {
    const auto base = size_converter({});
    ConverterRating r;
    r.switching_freq = 2000.0;
    const auto fast = size_converter(r);
    CHECK(fast.inductance == doctest::Approx(base.inductance / 2).epsilon(1e-12));
    CHECK(fast.capacitance == doctest::Approx(base.capacitance / 2).epsilon(1e-12));
    CHECK(fast.ripple_current == doctest::Approx(base.ripple_current).epsilon(1e-12));
    CHECK(fast.ripple_voltage == doctest::Approx(base.ripple_voltage).epsilon(1e-12));
}

TEST_CASE("converter sizing is homogeneous in the output current") {
    const auto base = size_converter({});
    for (double k : {0.5, 2.0, 3.7}) {
        ConverterRating r;
        r.i_out = 50.0 * k;
        const auto s = size_converter(r);
        CHECK(s.ripple_current == doctest::Approx(base.ripple_current * k).epsilon(1e-12));
        CHECK(s.capacitance == doctest::Approx(base.capacitance * k).epsilon(1e-12));
        CHECK(s.inductance == doctest::Approx(base.inductance / k).epsilon(1e-12));
    }
}

TEST_CASE("converter sizing rejects a non-boost voltage pair") {
    ConverterRating r;
    r.v_in = 100.0;
    r.v_out = 90.0;
    CHECK_THROWS_AS(size_converter(r), std::invalid_argument);
}
