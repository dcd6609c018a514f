#include "mg/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mg/profiles.hpp"

namespace mg {

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double trapz_kwh(const Trace& tr, auto value) {
    double acc = 0;
    for (std::size_t i = 1; i < tr.size(); ++i)
        acc += 0.5 * (value(tr[i - 1]) + value(tr[i])) * (tr[i].t - tr[i - 1].t);
    return acc / 3.6e6;
}

} // namespace

void write_trace_csv(const Trace& trace, const std::filesystem::path& file) {
    if (trace.empty())
        throw std::invalid_argument("write_trace_csv: empty trace");
    std::ofstream out(file);
    if (!out)
        throw std::runtime_error("write_trace_csv: cannot open " + file.string());
    out << "t,v_grid,p_pv,p_nonflex,p_flex,p_sc";
    for (std::size_t i = 0; i < trace.front().nodes.size(); ++i)
        out << ",p_batt_" << i << ",soc_" << i << ",mode_" << i;
    out << "\n";
    for (const auto& r : trace) {
        out << fmt9(r.t) << ',' << fmt9(r.v_grid) << ',' << fmt9(r.p_pv) << ','
            << fmt9(r.p_nonflex) << ',' << fmt9(r.p_flex) << ',' << fmt9(r.p_sc);
        for (const auto& n : r.nodes)
            out << ',' << fmt9(n.p_batt) << ',' << fmt9(n.soc) << ',' << n.mode;
        out << "\n";
    }
    if (!out)
        throw std::runtime_error("write_trace_csv: write failed for " + file.string());
}

Trace read_trace_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw ParseError("read_trace_csv: cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(file.string() + ": empty file");
    std::size_t n_nodes = 0;
    {
        std::size_t cols = std::count(line.begin(), line.end(), ',') + 1;
        if (cols < 6 || (cols - 6) % 3 != 0)
            throw ParseError(file.string() + ": unexpected trace header");
        n_nodes = (cols - 6) / 3;
    }
    Trace trace;
    int ln = 1;
    while (std::getline(in, line)) {
        ++ln;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ss, tok, ','))
            f.push_back(tok);
        if (f.size() != 6 + 3 * n_nodes)
            throw ParseError(file.string() + ":" + std::to_string(ln) + ": wrong column count");
        auto numf = [&](const std::string& s) {
            double v = 0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || p != s.data() + s.size())
                throw ParseError(file.string() + ":" + std::to_string(ln) +
                                 ": not a number: '" + s + "'");
            return v;
        };
        StepRecord r;
        r.t = numf(f[0]);
        r.v_grid = numf(f[1]);
        r.p_pv = numf(f[2]);
        r.p_nonflex = numf(f[3]);
        r.p_flex = numf(f[4]);
        r.p_sc = numf(f[5]);
        for (std::size_t i = 0; i < n_nodes; ++i)
            r.nodes.push_back({numf(f[6 + 3 * i]), numf(f[7 + 3 * i]), f[8 + 3 * i]});
        trace.push_back(std::move(r));
    }
    if (trace.empty())
        throw ParseError(file.string() + ": no data rows");
    return trace;
}

SummaryMetrics summarize(const Trace& trace, double v_setpoint) {
    if (trace.empty())
        throw std::invalid_argument("summarize: empty trace");
    SummaryMetrics m;
    auto charge = [](const StepRecord& r) {
        double p = 0;
        for (const auto& n : r.nodes)
            p += std::max(0.0, n.p_batt);
        return p;
    };
    auto discharge = [](const StepRecord& r) {
        double p = 0;
        for (const auto& n : r.nodes)
            p += std::max(0.0, -n.p_batt);
        return p;
    };
    m.energy_pv_kwh = trapz_kwh(trace, [](const StepRecord& r) { return r.p_pv; });
    m.energy_to_flex_kwh = trapz_kwh(trace, [](const StepRecord& r) { return r.p_flex; });
    m.energy_to_loads_kwh = trapz_kwh(trace, [](const StepRecord& r) { return r.p_nonflex; });
    m.energy_to_bess_kwh = trapz_kwh(trace, charge);
    m.energy_from_bess_kwh = trapz_kwh(trace, discharge);
    m.energy_spilled_kwh =
        std::max(0.0, m.energy_pv_kwh + m.energy_from_bess_kwh - m.energy_to_loads_kwh -
                          m.energy_to_flex_kwh - m.energy_to_bess_kwh);
    for (const auto& r : trace)
        m.max_voltage_deviation = std::max(m.max_voltage_deviation,
                                           std::abs(r.v_grid - v_setpoint));
    // PV attribution order: non-flexible load first, then flexible load,
    // then charging; BESS discharge never counts as PV energy.
    const double pv_used = trapz_kwh(trace, [&](const StepRecord& r) {
        const double to_load = std::min(r.p_pv, r.p_nonflex);
        const double to_flex = std::min(r.p_flex, r.p_pv - to_load);
        const double to_bess = std::min(charge(r), r.p_pv - to_load - to_flex);
        return to_load + std::max(0.0, to_flex) + std::max(0.0, to_bess);
    });
    m.pv_utilization = m.energy_pv_kwh > 0
                           ? std::clamp(pv_used / m.energy_pv_kwh, 0.0, 1.0)
                           : 0.0;
    for (const auto& n : trace.back().nodes)
        m.soc_final.push_back(n.soc);
    return m;
}

std::string SummaryMetrics::to_text() const {
    std::ostringstream os;
    os << "energy_pv_kwh        " << fmt9(energy_pv_kwh) << "\n"
       << "energy_to_flex_kwh   " << fmt9(energy_to_flex_kwh) << "\n"
       << "energy_to_bess_kwh   " << fmt9(energy_to_bess_kwh) << "\n"
       << "energy_from_bess_kwh " << fmt9(energy_from_bess_kwh) << "\n"
       << "energy_to_loads_kwh  " << fmt9(energy_to_loads_kwh) << "\n"
       << "energy_spilled_kwh   " << fmt9(energy_spilled_kwh) << "\n"
       << "max_voltage_dev_v    " << fmt9(max_voltage_deviation) << "\n"
       << "pv_utilization       " << fmt9(pv_utilization) << "\n";
    for (std::size_t i = 0; i < soc_final.size(); ++i)
        os << "soc_final_" << i << "          " << fmt9(soc_final[i]) << "\n";
    return os.str();
}

namespace {

struct Panel {
    std::string title;
    std::vector<std::vector<double>> series;
};

void draw_panel(std::ostream& os, const Panel& p, const std::vector<double>& ts,
                double x0, double y0, double w, double h) {
    double lo = 0, hi = 1;
    bool first = true;
    for (const auto& s : p.series)
        for (double v : s) {
            if (first) { lo = hi = v; first = false; }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi - lo < 1e-12) { hi = lo + 1; }
    const double t0 = ts.front(), t1 = std::max(ts.back(), ts.front() + 1e-12);
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};
    os << "<rect x='" << x0 << "' y='" << y0 << "' width='" << w << "' height='" << h
       << "' fill='none' stroke='black'/>\n";
    os << "<text x='" << x0 + 4 << "' y='" << y0 + 14 << "' font-size='12'>" << p.title
       << "</text>\n";
    os << "<text x='" << x0 - 4 << "' y='" << y0 + 12
       << "' font-size='10' text-anchor='end'>" << fmt9(hi) << "</text>\n";
    os << "<text x='" << x0 - 4 << "' y='" << y0 + h
       << "' font-size='10' text-anchor='end'>" << fmt9(lo) << "</text>\n";
    for (std::size_t si = 0; si < p.series.size(); ++si) {
        os << "<polyline fill='none' stroke='" << colors[si % 6] << "' points='";
        const auto& s = p.series[si];
        const std::size_t stride = std::max<std::size_t>(1, s.size() / 2000);
        for (std::size_t i = 0; i < s.size(); i += stride) {
            const double x = x0 + (ts[i] - t0) / (t1 - t0) * w;
            const double y = y0 + h - (s[i] - lo) / (hi - lo) * h;
            os << x << ',' << y << ' ';
        }
        os << "'/>\n";
    }
}

} // namespace

void emit_plot(const Trace& trace, const std::filesystem::path& file) {
    if (trace.empty())
        throw std::invalid_argument("emit_plot: empty trace");
    std::ofstream out(file);
    if (!out)
        throw std::runtime_error("emit_plot: cannot open " + file.string());
    const std::size_t n_nodes = trace.front().nodes.size();
    std::vector<double> ts;
    Panel total{"Total load power [W]", {{}}};
    Panel bess{"BESS power, charging-positive [W]", {}};
    Panel flex{"Flexible load power [W]", {{}}};
    Panel soc{"SoC [fraction]", {}};
    bess.series.resize(std::max<std::size_t>(1, n_nodes));
    soc.series.resize(std::max<std::size_t>(1, n_nodes));
    for (const auto& r : trace) {
        ts.push_back(r.t);
        total.series[0].push_back(r.p_nonflex + r.p_flex);
        flex.series[0].push_back(r.p_flex);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            bess.series[i].push_back(r.nodes[i].p_batt);
            soc.series[i].push_back(r.nodes[i].soc);
        }
    }
    const double w = 760, h = 150, gap = 30, x0 = 70;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << x0 + w + 30
        << "' height='" << 4 * (h + gap) + 20 << "'>\n";
    const Panel* panels[] = {&total, &bess, &flex, &soc};
    for (int i = 0; i < 4; ++i)
        draw_panel(out, *panels[i], ts, x0, 10 + i * (h + gap), w, h);
    out << "</svg>\n";
    if (!out)
        throw std::runtime_error("emit_plot: write failed for " + file.string());
}

} // namespace mg
