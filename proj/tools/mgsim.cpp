#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "mg/agent.hpp"
#include "mg/runner.hpp"
#include "mg/trace.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_sigint(int) { g_interrupted = true; }

void print_sizing(const mg::ConverterRating& rating) {
    const auto s = mg::size_converter(rating);
    std::printf("inputs: v_in=%g V  v_out=%g V  i_out=%g A  f=%g Hz\n", rating.v_in,
                rating.v_out, rating.i_out, rating.switching_freq);
    std::printf("ripple_current  %.9g A\n", s.ripple_current);
    std::printf("ripple_voltage  %.9g V\n", s.ripple_voltage);
    std::printf("inductance      %.9g H\n", s.inductance);
    std::printf("capacitance     %.9g F\n", s.capacitance);
}

void write_deals(const mg::DealLedger& ledger, const std::string& file) {
    std::FILE* f = std::fopen(file.c_str(), "w");
    if (!f)
        throw std::runtime_error("cannot open " + file);
    std::fprintf(f, "t,deal_id,from,to,current_a,duration_s,state,transferred_ah\n");
    for (const auto& tr : ledger.log())
        std::fprintf(f, "%.9g,%ld,%d,%d,%.9g,%.9g,%s,%.9g\n", tr.t, tr.deal.deal_id,
                     tr.deal.from_node, tr.deal.to_node, tr.deal.current_a,
                     tr.deal.duration_s, std::string(mg::to_string(tr.deal.state)).c_str(),
                     tr.transferred_ah);
    std::fclose(f);
}

struct AgentSet {
    mg::StatusBoard board;
    mg::InjectionQueue queue;
    std::vector<std::unique_ptr<mg::NodeAgent>> agents;

    void start(const mg::ScenarioConfig& cfg) {
        for (int i = 0; i < cfg.nodes.count; ++i) {
            mg::AgentConfig ac;
            ac.node_id = i;
            ac.node_count = cfg.nodes.count;
            ac.port = std::uint16_t(cfg.interchange.base_port + i);
            ac.status_interval_s = cfg.interchange.status_interval;
            agents.push_back(std::make_unique<mg::NodeAgent>(ac, board, queue));
        }
        for (auto& a : agents)
            a->start();
    }
};

int run_command(const std::string& scenario_file, const std::vector<std::string>& overrides,
                const std::string& out_file, const std::string& plot_file,
                const std::string& deals_file, bool interchange, bool realtime,
                bool serve_only) {
    auto cfg = mg::parse_scenario(scenario_file);
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw mg::ParseError("override '" + ov + "' is not key=value");
        mg::apply_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    if (realtime)
        cfg.sim.realtime_pacing = true;
    if (interchange)
        cfg.interchange.enabled = true;
    cfg.validate();

    std::unique_ptr<AgentSet> agents;
    if (interchange || serve_only) {
        agents = std::make_unique<AgentSet>();
        agents->start(cfg);
        std::fprintf(stderr, "node agents listening on ports %d-%d\n",
                     cfg.interchange.base_port,
                     cfg.interchange.base_port + cfg.nodes.count - 1);
    }

    std::signal(SIGINT, on_sigint);
    auto result = mg::run_scenario(
        cfg, agents ? &agents->board : nullptr, agents ? &agents->queue : nullptr,
        [] { return g_interrupted.load(); }, !serve_only);
    if (agents)
        for (auto& a : agents->agents)
            a->stop();

    if (result.trace.empty()) {
        std::fprintf(stderr, "no steps executed\n");
        return 1;
    }
    mg::write_trace_csv(result.trace, out_file);
    if (!plot_file.empty())
        mg::emit_plot(result.trace, plot_file);
    if (!deals_file.empty())
        write_deals(result.ledger, deals_file);
    const auto summary = mg::summarize(result.trace, cfg.sim.v_grid_setpoint);
    std::fputs(summary.to_text().c_str(), stdout);
    if (g_interrupted) {
        std::fprintf(stderr, "interrupted: partial trace written to %s\n",
                     out_file.c_str());
        return 130;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DC microgrid simulator: PV + BESS + supercapacitor with "
                 "flexible-load management and BESS power interchange"};
    app.require_subcommand(1);

    // size
    auto* size_cmd = app.add_subcommand("size", "Boost converter filter sizing");
    mg::ConverterRating rating;
    size_cmd->add_option("--v-in", rating.v_in, "Input voltage [V]");
    size_cmd->add_option("--v-out", rating.v_out, "Output voltage [V]");
    size_cmd->add_option("--i-out", rating.i_out, "Output current [A]");
    size_cmd->add_option("--f", rating.switching_freq, "Switching frequency [Hz]");

    // run
    auto* run_cmd = app.add_subcommand("run", "Run a scenario to completion");
    std::string scenario_file, out_file = "trace.csv", plot_file, deals_file;
    std::vector<std::string> overrides;
    bool opt_interchange = false, opt_realtime = false;
    run_cmd->add_option("scenario", scenario_file, "Scenario file")->required();
    run_cmd->add_option("overrides", overrides, "section.key=value overrides");
    run_cmd->add_option("--out", out_file, "Trace CSV output path");
    run_cmd->add_option("--plot", plot_file, "Write an SVG plot");
    run_cmd->add_option("--deals", deals_file, "Write the deal ledger CSV");
    run_cmd->add_flag("--interchange", opt_interchange,
                      "Start node agents and the in-process orchestrator");
    run_cmd->add_flag("--realtime", opt_realtime, "Pace steps against wall clock");

    // serve
    auto* serve_cmd = app.add_subcommand(
        "serve", "Run with node agents listening but no in-process orchestrator");
    std::string serve_scenario, serve_out = "trace.csv";
    serve_cmd->add_option("scenario", serve_scenario, "Scenario file")->required();
    serve_cmd->add_option("--out", serve_out, "Trace CSV output path");

    // inject
    auto* inject_cmd = app.add_subcommand("inject", "Send a SET command to a live run");
    std::string host = "127.0.0.1", path;
    int port = 44380;
    double value = 0;
    inject_cmd->add_option("--host", host, "Agent host");
    inject_cmd->add_option("--port", port, "Agent port");
    inject_cmd->add_option("path", path, "Parameter path, e.g. env.irradiance")->required();
    inject_cmd->add_option("value", value, "New value")->required();

    // summarize
    auto* summarize_cmd = app.add_subcommand("summarize", "Summary metrics of a trace CSV");
    std::string trace_file;
    double v_setpoint = 100.0;
    summarize_cmd->add_option("trace", trace_file, "Trace CSV")->required();
    summarize_cmd->add_option("--v-setpoint", v_setpoint, "Grid setpoint [V]");

    CLI11_PARSE(app, argc, argv);

    try {
        if (size_cmd->parsed()) {
            print_sizing(rating);
            return 0;
        }
        if (run_cmd->parsed())
            return run_command(scenario_file, overrides, out_file, plot_file, deals_file,
                               opt_interchange, opt_realtime, false);
        if (serve_cmd->parsed())
            return run_command(serve_scenario, {}, serve_out, "", "", true, false, true);
        if (inject_cmd->parsed()) {
            const auto reply =
                mg::send_set_command(host, std::uint16_t(port), path, value);
            if (const auto* err = std::get_if<mg::ErrMsg>(&reply)) {
                std::fprintf(stderr, "ERR %s: %s\n", err->code.c_str(),
                             err->detail.c_str());
                return 1;
            }
            std::printf("acknowledged\n");
            return 0;
        }
        if (summarize_cmd->parsed()) {
            const auto trace = mg::read_trace_csv(trace_file);
            std::fputs(mg::summarize(trace, v_setpoint).to_text().c_str(), stdout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
