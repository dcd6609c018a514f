#include "mg/runner.hpp"

#include <cmath>

#include "mg/orchestrator.hpp"

namespace mg {

ScenarioRunResult run_scenario(const ScenarioConfig& cfg, StatusBoard* board,
                               InjectionQueue* live, std::function<bool()> cancelled,
                               bool orchestrate) {
    World world = build_world(cfg);
    ScenarioRunResult result;

    OrchestratorState orch_state;
    const OrchestratorPolicy policy = orchestrator_policy(cfg);
    const long orch_every =
        std::max(1L, std::lround(cfg.interchange.status_interval / cfg.sim.dt));
    long step_no = 0;

    RunHooks hooks;
    hooks.live_injections = live;
    hooks.cancelled = std::move(cancelled);
    if (cfg.interchange.enabled && orchestrate && cfg.sim.mode == SimConfig::Mode::Energy) {
        hooks.on_step_begin = [&](World& w, const BalancePreview& bal) {
            if (step_no++ % orch_every != 0)
                return;
            std::vector<OrchNode> view;
            for (const auto& n : w.nodes)
                view.push_back({n.id, n.state.soc, n.mode.kind, n.params,
                                n.converter.power_rating});
            auto res = orchestrate_step(w.t, view, bal.surplus(), policy, orch_state,
                                        result.ledger);
            for (const auto& cmd : res.commands) {
                auto& node = w.nodes[std::size_t(cmd.node_id)];
                switch (cmd.mode) {
                    case ConverterModeKind::CV:
                        node.mode = ConverterMode::cv(cmd.setpoint);
                        break;
                    case ConverterModeKind::CC:
                        node.mode = ConverterMode::cc(cmd.setpoint, cmd.direction);
                        break;
                    case ConverterModeKind::Idle:
                        node.mode = ConverterMode::idle();
                        break;
                }
            }
            for (auto& e : res.events)
                w.events.push_back("orchestrator: " + e);
        };
    }
    if (board) {
        hooks.on_record = [&](const StepRecord& rec, const World& w) {
            std::vector<StatMsg> stats;
            for (std::size_t i = 0; i < w.nodes.size(); ++i) {
                StatMsg s;
                s.node_id = w.nodes[i].id;
                s.soc_pct = rec.nodes[i].soc * 100.0;
                s.voltage = w.nodes[i].state.terminal_voltage;
                s.current = w.nodes[i].state.current;
                s.mode = w.nodes[i].mode.kind;
                stats.push_back(s);
            }
            board->update(std::move(stats));
        };
    }

    auto run_result = run(std::move(world), cfg.injections, hooks);
    result.trace = std::move(run_result.trace);
    result.events = std::move(run_result.events);
    return result;
}

} // namespace mg
