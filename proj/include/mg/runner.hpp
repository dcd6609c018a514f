#pragma once

#include <functional>

#include "mg/agent.hpp"
#include "mg/deal_ledger.hpp"
#include "mg/scenario.hpp"

namespace mg {

struct ScenarioRunResult {
    Trace trace;
    std::vector<std::string> events;
    DealLedger ledger; // empty unless interchange is enabled
};

// Executes a parsed scenario end to end: builds the world, wires in the
// in-process orchestrator when interchange is enabled, keeps the status
// board fresh for node agents, and drains live injections each step.
ScenarioRunResult run_scenario(const ScenarioConfig& cfg, StatusBoard* board = nullptr,
                               InjectionQueue* live = nullptr,
                               std::function<bool()> cancelled = {},
                               bool orchestrate = true);

} // namespace mg
