#pragma once

#include <vector>

#include "mg/components.hpp"
#include "mg/deal_ledger.hpp"
#include "mg/wire.hpp"

namespace mg {

struct OrchestratorPolicy {
    double soc_min = 0.2; // fraction
    double soc_max = 0.9;
    double v_max = 120.0;  // V
    double i_max = 50.0;   // A, per-node command ceiling
    double deal_duration_s = 86400.0;
    double v_grid_setpoint = 100.0;

    void validate() const;
};

struct OrchestratorState {
    int cursor = 0;       // round-robin position for charging designation
    int designated = -1;  // node currently designated to charge, -1 = none
    long active_deal = -1;
    double deal_start_soc = 0;
};

// What the orchestrator knows about one node, assembled from its status
// stream plus the registered constraints.
struct OrchNode {
    int id = 0;
    double soc = 0; // fraction
    ConverterModeKind mode = ConverterModeKind::Idle;
    BatteryParams batt{};
    double power_rating = 5000.0;
};

struct OrchResult {
    std::vector<ModeCmdMsg> commands; // one per node
    std::vector<long> new_deal_ids;
    std::vector<std::string> events;
};

// One decision round: re-seat CV, rotate the charging designation when the
// designated node tops out, size the charge command from the surplus.
// Commands never charge a node at soc_max nor discharge one at soc_min.
OrchResult orchestrate_step(double t, const std::vector<OrchNode>& nodes,
                            double surplus_w, const OrchestratorPolicy& policy,
                            OrchestratorState& st, DealLedger& ledger);

} // namespace mg
