#include "mg/orchestrator.hpp"

#include <algorithm>
#include <cmath>

namespace mg {

namespace {

constexpr double k_surplus_eps = 1.0; // W

int find_cv(const std::vector<OrchNode>& nodes) {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].mode == ConverterModeKind::CV)
            return int(i);
    return -1;
}

const OrchNode* by_id(const std::vector<OrchNode>& nodes, int id) {
    for (const auto& n : nodes)
        if (n.id == id)
            return &n;
    return nullptr;
}

} // namespace

void OrchestratorPolicy::validate() const {
    if (!(soc_min < soc_max))
        throw std::invalid_argument("OrchestratorPolicy: soc_min must be < soc_max");
    if (i_max <= 0 || v_max <= 0)
        throw std::invalid_argument("OrchestratorPolicy: i_max and v_max must be > 0");
}

OrchResult orchestrate_step(double t, const std::vector<OrchNode>& nodes,
                            double surplus_w, const OrchestratorPolicy& policy,
                            OrchestratorState& st, DealLedger& ledger) {
    OrchResult out;
    if (nodes.empty())
        return out;
    const int n = int(nodes.size());

    // CV seat: keep the incumbent unless it lost headroom in the direction
    // the surplus demands.
    auto headroom = [&](const OrchNode& node) {
        if (surplus_w > k_surplus_eps)
            return policy.soc_max - node.soc;
        if (surplus_w < -k_surplus_eps)
            return node.soc - policy.soc_min;
        return 1.0;
    };
    int cv = find_cv(nodes);
    if (cv < 0 || headroom(nodes[cv]) <= 0) {
        int best = -1;
        for (int i = 0; i < n; ++i)
            if (headroom(nodes[i]) > 0 && (best < 0 || headroom(nodes[i]) > headroom(nodes[best])))
                best = i;
        if (best >= 0) {
            cv = best;
        } else if (cv < 0) {
            out.events.push_back("t=" + std::to_string(t) + " no CV-eligible node");
        }
    }

    const int cv_id = cv >= 0 ? nodes[cv].id : -1;

    // Charging rotation.
    const bool surplus = surplus_w > k_surplus_eps;
    auto settle_current_deal = [&](const char* why) {
        if (st.active_deal >= 0 && ledger.state_of(st.active_deal) == DealState::Active) {
            const OrchNode* node = by_id(nodes, st.designated);
            const double ah =
                node ? std::max(0.0, (node->soc - st.deal_start_soc) * node->batt.capacity_ah)
                     : 0.0;
            ledger.settle(t, st.active_deal, ah);
            out.events.push_back("t=" + std::to_string(t) + " deal " +
                                 std::to_string(st.active_deal) + " settled (" + why + ")");
        }
        st.active_deal = -1;
        st.designated = -1;
    };

    if (st.designated >= 0) {
        const OrchNode* node = by_id(nodes, st.designated);
        if (!node || node->id == cv_id) {
            settle_current_deal("designated node re-seated as CV");
        } else if (node->soc >= policy.soc_max) {
            settle_current_deal("soc_max reached");
            st.cursor = (st.cursor + 1) % n;
        } else if (!surplus) {
            settle_current_deal("surplus exhausted");
        }
    }

    if (surplus && st.designated < 0 && cv >= 0) {
        int pick = -1;
        for (int k = 0; k < n; ++k) {
            const int cand = (st.cursor + k) % n;
            if (nodes[cand].id == cv_id)
                continue;
            if (nodes[cand].soc < policy.soc_max) {
                pick = cand;
                break;
            }
        }
        if (pick >= 0) {
            st.cursor = pick;
            st.designated = nodes[pick].id;
            st.deal_start_soc = nodes[pick].soc;
            const double amps = std::clamp(
                battery_current_for_power(nodes[pick].batt, surplus_w), 0.1, policy.i_max);
            const long id = ledger.propose(t, cv_id, nodes[pick].id, amps,
                                           policy.deal_duration_s);
            ledger.accept(t, id);
            ledger.activate(t, id);
            st.active_deal = id;
            out.new_deal_ids.push_back(id);
        } else {
            out.events.push_back("t=" + std::to_string(t) +
                                 " charge starvation: all nodes at soc_max");
        }
    }

    // Emit one command per node.
    for (int i = 0; i < n; ++i) {
        ModeCmdMsg cmd;
        cmd.node_id = nodes[i].id;
        if (i == cv) {
            cmd.mode = ConverterModeKind::CV;
            cmd.setpoint = std::min(policy.v_grid_setpoint, policy.v_max);
        } else if (nodes[i].id == st.designated && surplus &&
                   nodes[i].soc < policy.soc_max) {
            cmd.mode = ConverterModeKind::CC;
            cmd.direction = CcDirection::Charge;
            const double target = std::min(surplus_w, nodes[i].power_rating);
            cmd.setpoint = std::clamp(battery_current_for_power(nodes[i].batt, target),
                                      0.0, policy.i_max);
        } else {
            cmd.mode = ConverterModeKind::Idle;
        }
        out.commands.push_back(cmd);
    }
    return out;
}

} // namespace mg
