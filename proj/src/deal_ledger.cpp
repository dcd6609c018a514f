#include "mg/deal_ledger.hpp"

namespace mg {

namespace {

bool legal(DealState from, DealState to) {
    if (to == DealState::Aborted)
        return from != DealState::Settled && from != DealState::Aborted;
    switch (from) {
        case DealState::Proposed: return to == DealState::Accepted;
        case DealState::Accepted: return to == DealState::Active;
        case DealState::Active: return to == DealState::Settled;
        default: return false;
    }
}

} // namespace

long DealLedger::propose(double t, int from_node, int to_node, double current_a,
                         double duration_s) {
    if (from_node == to_node)
        throw std::invalid_argument("DealLedger: from_node must differ from to_node");
    if (current_a <= 0 || duration_s <= 0)
        throw std::invalid_argument("DealLedger: current and duration must be > 0");
    DealMsg d;
    d.deal_id = next_id_++;
    d.from_node = from_node;
    d.to_node = to_node;
    d.current_a = current_a;
    d.duration_s = duration_s;
    d.state = DealState::Proposed;
    log_.push_back({t, d, 0});
    current_[d.deal_id] = d;
    return d.deal_id;
}

void DealLedger::transition(double t, long deal_id, DealState to, double measured_ah) {
    auto it = current_.find(deal_id);
    if (it == current_.end())
        throw std::invalid_argument("DealLedger: unknown deal " + std::to_string(deal_id));
    if (!legal(it->second.state, to))
        throw std::logic_error("DealLedger: illegal transition " +
                               std::string(to_string(it->second.state)) + " -> " +
                               std::string(to_string(to)) + " for deal " +
                               std::to_string(deal_id));
    it->second.state = to;
    log_.push_back({t, it->second, measured_ah});
}

void DealLedger::accept(double t, long id) { transition(t, id, DealState::Accepted, 0); }
void DealLedger::activate(double t, long id) { transition(t, id, DealState::Active, 0); }
void DealLedger::settle(double t, long id, double ah) { transition(t, id, DealState::Settled, ah); }
void DealLedger::abort(double t, long id) { transition(t, id, DealState::Aborted, 0); }

std::map<long, DealMsg> DealLedger::replay() const {
    std::map<long, DealMsg> out;
    for (const auto& tr : log_)
        out[tr.deal.deal_id] = tr.deal;
    return out;
}

DealState DealLedger::state_of(long deal_id) const { return latest(deal_id).state; }

const DealMsg& DealLedger::latest(long deal_id) const {
    auto it = current_.find(deal_id);
    if (it == current_.end())
        throw std::invalid_argument("DealLedger: unknown deal " + std::to_string(deal_id));
    return it->second;
}

void settle_deal(DealLedger& ledger, long deal_id, double measured_ah, double t) {
    ledger.settle(t, deal_id, measured_ah);
}

} // namespace mg
