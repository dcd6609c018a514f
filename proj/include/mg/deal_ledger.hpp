#pragma once

#include <map>
#include <vector>

#include "mg/wire.hpp"

namespace mg {

struct DealTransition {
    double t = 0;            // sim time of the transition
    DealMsg deal;            // full message at this state
    double transferred_ah = 0; // set on settle
};

// Append-only record of deal state transitions. deal_ids are strictly
// increasing; settled and aborted are terminal.
class DealLedger {
  public:
    // Opens a new deal in Proposed state and returns its id.
    long propose(double t, int from_node, int to_node, double current_a,
                 double duration_s);
    void accept(double t, long deal_id);
    void activate(double t, long deal_id);
    void settle(double t, long deal_id, double measured_ah);
    void abort(double t, long deal_id);

    const std::vector<DealTransition>& log() const { return log_; }

    // Replays the transition log into the latest state per deal.
    std::map<long, DealMsg> replay() const;

    DealState state_of(long deal_id) const;
    const DealMsg& latest(long deal_id) const;

  private:
    void transition(double t, long deal_id, DealState to, double measured_ah);

    std::vector<DealTransition> log_;
    std::map<long, DealMsg> current_;
    long next_id_ = 1;
};

// Settlement helper matching the deal bookkeeping contract: only an
// active deal may settle.
void settle_deal(DealLedger& ledger, long deal_id, double measured_ah,
                 double t = 0);

} // namespace mg
