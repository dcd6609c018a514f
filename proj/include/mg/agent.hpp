#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "mg/sim.hpp"
#include "mg/wire.hpp"

namespace mg {

// Latest per-node status snapshots, written by the sim loop and read by
// the node agents. All data crosses the boundary by value.
class StatusBoard {
  public:
    void update(std::vector<StatMsg> statuses);
    std::vector<StatMsg> snapshot() const;
    StatMsg for_node(int node_id) const;

  private:
    mutable std::mutex mu_;
    std::vector<StatMsg> statuses_;
};

struct AgentConfig {
    int node_id = 0;
    int node_count = 1; // for command validation
    std::uint16_t port = 44380;
    double status_interval_s = 1.0; // wall clock
    int max_framing_errors = 10;    // per connection
};

// TCP listener for one node: streams STAT frames to a single connected
// orchestrator, applies MODE/SET frames through the injection queue, and
// ACKs each applied frame. A second concurrent connection is refused with
// ERR,busy. Malformed frames get an ERR reply; too many close the
// connection.
class NodeAgent {
  public:
    NodeAgent(AgentConfig cfg, const StatusBoard& board, InjectionQueue& queue);
    ~NodeAgent();

    NodeAgent(const NodeAgent&) = delete;
    NodeAgent& operator=(const NodeAgent&) = delete;

    // Binds and starts serving; throws on bind failure naming the port.
    void start();
    void stop();

    std::uint16_t port() const { return cfg_.port; }

  private:
    void serve();
    void handle_line(int fd, const std::string& line, int& framing_errors);

    AgentConfig cfg_;
    const StatusBoard& board_;
    InjectionQueue& queue_;
    std::atomic<bool> running_{false};
    int listen_fd_ = -1;
    std::thread thread_;
};

// Client-side helper: sends one SET frame and returns the reply frame.
WireMsg send_set_command(const std::string& host, std::uint16_t port,
                         const std::string& path, double value,
                         double timeout_s = 5.0);

} // namespace mg
