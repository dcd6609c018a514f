#include "mg/agent.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <stdexcept>

namespace mg {

namespace {

void send_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0)
            return; // peer gone; caller notices on next poll
        off += std::size_t(n);
    }
}

// Error details can be long (e.g. the list of valid injection paths); clip
// them so the reply still fits in one wire frame.
std::string err_frame(const std::string& code, std::string detail) {
    const std::size_t budget = k_max_frame_bytes - (code.size() + 6); // ERR,<code>,<detail>\n
    if (detail.size() > budget)
        detail = detail.substr(0, budget - 3) + "...";
    return encode_frame(ErrMsg{code, std::move(detail)});
}

int connect_to(const std::string& host, std::uint16_t port, double timeout_s) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0)
        throw std::runtime_error("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw std::runtime_error("bad host address: " + host);
    }
    timeval tv{};
    tv.tv_sec = long(timeout_s);
    tv.tv_usec = long((timeout_s - double(tv.tv_sec)) * 1e6);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw std::runtime_error("connect to " + host + ":" + std::to_string(port) +
                                 " failed: " + std::strerror(errno));
    }
    return fd;
}

} // namespace

void StatusBoard::update(std::vector<StatMsg> statuses) {
    std::lock_guard lock(mu_);
    statuses_ = std::move(statuses);
}

std::vector<StatMsg> StatusBoard::snapshot() const {
    std::lock_guard lock(mu_);
    return statuses_;
}

StatMsg StatusBoard::for_node(int node_id) const {
    std::lock_guard lock(mu_);
    for (const auto& s : statuses_)
        if (s.node_id == node_id)
            return s;
    StatMsg empty;
    empty.node_id = node_id;
    return empty;
}

NodeAgent::NodeAgent(AgentConfig cfg, const StatusBoard& board, InjectionQueue& queue)
    : cfg_(cfg), board_(board), queue_(queue) {}

NodeAgent::~NodeAgent() { stop(); }

void NodeAgent::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0)
        throw std::runtime_error("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(cfg_.port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw std::runtime_error("node " + std::to_string(cfg_.node_id) +
                                 ": cannot bind port " + std::to_string(cfg_.port) + ": " +
                                 std::strerror(errno));
    }
    ::listen(listen_fd_, 4);
    running_ = true;
    thread_ = std::thread([this] { serve(); });
}

void NodeAgent::stop() {
    running_ = false;
    if (thread_.joinable())
        thread_.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
}

void NodeAgent::handle_line(int fd, const std::string& line, int& framing_errors) {
    WireMsg msg;
    try {
        msg = decode_frame(line);
    } catch (const WireError& e) {
        ++framing_errors;
        send_all(fd, err_frame("frame", e.what()));
        return;
    }
    if (const auto* set = std::get_if<SetMsg>(&msg)) {
        InjectionCommand cmd{set->path, set->value, 0.0};
        try {
            check_injection(cmd, cfg_.node_count);
        } catch (const std::exception& e) {
            send_all(fd, err_frame("set", e.what()));
            return;
        }
        queue_.push(cmd);
        send_all(fd, encode_frame(AckMsg{"SET", set->path}));
        return;
    }
    if (const auto* mode = std::get_if<ModeCmdMsg>(&msg)) {
        if (mode->node_id < 0 || mode->node_id >= cfg_.node_count) {
            send_all(fd, err_frame("mode", "unknown node id"));
            return;
        }
        InjectionCommand cmd;
        cmd.value = mode->setpoint;
        const std::string base = "node." + std::to_string(mode->node_id) + ".";
        switch (mode->mode) {
            case ConverterModeKind::CV: cmd.path = base + "mode_cv"; break;
            case ConverterModeKind::Idle: cmd.path = base + "mode_idle"; break;
            case ConverterModeKind::CC:
                cmd.path = base + (mode->direction == CcDirection::Charge
                                       ? "mode_cc_charge"
                                       : "mode_cc_discharge");
                break;
        }
        queue_.push(cmd);
        send_all(fd, encode_frame(AckMsg{"MODE", std::to_string(mode->node_id)}));
        return;
    }
    send_all(fd, err_frame("unsupported", "agent accepts SET and MODE frames"));
}

void NodeAgent::serve() {
    int client = -1;
    std::string inbuf;
    int framing_errors = 0;
    auto next_status = std::chrono::steady_clock::now();
    while (running_) {
        pollfd fds[2];
        fds[0] = {listen_fd_, POLLIN, 0};
        fds[1] = {client, POLLIN, 0};
        ::poll(fds, client >= 0 ? 2 : 1, 50);

        if (fds[0].revents & POLLIN) {
            const int nc = ::accept(listen_fd_, nullptr, nullptr);
            if (nc >= 0) {
                if (client >= 0) {
                    send_all(nc, err_frame("busy", "one orchestrator connection allowed"));
                    ::close(nc);
                } else {
                    client = nc;
                    inbuf.clear();
                    framing_errors = 0;
                    next_status = std::chrono::steady_clock::now();
                }
            }
        }
        if (client >= 0 && (fds[1].revents & (POLLIN | POLLHUP | POLLERR))) {
            char buf[512];
            const ssize_t n = ::recv(client, buf, sizeof buf, 0);
            if (n <= 0) {
                ::close(client);
                client = -1;
            } else {
                inbuf.append(buf, std::size_t(n));
                std::size_t pos;
                while (client >= 0 && (pos = inbuf.find('\n')) != std::string::npos) {
                    std::string line = inbuf.substr(0, pos + 1);
                    inbuf.erase(0, pos + 1);
                    if (line.size() > k_max_frame_bytes) {
                        ++framing_errors;
                        send_all(client, err_frame("frame", "oversize line"));
                    } else {
                        handle_line(client, line, framing_errors);
                    }
                }
                if (client >= 0 && inbuf.size() > k_max_frame_bytes) {
                    ++framing_errors;
                    send_all(client, err_frame("frame", "oversize line"));
                    inbuf.clear();
                }
                if (client >= 0 && framing_errors > cfg_.max_framing_errors) {
                    send_all(client, encode_frame(
                                         ErrMsg{"closed", "too many framing errors"}));
                    ::close(client);
                    client = -1;
                }
            }
        }
        const auto now = std::chrono::steady_clock::now();
        if (client >= 0 && now >= next_status) {
            send_all(client, encode_frame(board_.for_node(cfg_.node_id)));
            next_status = now + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(cfg_.status_interval_s));
        }
    }
    if (client >= 0)
        ::close(client);
}

WireMsg send_set_command(const std::string& host, std::uint16_t port,
                         const std::string& path, double value, double timeout_s) {
    const int fd = connect_to(host, port, timeout_s);
    send_all(fd, encode_frame(SetMsg{path, value}));
    std::string buf;
    char c;
    // skip interleaved STAT frames; the first ACK/ERR is ours
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    while (std::chrono::steady_clock::now() < deadline) {
        const ssize_t n = ::recv(fd, &c, 1, 0);
        if (n <= 0)
            break;
        if (c != '\n') {
            buf += c;
            continue;
        }
        try {
            WireMsg msg = decode_frame(buf);
            if (std::holds_alternative<AckMsg>(msg) || std::holds_alternative<ErrMsg>(msg)) {
                ::close(fd);
                return msg;
            }
        } catch (const WireError&) {
        }
        buf.clear();
    }
    ::close(fd);
    throw std::runtime_error("no ACK/ERR reply from " + host + ":" + std::to_string(port));
}

} // namespace mg
