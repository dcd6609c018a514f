#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "mg/control.hpp"

namespace mg {

inline constexpr std::size_t k_max_frame_bytes = 256;

struct StatMsg {
    int node_id = 0;
    double soc_pct = 0;   // 0..100
    double voltage = 0;   // V
    double current = 0;   // A
    ConverterModeKind mode = ConverterModeKind::Idle;

    bool operator==(const StatMsg&) const = default;
};

enum class DealState { Proposed, Accepted, Active, Settled, Aborted };

struct DealMsg {
    long deal_id = 0;
    int from_node = 0;    // discharger
    int to_node = 0;      // charger
    double current_a = 0; // > 0
    double duration_s = 0;
    DealState state = DealState::Proposed;

    bool operator==(const DealMsg&) const = default;
};

struct ModeCmdMsg {
    int node_id = 0;
    ConverterModeKind mode = ConverterModeKind::Idle;
    double setpoint = 0; // V for CV, A for CC, ignored for IDLE
    CcDirection direction = CcDirection::Charge;

    bool operator==(const ModeCmdMsg&) const = default;
};

struct SetMsg {
    std::string path;
    double value = 0;

    bool operator==(const SetMsg&) const = default;
};

struct AckMsg {
    std::string ref_kind;
    std::string ref_id;

    bool operator==(const AckMsg&) const = default;
};

struct ErrMsg {
    std::string code;
    std::string detail;

    bool operator==(const ErrMsg&) const = default;
};

using WireMsg = std::variant<StatMsg, DealMsg, ModeCmdMsg, SetMsg, AckMsg, ErrMsg>;

struct WireError : std::runtime_error {
    WireError(std::size_t offset, const std::string& what)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};

std::string_view to_string(ConverterModeKind k);
std::string_view to_string(DealState s);
std::string_view to_string(CcDirection d);

// Newline-terminated comma-separated ASCII line, <= 256 bytes.
std::string encode_frame(const WireMsg& msg);

// Accepts a line with or without its trailing newline.
WireMsg decode_frame(std::string_view line);

} // namespace mg
