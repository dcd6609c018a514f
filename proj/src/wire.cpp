#include "mg/wire.hpp"

#include <charconv>
#include <vector>

namespace mg {

namespace {

std::string num(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string num(long v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// ERR details travel in a comma-separated frame; keep them token-safe.
std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r')
            c = ';';
    return s;
}

struct Token {
    std::string_view text;
    std::size_t offset;
};

std::vector<Token> split(std::string_view line) {
    std::vector<Token> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back({line.substr(start, i - start), start});
            start = i + 1;
        }
    }
    return out;
}

double parse_double(const Token& t) {
    double v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size())
        throw WireError(t.offset, "non-numeric field '" + std::string(t.text) + "'");
    return v;
}

long parse_long(const Token& t) {
    long v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size())
        throw WireError(t.offset, "non-integer field '" + std::string(t.text) + "'");
    return v;
}

ConverterModeKind parse_mode(const Token& t) {
    if (t.text == "CV") return ConverterModeKind::CV;
    if (t.text == "CC") return ConverterModeKind::CC;
    if (t.text == "IDLE") return ConverterModeKind::Idle;
    throw WireError(t.offset, "unknown mode '" + std::string(t.text) + "'");
}

DealState parse_deal_state(const Token& t) {
    if (t.text == "proposed") return DealState::Proposed;
    if (t.text == "accepted") return DealState::Accepted;
    if (t.text == "active") return DealState::Active;
    if (t.text == "settled") return DealState::Settled;
    if (t.text == "aborted") return DealState::Aborted;
    throw WireError(t.offset, "unknown deal state '" + std::string(t.text) + "'");
}

CcDirection parse_dir(const Token& t) {
    if (t.text == "charge" || t.text == "-") return CcDirection::Charge;
    if (t.text == "discharge") return CcDirection::Discharge;
    throw WireError(t.offset, "unknown direction '" + std::string(t.text) + "'");
}

void expect_arity(const std::vector<Token>& toks, std::size_t n) {
    if (toks.size() != n)
        throw WireError(toks.size() > n ? toks[n].offset : toks.back().offset,
                        "wrong arity: expected " + std::to_string(n) + " fields, got " +
                            std::to_string(toks.size()));
}

} // namespace

std::string_view to_string(ConverterModeKind k) {
    switch (k) {
        case ConverterModeKind::CV: return "CV";
        case ConverterModeKind::CC: return "CC";
        case ConverterModeKind::Idle: return "IDLE";
    }
    return "IDLE";
}

std::string_view to_string(DealState s) {
    switch (s) {
        case DealState::Proposed: return "proposed";
        case DealState::Accepted: return "accepted";
        case DealState::Active: return "active";
        case DealState::Settled: return "settled";
        case DealState::Aborted: return "aborted";
    }
    return "aborted";
}

std::string_view to_string(CcDirection d) {
    return d == CcDirection::Charge ? "charge" : "discharge";
}

std::string encode_frame(const WireMsg& msg) {
    std::string line = std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StatMsg>) {
                return "STAT," + num(long(m.node_id)) + "," + num(m.soc_pct) + "," +
                       num(m.voltage) + "," + num(m.current) + "," +
                       std::string(to_string(m.mode));
            } else if constexpr (std::is_same_v<T, DealMsg>) {
                return "DEAL," + num(m.deal_id) + "," + num(long(m.from_node)) + "," +
                       num(long(m.to_node)) + "," + num(m.current_a) + "," +
                       num(m.duration_s) + "," + std::string(to_string(m.state));
            } else if constexpr (std::is_same_v<T, ModeCmdMsg>) {
                const std::string dir = m.mode == ConverterModeKind::CC
                                            ? std::string(to_string(m.direction))
                                            : "-";
                return "MODE," + num(long(m.node_id)) + "," +
                       std::string(to_string(m.mode)) + "," + num(m.setpoint) + "," + dir;
            } else if constexpr (std::is_same_v<T, SetMsg>) {
                return "SET," + sanitize(m.path) + "," + num(m.value);
            } else if constexpr (std::is_same_v<T, AckMsg>) {
                return "ACK," + sanitize(m.ref_kind) + "," + sanitize(m.ref_id);
            } else {
                return "ERR," + sanitize(m.code) + "," + sanitize(m.detail);
            }
        },
        msg);
    line += '\n';
    if (line.size() > k_max_frame_bytes)
        throw WireError(k_max_frame_bytes, "frame exceeds " +
                                               std::to_string(k_max_frame_bytes) + " bytes");
    return line;
}

WireMsg decode_frame(std::string_view line) {
    if (line.size() > k_max_frame_bytes)
        throw WireError(k_max_frame_bytes, "oversize frame");
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
        line.remove_suffix(1);
    if (line.empty())
        throw WireError(0, "empty frame");
    auto toks = split(line);
    const auto& kind = toks[0].text;
    if (kind == "STAT") {
        expect_arity(toks, 6);
        StatMsg m;
        m.node_id = int(parse_long(toks[1]));
        m.soc_pct = parse_double(toks[2]);
        m.voltage = parse_double(toks[3]);
        m.current = parse_double(toks[4]);
        m.mode = parse_mode(toks[5]);
        return m;
    }
    if (kind == "DEAL") {
        expect_arity(toks, 7);
        DealMsg m;
        m.deal_id = parse_long(toks[1]);
        m.from_node = int(parse_long(toks[2]));
        m.to_node = int(parse_long(toks[3]));
        m.current_a = parse_double(toks[4]);
        m.duration_s = parse_double(toks[5]);
        m.state = parse_deal_state(toks[6]);
        return m;
    }
    if (kind == "MODE") {
        expect_arity(toks, 5);
        ModeCmdMsg m;
        m.node_id = int(parse_long(toks[1]));
        m.mode = parse_mode(toks[2]);
        m.setpoint = parse_double(toks[3]);
        m.direction = parse_dir(toks[4]);
        return m;
    }
    if (kind == "SET") {
        expect_arity(toks, 3);
        return SetMsg{std::string(toks[1].text), parse_double(toks[2])};
    }
    if (kind == "ACK") {
        expect_arity(toks, 3);
        return AckMsg{std::string(toks[1].text), std::string(toks[2].text)};
    }
    if (kind == "ERR") {
        expect_arity(toks, 3);
        return ErrMsg{std::string(toks[1].text), std::string(toks[2].text)};
    }
    throw WireError(toks[0].offset, "unknown frame kind '" + std::string(kind) + "'");
}

} // namespace mg
