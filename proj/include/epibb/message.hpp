#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "epibb/code.hpp"

namespace epibb {

enum class MsgKind : std::uint8_t {
    WorkRequest = 0,
    WorkGrant,
    WorkDenied,
    WorkReport,
    TableGossip,
    TerminationNotice,
    Join,
    ViewGossip,
};

inline constexpr int kMsgKindCount = 8;

inline const char* to_string(MsgKind k) {
    switch (k) {
        case MsgKind::WorkRequest: return "WorkRequest";
        case MsgKind::WorkGrant: return "WorkGrant";
        case MsgKind::WorkDenied: return "WorkDenied";
        case MsgKind::WorkReport: return "WorkReport";
        case MsgKind::TableGossip: return "TableGossip";
        case MsgKind::TerminationNotice: return "TerminationNotice";
        case MsgKind::Join: return "Join";
        case MsgKind::ViewGossip: return "ViewGossip";
    }
    return "?";
}

struct ViewEntry {
    int id = 0;
    std::uint64_t heartbeat = 0;
};

/// Wire message. Sizes feed the latency model and are fixed exactly:
/// a 64-byte header, 8 bytes per code pair, 8 bytes per scalar (the
/// piggybacked best-known value) and 8 bytes per view entry.
struct Message {
    MsgKind kind = MsgKind::WorkRequest;
    int sender = -1;
    int receiver = -1;
    std::uint64_t req_id = 0;  // request/reply correlation, part of the header
    std::vector<ProblemCode> codes;
    std::optional<double> best;
    std::vector<ViewEntry> view;

    std::size_t size_bytes() const {
        std::size_t pairs = 0;
        for (const auto& c : codes) {
            pairs += c.depth();
        }
        return 64 + 8 * pairs + (best.has_value() ? 8 : 0) + 8 * view.size();
    }
};

}  // namespace epibb
