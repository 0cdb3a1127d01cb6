#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "epibb/message.hpp"

namespace epibb {

/// Per-member view of the group: who we believe participates, when we last
/// heard of them, and their gossiped heartbeat counter. Heartbeats travel on
/// the wire instead of timestamps, so no clock synchronization is assumed;
/// last_heard is purely local and advances only when a heartbeat grows.
class MembershipView {
public:
    struct Entry {
        double last_heard = 0.0;
        std::uint64_t heartbeat = 0;
    };

    MembershipView() = default;

    void reset(int self, double now) {
        self_ = self;
        entries_.clear();
        entries_[self] = {now, 0};
    }

    int self() const { return self_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(int id) const { return entries_.count(id) != 0; }

    void add(int id, double now) {
        removed_at_hb_.erase(id);
        auto [it, fresh] = entries_.emplace(id, Entry{now, 0});
        if (!fresh) {
            it->second.last_heard = now;
        }
    }

    void bump_self(double now) {
        auto& e = entries_[self_];
        ++e.heartbeat;
        e.last_heard = now;
    }

    /// Join messages refresh liveness regardless of heartbeat.
    void on_join(int id, double now) { add(id, now); }

    /// Gossip merge: a strictly larger heartbeat is fresh information;
    /// unknown members are adopted. A member this view already removed is
    /// only re-adopted on a heartbeat larger than the one it was removed
    /// at, so relayed stale entries cannot resurrect a dead member.
    void on_view(std::span<const ViewEntry> incoming, double now) {
        for (const auto& ve : incoming) {
            auto it = entries_.find(ve.id);
            if (it == entries_.end()) {
                auto dead = removed_at_hb_.find(ve.id);
                if (dead != removed_at_hb_.end() && ve.heartbeat <= dead->second) {
                    continue;
                }
                removed_at_hb_.erase(ve.id);
                entries_[ve.id] = {now, ve.heartbeat};
            } else if (ve.heartbeat > it->second.heartbeat) {
                it->second.heartbeat = ve.heartbeat;
                it->second.last_heard = now;
            }
        }
    }

    /// Drops members not heard from within the timeout. Local decision only;
    /// the removed ids are returned for metering. Self is never removed.
    std::vector<int> suspect_failures(double now, double fail_timeout) {
        std::vector<int> removed;
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (it->first != self_ && now - it->second.last_heard > fail_timeout) {
                removed.push_back(it->first);
                removed_at_hb_[it->first] = it->second.heartbeat;
                it = entries_.erase(it);
            } else {
                ++it;
            }
        }
        return removed;
    }

    std::vector<int> others() const {
        std::vector<int> out;
        out.reserve(entries_.size());
        for (const auto& [id, e] : entries_) {
            if (id != self_) {
                out.push_back(id);
            }
        }
        return out;
    }

    std::vector<int> members() const {
        std::vector<int> out;
        out.reserve(entries_.size());
        for (const auto& [id, e] : entries_) {
            out.push_back(id);
        }
        return out;
    }

    std::vector<ViewEntry> wire_entries() const {
        std::vector<ViewEntry> out;
        out.reserve(entries_.size());
        for (const auto& [id, e] : entries_) {
            out.push_back({id, e.heartbeat});
        }
        return out;
    }

    std::uint64_t heartbeat(int id) const {
        auto it = entries_.find(id);
        return it == entries_.end() ? 0 : it->second.heartbeat;
    }

    std::optional<Entry> entry(int id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

private:
    int self_ = -1;
    std::map<int, Entry> entries_;
    std::map<int, std::uint64_t> removed_at_hb_;
};

}  // namespace epibb
