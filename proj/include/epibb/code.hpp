#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace epibb {

/// Path identity of a subproblem: the sequence of (condition variable, bit)
/// decisions from the root. The empty sequence is the root problem.
///
/// Pairs are packed as (var << 1 | bit) so comparison is plain 64-bit
/// lexicographic order and the sibling flip is one xor.
class ProblemCode {
public:
    ProblemCode() = default;

    static ProblemCode root() { return ProblemCode(); }

    bool empty() const { return pairs_.empty(); }
    std::size_t depth() const { return pairs_.size(); }

    std::uint32_t var(std::size_t i) const { return static_cast<std::uint32_t>(pairs_[i] >> 1); }
    int bit(std::size_t i) const { return static_cast<int>(pairs_[i] & 1); }

    ProblemCode child(std::uint32_t branch_var, int branch_bit) const {
        ProblemCode c = *this;
        c.push(branch_var, branch_bit);
        return c;
    }

    void push(std::uint32_t branch_var, int branch_bit) {
        pairs_.push_back((static_cast<std::uint64_t>(branch_var) << 1) | static_cast<std::uint64_t>(branch_bit & 1));
    }

    ProblemCode parent() const {
        if (empty()) {
            throw std::invalid_argument("root has no parent");
        }
        ProblemCode c = *this;
        c.pairs_.pop_back();
        return c;
    }

    ProblemCode sibling() const {
        if (empty()) {
            throw std::invalid_argument("root has no sibling");
        }
        ProblemCode c = *this;
        c.pairs_.back() ^= 1;
        return c;
    }

    void flip_last() { pairs_.back() ^= 1; }
    void pop_last() { pairs_.pop_back(); }

    auto operator<=>(const ProblemCode&) const = default;

    /// Canonical text form: `x<var>=<bit>` pairs joined by `.`, root as `ROOT`.
    std::string str() const {
        if (empty()) {
            return "ROOT";
        }
        std::string out;
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            if (i != 0) {
                out += '.';
            }
            out += 'x';
            out += std::to_string(var(i));
            out += '=';
            out += std::to_string(bit(i));
        }
        return out;
    }

    static ProblemCode parse(const std::string& text) {
        if (text == "ROOT") {
            return root();
        }
        ProblemCode code;
        std::size_t pos = 0;
        while (pos < text.size()) {
            if (text[pos] != 'x') {
                throw std::invalid_argument("bad code text: " + text);
            }
            ++pos;
            std::size_t eq = text.find('=', pos);
            if (eq == std::string::npos || eq == pos) {
                throw std::invalid_argument("bad code text: " + text);
            }
            std::uint32_t v = 0;
            for (std::size_t i = pos; i < eq; ++i) {
                if (text[i] < '0' || text[i] > '9') {
                    throw std::invalid_argument("bad code text: " + text);
                }
                v = v * 10 + static_cast<std::uint32_t>(text[i] - '0');
            }
            if (eq + 1 >= text.size() || (text[eq + 1] != '0' && text[eq + 1] != '1')) {
                throw std::invalid_argument("bad code text: " + text);
            }
            code.push(v, text[eq + 1] - '0');
            pos = eq + 2;
            if (pos < text.size()) {
                if (text[pos] != '.' || pos + 1 >= text.size()) {
                    throw std::invalid_argument("bad code text: " + text);
                }
                ++pos;
            }
        }
        return code;
    }

    const std::vector<std::uint64_t>& raw() const { return pairs_; }

private:
    std::vector<std::uint64_t> pairs_;
};

/// True iff `a` is a strict prefix of `b` (a's subtree contains b).
inline bool is_ancestor(const ProblemCode& a, const ProblemCode& b) {
    if (a.depth() >= b.depth()) {
        return false;
    }
    return std::equal(a.raw().begin(), a.raw().end(), b.raw().begin());
}

inline std::size_t common_prefix_len(const ProblemCode& a, const ProblemCode& b) {
    const std::size_t n = std::min(a.depth(), b.depth());
    std::size_t i = 0;
    while (i < n && a.raw()[i] == b.raw()[i]) {
        ++i;
    }
    return i;
}

/// Contracted set of completed-problem codes.
///
/// Invariants (maintained on every insert):
///   - no code is an ancestor of another,
///   - no two codes are siblings (such pairs are replaced by their parent),
///   - the root code appears only as the singleton {ROOT}.
///
/// Coverage queries exploit the first invariant: in a contracted table at
/// most one ancestor of a code can be present, and in lexicographic order
/// it must be the query's predecessor.
class CompletedTable {
public:
    using Set = std::set<ProblemCode>;

    bool empty() const { return codes_.empty(); }
    std::size_t size() const { return codes_.size(); }
    const Set& codes() const { return codes_; }
    std::size_t pair_count() const { return pair_count_; }

    /// Serialized size of the stored codes (8 bytes per pair).
    std::size_t bytes() const { return 8 * pair_count_; }

    bool operator==(const CompletedTable& other) const { return codes_ == other.codes_; }

    /// True iff `code` or an ancestor of it is in the table.
    bool covers(const ProblemCode& code) const {
        auto it = codes_.lower_bound(code);
        if (it != codes_.end() && *it == code) {
            return true;
        }
        if (it == codes_.begin()) {
            return false;
        }
        return is_ancestor(*std::prev(it), code);
    }

    /// Folds one completed code in, keeping the table contracted.
    /// Returns the number of codes touched (for contraction-cost metering).
    std::size_t insert(ProblemCode code) {
        std::size_t touched = 1;
        if (covers(code)) {
            return touched;
        }
        // Drop codes subsumed by the new one. Extensions of `code` sort
        // directly after it, so they form one contiguous range.
        auto it = codes_.upper_bound(code);
        while (it != codes_.end() && is_ancestor(code, *it)) {
            pair_count_ -= it->depth();
            it = codes_.erase(it);
            ++touched;
        }
        // Replace sibling pairs by their parent, cascading upward.
        while (!code.empty()) {
            ProblemCode sib = code.sibling();
            auto sit = codes_.find(sib);
            if (sit == codes_.end()) {
                break;
            }
            pair_count_ -= sit->depth();
            codes_.erase(sit);
            code.pop_last();
            ++touched;
        }
        pair_count_ += code.depth();
        codes_.insert(std::move(code));
        return touched;
    }

    std::size_t merge(std::span<const ProblemCode> incoming) {
        std::size_t touched = 0;
        for (const auto& c : incoming) {
            touched += insert(c);
        }
        return touched;
    }

    std::size_t merge(const CompletedTable& other) {
        std::size_t touched = 0;
        for (const auto& c : other.codes_) {
            touched += insert(c);
        }
        return touched;
    }

    void clear() {
        codes_.clear();
        pair_count_ = 0;
    }

    std::vector<ProblemCode> snapshot() const { return {codes_.begin(), codes_.end()}; }

private:
    Set codes_;
    std::size_t pair_count_ = 0;
};

inline CompletedTable contract(std::span<const ProblemCode> codes, std::size_t* touched = nullptr) {
    CompletedTable table;
    const std::size_t t = table.merge(codes);
    if (touched != nullptr) {
        *touched = t;
    }
    return table;
}

/// Termination is detected exactly when compression has produced the root.
inline bool termination_detected(const CompletedTable& table) {
    return table.size() == 1 && table.codes().begin()->empty();
}

/// Picks uncompleted work to recover: the sibling complement of a completed
/// code. Policy: the deepest code in the table, ties by lexicographic order;
/// when `last_local` is given, codes sharing its longest common prefix are
/// preferred (recover near the last locally completed problem).
inline std::optional<ProblemCode> select_recovery(const CompletedTable& table,
                                                  const std::optional<ProblemCode>& last_local = std::nullopt) {
    if (table.empty() || termination_detected(table)) {
        return std::nullopt;
    }
    const ProblemCode* best = nullptr;
    std::size_t best_affinity = 0;
    if (last_local.has_value() && !last_local->empty()) {
        for (const auto& c : table.codes()) {
            best_affinity = std::max(best_affinity, common_prefix_len(c, *last_local));
        }
    }
    for (const auto& c : table.codes()) {
        if (best_affinity > 0 && common_prefix_len(c, *last_local) != best_affinity) {
            continue;
        }
        if (best == nullptr || c.depth() > best->depth() || (c.depth() == best->depth() && c < *best)) {
            best = &c;
        }
    }
    return best->sibling();
}

}  // namespace epibb
