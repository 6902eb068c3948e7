#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "convsearch/error.hpp"

namespace convsearch {

struct Passage {
    std::string doc_id;
    std::string text;

    bool operator==(const Passage&) const = default;
};

/// Term weights; zero weights are never stored and negative weights are rejected.
/// Terms are kept sorted so every consumer sees one canonical iteration order.
class SparseVector {
public:
    using Map = std::map<std::string, double, std::less<>>;

    SparseVector() = default;
    SparseVector(std::initializer_list<std::pair<const std::string, double>> entries) {
        for (const auto& [term, weight] : entries) set(term, weight);
    }

    void set(const std::string& term, double weight) {
        if (!(weight >= 0.0) || !std::isfinite(weight)) {
            throw InvalidArgument("negative or non-finite weight for term '" + term + "'");
        }
        if (weight == 0.0) {
            entries_.erase(term);
        } else {
            entries_[term] = weight;
        }
    }

    double get(std::string_view term) const {
        auto it = entries_.find(term);
        return it == entries_.end() ? 0.0 : it->second;
    }

    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }
    const Map& entries() const noexcept { return entries_; }

    bool operator==(const SparseVector&) const = default;

private:
    Map entries_;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Descending score, ascending doc_id on ties.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> items;

    std::size_t size() const noexcept { return items.size(); }
    bool empty() const noexcept { return items.empty(); }

    std::vector<std::string> doc_ids() const {
        std::vector<std::string> ids;
        ids.reserve(items.size());
        for (const auto& item : items) ids.push_back(item.doc_id);
        return ids;
    }

    bool operator==(const RankedList&) const = default;
};

inline void sort_ranked(std::vector<ScoredDoc>& items) {
    std::sort(items.begin(), items.end(), ranks_before);
}

/// True when scores are non-increasing, ties ordered by doc_id and ids are distinct.
inline bool is_well_ordered(const RankedList& list) {
    for (std::size_t i = 1; i < list.items.size(); ++i) {
        if (!ranks_before(list.items[i - 1], list.items[i])) return false;
    }
    std::vector<std::string> ids = list.doc_ids();
    std::sort(ids.begin(), ids.end());
    return std::adjacent_find(ids.begin(), ids.end()) == ids.end();
}

}  // namespace convsearch
