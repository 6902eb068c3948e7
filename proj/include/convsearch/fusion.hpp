#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convsearch/corpus.hpp"
#include "convsearch/error.hpp"
#include "convsearch/scorer.hpp"
#include "convsearch/types.hpp"

namespace convsearch {

/// (s - min) / (max - min) in place of every score; a flat list becomes all 1.0.
/// Item order is left untouched.
inline RankedList min_max_normalize(const RankedList& list) {
    RankedList out = list;
    if (out.items.empty()) return out;
    auto [lo, hi] = std::minmax_element(out.items.begin(), out.items.end(),
                                        [](const ScoredDoc& a, const ScoredDoc& b) { return a.score < b.score; });
    double min = lo->score;
    double range = hi->score - min;
    for (auto& item : out.items) item.score = range > 0.0 ? (item.score - min) / range : 1.0;
    return out;
}

namespace detail {

inline const std::string& shared_query_id(std::span<const RankedList> lists, const char* op) {
    if (lists.empty()) throw InvalidArgument(std::string(op) + " needs at least one list");
    for (const auto& l : lists) {
        if (l.query_id != lists.front().query_id) {
            throw InvalidArgument(std::string(op) + ": mismatched query_ids '" + lists.front().query_id + "' and '" +
                                  l.query_id + "'");
        }
    }
    return lists.front().query_id;
}

}  // namespace detail

enum class Aggregation { mean, sum };

/// Per doc, aggregates its min-max normalized score over all lists; a list
/// that lacks the doc contributes 0.
inline RankedList ensemble_fuse(std::span<const RankedList> lists, Aggregation aggregation = Aggregation::mean) {
    const auto& query_id = detail::shared_query_id(lists, "ensemble_fuse");
    std::map<std::string, double> fused;
    for (const auto& list : lists) {
        for (const auto& item : min_max_normalize(list).items) fused[item.doc_id] += item.score;
    }
    RankedList out{query_id, {}};
    out.items.reserve(fused.size());
    double divisor = aggregation == Aggregation::mean ? static_cast<double>(lists.size()) : 1.0;
    for (const auto& [doc, total] : fused) out.items.push_back({doc, total / divisor});
    sort_ranked(out.items);
    return out;
}

/// Round-robin over the lists in order, each with its own cursor, skipping ids
/// already emitted. Output scores are 1/rank.
inline RankedList interleave(std::span<const RankedList> lists) {
    const auto& query_id = detail::shared_query_id(lists, "interleave");
    RankedList out{query_id, {}};
    std::unordered_set<std::string> seen;
    std::vector<std::size_t> cursor(lists.size(), 0);
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (std::size_t l = 0; l < lists.size(); ++l) {
            const auto& items = lists[l].items;
            while (cursor[l] < items.size() && seen.contains(items[cursor[l]].doc_id)) ++cursor[l];
            if (cursor[l] == items.size()) continue;
            const auto& doc = items[cursor[l]++].doc_id;
            seen.insert(doc);
            out.items.push_back({doc, 1.0 / static_cast<double>(out.items.size() + 1)});
            progressed = true;
        }
    }
    return out;
}

/// Union of each list's top `per_list_depth` ids, in first-appearance order of a
/// round-robin scan (rank 1 of every list, then rank 2, ...).
inline std::vector<std::string> pool_candidates(std::span<const RankedList> lists, std::size_t per_list_depth) {
    if (per_list_depth == 0) throw InvalidArgument("per_list_depth must be positive");
    std::vector<std::string> pool;
    std::unordered_set<std::string> seen;
    std::size_t longest = 0;
    for (const auto& l : lists) longest = std::max(longest, std::min(per_list_depth, l.items.size()));
    for (std::size_t rank = 0; rank < longest; ++rank) {
        for (const auto& l : lists) {
            if (rank >= l.items.size() || rank >= per_list_depth) continue;
            const auto& doc = l.items[rank].doc_id;
            if (seen.insert(doc).second) pool.push_back(doc);
        }
    }
    return pool;
}

/// A single scorer, or several whose outputs are ensemble-fused.
class Reranker {
public:
    explicit Reranker(std::shared_ptr<const Scorer> scorer) : scorers_{std::move(scorer)} {}
    Reranker(std::vector<std::shared_ptr<const Scorer>> scorers, Aggregation aggregation = Aggregation::mean)
        : scorers_(std::move(scorers)), aggregation_(aggregation), ensemble_(true) {
        if (scorers_.empty()) throw InvalidArgument("ensemble needs at least one scorer");
    }

    // Scores are computed concurrently per scorer for ensembles.
    RankedList score(const std::string& query_id, std::string_view query, std::span<const Passage> passages) const {
        auto run_one = [&](const Scorer& s) {
            auto scores = s.score(query, passages);
            if (scores.size() != passages.size()) throw Error("scorer returned misaligned scores");
            RankedList list{query_id, {}};
            list.items.reserve(passages.size());
            for (std::size_t i = 0; i < passages.size(); ++i) list.items.push_back({passages[i].doc_id, scores[i]});
            sort_ranked(list.items);
            return list;
        };
        if (!ensemble_) return run_one(*scorers_.front());
        std::vector<std::future<RankedList>> pending;
        for (const auto& s : scorers_) pending.push_back(std::async(std::launch::async, run_one, std::cref(*s)));
        std::vector<RankedList> lists;
        for (auto& f : pending) lists.push_back(f.get());
        return ensemble_fuse(lists, aggregation_);
    }

    bool is_ensemble() const noexcept { return ensemble_; }
    std::size_t scorer_count() const noexcept { return scorers_.size(); }

private:
    std::vector<std::shared_ptr<const Scorer>> scorers_;
    Aggregation aggregation_ = Aggregation::mean;
    bool ensemble_ = false;
};

/// Scores the first min(depth, |candidates|) candidates and returns them best-first.
inline RankedList rerank(const Reranker& reranker, std::string_view query, std::span<const std::string> candidates,
                         std::size_t depth, const PassageStore& corpus, const std::string& query_id = {}) {
    if (depth == 0) throw InvalidArgument("rerank depth must be positive");
    auto n = std::min(depth, candidates.size());
    std::vector<Passage> passages;
    passages.reserve(n);
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen.insert(candidates[i]).second) throw InvalidArgument("duplicate candidate '" + candidates[i] + "'");
        passages.push_back(corpus.get(candidates[i]));
    }
    if (passages.empty()) return {query_id, {}};
    return reranker.score(query_id, query, passages);
}

}  // namespace convsearch
