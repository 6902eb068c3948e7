#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convsearch/error.hpp"
#include "convsearch/text.hpp"
#include "convsearch/types.hpp"

namespace convsearch {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

struct Posting {
    std::uint32_t doc = 0;  // dense doc number, see InvertedIndex::doc_id()
    double payload = 0.0;   // raw term frequency (bm25) or stored weight (sparse)
};

enum class IndexMode { bm25, sparse };

class InvertedIndex;

template <std::ranges::input_range R>
InvertedIndex build_index(R&& corpus, const AnalyzerConfig& analyzer = {});

/// Term -> postings plus length statistics. Immutable once built, so any number
/// of threads may query it concurrently.
///
/// Dense doc numbers are assigned in ascending doc_id order, which makes
/// "smaller doc number" the same thing as "lexicographically smaller doc_id"
/// for tie-breaking.
class InvertedIndex {
public:
    IndexMode mode() const noexcept { return mode_; }
    std::size_t doc_count() const noexcept { return doc_ids_.size(); }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    const AnalyzerConfig& analyzer() const noexcept { return analyzer_; }

    const std::string& doc_id(std::uint32_t doc) const { return doc_ids_.at(doc); }
    std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_.at(doc); }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }

    std::span<const Posting> postings(std::string_view term) const {
        auto it = postings_.find(term);
        if (it == postings_.end()) return {};
        return it->second;
    }

    std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }
    std::size_t term_count() const noexcept { return postings_.size(); }
    const std::map<std::string, std::vector<Posting>, std::less<>>& all_postings() const noexcept {
        return postings_;
    }

    std::size_t total_postings() const noexcept {
        std::size_t n = 0;
        for (const auto& [term, list] : postings_) n += list.size();
        return n;
    }

private:
    template <std::ranges::input_range R>
    friend InvertedIndex build_index(R&& corpus, const AnalyzerConfig& analyzer);
    friend InvertedIndex build_sparse_index(const std::map<std::string, SparseVector>& vectors);

    void finalize_lengths() {
        if (doc_lengths_.empty()) {
            avg_doc_length_ = 0.0;
            return;
        }
        double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
        avg_doc_length_ = total / static_cast<double>(doc_lengths_.size());
    }

    IndexMode mode_ = IndexMode::bm25;
    AnalyzerConfig analyzer_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    double avg_doc_length_ = 0.0;
};

/// Builds a BM25-mode index over any range of Passage. Rejects duplicate ids.
template <std::ranges::input_range R>
InvertedIndex build_index(R&& corpus, const AnalyzerConfig& analyzer) {
    std::vector<const Passage*> docs;
    for (const Passage& p : corpus) docs.push_back(&p);
    std::sort(docs.begin(), docs.end(),
              [](const Passage* a, const Passage* b) { return a->doc_id < b->doc_id; });
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i]->doc_id.empty()) throw InvalidArgument("empty doc_id");
        if (i > 0 && docs[i]->doc_id == docs[i - 1]->doc_id) {
            throw InvalidArgument("duplicate doc_id '" + docs[i]->doc_id + "'");
        }
    }

    InvertedIndex index;
    index.mode_ = IndexMode::bm25;
    index.analyzer_ = analyzer;
    index.doc_ids_.reserve(docs.size());
    index.doc_lengths_.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const Passage& p = *docs[i];
        auto tokens = tokenize(p.text, analyzer);
        if (tokens.empty() && trim(p.text).empty() && !analyzer.allow_empty_text) {
            throw InvalidArgument("empty text for doc_id '" + p.doc_id + "'");
        }
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        auto doc = static_cast<std::uint32_t>(i);
        for (const auto& [term, freq] : tf) {
            auto it = index.postings_.find(term);
            if (it == index.postings_.end()) it = index.postings_.emplace(std::string(term), std::vector<Posting>{}).first;
            it->second.push_back({doc, static_cast<double>(freq)});
        }
        index.doc_ids_.push_back(p.doc_id);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    }
    index.finalize_lengths();
    return index;
}

inline InvertedIndex build_index(std::initializer_list<Passage> corpus, const AnalyzerConfig& analyzer = {}) {
    return build_index(std::span<const Passage>(corpus.begin(), corpus.size()), analyzer);
}

/// Builds a sparse-mode index from precomputed document vectors. A document's
/// length is its number of non-zero terms.
inline InvertedIndex build_sparse_index(const std::map<std::string, SparseVector>& vectors) {
    InvertedIndex index;
    index.mode_ = IndexMode::sparse;
    std::uint32_t doc = 0;
    for (const auto& [doc_id, vec] : vectors) {
        if (doc_id.empty()) throw InvalidArgument("empty doc_id");
        for (const auto& [term, weight] : vec) {
            auto it = index.postings_.find(term);
            if (it == index.postings_.end()) it = index.postings_.emplace(term, std::vector<Posting>{}).first;
            it->second.push_back({doc, weight});
        }
        index.doc_ids_.push_back(doc_id);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(vec.size()));
        ++doc;
    }
    index.finalize_lengths();
    return index;
}

namespace detail {

/// Term-at-a-time score accumulator with exact top-k selection.
class Accumulator {
public:
    explicit Accumulator(std::size_t doc_count) : scores_(doc_count, 0.0), seen_(doc_count, 0) {}

    void add(std::uint32_t doc, double value) {
        if (!seen_[doc]) {
            seen_[doc] = 1;
            touched_.push_back(doc);
        }
        scores_[doc] += value;
    }

    RankedList top_k(const InvertedIndex& index, std::size_t k) const {
        std::vector<std::uint32_t> docs;
        docs.reserve(touched_.size());
        for (auto d : touched_) {
            if (scores_[d] > 0.0) docs.push_back(d);
        }
        auto before = [this](std::uint32_t a, std::uint32_t b) {
            if (scores_[a] != scores_[b]) return scores_[a] > scores_[b];
            return a < b;
        };
        std::size_t n = std::min(k, docs.size());
        std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n), docs.end(), before);
        RankedList out;
        out.items.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.items.push_back({index.doc_id(docs[i]), scores_[docs[i]]});
        return out;
    }

private:
    std::vector<double> scores_;
    std::vector<char> seen_;
    std::vector<std::uint32_t> touched_;
};

}  // namespace detail

inline double bm25_idf(std::size_t doc_count, std::size_t df) {
    auto n = static_cast<double>(doc_count);
    auto d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

/// Contribution of one query-term occurrence to a document's BM25 score.
inline double bm25_term_weight(double tf, double doc_length, double avg_doc_length, double idf,
                               const Bm25Params& params) {
    double norm = avg_doc_length > 0.0 ? doc_length / avg_doc_length : 0.0;
    return idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
}

/// Top-k by BM25. Repeated query terms count once per occurrence. Query terms
/// are visited in sorted order so scores are bit-reproducible.
inline RankedList bm25_retrieve(const InvertedIndex& index, std::string_view query_text, std::size_t k,
                                const Bm25Params& params = {}) {
    if (k == 0) throw InvalidArgument("k must be positive");
    if (index.mode() != IndexMode::bm25) throw InvalidArgument("bm25_retrieve requires a bm25-mode index");
    std::map<std::string, std::uint32_t> query_tf;
    for (auto& t : tokenize(query_text, index.analyzer())) ++query_tf[t];
    if (query_tf.empty() || index.doc_count() == 0) return {};

    detail::Accumulator acc(index.doc_count());
    for (const auto& [term, qtf] : query_tf) {
        auto list = index.postings(term);
        if (list.empty()) continue;
        double idf = bm25_idf(index.doc_count(), list.size());
        for (const Posting& p : list) {
            double w = bm25_term_weight(p.payload, index.doc_length(p.doc), index.avg_doc_length(), idf, params);
            acc.add(p.doc, static_cast<double>(qtf) * w);
        }
    }
    return acc.top_k(index, k);
}

/// Top-k by dot product between query and stored document weights.
inline RankedList sparse_retrieve(const InvertedIndex& index, const SparseVector& query, std::size_t k) {
    if (k == 0) throw InvalidArgument("k must be positive");
    if (index.mode() != IndexMode::sparse) throw InvalidArgument("sparse_retrieve requires a sparse-mode index");
    if (query.empty() || index.doc_count() == 0) return {};

    detail::Accumulator acc(index.doc_count());
    for (const auto& [term, q_weight] : query) {
        for (const Posting& p : index.postings(term)) acc.add(p.doc, q_weight * p.payload);
    }
    return acc.top_k(index, k);
}

}  // namespace convsearch
