#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "convsearch/error.hpp"
#include "convsearch/http.hpp"
#include "convsearch/index.hpp"
#include "convsearch/text.hpp"
#include "convsearch/types.hpp"

namespace convsearch {

/// Relevance model for (query, passage) pairs. Output is aligned with the
/// input passages. Implementations must be pure and safe for concurrent calls.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::vector<double> score(std::string_view query, std::span<const Passage> passages) const = 0;
};

/// Scores a passage by the integer suffix of its doc_id ("d17" -> 17); 0 without digits.
class StubScorer : public Scorer {
public:
    static double suffix_value(std::string_view doc_id) {
        std::size_t i = doc_id.size();
        while (i > 0 && std::isdigit(static_cast<unsigned char>(doc_id[i - 1]))) --i;
        if (i == doc_id.size()) return 0.0;
        return std::stod(std::string(doc_id.substr(i)));
    }

    std::vector<double> score(std::string_view, std::span<const Passage> passages) const override {
        std::vector<double> out;
        out.reserve(passages.size());
        for (const auto& p : passages) out.push_back(suffix_value(p.doc_id));
        return out;
    }
};

enum class LexicalVariant { overlap, jaccard, log_tf, bigram, bm25 };

inline LexicalVariant parse_lexical_variant(std::string_view s) {
    if (s == "overlap") return LexicalVariant::overlap;
    if (s == "jaccard") return LexicalVariant::jaccard;
    if (s == "log_tf") return LexicalVariant::log_tf;
    if (s == "bigram") return LexicalVariant::bigram;
    if (s == "bm25") return LexicalVariant::bm25;
    throw ConfigError("unknown lexical scorer variant '" + std::string(s) + "'");
}

/// Offline term-matching scorers. They stand in for neural cross-encoders in
/// tests and fixtures; each variant weighs the evidence differently so an
/// ensemble of them disagrees in realistic ways.
class LexicalScorer : public Scorer {
public:
    explicit LexicalScorer(LexicalVariant variant, AnalyzerConfig analyzer = {})
        : variant_(variant), analyzer_(std::move(analyzer)) {
        if (variant_ == LexicalVariant::bm25) throw ConfigError("bm25 lexical scorer needs collection statistics");
    }

    /// bm25 variant: idf and average length come from `stats` (a bm25-mode index).
    LexicalScorer(LexicalVariant variant, std::shared_ptr<const InvertedIndex> stats, Bm25Params params = {})
        : variant_(variant), analyzer_(stats->analyzer()), stats_(std::move(stats)), params_(params) {}

    std::vector<double> score(std::string_view query, std::span<const Passage> passages) const override {
        auto q_tokens = tokenize(query, analyzer_);
        std::set<std::string> q_terms(q_tokens.begin(), q_tokens.end());
        std::vector<double> out;
        out.reserve(passages.size());
        for (const auto& p : passages) out.push_back(score_one(q_tokens, q_terms, p));
        return out;
    }

private:
    double score_one(const std::vector<std::string>& q_tokens, const std::set<std::string>& q_terms,
                     const Passage& p) const {
        auto tokens = tokenize(p.text, analyzer_);
        std::map<std::string, int> tf;
        for (const auto& t : tokens) ++tf[t];
        if (q_terms.empty() || tokens.empty()) return 0.0;
        std::size_t matched = 0;
        for (const auto& t : q_terms) matched += tf.contains(t) ? 1 : 0;

        switch (variant_) {
            case LexicalVariant::overlap:
                return static_cast<double>(matched) / static_cast<double>(q_terms.size());
            case LexicalVariant::jaccard: {
                std::size_t uni = q_terms.size() + tf.size() - matched;
                return static_cast<double>(matched) / static_cast<double>(uni);
            }
            case LexicalVariant::log_tf: {
                double s = 0.0;
                for (const auto& t : q_terms) {
                    if (auto it = tf.find(t); it != tf.end()) s += std::log1p(it->second);
                }
                return s / std::sqrt(static_cast<double>(tokens.size()));
            }
            case LexicalVariant::bigram: {
                std::set<std::pair<std::string, std::string>> doc_bigrams;
                for (std::size_t i = 1; i < tokens.size(); ++i) doc_bigrams.emplace(tokens[i - 1], tokens[i]);
                std::size_t hits = 0;
                for (std::size_t i = 1; i < q_tokens.size(); ++i) hits += doc_bigrams.contains({q_tokens[i - 1], q_tokens[i]});
                double bigram_part = q_tokens.size() > 1 ? static_cast<double>(hits) / static_cast<double>(q_tokens.size() - 1) : 0.0;
                return bigram_part + 0.5 * static_cast<double>(matched) / static_cast<double>(q_terms.size());
            }
            case LexicalVariant::bm25: {
                double s = 0.0;
                for (const auto& t : q_terms) {
                    auto it = tf.find(t);
                    if (it == tf.end()) continue;
                    double idf = bm25_idf(stats_->doc_count(), stats_->document_frequency(t));
                    s += bm25_term_weight(it->second, static_cast<double>(tokens.size()), stats_->avg_doc_length(), idf, params_);
                }
                return s;
            }
        }
        return 0.0;
    }

    LexicalVariant variant_;
    AnalyzerConfig analyzer_;
    std::shared_ptr<const InvertedIndex> stats_;
    Bm25Params params_;
};

/// Cross-encoder service adapter. Request: {"query", "passages": [{"doc_id", "text"}]};
/// response: {"scores": [...]} aligned with the request passages.
class RemoteScorer : public Scorer {
public:
    struct Options {
        std::string url;
        std::size_t batch_size = 32;
        std::chrono::seconds timeout{300};
        double requests_per_minute = 0.0;
    };

    explicit RemoteScorer(Options options)
        : options_(std::move(options)), url_(split_url(options_.url)),
          limiter_(std::make_unique<RateLimiter>(options_.requests_per_minute)) {
        if (options_.batch_size == 0) throw ConfigError("remote scorer batch_size must be positive");
    }

    static nlohmann::json request_body(std::string_view query, std::span<const Passage> batch) {
        nlohmann::json passages = nlohmann::json::array();
        for (const auto& p : batch) passages.push_back({{"doc_id", p.doc_id}, {"text", p.text}});
        return {{"query", query}, {"passages", passages}};
    }

    std::vector<double> score(std::string_view query, std::span<const Passage> passages) const override {
        std::vector<double> out;
        out.reserve(passages.size());
        for (std::size_t start = 0; start < passages.size(); start += options_.batch_size) {
            auto batch = passages.subspan(start, std::min(options_.batch_size, passages.size() - start));
            limiter_->acquire();
            auto raw = post_json(url_, request_body(query, batch).dump(), {}, options_.timeout);
            std::vector<double> scores;
            try {
                scores = nlohmann::json::parse(raw).at("scores").get<std::vector<double>>();
            } catch (const nlohmann::json::exception& e) {
                throw TransportError(std::string("malformed scorer response: ") + e.what());
            }
            if (scores.size() != batch.size()) {
                throw TransportError("scorer returned " + std::to_string(scores.size()) + " scores for " +
                                     std::to_string(batch.size()) + " passages");
            }
            out.insert(out.end(), scores.begin(), scores.end());
        }
        return out;
    }

private:
    Options options_;
    Url url_;
    std::unique_ptr<RateLimiter> limiter_;
};

class ScorerRegistry {
public:
    void add(std::string id, std::shared_ptr<const Scorer> scorer) {
        if (!scorer) throw InvalidArgument("null scorer for '" + id + "'");
        scorers_[std::move(id)] = std::move(scorer);
    }

    std::shared_ptr<const Scorer> get(const std::string& id) const {
        auto it = scorers_.find(id);
        if (it == scorers_.end()) throw ConfigError("unknown scorer id '" + id + "'");
        return it->second;
    }

    bool contains(const std::string& id) const { return scorers_.contains(id); }
    std::size_t size() const noexcept { return scorers_.size(); }

private:
    std::map<std::string, std::shared_ptr<const Scorer>> scorers_;
};

}  // namespace convsearch
