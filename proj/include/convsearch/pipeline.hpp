#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "convsearch/conversation.hpp"
#include "convsearch/corpus.hpp"
#include "convsearch/error.hpp"
#include "convsearch/fusion.hpp"
#include "convsearch/index.hpp"
#include "convsearch/llm.hpp"
#include "convsearch/llm_tasks.hpp"
#include "convsearch/scorer.hpp"

namespace convsearch {

enum class RewriterKind { multi_query, single_rewrite, human_rewrite };
enum class RetrieverKind { bm25, sparse };
enum class FusionKind { pool_then_rerank, interleave, none };
enum class RerankerKind { single, ensemble, none };
enum class HistoryMode { gold, generated };

struct RewriterSpec {
    RewriterKind kind = RewriterKind::single_rewrite;
    int phi = 1;
};

struct RerankerSpec {
    RerankerKind kind = RerankerKind::none;
    std::vector<std::string> scorer_ids;
};

struct RunConfig {
    std::string run_tag;
    RewriterSpec rewriter;
    RetrieverKind retriever = RetrieverKind::sparse;
    FusionKind fusion = FusionKind::none;
    RerankerSpec reranker;
    std::size_t retrieval_depth = 1000;
    std::size_t pool_depth = 1000;    // per-query depth taken into the pool
    std::size_t rerank_depth = 1000;
    std::size_t output_depth = 1000;  // final ranking cutoff
    HistoryMode history = HistoryMode::gold;
    bool filtered_ptkb = false;  // experimental: feed only classified-relevant PTKB to prompts
    std::string turn_id_format = "{topic}_{turn}";
    std::size_t threads = 1;
    Bm25Params bm25;

    void validate() const {
        auto fail = [this](const std::string& m) { throw ConfigError("run '" + run_tag + "': " + m); };
        if (run_tag.empty() || run_tag.find_first_of(" \t\n") != std::string::npos) fail("run_tag must be a non-empty token");
        if (rewriter.phi < 1) fail("phi must be >= 1");
        if (fusion == FusionKind::pool_then_rerank) {
            if (rewriter.kind != RewriterKind::multi_query) fail("pool_then_rerank requires the multi_query rewriter");
            if (reranker.kind == RerankerKind::none) fail("pool_then_rerank requires a reranker");
        }
        if (fusion == FusionKind::none && rewriter.kind == RewriterKind::multi_query && rewriter.phi != 1) {
            fail("fusion none with multi_query requires phi = 1");
        }
        if (reranker.kind == RerankerKind::single && reranker.scorer_ids.size() != 1) fail("single reranker takes one scorer");
        if (reranker.kind == RerankerKind::ensemble && reranker.scorer_ids.empty()) fail("ensemble needs at least one scorer");
        if (retrieval_depth == 0 || pool_depth == 0 || rerank_depth == 0 || output_depth == 0) fail("depths must be positive");
        if (turn_id_format.find("{topic}") == std::string::npos || turn_id_format.find("{turn}") == std::string::npos) {
            fail("turn_id_format must contain {topic} and {turn}");
        }
        if (threads == 0) fail("threads must be positive");
    }
};

inline std::string format_turn_id(const std::string& format, const std::string& topic_id, int turn_number) {
    std::string out = format;
    auto replace = [&out](std::string_view key, const std::string& value) {
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
            out.replace(pos, key.size(), value);
        }
    };
    replace("{topic}", topic_id);
    replace("{turn}", std::to_string(turn_number));
    return out;
}

/// Maps query text to a sparse query vector for sparse-mode retrieval.
class QueryEncoder {
public:
    virtual ~QueryEncoder() = default;
    virtual SparseVector encode(std::string_view text) const = 0;
};

/// Term counts of the analyzed text.
class LexicalQueryEncoder : public QueryEncoder {
public:
    explicit LexicalQueryEncoder(AnalyzerConfig analyzer = {}) : analyzer_(std::move(analyzer)) {}

    SparseVector encode(std::string_view text) const override {
        SparseVector v;
        for (const auto& t : tokenize(text, analyzer_)) v.set(t, v.get(t) + 1.0);
        return v;
    }

private:
    AnalyzerConfig analyzer_;
};

/// Precomputed vectors keyed by exact query text; other texts go to `fallback`.
class LookupQueryEncoder : public QueryEncoder {
public:
    LookupQueryEncoder(std::map<std::string, SparseVector> vectors, std::shared_ptr<const QueryEncoder> fallback)
        : vectors_(std::move(vectors)), fallback_(std::move(fallback)) {}

    SparseVector encode(std::string_view text) const override {
        if (auto it = vectors_.find(std::string(text)); it != vectors_.end()) return it->second;
        if (!fallback_) throw InvalidArgument("no query vector for '" + std::string(text) + "'");
        return fallback_->encode(text);
    }

private:
    std::map<std::string, SparseVector> vectors_;
    std::shared_ptr<const QueryEncoder> fallback_;
};

/// Everything a run reads. Non-owning except for shared immutable pieces.
struct PipelineResources {
    const PassageStore* passages = nullptr;
    std::shared_ptr<const InvertedIndex> bm25_index;
    std::shared_ptr<const InvertedIndex> sparse_index;
    std::shared_ptr<const QueryEncoder> encoder;
    LlmGateway* llm = nullptr;
    const ScorerRegistry* scorers = nullptr;
};

struct TurnResult {
    std::string turn_id;
    RankedList ranking;
    std::vector<int> ptkb_labels;
    std::string answer;
    std::vector<std::string> provenance;
    std::size_t padded_slots = 0;
    std::vector<std::string> queries;  // retrieval queries actually issued
    std::string rerank_query;

    bool operator==(const TurnResult&) const = default;
};

/// Failure inside one turn; `cause()` holds the original exception.
class TurnError : public Error {
public:
    TurnError(std::string turn_id, std::exception_ptr cause, const std::string& message)
        : Error("turn " + turn_id + ": " + message), turn_id_(std::move(turn_id)), cause_(std::move(cause)) {}

    const std::string& turn_id() const noexcept { return turn_id_; }
    const std::exception_ptr& cause() const noexcept { return cause_; }

private:
    std::string turn_id_;
    std::exception_ptr cause_;
};

class Pipeline {
public:
    Pipeline(RunConfig config, PipelineResources resources)
        : config_(std::move(config)), res_(std::move(resources)) {
        config_.validate();
        if (!res_.passages || !res_.llm || !res_.scorers) throw ConfigError("pipeline resources incomplete");
        if (config_.retriever == RetrieverKind::bm25 && !res_.bm25_index) throw ConfigError("bm25 retriever needs a bm25 index");
        if (config_.retriever == RetrieverKind::sparse && (!res_.sparse_index || !res_.encoder)) {
            throw ConfigError("sparse retriever needs a sparse index and a query encoder");
        }
        if (config_.reranker.kind == RerankerKind::single) {
            reranker_.emplace(res_.scorers->get(config_.reranker.scorer_ids.front()));
        } else if (config_.reranker.kind == RerankerKind::ensemble) {
            std::vector<std::shared_ptr<const Scorer>> scorers;
            for (const auto& id : config_.reranker.scorer_ids) scorers.push_back(res_.scorers->get(id));
            reranker_.emplace(std::move(scorers));
        }
    }

    const RunConfig& config() const noexcept { return config_; }

    /// `history` replaces gold responses of earlier turns (generated-history mode).
    TurnResult execute_turn(const Topic& topic, int turn_number, std::span<const std::string> history = {}) const {
        std::string turn_id = format_turn_id(config_.turn_id_format, topic.topic_id, turn_number);
        try {
            return run_turn(topic, turn_number, turn_id, history);
        } catch (const TurnError&) {
            throw;
        } catch (const std::exception& e) {
            throw TurnError(turn_id, std::current_exception(), e.what());
        }
    }

    /// One result per turn, topic order then turn order. Turns run on a bounded
    /// worker pool; any failure discards the whole run and rethrows the error of
    /// the earliest failing turn.
    std::vector<TurnResult> execute_run(std::span<const Topic> topics) const {
        if (config_.rewriter.kind == RewriterKind::human_rewrite) {
            for (const auto& topic : topics) {
                for (const auto& t : topic.turns) {
                    if (!t.manual_rewrite) {
                        throw TurnError(format_turn_id(config_.turn_id_format, topic.topic_id, t.turn_number), nullptr,
                                        "manual_rewrite missing");
                    }
                }
            }
        }

        struct Task {
            std::size_t topic;
            int turn;  // 0 = whole topic sequentially
            std::size_t first_slot;
        };
        std::vector<Task> tasks;
        std::size_t slots = 0;
        for (std::size_t i = 0; i < topics.size(); ++i) {
            if (config_.history == HistoryMode::generated) {
                tasks.push_back({i, 0, slots});
                slots += topics[i].turns.size();
            } else {
                for (const auto& t : topics[i].turns) tasks.push_back({i, t.turn_number, slots++});
            }
        }

        std::vector<TurnResult> results(slots);
        std::atomic<std::size_t> next{0};
        std::atomic<bool> abort{false};
        std::mutex error_mutex;
        std::size_t error_task = tasks.size();
        std::exception_ptr error;

        auto worker = [&] {
            while (!abort.load()) {
                std::size_t k = next.fetch_add(1);
                if (k >= tasks.size()) return;
                const Task& task = tasks[k];
                try {
                    const Topic& topic = topics[task.topic];
                    if (task.turn > 0) {
                        results[task.first_slot] = execute_turn(topic, task.turn);
                    } else {
                        std::vector<std::string> history;
                        for (const auto& t : topic.turns) {
                            auto r = execute_turn(topic, t.turn_number, history);
                            history.push_back(r.answer);
                            results[task.first_slot + history.size() - 1] = std::move(r);
                        }
                    }
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (k < error_task) {
                        error_task = k;
                        error = std::current_exception();
                    }
                    abort.store(true);
                }
            }
        };

        std::size_t n_workers = std::min(config_.threads, std::max<std::size_t>(tasks.size(), 1));
        {
            std::vector<std::jthread> pool;
            for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
            worker();
        }
        if (error) std::rethrow_exception(error);
        return results;
    }

private:
    RankedList retrieve(const std::string& query, std::size_t k) const {
        if (config_.retriever == RetrieverKind::bm25) return bm25_retrieve(*res_.bm25_index, query, k, config_.bm25);
        return sparse_retrieve(*res_.sparse_index, res_.encoder->encode(query), k);
    }

    // Retrieval list, reranked by `rerank_query` when a reranker is configured.
    RankedList retrieve_and_rerank(const std::string& query, const std::string& turn_id) const {
        RankedList list = retrieve(query, config_.retrieval_depth);
        list.query_id = turn_id;
        if (!reranker_) return list;
        auto ids = list.doc_ids();
        return rerank(*reranker_, query, ids, config_.rerank_depth, *res_.passages, turn_id);
    }

    TurnResult run_turn(const Topic& topic, int turn_number, const std::string& turn_id,
                        std::span<const std::string> history) const {
        const Turn& turn = topic.turn(turn_number);
        LlmGateway& llm = *res_.llm;
        TurnResult result;
        result.turn_id = turn_id;

        auto ctx = render_context(topic, turn_number, history);
        const std::string& utterance = turn.user_utterance;
        if (!topic.ptkb.empty()) result.ptkb_labels = classify_ptkb(llm, ctx, topic.ptkb, utterance);

        std::string ptkb = ptkb_text(topic);
        if (config_.filtered_ptkb) {
            std::vector<PTKBStatement> kept;
            for (std::size_t i = 0; i < topic.ptkb.size(); ++i) {
                if (result.ptkb_labels[i]) kept.push_back(topic.ptkb[i]);
            }
            ptkb = ptkb_text(kept);
        }

        switch (config_.rewriter.kind) {
            case RewriterKind::human_rewrite:
                if (!turn.manual_rewrite) throw Error("manual_rewrite missing");
                result.queries = {*turn.manual_rewrite};
                break;
            case RewriterKind::single_rewrite:
                result.queries = {generate_rewrite(llm, ctx, ptkb, utterance)};
                break;
            case RewriterKind::multi_query:
                result.queries = generate_queries(llm, ctx, ptkb, utterance, config_.rewriter.phi).queries;
                break;
        }

        switch (config_.fusion) {
            case FusionKind::none:
                result.rerank_query = result.queries.front();
                result.ranking = retrieve_and_rerank(result.queries.front(), turn_id);
                break;
            case FusionKind::interleave: {
                std::vector<RankedList> lists;
                for (const auto& q : result.queries) lists.push_back(retrieve_and_rerank(q, turn_id));
                result.ranking = interleave(lists);
                break;
            }
            case FusionKind::pool_then_rerank: {
                std::vector<RankedList> lists;
                for (const auto& q : result.queries) {
                    lists.push_back(retrieve(q, config_.retrieval_depth));
                    lists.back().query_id = turn_id;
                }
                auto pool = pool_candidates(lists, config_.pool_depth);
                result.rerank_query = generate_rewrite(llm, ctx, ptkb, utterance);
                result.ranking = rerank(*reranker_, result.rerank_query, pool, config_.rerank_depth, *res_.passages, turn_id);
                break;
            }
        }
        result.ranking.query_id = turn_id;
        if (result.ranking.items.size() > config_.output_depth) result.ranking.items.resize(config_.output_depth);

        std::vector<Passage> top;
        for (std::size_t i = 0; i < std::min(kResponseDocs, result.ranking.items.size()); ++i) {
            top.push_back(res_.passages->get(result.ranking.items[i].doc_id));
        }
        auto response = generate_response(llm, ctx, ptkb, utterance, top);
        result.answer = std::move(response.answer);
        result.provenance = std::move(response.provenance);
        result.padded_slots = response.padded_slots;
        return result;
    }

    RunConfig config_;
    PipelineResources res_;
    std::optional<Reranker> reranker_;
};

inline std::string format_score(double score) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", score);
    return buf;
}

/// `<turn_id> Q0 <doc_id> <rank> <score> <run_tag>`, ranks from 1, six decimals.
inline void write_trec_run(std::span<const TurnResult> results, const std::string& run_tag, std::ostream& out) {
    for (const auto& r : results) {
        for (std::size_t i = 0; i < r.ranking.items.size(); ++i) {
            const auto& item = r.ranking.items[i];
            out << r.turn_id << " Q0 " << item.doc_id << ' ' << (i + 1) << ' ' << format_score(item.score) << ' '
                << run_tag << '\n';
        }
    }
    if (!out) throw Error("failed writing run file");
}

inline nlohmann::ordered_json response_record(const TurnResult& r) {
    nlohmann::ordered_json j;
    j["turn_id"] = r.turn_id;
    j["answer"] = r.answer;
    j["provenance"] = r.provenance;
    j["ptkb_labels"] = r.ptkb_labels;
    j["padded_slots"] = r.padded_slots;
    return j;
}

/// One compact JSON object per line.
inline void write_responses(std::span<const TurnResult> results, std::ostream& out) {
    for (const auto& r : results) out << response_record(r).dump() << '\n';
    if (!out) throw Error("failed writing response records");
}

}  // namespace convsearch
