#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "convsearch/conversation.hpp"
#include "convsearch/corpus.hpp"
#include "convsearch/error.hpp"
#include "convsearch/eval.hpp"
#include "convsearch/index.hpp"
#include "convsearch/llm.hpp"
#include "convsearch/offline_llm.hpp"
#include "convsearch/pipeline.hpp"
#include "convsearch/scorer.hpp"

namespace convsearch {

struct LlmSettings {
    LlmMode mode = LlmMode::replay;
    std::string model_id = "gpt-4";
    std::filesystem::path cache_dir;
    std::string provider = "openai";  // openai | offline
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    DecodingConfig decoding;
    double requests_per_minute = 0.0;
    int max_retries = 2;
};

struct ScorerSpec {
    std::string type;  // stub | lexical | remote
    std::string variant = "overlap";
    std::string url;
    std::size_t batch_size = 32;
};

struct DataPaths {
    std::filesystem::path corpus;
    std::filesystem::path sparse_vectors;
    std::filesystem::path query_vectors;
    std::filesystem::path topics;
    std::filesystem::path qrels;
    std::filesystem::path run_out;
    std::filesystem::path responses_out;
};

struct PipelineConfig {
    RunConfig run;
    AnalyzerConfig analyzer;
    LlmSettings llm;
    std::map<std::string, ScorerSpec> scorers;
    DataPaths paths;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!ok.contains(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
T value_or(const nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const nlohmann::json& obj, const char* key) {
    auto s = value_or<std::string>(obj, key, "");
    if (s.empty()) return {};
    std::filesystem::path p(s);
    return p.is_absolute() ? p : base / p;
}

}  // namespace detail

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    using detail::value_or;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown(j,
                           {"run_tag", "rewriter", "retriever", "fusion", "reranker", "retrieval_depth", "pool_depth",
                            "rerank_depth", "output_depth", "history", "filtered_ptkb", "turn_id_format", "threads",
                            "bm25", "analyzer", "llm", "scorers", "paths"},
                           "config");
    PipelineConfig c;
    RunConfig& r = c.run;
    r.run_tag = value_or<std::string>(j, "run_tag", "");

    auto rw = value_or<nlohmann::json>(j, "rewriter", nlohmann::json::object());
    detail::reject_unknown(rw, {"type", "phi"}, "rewriter");
    auto rw_type = value_or<std::string>(rw, "type", "single_rewrite");
    if (rw_type == "multi_query") {
        r.rewriter = {RewriterKind::multi_query, value_or<int>(rw, "phi", 5)};
    } else if (rw_type == "single_rewrite") {
        r.rewriter = {RewriterKind::single_rewrite, 1};
    } else if (rw_type == "human_rewrite") {
        r.rewriter = {RewriterKind::human_rewrite, 1};
    } else {
        throw ConfigError("unknown rewriter type '" + rw_type + "'");
    }

    auto retriever = value_or<std::string>(j, "retriever", "sparse");
    if (retriever == "bm25") r.retriever = RetrieverKind::bm25;
    else if (retriever == "sparse") r.retriever = RetrieverKind::sparse;
    else throw ConfigError("unknown retriever '" + retriever + "'");

    auto fusion = value_or<std::string>(j, "fusion", "none");
    if (fusion == "pool_then_rerank") r.fusion = FusionKind::pool_then_rerank;
    else if (fusion == "interleave") r.fusion = FusionKind::interleave;
    else if (fusion == "none") r.fusion = FusionKind::none;
    else throw ConfigError("unknown fusion '" + fusion + "'");

    auto rr = value_or<nlohmann::json>(j, "reranker", nlohmann::json{{"type", "none"}});
    detail::reject_unknown(rr, {"type", "scorer", "scorers"}, "reranker");
    auto rr_type = value_or<std::string>(rr, "type", "none");
    if (rr_type == "single") {
        r.reranker = {RerankerKind::single, {value_or<std::string>(rr, "scorer", "")}};
    } else if (rr_type == "ensemble") {
        r.reranker = {RerankerKind::ensemble, value_or<std::vector<std::string>>(rr, "scorers", {})};
    } else if (rr_type == "none") {
        r.reranker = {RerankerKind::none, {}};
    } else {
        throw ConfigError("unknown reranker type '" + rr_type + "'");
    }

    r.retrieval_depth = value_or<std::size_t>(j, "retrieval_depth", 1000);
    r.pool_depth = value_or<std::size_t>(j, "pool_depth", r.retrieval_depth);
    r.rerank_depth = value_or<std::size_t>(j, "rerank_depth", 1000);
    r.output_depth = value_or<std::size_t>(j, "output_depth", 1000);
    auto history = value_or<std::string>(j, "history", "gold");
    if (history == "gold") r.history = HistoryMode::gold;
    else if (history == "generated") r.history = HistoryMode::generated;
    else throw ConfigError("unknown history mode '" + history + "'");
    r.filtered_ptkb = value_or<bool>(j, "filtered_ptkb", false);
    r.turn_id_format = value_or<std::string>(j, "turn_id_format", "{topic}_{turn}");
    r.threads = value_or<std::size_t>(j, "threads", 1);
    auto bm25 = value_or<nlohmann::json>(j, "bm25", nlohmann::json::object());
    detail::reject_unknown(bm25, {"k1", "b"}, "bm25");
    r.bm25 = {value_or<double>(bm25, "k1", 0.9), value_or<double>(bm25, "b", 0.4)};

    auto an = value_or<nlohmann::json>(j, "analyzer", nlohmann::json::object());
    detail::reject_unknown(an, {"lowercase", "stopwords", "allow_empty_text"}, "analyzer");
    c.analyzer.lowercase = value_or<bool>(an, "lowercase", true);
    auto stop = value_or<std::vector<std::string>>(an, "stopwords", {});
    c.analyzer.stopwords = {stop.begin(), stop.end()};
    c.analyzer.allow_empty_text = value_or<bool>(an, "allow_empty_text", false);

    auto llm = value_or<nlohmann::json>(j, "llm", nlohmann::json::object());
    detail::reject_unknown(llm,
                           {"mode", "model_id", "cache_dir", "provider", "endpoint", "api_key_env", "temperature",
                            "max_tokens", "requests_per_minute", "max_retries"},
                           "llm");
    c.llm.mode = parse_llm_mode(value_or<std::string>(llm, "mode", "replay"));
    c.llm.model_id = value_or<std::string>(llm, "model_id", "gpt-4");
    c.llm.cache_dir = detail::resolve(base_dir, llm, "cache_dir");
    c.llm.provider = value_or<std::string>(llm, "provider", "openai");
    c.llm.endpoint = value_or<std::string>(llm, "endpoint", c.llm.endpoint);
    c.llm.api_key_env = value_or<std::string>(llm, "api_key_env", c.llm.api_key_env);
    c.llm.decoding.temperature = value_or<double>(llm, "temperature", 0.0);
    if (llm.contains("max_tokens") && !llm.at("max_tokens").is_null()) c.llm.decoding.max_tokens = value_or<int>(llm, "max_tokens", 0);
    c.llm.requests_per_minute = value_or<double>(llm, "requests_per_minute", 0.0);
    c.llm.max_retries = value_or<int>(llm, "max_retries", 2);

    auto scorers = value_or<nlohmann::json>(j, "scorers", nlohmann::json::object());
    for (auto it = scorers.begin(); it != scorers.end(); ++it) {
        const auto& s = it.value();
        detail::reject_unknown(s, {"type", "variant", "url", "batch_size"}, "scorer '" + it.key() + "'");
        ScorerSpec spec;
        spec.type = value_or<std::string>(s, "type", "");
        spec.variant = value_or<std::string>(s, "variant", "overlap");
        spec.url = value_or<std::string>(s, "url", "");
        spec.batch_size = value_or<std::size_t>(s, "batch_size", 32);
        c.scorers[it.key()] = spec;
    }

    auto paths = value_or<nlohmann::json>(j, "paths", nlohmann::json::object());
    detail::reject_unknown(paths,
                           {"corpus", "sparse_vectors", "query_vectors", "topics", "qrels", "run_out", "responses_out"},
                           "paths");
    c.paths = {detail::resolve(base_dir, paths, "corpus"),        detail::resolve(base_dir, paths, "sparse_vectors"),
               detail::resolve(base_dir, paths, "query_vectors"), detail::resolve(base_dir, paths, "topics"),
               detail::resolve(base_dir, paths, "qrels"),         detail::resolve(base_dir, paths, "run_out"),
               detail::resolve(base_dir, paths, "responses_out")};
    r.validate();
    return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_pipeline_config(j, path.parent_path());
}

/// Loaded data plus live seams for one configuration.
struct Workspace {
    PipelineConfig config;
    PassageStore passages;
    std::shared_ptr<const InvertedIndex> bm25_index;
    std::shared_ptr<const InvertedIndex> sparse_index;
    std::shared_ptr<const QueryEncoder> encoder;
    std::vector<Topic> topics;
    std::shared_ptr<ExchangeCache> cache;
    std::unique_ptr<LlmGateway> llm;
    ScorerRegistry scorers;

    PipelineResources resources() {
        return {&passages, bm25_index, sparse_index, encoder, llm.get(), &scorers};
    }
};

inline std::shared_ptr<ChatClient> make_chat_client(const LlmSettings& s) {
    if (s.provider == "offline") return std::make_shared<OfflineChatClient>();
    if (s.provider == "openai") {
        return std::make_shared<OpenAiChatClient>(
            OpenAiChatClient::Options{s.endpoint, s.api_key_env, s.requests_per_minute, std::chrono::seconds(120)});
    }
    throw ConfigError("unknown llm provider '" + s.provider + "'");
}

inline std::unique_ptr<Workspace> open_workspace(PipelineConfig config) {
    auto ws = std::make_unique<Workspace>();
    ws->config = std::move(config);
    const auto& c = ws->config;
    if (c.paths.corpus.empty()) throw ConfigError("paths.corpus is required");
    if (c.paths.topics.empty()) throw ConfigError("paths.topics is required");
    ws->passages = PassageStore(load_corpus(c.paths.corpus));
    ws->topics = load_topics(c.paths.topics);

    bool needs_bm25 = c.run.retriever == RetrieverKind::bm25;
    for (const auto& [id, spec] : c.scorers) needs_bm25 |= spec.type == "lexical" && spec.variant == "bm25";
    if (needs_bm25) ws->bm25_index = std::make_shared<InvertedIndex>(build_index(ws->passages.passages(), c.analyzer));

    if (c.run.retriever == RetrieverKind::sparse) {
        if (c.paths.sparse_vectors.empty()) throw ConfigError("sparse retriever requires paths.sparse_vectors");
        auto vectors = load_sparse_vectors(c.paths.sparse_vectors);
        for (const auto& [doc, v] : vectors) {
            if (!ws->passages.contains(doc)) throw ConfigError("sparse vector for unknown doc_id '" + doc + "'");
        }
        ws->sparse_index = std::make_shared<InvertedIndex>(build_sparse_index(vectors));
        std::shared_ptr<const QueryEncoder> lexical = std::make_shared<LexicalQueryEncoder>(c.analyzer);
        if (!c.paths.query_vectors.empty()) {
            ws->encoder = std::make_shared<LookupQueryEncoder>(load_sparse_vectors(c.paths.query_vectors), lexical);
        } else {
            ws->encoder = lexical;
        }
    }

    for (const auto& [id, spec] : c.scorers) {
        if (spec.type == "stub") {
            ws->scorers.add(id, std::make_shared<StubScorer>());
        } else if (spec.type == "lexical") {
            auto variant = parse_lexical_variant(spec.variant);
            if (variant == LexicalVariant::bm25) {
                ws->scorers.add(id, std::make_shared<LexicalScorer>(variant, ws->bm25_index, c.run.bm25));
            } else {
                ws->scorers.add(id, std::make_shared<LexicalScorer>(variant, c.analyzer));
            }
        } else if (spec.type == "remote") {
            ws->scorers.add(id, std::make_shared<RemoteScorer>(RemoteScorer::Options{spec.url, spec.batch_size}));
        } else {
            throw ConfigError("scorer '" + id + "' has unknown type '" + spec.type + "'");
        }
    }

    if (c.llm.mode != LlmMode::live) {
        if (c.llm.cache_dir.empty()) throw ConfigError("llm.cache_dir is required in record and replay modes");
        ws->cache = std::make_shared<ExchangeCache>(c.llm.cache_dir);
    }
    std::shared_ptr<ChatClient> client;
    if (c.llm.mode != LlmMode::replay) client = make_chat_client(c.llm);
    ws->llm = std::make_unique<LlmGateway>(c.llm.mode, c.llm.model_id, client, ws->cache, c.llm.decoding, c.llm.max_retries);
    return ws;
}

}  // namespace convsearch
