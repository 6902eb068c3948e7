// Command-line front end: index, run, evaluate, fuse, cache.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convsearch/convsearch.hpp"

namespace fs = std::filesystem;
using namespace convsearch;

namespace {

struct LlmOverrides {
    std::string mode;
    std::string model_id;
    std::string cache_dir;
    std::string provider;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--llm-mode", mode, "record, replay or live")->check(CLI::IsMember({"record", "replay", "live"}));
        cmd->add_option("--model-id", model_id, "chat model identifier");
        cmd->add_option("--cache-dir", cache_dir, "exchange cache directory");
        cmd->add_option("--llm-provider", provider, "openai or offline")->check(CLI::IsMember({"openai", "offline"}));
    }

    void apply(PipelineConfig& c) const {
        if (!mode.empty()) c.llm.mode = parse_llm_mode(mode);
        if (!model_id.empty()) c.llm.model_id = model_id;
        if (!cache_dir.empty()) c.llm.cache_dir = cache_dir;
        if (!provider.empty()) c.llm.provider = provider;
    }
};

// Write to a sibling temp file, then rename into place.
template <typename Fn>
void write_atomically(const fs::path& path, Fn&& fill) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        fill(out);
        out.flush();
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

int cmd_index(const std::string& corpus, const std::string& sparse, const std::string& query,
              const std::string& sparse_query, std::size_t k, double k1, double b) {
    auto passages = load_corpus(corpus);
    auto bm25 = build_index(passages);
    std::cout << "bm25 index: docs=" << bm25.doc_count() << " terms=" << bm25.term_count()
              << " postings=" << bm25.total_postings() << " avg_doc_length=" << bm25.avg_doc_length() << '\n';
    std::optional<InvertedIndex> sparse_index;
    if (!sparse.empty()) {
        sparse_index = build_sparse_index(load_sparse_vectors(sparse));
        std::cout << "sparse index: docs=" << sparse_index->doc_count() << " terms=" << sparse_index->term_count()
                  << " postings=" << sparse_index->total_postings() << '\n';
    }
    auto print = [](const RankedList& list) {
        for (std::size_t i = 0; i < list.items.size(); ++i) {
            std::cout << (i + 1) << '\t' << list.items[i].doc_id << '\t' << format_score(list.items[i].score) << '\n';
        }
    };
    if (!query.empty()) print(bm25_retrieve(bm25, query, k, {k1, b}));
    if (!sparse_query.empty()) {
        if (!sparse_index) throw ConfigError("--sparse-query needs --sparse");
        std::istringstream line("q\t" + sparse_query);
        auto vecs = read_sparse_vectors(line);
        print(sparse_retrieve(*sparse_index, vecs.at("q"), k));
    }
    return 0;
}

std::vector<TurnResult> execute_config(PipelineConfig config, std::size_t threads, Workspace** ws_out = nullptr,
                                       std::unique_ptr<Workspace>* holder = nullptr) {
    if (threads > 0) config.run.threads = threads;
    auto ws = open_workspace(std::move(config));
    Pipeline pipeline(ws->config.run, ws->resources());
    auto results = pipeline.execute_run(ws->topics);
    if (ws_out) *ws_out = ws.get();
    if (holder) *holder = std::move(ws);
    return results;
}

int cmd_run(const std::string& config_path, const LlmOverrides& llm, const std::string& run_out,
            const std::string& responses_out, std::size_t threads) {
    auto config = load_pipeline_config(config_path);
    llm.apply(config);
    auto tag = config.run.run_tag;
    fs::path run_path = run_out.empty() ? config.paths.run_out : fs::path(run_out);
    fs::path resp_path = responses_out.empty() ? config.paths.responses_out : fs::path(responses_out);
    auto start = std::chrono::steady_clock::now();
    std::unique_ptr<Workspace> ws;
    auto results = execute_config(std::move(config), threads, nullptr, &ws);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (run_path.empty()) {
        write_trec_run(results, tag, std::cout);
    } else {
        write_atomically(run_path, [&](std::ostream& out) { write_trec_run(results, tag, out); });
    }
    if (!resp_path.empty()) write_atomically(resp_path, [&](std::ostream& out) { write_responses(results, out); });
    auto stats = ws->llm->stats();
    std::cerr << tag << ": " << results.size() << " turns in " << secs << " s (llm " << to_string(ws->llm->mode())
              << ", network calls " << stats.network_calls << ", cache hits " << stats.cache_hits << ")\n";
    return 0;
}

int cmd_cache(bool record, const std::vector<std::string>& configs, LlmOverrides llm, std::size_t threads) {
    llm.mode = record ? "record" : "replay";
    int failures = 0;
    for (const auto& path : configs) {
        auto config = load_pipeline_config(path);
        llm.apply(config);
        try {
            std::unique_ptr<Workspace> ws;
            auto results = execute_config(std::move(config), threads, nullptr, &ws);
            auto stats = ws->llm->stats();
            std::cout << path << ": " << results.size() << " turns, network calls " << stats.network_calls
                      << ", cache hits " << stats.cache_hits << ", cache size " << ws->cache->size() << '\n';
        } catch (const TurnError& e) {
            ++failures;
            std::cout << path << ": FAILED " << e.what() << '\n';
        }
    }
    return failures == 0 ? 0 : 1;
}

int cmd_evaluate(const std::string& run_path, const std::string& qrels_path, bool per_depth, bool per_topic,
                 const std::string& json_out, EvalOptions options) {
    auto run = load_run(run_path);
    auto qrels = load_qrels(qrels_path);
    auto report = evaluate_run(run, qrels, options);
    std::cout << format_summary(report);
    if (per_depth) std::cout << '\n' << format_per_depth(report);
    if (per_topic) std::cout << '\n' << format_per_topic(report);
    if (!report.excluded_not_in_qrels.empty()) {
        std::cerr << "excluded (no judgments): " << report.excluded_not_in_qrels.size() << '\n';
    }
    if (!report.flagged_no_relevant.empty()) {
        std::cerr << "flagged (no relevant judged docs):";
        for (const auto& q : report.flagged_no_relevant) std::cerr << ' ' << q;
        std::cerr << '\n';
    }
    if (!json_out.empty()) {
        write_atomically(json_out, [&](std::ostream& out) { out << report_to_json(report).dump(2) << '\n'; });
    }
    return 0;
}

int cmd_fuse(const std::string& method, const std::vector<std::string>& runs, const std::string& out_path,
             const std::string& tag, std::size_t depth) {
    std::vector<std::map<std::string, RankedList>> inputs;
    std::set<std::string> qids;
    for (const auto& r : runs) {
        inputs.push_back(load_run(r));
        for (const auto& [q, l] : inputs.back()) qids.insert(q);
    }
    std::vector<TurnResult> fused;
    for (const auto& qid : qids) {
        std::vector<RankedList> lists;
        for (const auto& in : inputs) {
            auto it = in.find(qid);
            lists.push_back(it == in.end() ? RankedList{qid, {}} : it->second);
        }
        RankedList out;
        if (method == "ensemble") {
            out = ensemble_fuse(lists);
        } else if (method == "interleave") {
            out = interleave(lists);
        } else {
            out.query_id = qid;
            for (const auto& doc : pool_candidates(lists, depth)) {
                out.items.push_back({doc, 1.0 / static_cast<double>(out.items.size() + 1)});
            }
        }
        if (method != "pool" && out.items.size() > depth) out.items.resize(depth);
        TurnResult r;
        r.turn_id = qid;
        r.ranking = std::move(out);
        fused.push_back(std::move(r));
    }
    if (out_path.empty()) {
        write_trec_run(fused, tag, std::cout);
    } else {
        write_atomically(out_path, [&](std::ostream& o) { write_trec_run(fused, tag, o); });
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conversational passage ranking: multi-query retrieval, fusion, reranking and evaluation"};
    app.require_subcommand(1);

    auto* index = app.add_subcommand("index", "Build indexes from a corpus and optionally query them");
    std::string corpus, sparse, query, sparse_query;
    std::size_t k = 10;
    double k1 = 0.9, b = 0.4;
    index->add_option("--corpus", corpus, "passage file: <doc_id>\\t<text>")->required()->check(CLI::ExistingFile);
    index->add_option("--sparse", sparse, "sparse vector file")->check(CLI::ExistingFile);
    index->add_option("--query", query, "BM25 text query");
    index->add_option("--sparse-query", sparse_query, "sparse query as 'term:weight term:weight'");
    index->add_option("-k", k, "result depth")->check(CLI::PositiveNumber);
    index->add_option("--k1", k1, "BM25 k1");
    index->add_option("--b", b, "BM25 b");

    auto* run = app.add_subcommand("run", "Execute a run configuration");
    std::string config_path, run_out, responses_out;
    std::size_t threads = 0;
    LlmOverrides run_llm;
    run->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--run-out", run_out, "TREC run output (overrides config)");
    run->add_option("--responses-out", responses_out, "response records output (overrides config)");
    run->add_option("--threads", threads, "worker threads (overrides config)");
    run_llm.add_to(run);

    auto* evaluate = app.add_subcommand("evaluate", "Score a TREC run against qrels");
    std::string run_path, qrels_path, json_out;
    bool per_depth = false, per_topic = false;
    EvalOptions eval_options;
    std::string gain = "linear";
    evaluate->add_option("--run", run_path, "TREC run file")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--qrels", qrels_path, "TREC qrels file")->required()->check(CLI::ExistingFile);
    evaluate->add_flag("--per-depth", per_depth, "per turn-number slice");
    evaluate->add_flag("--per-topic", per_topic, "per topic slice");
    evaluate->add_option("--json", json_out, "structured report output");
    evaluate->add_option("--threshold", eval_options.threshold, "minimum grade counted relevant for MRR/P/R/mAP");
    evaluate->add_option("--ndcg-cutoff", eval_options.ndcg_cutoff)->check(CLI::PositiveNumber);
    evaluate->add_option("--recall-cutoff", eval_options.recall_cutoff)->check(CLI::PositiveNumber);
    evaluate->add_option("--precision-cutoff", eval_options.precision_cutoff)->check(CLI::PositiveNumber);
    evaluate->add_option("--gain", gain, "nDCG gain")->check(CLI::IsMember({"linear", "exponential"}));

    auto* fuse = app.add_subcommand("fuse", "Combine TREC run files per query");
    std::string method = "ensemble", fuse_out, tag = "fused";
    std::vector<std::string> fuse_runs;
    std::size_t fuse_depth = 1000;
    fuse->add_option("--method", method, "ensemble, interleave or pool")->check(CLI::IsMember({"ensemble", "interleave", "pool"}));
    fuse->add_option("--run", fuse_runs, "input run file (repeat)")->required()->check(CLI::ExistingFile);
    fuse->add_option("--out", fuse_out, "output run file (default stdout)");
    fuse->add_option("--tag", tag, "run tag");
    fuse->add_option("--depth", fuse_depth, "output depth; per-list depth for pool")->check(CLI::PositiveNumber);

    auto* cache = app.add_subcommand("cache", "Populate or verify an LLM exchange cache");
    cache->require_subcommand(1);
    std::vector<std::string> cache_configs;
    LlmOverrides cache_llm;
    std::size_t cache_threads = 0;
    auto* record = cache->add_subcommand("record", "Run configs in record mode, storing every exchange");
    auto* replay = cache->add_subcommand("replay", "Run configs in replay mode, failing on any cache miss");
    for (auto* sub : {record, replay}) {
        sub->add_option("--config", cache_configs, "run configuration (repeat)")->required()->check(CLI::ExistingFile);
        sub->add_option("--model-id", cache_llm.model_id);
        sub->add_option("--cache-dir", cache_llm.cache_dir);
        sub->add_option("--threads", cache_threads);
    }
    record->add_option("--llm-provider", cache_llm.provider)->check(CLI::IsMember({"openai", "offline"}));

    CLI11_PARSE(app, argc, argv);
    try {
        if (*index) return cmd_index(corpus, sparse, query, sparse_query, k, k1, b);
        if (*run) return cmd_run(config_path, run_llm, run_out, responses_out, threads);
        if (*evaluate) {
            eval_options.gain = gain == "linear" ? Gain::linear : Gain::exponential;
            return cmd_evaluate(run_path, qrels_path, per_depth, per_topic, json_out, eval_options);
        }
        if (*fuse) return cmd_fuse(method, fuse_runs, fuse_out, tag, fuse_depth);
        if (*record) return cmd_cache(true, cache_configs, cache_llm, cache_threads);
        if (*replay) return cmd_cache(false, cache_configs, cache_llm, cache_threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
