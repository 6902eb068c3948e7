#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "convsearch/corpus.hpp"
#include "convsearch/error.hpp"
#include "convsearch/types.hpp"

namespace convsearch {

using Judgments = std::map<std::string, int, std::less<>>;

class Qrels {
public:
    /// Throws ParseError on a duplicate (query, doc) pair.
    void add(const std::string& query_id, const std::string& doc_id, int relevance, std::size_t line = 0) {
        if (relevance < 0) throw ParseError("negative relevance", line);
        auto& j = judgments_[query_id];
        if (!j.emplace(doc_id, relevance).second) {
            throw ParseError("duplicate judgment for (" + query_id + ", " + doc_id + ")", line);
        }
    }

    const Judgments* find(std::string_view query_id) const {
        auto it = judgments_.find(query_id);
        return it == judgments_.end() ? nullptr : &it->second;
    }

    std::optional<int> relevance(std::string_view query_id, std::string_view doc_id) const {
        const auto* j = find(query_id);
        if (!j) return std::nullopt;
        auto it = j->find(doc_id);
        if (it == j->end()) return std::nullopt;
        return it->second;
    }

    bool empty() const noexcept { return judgments_.empty(); }
    std::size_t query_count() const noexcept { return judgments_.size(); }
    const std::map<std::string, Judgments, std::less<>>& queries() const noexcept { return judgments_; }

private:
    std::map<std::string, Judgments, std::less<>> judgments_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> fields;
    std::string f;
    while (in >> f) fields.push_back(f);
    return fields;
}

inline int parse_grade(const std::string& text, std::size_t line_no) {
    std::size_t pos = 0;
    int value = 0;
    try {
        value = std::stoi(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty()) throw ParseError("malformed relevance '" + text + "'", line_no);
    if (value < 0) throw ParseError("negative relevance '" + text + "'", line_no);
    return value;
}

}  // namespace detail

/// TREC qrels: `<query_id> <iteration> <doc_id> <relevance>` per line.
inline Qrels read_qrels(std::istream& in) {
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto f = detail::split_ws(line);
        if (f.empty()) continue;
        if (f.size() != 4) throw ParseError("expected 4 fields, got " + std::to_string(f.size()), line_no);
        qrels.add(f[0], f[2], detail::parse_grade(f[3], line_no), line_no);
    }
    return qrels;
}

inline Qrels load_qrels(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_qrels(in);
}

/// TREC run: `<query_id> Q0 <doc_id> <rank> <score> <tag>`. Each query's list is
/// re-sorted by score (desc), doc_id (asc); the rank column is not trusted.
inline std::map<std::string, RankedList> read_run(std::istream& in) {
    std::map<std::string, RankedList> run;
    std::map<std::string, std::set<std::string>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto f = detail::split_ws(line);
        if (f.empty()) continue;
        if (f.size() != 6) throw ParseError("expected 6 fields, got " + std::to_string(f.size()), line_no);
        double score = detail::parse_double(f[4], line_no, "score");
        if (!seen[f[0]].insert(f[2]).second) {
            throw ParseError("duplicate doc '" + f[2] + "' for query '" + f[0] + "'", line_no);
        }
        auto& list = run[f[0]];
        list.query_id = f[0];
        list.items.push_back({f[2], score});
    }
    for (auto& [qid, list] : run) sort_ranked(list.items);
    return run;
}

inline std::map<std::string, RankedList> load_run(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_run(in);
}

enum class Gain { linear, exponential };

/// k == 0 means no cutoff. Linear gain rel / log2(i + 1) by default.
inline double ndcg_at_k(const RankedList& ranking, const Judgments& judgments, std::size_t k = 0,
                        Gain gain = Gain::linear) {
    auto g = [gain](int rel) { return gain == Gain::linear ? static_cast<double>(rel) : std::exp2(rel) - 1.0; };
    std::size_t depth = k == 0 ? ranking.items.size() : std::min(k, ranking.items.size());
    double dcg = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
        auto it = judgments.find(ranking.items[i].doc_id);
        if (it != judgments.end() && it->second > 0) dcg += g(it->second) / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> ideal;
    for (const auto& [doc, rel] : judgments) {
        if (rel > 0) ideal.push_back(rel);
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    std::size_t ideal_depth = k == 0 ? ideal.size() : std::min(k, ideal.size());
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal_depth; ++i) idcg += g(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

inline bool is_relevant(const Judgments& judgments, std::string_view doc, int threshold) {
    auto it = judgments.find(doc);
    return it != judgments.end() && it->second >= threshold;
}

inline std::size_t relevant_count(const Judgments& judgments, int threshold) {
    return static_cast<std::size_t>(
        std::count_if(judgments.begin(), judgments.end(), [&](const auto& kv) { return kv.second >= threshold; }));
}

inline double reciprocal_rank(const RankedList& ranking, const Judgments& judgments, int threshold = 1) {
    for (std::size_t i = 0; i < ranking.items.size(); ++i) {
        if (is_relevant(judgments, ranking.items[i].doc_id, threshold)) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

/// Denominator is k even when fewer than k docs were retrieved.
inline double precision_at_k(const RankedList& ranking, const Judgments& judgments, std::size_t k, int threshold = 1) {
    if (k == 0) throw InvalidArgument("k must be positive");
    std::size_t depth = std::min(k, ranking.items.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < depth; ++i) hits += is_relevant(judgments, ranking.items[i].doc_id, threshold);
    return static_cast<double>(hits) / static_cast<double>(k);
}

inline double recall_at_k(const RankedList& ranking, const Judgments& judgments, std::size_t k, int threshold = 1) {
    if (k == 0) throw InvalidArgument("k must be positive");
    auto total = relevant_count(judgments, threshold);
    if (total == 0) return 0.0;
    std::size_t depth = std::min(k, ranking.items.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < depth; ++i) hits += is_relevant(judgments, ranking.items[i].doc_id, threshold);
    return static_cast<double>(hits) / static_cast<double>(total);
}

inline double average_precision(const RankedList& ranking, const Judgments& judgments, int threshold = 1) {
    auto total = relevant_count(judgments, threshold);
    if (total == 0) return 0.0;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.items.size(); ++i) {
        if (is_relevant(judgments, ranking.items[i].doc_id, threshold)) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(total);
}

struct EvalOptions {
    std::size_t ndcg_cutoff = 5;
    std::size_t recall_cutoff = 100;
    std::size_t precision_cutoff = 20;
    int threshold = 1;
    Gain gain = Gain::linear;
    char turn_separator = '_';
};

struct TurnKey {
    std::string topic_id;
    int turn_number = 0;
};

/// Splits "<topic><sep><turn>" at the last separator.
inline TurnKey parse_turn_id(std::string_view query_id, char separator = '_') {
    auto pos = query_id.rfind(separator);
    auto bad = [&] { return InvalidArgument("query id '" + std::string(query_id) + "' is not <topic>" + separator + "<turn>"); };
    if (pos == std::string_view::npos || pos == 0 || pos + 1 == query_id.size()) throw bad();
    auto turn = query_id.substr(pos + 1);
    if (!std::all_of(turn.begin(), turn.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) throw bad();
    return {std::string(query_id.substr(0, pos)), std::stoi(std::string(turn))};
}

using MetricRow = std::map<std::string, double>;

struct SliceRow {
    std::size_t queries = 0;
    MetricRow means;
};

struct MetricReport {
    std::vector<std::string> metrics;  // column order
    std::map<std::string, MetricRow> per_query;
    MetricRow aggregate;
    std::map<int, SliceRow> per_depth;
    std::map<std::string, SliceRow> per_topic;
    std::vector<std::string> excluded_not_in_qrels;
    std::vector<std::string> flagged_no_relevant;
    std::vector<std::string> missing_from_run;
};

inline std::vector<std::string> metric_names(const EvalOptions& o) {
    return {"nDCG@" + std::to_string(o.ndcg_cutoff), "nDCG", "MRR", "Recall@" + std::to_string(o.recall_cutoff),
            "P@" + std::to_string(o.precision_cutoff), "mAP"};
}

inline MetricRow evaluate_query(const RankedList& ranking, const Judgments& judgments, const EvalOptions& o) {
    auto names = metric_names(o);
    return {{names[0], ndcg_at_k(ranking, judgments, o.ndcg_cutoff, o.gain)},
            {names[1], ndcg_at_k(ranking, judgments, 0, o.gain)},
            {names[2], reciprocal_rank(ranking, judgments, o.threshold)},
            {names[3], recall_at_k(ranking, judgments, o.recall_cutoff, o.threshold)},
            {names[4], precision_at_k(ranking, judgments, o.precision_cutoff, o.threshold)},
            {names[5], average_precision(ranking, judgments, o.threshold)}};
}

/// Per-query metrics for every run query that has judgments, their means, and
/// slices keyed by turn number and by topic.
inline MetricReport evaluate_run(const std::map<std::string, RankedList>& run, const Qrels& qrels,
                                 const EvalOptions& options = {}) {
    MetricReport report;
    report.metrics = metric_names(options);
    std::map<int, std::vector<const MetricRow*>> by_depth;
    std::map<std::string, std::vector<const MetricRow*>> by_topic;
    std::vector<std::pair<TurnKey, std::string>> keys;
    for (const auto& [qid, ranking] : run) keys.emplace_back(parse_turn_id(qid, options.turn_separator), qid);

    for (const auto& [key, qid] : keys) {
        const Judgments* j = qrels.find(qid);
        if (!j) {
            report.excluded_not_in_qrels.push_back(qid);
            continue;
        }
        if (relevant_count(*j, std::max(options.threshold, 1)) == 0) report.flagged_no_relevant.push_back(qid);
        auto& row = report.per_query[qid] = evaluate_query(run.at(qid), *j, options);
        by_depth[key.turn_number].push_back(&row);
        by_topic[key.topic_id].push_back(&row);
    }
    for (const auto& [qid, j] : qrels.queries()) {
        if (!run.contains(qid)) report.missing_from_run.push_back(qid);
    }

    auto mean_of = [&](const std::vector<const MetricRow*>& rows) {
        MetricRow m;
        for (const auto& name : report.metrics) {
            double s = 0.0;
            for (const auto* r : rows) s += r->at(name);
            m[name] = rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
        }
        return m;
    };
    std::vector<const MetricRow*> all;
    for (const auto& [qid, row] : report.per_query) all.push_back(&row);
    report.aggregate = mean_of(all);
    for (const auto& [depth, rows] : by_depth) report.per_depth[depth] = {rows.size(), mean_of(rows)};
    for (const auto& [topic, rows] : by_topic) report.per_topic[topic] = {rows.size(), mean_of(rows)};
    return report;
}

namespace detail {

inline std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::string render_rows(const std::vector<std::string>& metrics, const std::string& key_header,
                               const std::vector<std::pair<std::string, std::pair<std::size_t, const MetricRow*>>>& rows) {
    std::vector<std::string> header = {key_header, "n"};
    header.insert(header.end(), metrics.begin(), metrics.end());
    std::vector<std::vector<std::string>> cells = {header};
    for (const auto& [key, v] : rows) {
        std::vector<std::string> r = {key, std::to_string(v.first)};
        for (const auto& m : metrics) r.push_back(fmt4(v.second->at(m)));
        cells.push_back(std::move(r));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& r : cells) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::string out;
    for (const auto& r : cells) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c) out += "  ";
            out += c == 0 ? r[c] + std::string(width[c] - r[c].size(), ' ') : std::string(width[c] - r[c].size(), ' ') + r[c];
        }
        out += '\n';
    }
    return out;
}

}  // namespace detail

inline std::string format_summary(const MetricReport& r) {
    return detail::render_rows(r.metrics, "run", {{"all", {r.per_query.size(), &r.aggregate}}});
}

inline std::string format_per_depth(const MetricReport& r) {
    std::vector<std::pair<std::string, std::pair<std::size_t, const MetricRow*>>> rows;
    for (const auto& [d, s] : r.per_depth) rows.push_back({std::to_string(d), {s.queries, &s.means}});
    return detail::render_rows(r.metrics, "turn", rows);
}

inline std::string format_per_topic(const MetricReport& r) {
    std::vector<std::pair<std::string, std::pair<std::size_t, const MetricRow*>>> rows;
    for (const auto& [t, s] : r.per_topic) rows.push_back({t, {s.queries, &s.means}});
    return detail::render_rows(r.metrics, "topic", rows);
}

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
    auto row_json = [&](const MetricRow& row) {
        nlohmann::ordered_json j;
        for (const auto& m : r.metrics) j[m] = row.at(m);
        return j;
    };
    nlohmann::ordered_json j;
    j["metrics"] = r.metrics;
    j["aggregate"] = row_json(r.aggregate);
    j["queries_evaluated"] = r.per_query.size();
    nlohmann::ordered_json pq = nlohmann::ordered_json::object();
    for (const auto& [q, row] : r.per_query) pq[q] = row_json(row);
    j["per_query"] = pq;
    nlohmann::ordered_json depth = nlohmann::ordered_json::array();
    for (const auto& [d, s] : r.per_depth) depth.push_back({{"turn", d}, {"queries", s.queries}, {"means", row_json(s.means)}});
    j["per_depth"] = depth;
    nlohmann::ordered_json topic = nlohmann::ordered_json::array();
    for (const auto& [t, s] : r.per_topic) topic.push_back({{"topic", t}, {"queries", s.queries}, {"means", row_json(s.means)}});
    j["per_topic"] = topic;
    j["excluded_not_in_qrels"] = r.excluded_not_in_qrels;
    j["flagged_no_relevant"] = r.flagged_no_relevant;
    j["missing_from_run"] = r.missing_from_run;
    return j;
}

}  // namespace convsearch
