#pragma once

// Brute-force reference implementations. They share no code with the library
// beyond its plain data types, so agreement is meaningful.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "convsearch/types.hpp"

namespace oracle {

using Ranking = std::vector<std::pair<std::string, double>>;  // best first

inline std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline Ranking order(std::vector<std::pair<std::string, double>> scored, std::size_t k) {
    std::erase_if(scored, [](const auto& p) { return !(p.second > 0.0); });
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

/// Full-scan BM25 with IDF = ln(1 + (N - df + 0.5) / (df + 0.5)).
inline Ranking bm25(const std::vector<convsearch::Passage>& docs, const std::string& query, std::size_t k,
                    double k1 = 0.9, double b = 0.4) {
    std::vector<std::vector<std::string>> toks;
    double total_len = 0;
    for (const auto& d : docs) {
        toks.push_back(words(d.text));
        total_len += static_cast<double>(toks.back().size());
    }
    double n = static_cast<double>(docs.size());
    double avgdl = docs.empty() ? 0.0 : total_len / n;
    std::map<std::string, int> qtf;
    for (const auto& w : words(query)) ++qtf[w];
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double s = 0.0;
        for (const auto& [term, count] : qtf) {
            double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), term));
            if (tf == 0) continue;
            double df = 0;
            for (const auto& t : toks) df += std::find(t.begin(), t.end(), term) != t.end() ? 1 : 0;
            double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            double dl = static_cast<double>(toks[i].size());
            s += count * (idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl)));
        }
        scored.emplace_back(docs[i].doc_id, s);
    }
    return order(std::move(scored), k);
}

/// Full-scan dot product.
inline Ranking dot(const std::map<std::string, std::map<std::string, double>>& docs,
                   const std::map<std::string, double>& query, std::size_t k) {
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& [id, vec] : docs) {
        double s = 0.0;
        for (const auto& [term, w] : query) {
            auto it = vec.find(term);
            if (it != vec.end()) s += w * it->second;
        }
        scored.emplace_back(id, s);
    }
    return order(std::move(scored), k);
}

// ---- metrics, straight from the definitions ----

using Qrel = std::map<std::string, int>;

inline int grade(const Qrel& q, const std::string& d) {
    auto it = q.find(d);
    return it == q.end() ? 0 : it->second;
}

inline double dcg(const std::vector<int>& gains, std::size_t k) {
    double s = 0;
    for (std::size_t i = 0; i < gains.size() && i < k; ++i) s += gains[i] / std::log2(static_cast<double>(i + 2));
    return s;
}

inline double ndcg(const std::vector<std::string>& ranking, const Qrel& q, std::size_t k) {
    if (k == 0) k = std::max<std::size_t>(ranking.size(), q.size()) + 1;
    std::vector<int> got;
    for (const auto& d : ranking) got.push_back(std::max(0, grade(q, d)));
    std::vector<int> ideal;
    for (const auto& [d, g] : q) ideal.push_back(std::max(0, g));
    std::sort(ideal.rbegin(), ideal.rend());
    double i = dcg(ideal, k);
    return i == 0 ? 0.0 : dcg(got, k) / i;
}

inline double rr(const std::vector<std::string>& ranking, const Qrel& q, int t) {
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (grade(q, ranking[i]) >= t) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

inline double hits_at(const std::vector<std::string>& ranking, const Qrel& q, std::size_t k, int t) {
    double h = 0;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) h += grade(q, ranking[i]) >= t;
    return h;
}

inline double total_rel(const Qrel& q, int t) {
    double n = 0;
    for (const auto& [d, g] : q) n += g >= t;
    return n;
}

inline double precision(const std::vector<std::string>& r, const Qrel& q, std::size_t k, int t) {
    return hits_at(r, q, k, t) / static_cast<double>(k);
}

inline double recall(const std::vector<std::string>& r, const Qrel& q, std::size_t k, int t) {
    double n = total_rel(q, t);
    return n == 0 ? 0.0 : hits_at(r, q, k, t) / n;
}

inline double ap(const std::vector<std::string>& r, const Qrel& q, int t) {
    double n = total_rel(q, t);
    if (n == 0) return 0.0;
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (grade(q, r[i]) >= t) s += hits_at(r, q, i + 1, t) / static_cast<double>(i + 1);
    }
    return s / n;
}

// ---- random instance generators ----

inline std::vector<std::string> vocabulary(std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back("w" + std::to_string(i));
    return v;
}

inline std::vector<convsearch::Passage> random_corpus(std::mt19937_64& rng, std::size_t max_docs,
                                                      std::size_t vocab = 30) {
    auto words = vocabulary(vocab);
    std::uniform_int_distribution<std::size_t> n_docs(1, max_docs), len(1, 15), word(0, vocab - 1);
    std::vector<convsearch::Passage> docs;
    std::size_t n = n_docs(rng);
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        for (std::size_t j = 0, l = len(rng); j < l; ++j) text += (j ? " " : "") + words[word(rng)];
        docs.push_back({"d" + std::to_string(i), text});
    }
    std::shuffle(docs.begin(), docs.end(), rng);
    return docs;
}

inline std::string random_query(std::mt19937_64& rng, std::size_t vocab = 30) {
    auto words = vocabulary(vocab + 5);  // a few terms never in the corpus
    std::uniform_int_distribution<std::size_t> len(1, 4), word(0, vocab + 4);
    std::string q;
    for (std::size_t j = 0, l = len(rng); j < l; ++j) q += (j ? " " : "") + words[word(rng)];
    return q;
}

struct EvalInstance {
    std::vector<std::string> ranking;
    Qrel qrel;
};

// Up to `max_docs` ranked ids and `max_judged` graded judgments (0..3), drawn
// from overlapping id pools so some judged docs are never retrieved.
inline EvalInstance random_eval_instance(std::mt19937_64& rng, std::size_t max_docs = 50,
                                         std::size_t max_judged = 10) {
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < max_docs + max_judged; ++i) pool.push_back("p" + std::to_string(i));
    EvalInstance inst;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uniform_int_distribution<std::size_t> n_docs(0, max_docs), n_judged(0, max_judged);
    inst.ranking.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_docs(rng)));
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uniform_int_distribution<int> g(0, 3);
    for (std::size_t i = 0, n = n_judged(rng); i < n; ++i) inst.qrel[pool[i]] = g(rng);
    return inst;
}

inline std::map<std::string, std::map<std::string, double>> random_sparse_docs(std::mt19937_64& rng,
                                                                                 std::size_t max_docs,
                                                                                 std::size_t vocab = 30) {
    auto words = vocabulary(vocab);
    std::uniform_int_distribution<std::size_t> n_docs(1, max_docs), n_terms(1, 10), word(0, vocab - 1);
    std::uniform_real_distribution<double> w(0.01, 5.0);
    std::map<std::string, std::map<std::string, double>> docs;
    for (std::size_t i = 0, n = n_docs(rng); i < n; ++i) {
        auto& vec = docs["d" + std::to_string(i)];
        for (std::size_t j = 0, t = n_terms(rng); j < t; ++j) vec[words[word(rng)]] = w(rng);
    }
    return docs;
}

inline std::map<std::string, double> random_sparse_query(std::mt19937_64& rng, std::size_t vocab = 30) {
    auto words = vocabulary(vocab + 5);
    std::uniform_int_distribution<std::size_t> n_terms(1, 6), word(0, vocab + 4);
    std::uniform_real_distribution<double> w(0.01, 3.0);
    std::map<std::string, double> q;
    for (std::size_t j = 0, t = n_terms(rng); j < t; ++j) q[words[word(rng)]] = w(rng);
    return q;
}

}  // namespace oracle
