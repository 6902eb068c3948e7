#include <gtest/gtest.h>

#include <sstream>

#include "convsearch/eval.hpp"
#include "oracles.hpp"

using namespace convsearch;

namespace {

RankedList ranked(std::vector<std::string> ids, std::string qid = "q") {
    RankedList l{std::move(qid), {}};
    double s = static_cast<double>(ids.size());
    for (auto& id : ids) l.items.push_back({id, s--});
    return l;
}

Judgments judged(std::initializer_list<std::pair<const char*, int>> j) {
    Judgments out;
    for (auto& [d, r] : j) out[d] = r;
    return out;
}

std::vector<std::string> ids(std::string prefix, int n, int from = 0) {
    std::vector<std::string> out;
    for (int i = from; i < from + n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

}  // namespace

TEST(Ndcg, WorkedExample) {
    auto q = judged({{"A", 2}, {"B", 1}});
    // the quoted 0.66968 sits 8e-6 above the exact quotient 0.669672
    EXPECT_NEAR(ndcg_at_k(ranked({"C", "A", "B"}), q, 3), 0.66968, 1e-5);
    double dcg = 2.0 / std::log2(3.0) + 0.5;
    double idcg = 2.0 + 1.0 / std::log2(3.0);
    EXPECT_NEAR(dcg, 1.76186, 5e-6);
    EXPECT_NEAR(idcg, 2.63093, 5e-6);
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"C", "A", "B"}), q, 3), dcg / idcg);
}

TEST(Ndcg, IdealAndEmpty) {
    auto q = judged({{"A", 3}, {"B", 2}, {"C", 1}, {"D", 0}});
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"A", "B", "C"}), q), 1.0);
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"A", "B", "C"}), q, 2), 1.0);
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"X", "D"}), q), 0.0);
    EXPECT_DOUBLE_EQ(ndcg_at_k(ranked({"A"}), judged({{"A", 0}})), 0.0);
    EXPECT_GT(ndcg_at_k(ranked({"B", "A"}), q, 0, Gain::exponential), 0.0);
}

TEST(ReciprocalRank, Examples) {
    auto q = judged({{"R", 1}, {"S", 2}});
    EXPECT_DOUBLE_EQ(reciprocal_rank(ranked({"R", "x"}), q), 1.0);
    EXPECT_DOUBLE_EQ(reciprocal_rank(ranked({"a", "b", "c", "R"}), q), 0.25);
    EXPECT_DOUBLE_EQ(reciprocal_rank(ranked({"a", "b"}), q), 0.0);
    EXPECT_DOUBLE_EQ(reciprocal_rank(ranked({"R", "S"}), q, 2), 0.5);
}

TEST(PrecisionRecall, Examples) {
    Judgments q;
    for (auto& d : ids("r", 10)) q[d] = 1;
    auto twenty = ids("r", 5);
    for (auto& d : ids("n", 15)) twenty.push_back(d);
    EXPECT_DOUBLE_EQ(precision_at_k(ranked(twenty), q, 20), 0.25);

    auto hundred = ids("r", 4);
    for (auto& d : ids("n", 96)) hundred.push_back(d);
    EXPECT_DOUBLE_EQ(recall_at_k(ranked(hundred), q, 100), 0.4);

    EXPECT_DOUBLE_EQ(precision_at_k(ranked({"r0", "n0", "r1"}), q, 20), 0.1);
    EXPECT_DOUBLE_EQ(recall_at_k(ranked({"r0"}), Judgments{}, 100), 0.0);
    EXPECT_THROW(precision_at_k(ranked({}), q, 0), InvalidArgument);
}

TEST(AveragePrecision, Examples) {
    auto q = judged({{"A", 1}, {"B", 1}});
    EXPECT_NEAR(average_precision(ranked({"A", "x", "B"}), q), 0.83333, 5e-6);
    EXPECT_DOUBLE_EQ(average_precision(ranked({"A", "x", "B"}), q), (1.0 + 2.0 / 3.0) / 2.0);
    EXPECT_DOUBLE_EQ(average_precision(ranked({"B", "A", "x"}), q), 1.0);
    EXPECT_DOUBLE_EQ(average_precision(ranked({"A"}), q), 0.5);
    EXPECT_DOUBLE_EQ(average_precision(ranked({"A"}), Judgments{}), 0.0);
}

TEST(Metrics, AgreeWithOracleOnRandomInstances) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        auto inst = oracle::random_eval_instance(rng);
        auto r = ranked(inst.ranking);
        Judgments j(inst.qrel.begin(), inst.qrel.end());
        for (int t : {1, 2}) {
            EXPECT_NEAR(reciprocal_rank(r, j, t), oracle::rr(inst.ranking, inst.qrel, t), 1e-12);
            EXPECT_NEAR(precision_at_k(r, j, 20, t), oracle::precision(inst.ranking, inst.qrel, 20, t), 1e-12);
            EXPECT_NEAR(recall_at_k(r, j, 100, t), oracle::recall(inst.ranking, inst.qrel, 100, t), 1e-12);
            EXPECT_NEAR(average_precision(r, j, t), oracle::ap(inst.ranking, inst.qrel, t), 1e-12);
        }
        for (std::size_t k : {0u, 1u, 3u, 5u, 10u, 1000u}) {
            EXPECT_NEAR(ndcg_at_k(r, j, k), oracle::ndcg(inst.ranking, inst.qrel, k), 1e-12) << "k=" << k;
        }
    }
}

TEST(Metrics, BoundsAndMonotoneRecall) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        auto inst = oracle::random_eval_instance(rng);
        auto r = ranked(inst.ranking);
        Judgments j(inst.qrel.begin(), inst.qrel.end());
        EvalOptions o;
        for (const auto& [name, v] : evaluate_query(r, j, o)) {
            EXPECT_GE(v, 0.0) << name;
            EXPECT_LE(v, 1.0 + 1e-12) << name;
        }
        double prev = 0.0;
        for (std::size_t k = 1; k <= 60; ++k) {
            double rk = recall_at_k(r, j, k);
            EXPECT_GE(rk, prev);
            prev = rk;
        }
    }
}

TEST(Metrics, IdealRankingIsPerfect) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        auto inst = oracle::random_eval_instance(rng);
        std::vector<std::pair<std::string, int>> rel;
        for (auto& [d, g] : inst.qrel) {
            if (g > 0) rel.emplace_back(d, g);
        }
        if (rel.empty()) continue;
        std::stable_sort(rel.begin(), rel.end(), [](auto& a, auto& b) { return a.second > b.second; });
        std::vector<std::string> ideal;
        for (auto& [d, g] : rel) ideal.push_back(d);
        Judgments j(inst.qrel.begin(), inst.qrel.end());
        EXPECT_DOUBLE_EQ(ndcg_at_k(ranked(ideal), j), 1.0);
        EXPECT_DOUBLE_EQ(average_precision(ranked(ideal), j), 1.0);
        EXPECT_DOUBLE_EQ(reciprocal_rank(ranked(ideal), j), 1.0);
    }
}

TEST(ReadQrels, Format) {
    std::istringstream in("t1_1 0 dA 2\n\nt1_1 0 dB 0\nt1_2 Q0 dA 1\n");
    auto q = read_qrels(in);
    EXPECT_EQ(q.relevance("t1_1", "dA"), 2);
    EXPECT_EQ(q.relevance("t1_1", "dB"), 0);
    EXPECT_EQ(q.relevance("t1_2", "dA"), 1);
    EXPECT_FALSE(q.relevance("t1_2", "dB"));
    EXPECT_EQ(q.query_count(), 2u);
    std::istringstream empty("");
    EXPECT_TRUE(read_qrels(empty).empty());
}

TEST(ReadQrels, ErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            read_qrels(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return std::size_t{0};
    };
    EXPECT_EQ(line_of("t1 0 a 1\nt1 0 a 2\n"), 2u);
    EXPECT_EQ(line_of("t1 0 a 1\n\nt1 0 b\n"), 3u);
    EXPECT_EQ(line_of("t1 0 a x\n"), 1u);
    EXPECT_EQ(line_of("t1 0 a -1\n"), 1u);
}

TEST(ReadRun, ResortsAndRejectsDuplicates) {
    std::istringstream in("q_1 Q0 b 1 0.5 tag\nq_1 Q0 a 2 0.9 tag\nq_1 Q0 c 3 0.5 tag\nq_2 Q0 z 1 1 tag\n");
    auto run = read_run(in);
    ASSERT_EQ(run.size(), 2u);
    EXPECT_EQ(run["q_1"].doc_ids(), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(run["q_1"].query_id, "q_1");
    std::istringstream dup("q Q0 a 1 1 t\nq Q0 a 2 0.5 t\n");
    EXPECT_THROW(read_run(dup), ParseError);
    std::istringstream bad("q Q0 a 1 notanumber t\n");
    EXPECT_THROW(read_run(bad), ParseError);
    std::istringstream short_line("q Q0 a 1\n");
    EXPECT_THROW(read_run(short_line), ParseError);
}

TEST(TurnIds, Parse) {
    auto k = parse_turn_id("1-1_3");
    EXPECT_EQ(k.topic_id, "1-1");
    EXPECT_EQ(k.turn_number, 3);
    auto k2 = parse_turn_id("a_b_12");
    EXPECT_EQ(k2.topic_id, "a_b");
    EXPECT_EQ(k2.turn_number, 12);
    EXPECT_THROW(parse_turn_id("nounderscore"), InvalidArgument);
    EXPECT_THROW(parse_turn_id("t_x"), InvalidArgument);
    EXPECT_EQ(parse_turn_id("t-4", '-').turn_number, 4);
}

TEST(EvaluateRun, AggregatesAndSlices) {
    Qrels qrels;
    qrels.add("A_1", "d1", 1);
    qrels.add("A_2", "d2", 2);
    qrels.add("B_1", "d3", 1);
    qrels.add("B_2", "d9", 0);  // judged, nothing relevant
    qrels.add("C_1", "d5", 1);  // not in run
    std::map<std::string, RankedList> run = {
        {"A_1", ranked({"d1", "x"}, "A_1")},
        {"A_2", ranked({"x", "d2"}, "A_2")},
        {"B_1", ranked({"x", "y", "z", "d3"}, "B_1")},
        {"B_2", ranked({"d9"}, "B_2")},
        {"Z_1", ranked({"d1"}, "Z_1")},  // no judgments
    };
    auto rep = evaluate_run(run, qrels);
    EXPECT_EQ(rep.metrics, (std::vector<std::string>{"nDCG@5", "nDCG", "MRR", "Recall@100", "P@20", "mAP"}));
    EXPECT_EQ(rep.per_query.size(), 4u);
    EXPECT_EQ(rep.flagged_no_relevant, (std::vector<std::string>{"B_2"}));
    EXPECT_EQ(rep.excluded_not_in_qrels, (std::vector<std::string>{"Z_1"}));
    EXPECT_EQ(rep.missing_from_run, (std::vector<std::string>{"C_1"}));
    EXPECT_DOUBLE_EQ(rep.aggregate.at("MRR"), (1.0 + 0.5 + 0.25 + 0.0) / 4.0);
    EXPECT_DOUBLE_EQ(rep.per_query.at("B_2").at("nDCG"), 0.0);

    ASSERT_EQ(rep.per_depth.size(), 2u);
    EXPECT_EQ(rep.per_depth.at(1).queries, 2u);
    EXPECT_DOUBLE_EQ(rep.per_depth.at(1).means.at("MRR"), (1.0 + 0.25) / 2.0);
    EXPECT_DOUBLE_EQ(rep.per_depth.at(2).means.at("MRR"), 0.25);
    ASSERT_EQ(rep.per_topic.size(), 2u);
    EXPECT_DOUBLE_EQ(rep.per_topic.at("A").means.at("MRR"), 0.75);
    EXPECT_DOUBLE_EQ(rep.per_topic.at("B").means.at("P@20"), (1.0 / 20.0) / 2.0);

    // aggregate is the mean of per-query values
    for (const auto& m : rep.metrics) {
        double sum = 0;
        for (const auto& [q, row] : rep.per_query) sum += row.at(m);
        EXPECT_NEAR(rep.aggregate.at(m), sum / 4.0, 1e-15) << m;
    }
}

TEST(EvaluateRun, CutoffsRenameColumns) {
    EvalOptions o;
    o.ndcg_cutoff = 3;
    o.recall_cutoff = 1000;
    o.precision_cutoff = 10;
    EXPECT_EQ(metric_names(o), (std::vector<std::string>{"nDCG@3", "nDCG", "MRR", "Recall@1000", "P@10", "mAP"}));
}

TEST(EvaluateRun, RejectsMalformedTurnIds) {
    Qrels qrels;
    qrels.add("weird", "d", 1);
    std::map<std::string, RankedList> run = {{"weird", ranked({"d"}, "weird")}};
    EXPECT_THROW(evaluate_run(run, qrels), InvalidArgument);
}

TEST(Report, TablesAndJson) {
    Qrels qrels;
    for (int t = 1; t <= 3; ++t) {
        qrels.add("A_" + std::to_string(t), "d1", 1);
        qrels.add("B_" + std::to_string(t), "d1", 1);
    }
    std::map<std::string, RankedList> run;
    for (const auto& [q, j] : qrels.queries()) run[q] = ranked({"d1"}, q);
    auto rep = evaluate_run(run, qrels);

    auto summary = format_summary(rep);
    EXPECT_NE(summary.find("nDCG@5"), std::string::npos);
    EXPECT_NE(summary.find("1.0000"), std::string::npos);
    auto depth = format_per_depth(rep);
    EXPECT_EQ(std::count(depth.begin(), depth.end(), '\n'), 4);  // header + 3 turns
    EXPECT_TRUE(depth.starts_with("turn"));
    auto topic = format_per_topic(rep);
    EXPECT_EQ(std::count(topic.begin(), topic.end(), '\n'), 3);

    auto j = report_to_json(rep);
    EXPECT_EQ(j["queries_evaluated"], 6);
    EXPECT_EQ(j["per_depth"].size(), 3u);
    EXPECT_EQ(j["per_topic"].size(), 2u);
    EXPECT_EQ(j["aggregate"].begin().key(), "nDCG@5");
    EXPECT_EQ(j["per_depth"][0]["turn"], 1);
}

TEST(Metrics, PromotingMoreRelevantDocNeverLowersNdcg) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        auto inst = oracle::random_eval_instance(rng);
        if (inst.ranking.size() < 2) continue;
        Judgments j(inst.qrel.begin(), inst.qrel.end());
        auto grade = [&](const std::string& d) { return j.contains(d) ? j.at(d) : 0; };
        std::size_t i = rng() % (inst.ranking.size() - 1);
        auto swapped = inst.ranking;
        if (grade(swapped[i]) >= grade(swapped[i + 1])) continue;
        std::swap(swapped[i], swapped[i + 1]);
        for (std::size_t k : {0u, 5u, 10u}) {
            EXPECT_GE(ndcg_at_k(ranked(swapped), j, k) + 1e-15, ndcg_at_k(ranked(inst.ranking), j, k));
        }
    }
}

TEST(Metrics, PrecisionTimesKIsAHitCount) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        auto inst = oracle::random_eval_instance(rng);
        Judgments j(inst.qrel.begin(), inst.qrel.end());
        for (std::size_t k : {1u, 5u, 20u, 100u}) {
            double hits = precision_at_k(ranked(inst.ranking), j, k) * static_cast<double>(k);
            EXPECT_NEAR(hits, std::round(hits), 1e-9);
            EXPECT_LE(std::round(hits), static_cast<double>(relevant_count(j, 1)));
        }
    }
}
