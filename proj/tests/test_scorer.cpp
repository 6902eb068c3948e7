#include <gtest/gtest.h>

#include <thread>

#include "convsearch/index.hpp"
#include "convsearch/scorer.hpp"

using namespace convsearch;

TEST(StubScorer, NumericSuffix) {
    EXPECT_EQ(StubScorer::suffix_value("d17"), 17);
    EXPECT_EQ(StubScorer::suffix_value("clueweb22-0001"), 1);
    EXPECT_EQ(StubScorer::suffix_value("x"), 0);
    std::vector<Passage> ps = {{"d2", ""}, {"d9", ""}};
    EXPECT_EQ(StubScorer().score("q", ps), (std::vector<double>{2, 9}));
}

TEST(LexicalScorer, VariantsAgreeOnObviousCases) {
    std::vector<Passage> ps = {{"a", "mountain bike trails near denver"}, {"b", "sushi in tokyo"}, {"c", ""}};
    for (auto v : {LexicalVariant::overlap, LexicalVariant::jaccard, LexicalVariant::log_tf, LexicalVariant::bigram}) {
        auto s = LexicalScorer(v).score("mountain bike trails", ps);
        ASSERT_EQ(s.size(), 3u);
        EXPECT_GT(s[0], s[1]);
        EXPECT_EQ(s[1], 0.0);
        EXPECT_EQ(s[2], 0.0);
    }
    EXPECT_DOUBLE_EQ(LexicalScorer(LexicalVariant::overlap).score("bike sushi", ps)[0], 0.5);
    EXPECT_THROW(LexicalScorer(LexicalVariant::bm25), ConfigError);
    EXPECT_THROW(parse_lexical_variant("electra"), ConfigError);
}

TEST(LexicalScorer, Bm25MatchesRetrieval) {
    std::vector<Passage> docs = {{"d1", "a a b"}, {"d2", "a c"}, {"d3", "c c"}};
    auto index = std::make_shared<const InvertedIndex>(build_index(docs));
    auto retrieved = bm25_retrieve(*index, "a c", 10);
    auto scores = LexicalScorer(LexicalVariant::bm25, index).score("a c", docs);
    for (const auto& item : retrieved.items) {
        auto i = static_cast<std::size_t>(item.doc_id[1] - '1');
        EXPECT_NEAR(scores[i], item.score, 1e-12) << item.doc_id;
    }
}

TEST(LexicalScorer, PureAndOrderPreserving) {
    std::vector<Passage> ps = {{"a", "x y"}, {"b", "y z"}, {"c", "x x z"}};
    LexicalScorer s(LexicalVariant::log_tf);
    auto full = s.score("x z", ps);
    std::vector<Passage> reversed(ps.rbegin(), ps.rend());
    auto rev = s.score("x z", reversed);
    for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(full[i], rev[ps.size() - 1 - i]);
}

TEST(RemoteScorer, BatchesAndAlignsScores) {
    httplib::Server server;
    std::vector<std::size_t> batch_sizes;
    std::mutex m;
    server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& p : body["passages"]) {
            scores.push_back(StubScorer::suffix_value(p["doc_id"].get<std::string>()) +
                             (body["query"] == "bonus" ? 0.5 : 0.0));
        }
        if (body["query"] == "short") scores.erase(0);
        {
            std::lock_guard lock(m);
            batch_sizes.push_back(body["passages"].size());
        }
        res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteScorer::Options opts;
    opts.url = "http://127.0.0.1:" + std::to_string(port) + "/score";
    opts.batch_size = 2;
    opts.timeout = std::chrono::seconds(5);
    RemoteScorer scorer(opts);
    std::vector<Passage> ps = {{"d3", "a"}, {"d1", "b"}, {"d7", "c"}, {"d4", "d"}, {"d9", "e"}};
    EXPECT_EQ(scorer.score("bonus", ps), (std::vector<double>{3.5, 1.5, 7.5, 4.5, 9.5}));
    EXPECT_EQ(batch_sizes, (std::vector<std::size_t>{2, 2, 1}));
    EXPECT_THROW(scorer.score("short", ps), TransportError);
    EXPECT_TRUE(scorer.score("q", std::span<const Passage>{}).empty());

    server.stop();
    th.join();
    EXPECT_THROW(scorer.score("q", ps), TransportError);
    opts.batch_size = 0;
    EXPECT_THROW(RemoteScorer{opts}, ConfigError);
}

TEST(ScorerRegistry, Lookup) {
    ScorerRegistry reg;
    reg.add("stub", std::make_shared<StubScorer>());
    EXPECT_TRUE(reg.contains("stub"));
    EXPECT_NO_THROW(reg.get("stub"));
    EXPECT_THROW(reg.get("debertav3"), ConfigError);
    EXPECT_THROW(reg.add("x", nullptr), InvalidArgument);
}
