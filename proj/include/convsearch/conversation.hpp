#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "convsearch/error.hpp"

namespace convsearch {

struct PTKBStatement {
    int index = 0;  // 1-based
    std::string text;

    bool operator==(const PTKBStatement&) const = default;
};

struct Turn {
    int turn_number = 0;  // 1-based
    std::string user_utterance;
    std::string gold_response;
    std::optional<std::string> manual_rewrite;

    bool operator==(const Turn&) const = default;
};

struct Topic {
    std::string topic_id;
    std::string title;
    std::vector<PTKBStatement> ptkb;
    std::vector<Turn> turns;

    const Turn& turn(int turn_number) const {
        if (turn_number < 1 || static_cast<std::size_t>(turn_number) > turns.size()) {
            throw InvalidArgument("topic " + topic_id + ": turn " + std::to_string(turn_number) +
                                  " out of range [1, " + std::to_string(turns.size()) + "]");
        }
        return turns[static_cast<std::size_t>(turn_number - 1)];
    }

    bool operator==(const Topic&) const = default;
};

struct ConversationContext {
    std::string rendered;
};

namespace detail {

inline std::string topic_error(const std::string& topic, const std::string& message) {
    return "topic " + (topic.empty() ? std::string("<unknown>") : topic) + ": " + message;
}

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* field, const std::string& topic) {
    if (!obj.is_object() || !obj.contains(field)) {
        throw ParseError(topic_error(topic, std::string("missing field '") + field + "'"));
    }
    return obj.at(field);
}

inline std::string require_string(const nlohmann::json& obj, const char* field, const std::string& topic) {
    const auto& v = require_field(obj, field, topic);
    if (!v.is_string()) throw ParseError(topic_error(topic, std::string("field '") + field + "' must be a string"));
    return v.get<std::string>();
}

inline Topic topic_from_json(const nlohmann::json& j) {
    Topic topic;
    const auto& number = require_field(j, "number", "");
    if (number.is_string()) {
        topic.topic_id = number.get<std::string>();
    } else if (number.is_number_integer()) {
        topic.topic_id = std::to_string(number.get<long long>());
    } else {
        throw ParseError(topic_error("", "field 'number' must be a string or integer"));
    }
    if (topic.topic_id.empty()) throw ParseError(topic_error("", "field 'number' is empty"));
    const std::string& id = topic.topic_id;
    topic.title = require_string(j, "title", id);

    const auto& ptkb = require_field(j, "ptkb", id);
    if (!ptkb.is_object()) throw ParseError(topic_error(id, "field 'ptkb' must be an object"));
    topic.ptkb.resize(ptkb.size());
    for (auto it = ptkb.begin(); it != ptkb.end(); ++it) {
        std::size_t pos = 0;
        int index = 0;
        try {
            index = std::stoi(it.key(), &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != it.key().size() || index < 1 || static_cast<std::size_t>(index) > ptkb.size()) {
            throw ParseError(topic_error(id, "field 'ptkb' has non-contiguous index '" + it.key() + "'"));
        }
        auto& slot = topic.ptkb[static_cast<std::size_t>(index - 1)];
        if (slot.index != 0) throw ParseError(topic_error(id, "field 'ptkb' repeats index " + it.key()));
        if (!it.value().is_string() || it.value().get<std::string>().empty()) {
            throw ParseError(topic_error(id, "field 'ptkb' statement " + it.key() + " must be a non-empty string"));
        }
        slot = {index, it.value().get<std::string>()};
    }

    const auto& turns = require_field(j, "turns", id);
    if (!turns.is_array() || turns.empty()) throw ParseError(topic_error(id, "field 'turns' must be a non-empty list"));
    for (const auto& t : turns) {
        const auto& num = require_field(t, "turn_number", id);
        if (!num.is_number_integer()) throw ParseError(topic_error(id, "field 'turn_number' must be an integer"));
        Turn turn;
        turn.turn_number = num.get<int>();
        int expected = static_cast<int>(topic.turns.size()) + 1;
        if (turn.turn_number != expected) {
            throw ParseError(topic_error(id, "non-contiguous turns in field 'turn_number' (expected " +
                                                 std::to_string(expected) + ", got " +
                                                 std::to_string(turn.turn_number) + ")"));
        }
        turn.user_utterance = require_string(t, "utterance", id);
        turn.gold_response = require_string(t, "response", id);
        if (t.contains("manual_rewrite") && !t.at("manual_rewrite").is_null()) {
            turn.manual_rewrite = require_string(t, "manual_rewrite", id);
        }
        topic.turns.push_back(std::move(turn));
    }
    return topic;
}

}  // namespace detail

/// Parses a JSON array of topics:
/// `[{"number", "title", "ptkb": {"1": ...}, "turns": [{"turn_number", "utterance", "response", "manual_rewrite"?}]}]`
inline std::vector<Topic> parse_topics(std::string_view json_text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("topics file is not valid JSON: ") + e.what());
    }
    if (!root.is_array()) throw ParseError("topics file must hold a JSON array");
    std::vector<Topic> topics;
    topics.reserve(root.size());
    for (const auto& j : root) topics.push_back(detail::topic_from_json(j));
    return topics;
}

inline std::vector<Topic> load_topics(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_topics(buf.str());
}

inline std::string serialize_topics(std::span<const Topic> topics) {
    nlohmann::json root = nlohmann::json::array();
    for (const auto& topic : topics) {
        nlohmann::json ptkb = nlohmann::json::object();
        for (const auto& s : topic.ptkb) ptkb[std::to_string(s.index)] = s.text;
        nlohmann::json turns = nlohmann::json::array();
        for (const auto& t : topic.turns) {
            nlohmann::json jt = {{"turn_number", t.turn_number}, {"utterance", t.user_utterance}, {"response", t.gold_response}};
            if (t.manual_rewrite) jt["manual_rewrite"] = *t.manual_rewrite;
            turns.push_back(std::move(jt));
        }
        root.push_back({{"number", topic.topic_id}, {"title", topic.title}, {"ptkb", ptkb}, {"turns", turns}});
    }
    return root.dump(2);
}

/// History strictly before `current_turn` as "USER: ..." / "SYSTEM: ..." lines.
/// `responses` overrides the gold responses (generated-history mode); entry i
/// replaces the response of turn i + 1.
inline ConversationContext render_context(const Topic& topic, int current_turn,
                                          std::span<const std::string> responses = {}) {
    topic.turn(current_turn);
    std::string out;
    for (int i = 1; i < current_turn; ++i) {
        const Turn& t = topic.turn(i);
        auto idx = static_cast<std::size_t>(i - 1);
        const std::string& response = idx < responses.size() ? responses[idx] : t.gold_response;
        if (!out.empty()) out += '\n';
        out += "USER: " + t.user_utterance + "\nSYSTEM: " + response;
    }
    return {out};
}

inline std::string ptkb_text(std::span<const PTKBStatement> statements) {
    std::string out;
    for (const auto& s : statements) {
        if (!out.empty()) out += '\n';
        out += std::to_string(s.index) + ". " + s.text;
    }
    return out;
}

inline std::string ptkb_text(const Topic& topic) { return ptkb_text(topic.ptkb); }

}  // namespace convsearch
