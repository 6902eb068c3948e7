#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "convsearch/llm.hpp"
#include "convsearch/text.hpp"

namespace convsearch {

/// Deterministic rule-based stand-in for a chat model. It recognises the
/// built-in prompt layouts and answers from the prompt's own fields, which is
/// enough to author replay caches for fixtures without network access.
class OfflineChatClient : public ChatClient {
public:
    std::string complete(const std::string&, const std::string& prompt, const DecodingConfig&) override {
        if (prompt.find("# Generated queries:") != std::string::npos) return multi_query(prompt);
        if (prompt.find("# Rewritten query:") != std::string::npos) return rewrite(prompt);
        if (prompt.find("Please just copy the relevant background information") != std::string::npos) return ptkb(prompt);
        if (prompt.find("# Doc1: ") != std::string::npos) return answer(prompt);
        return "I don't know.";
    }

private:
    static const std::set<std::string>& stopwords() {
        static const std::set<std::string> words = {
            "a", "about", "after", "also", "am", "an", "and", "any", "are", "as", "at", "be", "but", "by",
            "can", "could", "did", "do", "does", "for", "from", "get", "good", "had", "has", "have", "how",
            "i", "if", "in", "is", "it", "its", "just", "like", "me", "my", "of", "on", "or", "should", "so",
            "some", "that", "the", "their", "them", "there", "these", "they", "this", "to", "was", "we",
            "what", "when", "where", "which", "who", "why", "will", "with", "would", "you", "your", "s",
            "t", "don", "m", "ve", "re", "ll", "want", "need", "know", "tell", "please", "thanks", "ok",
            "okay", "one", "ones", "more", "much", "many", "very", "really", "than", "then", "too"};
        return words;
    }

    static std::vector<std::string> keywords(std::string_view text) {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (auto& t : tokenize(text)) {
            if (t.size() < 3 || stopwords().contains(t) || !seen.insert(t).second) continue;
            out.push_back(t);
        }
        return out;
    }

    static std::string field(const std::string& prompt, std::string_view start, std::string_view end) {
        auto s = prompt.find(start);
        if (s == std::string::npos) return {};
        s += start.size();
        auto e = end.empty() ? std::string::npos : prompt.find(end, s);
        return prompt.substr(s, e == std::string::npos ? std::string::npos : e - s);
    }

    static std::vector<std::string> statements(const std::string& ptkb) {
        std::vector<std::string> out;
        for (auto line : split_lines(ptkb)) {
            auto s = strip_enumeration(line);
            if (!s.empty()) out.emplace_back(s);
        }
        return out;
    }

    static std::string last_user_line(const std::string& ctx) {
        std::string last;
        for (auto line : split_lines(ctx)) {
            if (line.starts_with("USER: ")) last = std::string(line.substr(6));
        }
        return last;
    }

    // Crude plural folding, used only when comparing words.
    static std::string stem(std::string w) {
        if (w.size() > 4 && w.back() == 's' && w[w.size() - 2] != 's') w.pop_back();
        return w;
    }

    static std::size_t overlap(const std::vector<std::string>& a, const std::set<std::string>& b) {
        return static_cast<std::size_t>(
            std::count_if(a.begin(), a.end(), [&](const auto& w) { return b.contains(stem(w)); }));
    }

    static std::string join(const std::vector<std::string>& words) {
        std::string out;
        for (const auto& w : words) {
            if (!out.empty()) out += ' ';
            out += w;
        }
        return out;
    }

    // Statements ranked by content-word overlap with the focus text, ties by position.
    static std::vector<std::size_t> relevant_statements(const std::vector<std::string>& stmts,
                                                        const std::set<std::string>& focus) {
        std::vector<std::pair<std::size_t, std::size_t>> scored;
        for (std::size_t i = 0; i < stmts.size(); ++i) {
            auto o = overlap(keywords(stmts[i]), focus);
            if (o > 0) scored.emplace_back(o, i);
        }
        std::stable_sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first > b.first; });
        std::vector<std::size_t> out;
        for (auto& [o, i] : scored) out.push_back(i);
        return out;
    }

    static std::set<std::string> focus_terms(const std::string& utterance, const std::string& ctx) {
        std::set<std::string> focus;
        for (auto& w : keywords(utterance)) focus.insert(stem(w));
        for (auto& w : keywords(last_user_line(ctx))) focus.insert(stem(w));
        return focus;
    }

    static std::vector<std::string> context_terms(const std::string& utterance, const std::string& ctx, std::size_t n) {
        auto own = keywords(utterance);
        std::set<std::string> have(own.begin(), own.end());
        std::vector<std::string> out;
        for (auto& w : keywords(last_user_line(ctx))) {
            if (out.size() == n) break;
            if (!have.contains(w)) out.push_back(w);
        }
        return out;
    }

    static std::string multi_query(const std::string& prompt) {
        int phi = 1;
        auto marker = prompt.find("more than ");
        if (marker != std::string::npos) phi = std::max(1, std::atoi(prompt.c_str() + marker + 10));
        auto ptkb = field(prompt, "# Background knowledge: ", "\n# Context: ");
        auto ctx = field(prompt, "# Context: ", "\n# User question: ");
        auto utterance = field(prompt, "# User question: ", "\n# Generated queries:");

        auto base = keywords(utterance);
        auto carried = context_terms(utterance, ctx, 3);
        std::vector<std::string> head = base;
        head.insert(head.end(), carried.begin(), carried.end());

        std::vector<std::string> queries;
        queries.push_back(head.empty() ? std::string(trim(utterance)) : join(head));
        auto stmts = statements(ptkb);
        for (auto i : relevant_statements(stmts, focus_terms(utterance, ctx))) {
            if (static_cast<int>(queries.size()) >= phi) break;
            auto q = base;
            for (auto& w : keywords(stmts[i])) {
                if (std::find(q.begin(), q.end(), w) == q.end()) q.push_back(w);
            }
            queries.push_back(join(q));
        }
        for (std::size_t i = 0; static_cast<int>(queries.size()) < phi && i < carried.size(); ++i) {
            queries.push_back(join(base) + " " + carried[i]);
        }
        std::string out;
        for (std::size_t i = 0; i < queries.size(); ++i) out += std::to_string(i + 1) + ". " + queries[i] + "\n";
        return out;
    }

    static std::string rewrite(const std::string& prompt) {
        auto ptkb = field(prompt, "# Background knowledge: ", "\n# Context: ");
        auto ctx = field(prompt, "# Context: ", "\n# User question: ");
        auto utterance = field(prompt, "# User question: ", "\n# Rewritten query:");
        auto q = keywords(utterance);
        for (auto& w : context_terms(utterance, ctx, 4)) q.push_back(w);
        auto stmts = statements(ptkb);
        auto rel = relevant_statements(stmts, focus_terms(utterance, ctx));
        if (!rel.empty()) {
            std::size_t added = 0;
            for (auto& w : keywords(stmts[rel.front()])) {
                if (added == 2) break;
                if (std::find(q.begin(), q.end(), w) == q.end()) {
                    q.push_back(w);
                    ++added;
                }
            }
        }
        return q.empty() ? std::string(trim(utterance)) : join(q);
    }

    static std::string ptkb(const std::string& prompt) {
        auto ptkb_block = field(prompt, "Here is the background information about the user: ",
                                "\nPlease just copy the relevant background information");
        auto ctx = field(prompt, "# Conversation: ", "\n# User question: ");
        auto utterance = field(prompt, "# User question: ", "");
        auto stmts = statements(ptkb_block);
        auto rel = relevant_statements(stmts, focus_terms(utterance, ctx));
        if (rel.empty()) return "None";
        std::sort(rel.begin(), rel.end());
        std::string out;
        for (auto i : rel) out += stmts[i] + "\n";
        return out;
    }

    static std::string answer(const std::string& prompt) {
        std::vector<std::string> sentences;
        std::set<std::string> seen;
        for (int d = 1; d <= 5; ++d) {
            auto start = "# Doc" + std::to_string(d) + ": ";
            auto end = d < 5 ? "\n# Doc" + std::to_string(d + 1) + ": " : std::string("\n# I will give you");
            auto text = field(prompt, start, end);
            auto stop = text.find(". ");
            std::string first = stop == std::string::npos ? text : text.substr(0, stop + 1);
            if (!first.empty() && seen.insert(first).second) sentences.push_back(first);
            if (sentences.size() == 3) break;
        }
        std::string out = "Based on the retrieved passages:";
        std::size_t words = 5;
        for (auto& s : sentences) {
            for (auto& w : tokenize_words(s)) {
                if (words >= 200) return out;
                out += ' ' + w;
                ++words;
            }
        }
        return out;
    }

    static std::vector<std::string> tokenize_words(const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ' ' || c == '\n' || c == '\t') {
                if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    }
};

}  // namespace convsearch
