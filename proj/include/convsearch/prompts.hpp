#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>

#include "convsearch/error.hpp"

namespace convsearch {

enum class PromptName { multi_query, rag_answer, ptkb_classify, single_rewrite };

inline constexpr std::array<std::string_view, 9> kPlaceholders = {
    "ptkb", "ctx", "user utterance", "phi", "doc_1", "doc_2", "doc_3", "doc_4", "doc_5"};

inline bool is_known_placeholder(std::string_view name) {
    for (auto p : kPlaceholders) {
        if (p == name) return true;
    }
    return false;
}

struct PromptTemplate {
    PromptName name;
    std::string body;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

namespace prompt_text {

// Multi-aspect query generation.
inline constexpr std::string_view kMultiQuery =
    "# Instruction: I will give you a conversation between a user and a system. Imagine you want to find the "
    "answer to the last user question by searching on Google. You should generate the search queries that you "
    "need to search on Google. Please don't generate more than {phi} queries and write each query on one line.\n"
    "# Background knowledge: {ptkb}\n"
    "# Context: {ctx}\n"
    "# User question: {user utterance}\n"
    "# Generated queries:";

// Retrieval-augmented answer generation over the top five passages.
inline constexpr std::string_view kRagAnswer =
    "# Doc1: {doc_1}\n"
    "# Doc2: {doc_2}\n"
    "# Doc3: {doc_3}\n"
    "# Doc4: {doc_4}\n"
    "# Doc5: {doc_5}\n"
    "# I will give you a conversation between a user and a system. Also, I will give you some background "
    "information about the user. You should answer the last utterance of the user by providing a summary of the "
    "relevant parts of the given documents. Please remember that your answer shouldn't be more than 200 words.\n"
    "# Background information about the user: {ptkb}\n"
    "# Conversation: {ctx}\n"
    "# User query: {user utterance}";

inline constexpr std::string_view kPtkbClassify =
    "I will give you some background information about a user and a conversation between the user and a system. "
    "You should tell me which of the background information is relevant for answering the last question of the "
    "user.\n"
    "Here is the background information about the user: {ptkb}\n"
    "Please just copy the relevant background information to the last user utterance.";

// Appended after kPtkbClassify; the classification template itself carries no
// conversation slot.
inline constexpr std::string_view kPtkbConversation =
    "\n# Conversation: {ctx}\n"
    "# User question: {user utterance}";

// Zero-shot single rewrite.
inline constexpr std::string_view kSingleRewrite =
    "# Instruction: I will give you a conversation between a user and a system. Imagine you want to find the "
    "answer to the last user question by searching on Google. You should rewrite the last user question into a "
    "single self-contained search query that you would search on Google, using the background knowledge when it "
    "is relevant. Write only the query on one line.\n"
    "# Background knowledge: {ptkb}\n"
    "# Context: {ctx}\n"
    "# User question: {user utterance}\n"
    "# Rewritten query:";

}  // namespace prompt_text

/// Throws when `body` holds a `{...}` that is not a known placeholder.
inline PromptTemplate make_template(PromptName name, std::string body) {
    std::size_t pos = 0;
    while ((pos = body.find('{', pos)) != std::string::npos) {
        auto close = body.find('}', pos);
        if (close == std::string::npos) throw InvalidArgument("unterminated placeholder in template");
        auto ph = std::string_view(body).substr(pos + 1, close - pos - 1);
        if (!is_known_placeholder(ph)) throw InvalidArgument("unknown placeholder '" + std::string(ph) + "'");
        pos = close + 1;
    }
    return {name, std::move(body)};
}

inline const PromptTemplate& builtin_template(PromptName name) {
    static const PromptTemplate multi = make_template(PromptName::multi_query, std::string(prompt_text::kMultiQuery));
    static const PromptTemplate rag = make_template(PromptName::rag_answer, std::string(prompt_text::kRagAnswer));
    static const PromptTemplate ptkb = make_template(PromptName::ptkb_classify, std::string(prompt_text::kPtkbClassify));
    static const PromptTemplate single =
        make_template(PromptName::single_rewrite, std::string(prompt_text::kSingleRewrite));
    switch (name) {
        case PromptName::multi_query: return multi;
        case PromptName::rag_answer: return rag;
        case PromptName::ptkb_classify: return ptkb;
        case PromptName::single_rewrite: return single;
    }
    throw InvalidArgument("unknown prompt template");
}

/// Single-pass substitution; bound values are never rescanned for placeholders.
inline std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
    std::string out;
    out.reserve(tmpl.body.size() + 256);
    std::string_view body = tmpl.body;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto open = body.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(body.substr(pos));
            break;
        }
        auto close = body.find('}', open);
        out.append(body.substr(pos, open - pos));
        auto name = body.substr(open + 1, close - open - 1);
        auto it = bindings.find(name);
        if (it == bindings.end()) throw InvalidArgument("unbound placeholder " + std::string(name));
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

}  // namespace convsearch
