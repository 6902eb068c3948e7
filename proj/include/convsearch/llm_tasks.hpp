#pragma once

#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "convsearch/conversation.hpp"
#include "convsearch/error.hpp"
#include "convsearch/llm.hpp"
#include "convsearch/prompts.hpp"
#include "convsearch/text.hpp"
#include "convsearch/types.hpp"

namespace convsearch {

struct QuerySet {
    std::vector<std::string> queries;
    int phi = 1;
};

/// One query per non-blank line, list markers stripped, at most `phi` kept.
inline QuerySet parse_queries(std::string_view response, int phi) {
    if (phi < 1) throw InvalidArgument("phi must be >= 1");
    QuerySet set{{}, phi};
    for (auto line : split_lines(response)) {
        auto q = strip_enumeration(line);
        if (q.empty()) continue;
        set.queries.emplace_back(q);
        if (static_cast<int>(set.queries.size()) == phi) break;
    }
    if (set.queries.empty()) throw Error("no queries parsed");
    return set;
}

inline Bindings conversation_bindings(const ConversationContext& ctx, const std::string& ptkb,
                                      const std::string& utterance) {
    return {{"ptkb", ptkb}, {"ctx", ctx.rendered}, {"user utterance", utterance}};
}

inline std::string multi_query_prompt(const ConversationContext& ctx, const std::string& ptkb,
                                      const std::string& utterance, int phi) {
    auto b = conversation_bindings(ctx, ptkb, utterance);
    b["phi"] = std::to_string(phi);
    return render_prompt(builtin_template(PromptName::multi_query), b);
}

inline QuerySet generate_queries(LlmGateway& llm, const ConversationContext& ctx, const std::string& ptkb,
                                 const std::string& utterance, int phi) {
    if (phi < 1) throw InvalidArgument("phi must be >= 1");
    return parse_queries(llm.complete(multi_query_prompt(ctx, ptkb, utterance, phi)), phi);
}

inline std::string generate_rewrite(LlmGateway& llm, const ConversationContext& ctx, const std::string& ptkb,
                                    const std::string& utterance) {
    auto prompt = render_prompt(builtin_template(PromptName::single_rewrite), conversation_bindings(ctx, ptkb, utterance));
    return parse_queries(llm.complete(prompt), 1).queries.front();
}

/// label_i = 1 iff some response line equals statement_i after list-marker
/// stripping and normalize_for_match. "None" yields all zeros.
inline std::vector<int> parse_ptkb_labels(std::string_view response, std::span<const PTKBStatement> statements) {
    std::vector<int> labels(statements.size(), 0);
    std::unordered_set<std::string> lines;
    for (auto line : split_lines(response)) {
        auto norm = normalize_for_match(strip_enumeration(line));
        if (!norm.empty() && norm != "none") lines.insert(std::move(norm));
    }
    for (std::size_t i = 0; i < statements.size(); ++i) {
        if (lines.contains(normalize_for_match(statements[i].text))) labels[i] = 1;
    }
    return labels;
}

inline std::string ptkb_classify_prompt(const ConversationContext& ctx, std::span<const PTKBStatement> statements,
                                        const std::string& utterance) {
    auto b = conversation_bindings(ctx, ptkb_text(statements), utterance);
    auto suffix = make_template(PromptName::ptkb_classify, std::string(prompt_text::kPtkbConversation));
    return render_prompt(builtin_template(PromptName::ptkb_classify), b) + render_prompt(suffix, b);
}

inline std::vector<int> classify_ptkb(LlmGateway& llm, const ConversationContext& ctx,
                                      std::span<const PTKBStatement> statements, const std::string& utterance) {
    if (statements.empty()) throw InvalidArgument("classify_ptkb needs at least one statement");
    return parse_ptkb_labels(llm.complete(ptkb_classify_prompt(ctx, statements, utterance)), statements);
}

inline constexpr std::size_t kResponseDocs = 5;

struct GeneratedResponse {
    std::string answer;
    std::vector<std::string> provenance;  // distinct input doc_ids in rank order
    std::size_t padded_slots = 0;         // doc slots filled by repeating the last passage
};

inline std::string rag_prompt(const ConversationContext& ctx, const std::string& ptkb, const std::string& utterance,
                              std::span<const Passage> docs, std::size_t* padded = nullptr) {
    if (docs.empty()) throw InvalidArgument("no provenance available");
    auto b = conversation_bindings(ctx, ptkb, utterance);
    for (std::size_t i = 0; i < kResponseDocs; ++i) {
        const Passage& p = docs[std::min(i, docs.size() - 1)];
        b["doc_" + std::to_string(i + 1)] = p.text;
    }
    if (padded) *padded = docs.size() < kResponseDocs ? kResponseDocs - docs.size() : 0;
    return render_prompt(builtin_template(PromptName::rag_answer), b);
}

/// Answers from the first five passages; fewer are padded by repeating the last.
inline GeneratedResponse generate_response(LlmGateway& llm, const ConversationContext& ctx, const std::string& ptkb,
                                           const std::string& utterance, std::span<const Passage> docs) {
    if (docs.empty()) throw InvalidArgument("no provenance available");
    docs = docs.first(std::min(docs.size(), kResponseDocs));
    GeneratedResponse out;
    auto prompt = rag_prompt(ctx, ptkb, utterance, docs, &out.padded_slots);
    out.answer = llm.complete(prompt);
    for (const auto& p : docs) out.provenance.push_back(p.doc_id);
    return out;
}

}  // namespace convsearch
