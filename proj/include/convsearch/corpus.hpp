#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "convsearch/error.hpp"
#include "convsearch/text.hpp"
#include "convsearch/types.hpp"

namespace convsearch {

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

inline double parse_double(std::string_view text, std::size_t line_no, std::string_view what) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError("malformed " + std::string(what) + " '" + std::string(text) + "'", line_no);
    }
    return value;
}

}  // namespace detail

/// Reads `<doc_id>\t<text>` lines. Blank lines are skipped.
inline std::vector<Passage> read_corpus(std::istream& in) {
    std::vector<Passage> passages;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("missing tab separator", line_no);
        if (tab == 0) throw ParseError("empty doc_id", line_no);
        passages.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return passages;
}

inline std::vector<Passage> load_corpus(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_corpus(in);
}

/// Reads `<doc_id>\t<term>:<weight>( <term>:<weight>)*` lines.
inline std::map<std::string, SparseVector> read_sparse_vectors(std::istream& in) {
    std::map<std::string, SparseVector> vectors;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("missing tab separator", line_no);
        if (tab == 0) throw ParseError("empty doc_id", line_no);
        std::string doc_id = line.substr(0, tab);
        if (vectors.contains(doc_id)) throw ParseError("duplicate doc_id '" + doc_id + "'", line_no);

        SparseVector vec;
        std::string_view rest = std::string_view(line).substr(tab + 1);
        std::size_t entries = 0;
        while (!rest.empty()) {
            auto space = rest.find(' ');
            std::string_view entry = rest.substr(0, space);
            rest = space == std::string_view::npos ? std::string_view{} : rest.substr(space + 1);
            if (entry.empty()) continue;
            auto colon = entry.rfind(':');
            if (colon == std::string_view::npos || colon == 0) {
                throw ParseError("malformed entry '" + std::string(entry) + "'", line_no);
            }
            double weight = detail::parse_double(entry.substr(colon + 1), line_no, "weight");
            if (weight < 0.0) {
                throw ParseError("negative weight in '" + std::string(entry) + "'", line_no);
            }
            std::string term(entry.substr(0, colon));
            vec.set(term, vec.get(term) + weight);
            ++entries;
        }
        if (entries == 0) throw ParseError("no term entries for '" + doc_id + "'", line_no);
        vectors.emplace(std::move(doc_id), std::move(vec));
    }
    return vectors;
}

inline std::map<std::string, SparseVector> load_sparse_vectors(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_sparse_vectors(in);
}

/// Passage lookup by doc_id; the corpus accessor used by rerankers and response generation.
class PassageStore {
public:
    PassageStore() = default;
    explicit PassageStore(std::vector<Passage> passages) : passages_(std::move(passages)) {
        for (std::size_t i = 0; i < passages_.size(); ++i) {
            if (!lookup_.emplace(passages_[i].doc_id, i).second) {
                throw InvalidArgument("duplicate doc_id '" + passages_[i].doc_id + "'");
            }
        }
    }

    const Passage& get(const std::string& doc_id) const {
        auto it = lookup_.find(doc_id);
        if (it == lookup_.end()) throw InvalidArgument("unknown doc_id '" + doc_id + "'");
        return passages_[it->second];
    }

    bool contains(const std::string& doc_id) const { return lookup_.contains(doc_id); }
    std::size_t size() const noexcept { return passages_.size(); }
    const std::vector<Passage>& passages() const noexcept { return passages_; }

private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

}  // namespace convsearch
