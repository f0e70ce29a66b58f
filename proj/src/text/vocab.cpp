#include "sfdlm/text/vocab.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "sfdlm/errors.hpp"

namespace sfdlm::text {

using nlohmann::json;

std::vector<std::string> split_code_points(std::string_view utf8) {
    std::vector<std::string> out;
    out.reserve(utf8.size());
    std::size_t i = 0;
    while (i < utf8.size()) {
        const auto lead = static_cast<unsigned char>(utf8[i]);
        std::size_t len = 0;
        if (lead < 0x80) len = 1;
        else if ((lead >> 5) == 0x6) len = 2;
        else if ((lead >> 4) == 0xE) len = 3;
        else if ((lead >> 3) == 0x1E) len = 4;
        else throw InputError("invalid UTF-8 lead byte at offset " + std::to_string(i));
        if (i + len > utf8.size()) throw InputError("truncated UTF-8 sequence at offset " + std::to_string(i));
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(utf8[i + k]) >> 6) != 0x2) {
                throw InputError("invalid UTF-8 continuation byte at offset " + std::to_string(i + k));
            }
        }
        out.emplace_back(utf8.substr(i, len));
        i += len;
    }
    return out;
}

namespace {

/// Code point of a single UTF-8 encoded character.
std::uint32_t code_point(const std::string& ch) {
    const auto b0 = static_cast<unsigned char>(ch[0]);
    if (ch.size() == 1) return b0;
    std::uint32_t cp = b0 & (0xFF >> (ch.size() + 1));
    for (std::size_t k = 1; k < ch.size(); ++k) cp = (cp << 6) | (static_cast<unsigned char>(ch[k]) & 0x3F);
    return cp;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens, std::vector<MergePair> merges, std::optional<TokenId> unk_id)
    : id_to_token_(std::move(tokens)), merges_(std::move(merges)), unk_id_(unk_id) {
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
        if (!inserted) throw InputError("duplicate token in vocabulary: '" + id_to_token_[i] + "'");
    }
    if (unk_id_ && (*unk_id_ < 0 || static_cast<std::size_t>(*unk_id_) >= id_to_token_.size())) {
        throw InputError("unk_id out of range");
    }
    for (const auto& m : merges_) {
        if (!find(m.left) || !find(m.right) || !find(m.left + m.right)) {
            throw InputError("merge (" + m.left + ", " + m.right + ") refers to tokens missing from the vocabulary");
        }
    }
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
        throw std::out_of_range("token id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

std::string Vocab::to_json() const {
    json j;
    j["tokens"] = id_to_token_;
    json merges = json::array();
    for (const auto& m : merges_) merges.push_back({m.left, m.right});
    j["merges"] = merges;
    if (unk_id_) j["unk_id"] = *unk_id_;
    return j.dump(1) + "\n";
}

Vocab Vocab::from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        auto tokens = j.at("tokens").get<std::vector<std::string>>();
        std::vector<MergePair> merges;
        for (const auto& m : j.at("merges")) {
            if (!m.is_array() || m.size() != 2) throw InputError("vocabulary merge entries must be [left, right]");
            merges.push_back({m[0].get<std::string>(), m[1].get<std::string>()});
        }
        std::optional<TokenId> unk;
        if (j.contains("unk_id")) unk = j.at("unk_id").get<TokenId>();
        return Vocab(std::move(tokens), std::move(merges), unk);
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed vocabulary JSON: ") + e.what());
    }
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write vocabulary file: " + path);
    out << to_json();
}

Vocab Vocab::load(const std::string& path) { return from_json(read_file(path)); }

Vocab build_char_vocab(std::string_view corpus) {
    if (corpus.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
    std::set<std::pair<std::uint32_t, std::string>> distinct;
    for (auto& ch : split_code_points(corpus)) distinct.emplace(code_point(ch), std::move(ch));
    std::vector<std::string> tokens;
    tokens.reserve(distinct.size());
    for (const auto& [cp, ch] : distinct) tokens.push_back(ch);
    return Vocab(std::move(tokens));
}

Vocab bpe_train(std::string_view corpus, std::size_t num_merges) {
    const Vocab chars = build_char_vocab(corpus);
    std::vector<std::string> tokens = chars.tokens();
    std::unordered_map<std::string, TokenId> lookup;
    for (std::size_t i = 0; i < tokens.size(); ++i) lookup.emplace(tokens[i], static_cast<TokenId>(i));

    std::vector<TokenId> seq;
    for (const auto& ch : split_code_points(corpus)) seq.push_back(lookup.at(ch));

    std::vector<MergePair> merges;
    std::unordered_map<std::uint64_t, std::size_t> counts;
    auto key = [](TokenId a, TokenId b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
    };

    while (merges.size() < num_merges) {
        counts.clear();
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) ++counts[key(seq[i], seq[i + 1])];

        bool found = false;
        TokenId best_left = 0, best_right = 0;
        std::size_t best_count = 0;
        std::string best_merged;
        for (const auto& [k, count] : counts) {
            const auto left = static_cast<TokenId>(k >> 32);
            const auto right = static_cast<TokenId>(k & 0xFFFFFFFFu);
            std::string merged = tokens[left] + tokens[right];
            if (lookup.contains(merged)) continue;
            const bool better =
                !found || count > best_count ||
                (count == best_count &&
                 std::tie(merged, tokens[left]) < std::tie(best_merged, tokens[best_left]));
            if (better) {
                found = true;
                best_left = left;
                best_right = right;
                best_count = count;
                best_merged = std::move(merged);
            }
        }
        if (!found) break;

        const auto new_id = static_cast<TokenId>(tokens.size());
        tokens.push_back(best_merged);
        lookup.emplace(best_merged, new_id);
        merges.push_back({tokens[best_left], tokens[best_right]});

        std::vector<TokenId> next;
        next.reserve(seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i + 1 < seq.size() && seq[i] == best_left && seq[i + 1] == best_right) {
                next.push_back(new_id);
                ++i;
            } else {
                next.push_back(seq[i]);
            }
        }
        seq = std::move(next);
    }
    return Vocab(std::move(tokens), std::move(merges));
}

TokenSequence encode(std::string_view s, const Vocab& vocab) {
    TokenSequence ids;
    ids.reserve(s.size());
    for (const auto& ch : split_code_points(s)) {
        if (auto id = vocab.find(ch)) {
            ids.push_back(*id);
        } else if (vocab.unk_id()) {
            ids.push_back(*vocab.unk_id());
        } else {
            throw InputError("character '" + ch + "' is not in the vocabulary");
        }
    }
    for (const auto& m : vocab.merges()) {
        const TokenId left = *vocab.find(m.left);
        const TokenId right = *vocab.find(m.right);
        const TokenId merged = *vocab.find(m.left + m.right);
        std::size_t out = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i + 1 < ids.size() && ids[i] == left && ids[i + 1] == right) {
                ids[out++] = merged;
                ++i;
            } else {
                ids[out++] = ids[i];
            }
        }
        ids.resize(out);
    }
    return ids;
}

std::string decode(const TokenSequence& ids, const Vocab& vocab) {
    std::string out;
    for (auto id : ids) out += vocab.token(id);
    return out;
}

}  // namespace sfdlm::text
