#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sfdlm/types.hpp"

namespace sfdlm::text {

/// Splits UTF-8 text into one string per code point. Throws InputError on
/// malformed input.
std::vector<std::string> split_code_points(std::string_view utf8);

struct MergePair {
    std::string left;
    std::string right;

    bool operator==(const MergePair&) const = default;
};

/// Token inventory. Ids index `tokens()`; merges are kept in training order.
class Vocab {
public:
    Vocab() = default;
    Vocab(std::vector<std::string> tokens, std::vector<MergePair> merges = {},
          std::optional<TokenId> unk_id = std::nullopt);

    std::size_t size() const { return id_to_token_.size(); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }
    const std::vector<MergePair>& merges() const { return merges_; }
    std::optional<TokenId> unk_id() const { return unk_id_; }

    const std::string& token(TokenId id) const;
    std::optional<TokenId> find(std::string_view token) const;

    /// Serialized form: {"tokens": [...], "merges": [[l, r], ...]} plus
    /// "unk_id" when set.
    std::string to_json() const;
    static Vocab from_json(std::string_view json);

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

    bool operator==(const Vocab& other) const {
        return id_to_token_ == other.id_to_token_ && merges_ == other.merges_ && unk_id_ == other.unk_id_;
    }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<MergePair> merges_;
    std::optional<TokenId> unk_id_;
};

/// One token per distinct code point, sorted by code point.
Vocab build_char_vocab(std::string_view corpus);

/// Greedy byte-pair merges over the character sequence of `corpus`.
///
/// Each round merges the most frequent adjacent pair (overlapping occurrences
/// counted); ties go to the lexicographically smallest merged string, then the
/// smallest left token. Pairs whose merged string is already a token are
/// skipped. Stops early when no pair remains.
Vocab bpe_train(std::string_view corpus, std::size_t num_merges);

/// Characters missing from the vocabulary map to unk_id when set; otherwise
/// encoding fails with InputError.
TokenSequence encode(std::string_view s, const Vocab& vocab);
std::string decode(const TokenSequence& ids, const Vocab& vocab);

}  // namespace sfdlm::text
