#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sfdlm/text/vocab.hpp"
#include "sfdlm/types.hpp"

namespace sfdlm::text {

/// Whole file as UTF-8 text. Throws InputError when unreadable, empty or not
/// valid UTF-8.
std::string read_corpus(const std::string& path);

/// Fixed-length windows starting at 0, stride, 2*stride, ...; the ragged tail
/// that cannot fill a window is dropped.
std::vector<TokenSequence> make_windows(const TokenSequence& ids, std::size_t seq_len, std::size_t stride);

/// read_corpus + encode + make_windows. seq_len must be a power of two.
std::vector<TokenSequence> ingest_corpus(const std::string& path, const Vocab& vocab, std::size_t seq_len,
                                         std::size_t stride);

/// Token stream split into a training prefix and a held-out suffix.
struct CorpusSplit {
    TokenSequence train;
    TokenSequence heldout;
};
CorpusSplit split_tokens(const TokenSequence& ids, double heldout_fraction);

/// Entropy in nats of the empirical token distribution.
double unigram_entropy(const TokenSequence& ids, std::size_t vocab_size);

}  // namespace sfdlm::text
