#include "sfdlm/text/corpus.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "sfdlm/errors.hpp"
#include "sfdlm/numerics/fft.hpp"

namespace sfdlm::text {

std::string read_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read corpus file: " + path);
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (text.empty()) throw InputError("corpus file is empty: " + path);
    split_code_points(text);  // validates UTF-8
    return text;
}

std::vector<TokenSequence> make_windows(const TokenSequence& ids, std::size_t seq_len, std::size_t stride) {
    if (!numerics::fft::is_power_of_two(seq_len)) {
        throw InputError("seq_len must be a power of two, got " + std::to_string(seq_len));
    }
    if (stride == 0) throw InputError("stride must be at least 1");
    if (ids.size() < seq_len) {
        throw InputError("corpus has " + std::to_string(ids.size()) + " tokens, fewer than one window of " +
                         std::to_string(seq_len));
    }
    std::vector<TokenSequence> windows;
    for (std::size_t start = 0; start + seq_len <= ids.size(); start += stride) {
        windows.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start),
                             ids.begin() + static_cast<std::ptrdiff_t>(start + seq_len));
    }
    return windows;
}

std::vector<TokenSequence> ingest_corpus(const std::string& path, const Vocab& vocab, std::size_t seq_len,
                                         std::size_t stride) {
    return make_windows(encode(read_corpus(path), vocab), seq_len, stride);
}

CorpusSplit split_tokens(const TokenSequence& ids, double heldout_fraction) {
    if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
        throw InputError("heldout fraction must lie in [0, 1)");
    }
    const auto cut = static_cast<std::size_t>(std::floor(static_cast<double>(ids.size()) * (1.0 - heldout_fraction)));
    return {TokenSequence(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut)),
            TokenSequence(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end())};
}

double unigram_entropy(const TokenSequence& ids, std::size_t vocab_size) {
    std::vector<std::size_t> counts(vocab_size, 0);
    for (auto id : ids) ++counts.at(static_cast<std::size_t>(id));
    double h = 0.0;
    const auto total = static_cast<double>(ids.size());
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace sfdlm::text
