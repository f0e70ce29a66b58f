#pragma once

#include <cstdint>
#include <vector>

namespace sfdlm {

using TokenId = std::int32_t;

/// Encoded token ids; every id lies in [0, vocab size).
using TokenSequence = std::vector<TokenId>;

}  // namespace sfdlm
