#pragma once

#include <cstdint>

namespace oprm {

using TokenId = std::int32_t;

/// Half-open interval [first, first + count) of token ids.
struct TokenRange {
  TokenId first = 0;
  TokenId count = 0;

  TokenId end() const { return first + count; }
  bool contains(TokenId t) const { return t >= first && t < end(); }
  TokenId at(TokenId i) const { return first + i; }
};

/// Token layout of the toy symbolic vocabularies used by the recall tasks.
struct Vocab {
  TokenId size = 0;
  TokenId pad_token = 0;
  TokenId error_token = 1;
  TokenId query_marker = 2;
  /// Single token standing in for the natural-language "answer is missing,
  /// reply Error" instruction appended to the suffix by the IDK filter.
  TokenId idk_instruction = 3;
  TokenRange key_range;
  TokenRange value_range;

  static constexpr TokenId kReserved = 4;

  /// `n_keys` single-token keys followed by `n_values` single-token values.
  static Vocab controlled(TokenId n_keys, TokenId n_values);
  /// 26 letter tokens as the key alphabet, 10 digit tokens as the value alphabet.
  static Vocab symbolic() { return controlled(26, 10); }

  /// Throws UsageError when reserved ids collide or the ranges overlap.
  void validate() const;
};

}  // namespace oprm
