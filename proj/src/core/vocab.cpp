#include "oprm/core/vocab.hpp"

#include <array>
#include <set>

#include "oprm/errors.hpp"

namespace oprm {

Vocab Vocab::controlled(TokenId n_keys, TokenId n_values) {
  Vocab v;
  v.key_range = {kReserved, n_keys};
  v.value_range = {kReserved + n_keys, n_values};
  v.size = kReserved + n_keys + n_values;
  v.validate();
  return v;
}

void Vocab::validate() const {
  const std::array reserved{pad_token, error_token, query_marker, idk_instruction};
  std::set<TokenId> seen;
  for (TokenId t : reserved) {
    if (t < 0 || t >= size) throw UsageError("reserved token id out of vocabulary");
    if (!seen.insert(t).second) throw UsageError("reserved token ids must be distinct");
    if (key_range.contains(t) || value_range.contains(t))
      throw UsageError("reserved token id inside key or value range");
  }
  if (key_range.count <= 0 || value_range.count <= 0) throw UsageError("empty key or value range");
  if (key_range.first < 0 || key_range.end() > size || value_range.first < 0 || value_range.end() > size)
    throw UsageError("key/value range exceeds vocabulary");
  if (key_range.first < value_range.end() && value_range.first < key_range.end())
    throw UsageError("key and value ranges overlap");
}

}  // namespace oprm
