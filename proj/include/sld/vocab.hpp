#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sld {

// Word-level tokenizer: runs of letters/digits are words, every punctuation
// character is its own token, whitespace only separates.
std::vector<std::string> tokenize(std::string_view text);
std::string detokenize(const std::vector<std::string>& tokens);
// Canonical surface form: tokens joined by single spaces.
std::string normalize_text(std::string_view text);

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kEmpty = 4;
  static constexpr int kReserved = 5;

  std::vector<std::string> id_to_token;  // reserved markers occupy ids 0..4
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return (int)id_to_token.size(); }
  int id(const std::string& token) const;  // kUnk for out-of-vocab
  const std::string& token(int id) const;

  std::vector<int> encode(const std::vector<std::string>& words) const;
  // Drops reserved ids; maps the rest back to surface tokens.
  std::vector<std::string> decode_words(const std::vector<int>& ids) const;

  // Frequency-descending, ties broken lexicographically; tokens below
  // min_count are left out (they encode as UNK).
  static Vocab build_from_counts(const std::unordered_map<std::string, long long>& counts,
                                 long long min_count);
};

}  // namespace sld
