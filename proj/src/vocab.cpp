#include "sld/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "sld/error.hpp"

namespace sld {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      flush();
    } else if (std::isalnum(ch) || ch == '_' || ch == '\'') {
      cur.push_back((char)ch);
    } else {
      flush();
      out.push_back(std::string(1, (char)ch));
    }
  }
  flush();
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string normalize_text(std::string_view text) { return detokenize(tokenize(text)); }

int Vocab::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int i) const {
  if (i < 0 || i >= size()) throw RuntimeFailure("vocab: id out of range: " + std::to_string(i));
  return id_to_token[(size_t)i];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

std::vector<std::string> Vocab::decode_words(const std::vector<int>& ids) const {
  std::vector<std::string> words;
  for (int i : ids) {
    if (i >= kReserved) words.push_back(token(i));
  }
  return words;
}

Vocab Vocab::build_from_counts(const std::unordered_map<std::string, long long>& counts,
                               long long min_count) {
  Vocab v;
  v.id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>", "<empty>"};
  std::vector<std::pair<std::string, long long>> kept;
  for (const auto& [tok, cnt] : counts) {
    if (cnt >= min_count) kept.emplace_back(tok, cnt);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (auto& [tok, cnt] : kept) v.id_to_token.push_back(tok);
  for (int i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[(size_t)i]] = i;
  return v;
}

}  // namespace sld
