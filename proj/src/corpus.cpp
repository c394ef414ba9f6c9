#include "sld/corpus.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sld/error.hpp"

namespace sld {

using nlohmann::json;

SegmentMode segment_mode_from_string(const std::string& s) {
  if (s == "sentence") return SegmentMode::kSentence;
  if (s == "utterance") return SegmentMode::kUtterance;
  throw ValidationError("segment_mode: expected sentence|utterance, got '" + s + "'");
}

const char* segment_mode_name(SegmentMode m) {
  return m == SegmentMode::kSentence ? "sentence" : "utterance";
}

std::string segment_joiner(SegmentMode m) {
  return m == SegmentMode::kSentence ? " " : "\n";
}

std::vector<Example> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file: " + path);
  std::vector<Example> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    Example ex;
    ex.id = j.value("id", "line-" + std::to_string(lineno));
    ex.input_text = j.value("input", "");
    ex.output_text = j.value("output", "");
    if (j.contains("segments")) {
      for (const auto& s : j["segments"]) ex.segments.push_back(s.get<std::string>());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_corpus_jsonl(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write corpus file: " + path);
  for (const Example& ex : examples) {
    json j;
    j["id"] = ex.id;
    j["input"] = ex.input_text;
    j["output"] = ex.output_text;
    if (!ex.segments.empty()) j["segments"] = ex.segments;
    out << j.dump() << "\n";
  }
}

std::unordered_map<std::string, std::string> load_paraphrase_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open paraphrase table: " + path);
  std::unordered_map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    out[j.at("segment").get<std::string>()] = j.at("paraphrase").get<std::string>();
  }
  return out;
}

void save_paraphrase_table(const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write paraphrase table: " + path);
  for (const auto& [seg, para] : rows) {
    json j;
    j["segment"] = seg;
    j["paraphrase"] = para;
    out << j.dump() << "\n";
  }
}

std::vector<std::string> load_ood_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open OOD pool: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

Vocab build_vocab(const std::vector<Example>& corpus, long long min_count) {
  if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");
  std::unordered_map<std::string, long long> counts;
  for (const Example& ex : corpus) {
    for (const auto& t : tokenize(ex.input_text)) ++counts[t];
    for (const auto& t : tokenize(ex.output_text)) ++counts[t];
  }
  return Vocab::build_from_counts(counts, min_count);
}

namespace {

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

// A line that opens a dialogue turn: "#...#:" possibly after leading spaces.
bool has_speaker_tag(const std::string& line) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size() || line[i] != '#') return false;
  size_t close = line.find('#', i + 1);
  if (close == std::string::npos || close == i + 1) return false;
  return close + 1 < line.size() && line[close + 1] == ':';
}

}  // namespace

std::vector<std::string> segment_output(const std::string& text, SegmentMode mode) {
  if (text.empty()) throw ValidationError("segment_output: empty text");
  std::vector<std::string> segments;
  if (mode == SegmentMode::kSentence) {
    std::string cur;
    for (size_t i = 0; i < text.size(); ++i) {
      cur.push_back(text[i]);
      if (is_sentence_end(text[i])) {
        // consume a run of closing punctuation, split before whitespace
        size_t j = i + 1;
        while (j < text.size() && is_sentence_end(text[j])) {
          cur.push_back(text[j]);
          ++j;
        }
        if (j >= text.size() || std::isspace((unsigned char)text[j])) {
          std::string norm = normalize_text(cur);
          if (!norm.empty()) segments.push_back(norm);
          cur.clear();
        }
        i = j - 1;
      }
    }
    std::string norm = normalize_text(cur);
    if (!norm.empty()) segments.push_back(norm);
  } else {
    std::istringstream in(text);
    std::string line, cur;
    while (std::getline(in, line)) {
      std::string norm = normalize_text(line);
      if (norm.empty()) continue;
      if (has_speaker_tag(line) && !cur.empty()) {
        segments.push_back(cur);
        cur.clear();
      }
      if (!cur.empty()) cur += " ";
      cur += norm;
    }
    if (!cur.empty()) segments.push_back(cur);
  }
  if (segments.empty()) segments.push_back(normalize_text(text));
  return segments;
}

std::vector<std::string> example_segments(const Example& ex, SegmentMode mode) {
  if (!ex.segments.empty()) {
    std::vector<std::string> out;
    for (const auto& s : ex.segments) out.push_back(normalize_text(s));
    return out;
  }
  return segment_output(ex.output_text, mode);
}

std::vector<int> SegmentBatch::slot_tokens(int s) const {
  const int* r = row(s);
  return std::vector<int>(r, r + len[(size_t)s]);
}

std::vector<int> segment_token_ids(const Vocab& vocab, const std::string& segment, int m_seg) {
  if (m_seg < 3) throw ValidationError("segment_token_ids: m_seg must be >= 3");
  std::vector<int> ids;
  ids.push_back(Vocab::kBos);
  std::vector<int> body = vocab.encode(tokenize(segment));
  if ((int)body.size() > m_seg - 2) body.resize((size_t)(m_seg - 2));
  ids.insert(ids.end(), body.begin(), body.end());
  ids.push_back(Vocab::kEos);
  return ids;
}

std::vector<int> empty_segment_ids() { return {Vocab::kBos, Vocab::kEmpty, Vocab::kEos}; }

SegmentBatch collate_segments(const std::vector<std::string>& segments, int n, int m_seg,
                              const Vocab& vocab) {
  if (n < 1) throw ValidationError("collate_segments: n must be >= 1");
  if (m_seg < 3) throw ValidationError("collate_segments: m_seg must be >= 3");
  SegmentBatch b;
  b.n = n;
  b.m_seg = m_seg;
  b.ids.assign((size_t)n * m_seg, Vocab::kPad);
  b.real.assign((size_t)n, 0);
  b.len.assign((size_t)n, 0);
  for (int s = 0; s < n; ++s) {
    std::vector<int> row;
    if (s < (int)segments.size()) {
      row = segment_token_ids(vocab, segments[(size_t)s], m_seg);
      b.real[(size_t)s] = 1;
    } else {
      row = empty_segment_ids();
    }
    b.len[(size_t)s] = (int)row.size();
    std::copy(row.begin(), row.end(), b.ids.begin() + (size_t)s * m_seg);
  }
  return b;
}

std::vector<int> substitute_tokens(const std::vector<int>& ids, double p_sub, Rng& rng,
                                   const Vocab& vocab) {
  if (p_sub < 0 || p_sub > 1) {
    throw ValidationError("substitute_tokens: p_sub out of [0,1]: " + std::to_string(p_sub));
  }
  const int open = vocab.size() - Vocab::kReserved;
  std::vector<int> out = ids;
  if (open <= 0) return out;
  for (int& id : out) {
    if (id < Vocab::kReserved) continue;
    if (rng.uniform() < p_sub) {
      id = Vocab::kReserved + (int)rng.below((uint64_t)open);
    }
  }
  return out;
}

namespace {

const std::unordered_map<std::string, std::string>& synonym_table() {
  static const std::unordered_map<std::string, std::string> table = {
      {"big", "large"},     {"small", "little"},  {"happy", "glad"},
      {"sad", "unhappy"},   {"fast", "quick"},    {"slow", "unhurried"},
      {"walked", "strolled"}, {"said", "stated"}, {"house", "home"},
      {"good", "fine"},     {"bad", "poor"},      {"began", "started"},
      {"liked", "enjoyed"}, {"saw", "spotted"},   {"made", "built"},
      {"went", "traveled"}, {"found", "discovered"}, {"old", "aged"},
  };
  return table;
}

std::string rule_paraphrase(const std::string& segment, Rng& rng) {
  std::vector<std::string> tokens = tokenize(segment);
  const auto& syn = synonym_table();
  for (auto& t : tokens) {
    auto it = syn.find(t);
    if (it != syn.end()) t = it->second;
  }
  const int max_drop = (int)tokens.size() / 10;
  std::vector<std::string> kept;
  int dropped = 0;
  for (auto& t : tokens) {
    if (dropped < max_drop && rng.uniform() < 0.1) {
      ++dropped;
      continue;
    }
    kept.push_back(t);
  }
  if (kept.empty()) kept = tokens;
  return detokenize(kept);
}

}  // namespace

ContrastiveTriple make_contrastive_triple(const std::string& segment,
                                          const std::unordered_map<std::string, std::string>& table,
                                          const std::vector<std::string>& ood_pool, Rng& rng) {
  if (ood_pool.empty()) throw ValidationError("make_contrastive_triple: empty OOD pool");
  ContrastiveTriple t;
  t.anchor = normalize_text(segment);
  auto it = table.find(t.anchor);
  if (it == table.end()) it = table.find(segment);
  t.positive = it != table.end() ? it->second : rule_paraphrase(t.anchor, rng);
  size_t idx = (size_t)rng.below(ood_pool.size());
  if (normalize_text(ood_pool[idx]) == t.anchor) {
    for (size_t step = 1; step < ood_pool.size(); ++step) {
      const size_t j = (idx + step) % ood_pool.size();
      if (normalize_text(ood_pool[j]) != t.anchor) {
        idx = j;
        break;
      }
    }
  }
  t.negative = normalize_text(ood_pool[idx]);
  return t;
}

}  // namespace sld
