#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sld/rng.hpp"
#include "sld/vocab.hpp"

namespace sld {

struct Example {
  std::string id;
  std::string input_text;
  std::string output_text;
  std::vector<std::string> segments;  // optional pre-split output
};

enum class SegmentMode { kSentence, kUtterance };
SegmentMode segment_mode_from_string(const std::string& s);
const char* segment_mode_name(SegmentMode m);
// " " for sentence mode, "\n" for utterance mode.
std::string segment_joiner(SegmentMode m);

std::vector<Example> load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const std::string& path, const std::vector<Example>& examples);

std::unordered_map<std::string, std::string> load_paraphrase_table(const std::string& path);
void save_paraphrase_table(const std::string& path,
                           const std::vector<std::pair<std::string, std::string>>& rows);
std::vector<std::string> load_ood_pool(const std::string& path);

Vocab build_vocab(const std::vector<Example>& corpus, long long min_count);

// Splits output text into ordered, non-overlapping segments. Sentence mode
// cuts after ./!/? followed by whitespace; utterance mode starts a segment at
// each line opening with a "#speaker#:" tag. Unsplittable text is a single
// segment. Segments come back normalized.
std::vector<std::string> segment_output(const std::string& text, SegmentMode mode);

// Returns the example's segments, deriving them from output_text when absent.
std::vector<std::string> example_segments(const Example& ex, SegmentMode mode);

struct SegmentBatch {
  int n = 0;
  int m_seg = 0;
  std::vector<int> ids;        // n * m_seg token ids
  std::vector<uint8_t> real;   // per slot
  std::vector<int> len;        // tokens before padding, BOS/EOS included
  const int* row(int s) const { return ids.data() + (size_t)s * m_seg; }
  std::vector<int> slot_tokens(int s) const;  // row without padding
};

// [BOS, words..., EOS] with the tail truncated so total length <= m_seg.
std::vector<int> segment_token_ids(const Vocab& vocab, const std::string& segment, int m_seg);
// The canonical empty-slot sequence [BOS, EMPTY, EOS].
std::vector<int> empty_segment_ids();

// First min(j, n) segments tokenized; remaining slots carry the empty-marker
// sequence padded with PAD.
SegmentBatch collate_segments(const std::vector<std::string>& segments, int n, int m_seg,
                              const Vocab& vocab);

// Independently replaces each non-reserved position with a uniform draw over
// the non-reserved vocab with probability p_sub.
std::vector<int> substitute_tokens(const std::vector<int>& ids, double p_sub, Rng& rng,
                                   const Vocab& vocab);

struct ContrastiveTriple {
  std::string anchor;
  std::string positive;
  std::string negative;
};

// Positive from the paraphrase table when present, otherwise a rule-based
// rewrite (fixed synonym table, then at most 10% token dropout). Negative is
// a uniform draw from the out-of-domain pool, never the anchor itself.
ContrastiveTriple make_contrastive_triple(const std::string& segment,
                                          const std::unordered_map<std::string, std::string>& table,
                                          const std::vector<std::string>& ood_pool, Rng& rng);

}  // namespace sld
