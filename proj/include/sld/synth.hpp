#pragma once

#include <map>
#include <string>
#include <vector>

#include "sld/corpus.hpp"

namespace sld {

// Template grammar for synthetic corpora: titles and sentence lists with
// {slot} placeholders, an aligned paraphrase surface per sentence, and a
// disjoint template family for the out-of-domain pool.
struct GrammarTemplate {
  std::string title;
  std::vector<std::string> sentences;
  std::vector<std::string> paraphrases;  // same length as sentences
};

struct GrammarSpec {
  SegmentMode mode = SegmentMode::kSentence;
  int train_count = 0;
  int valid_count = 0;
  int segments_min = 1;
  int segments_max = 1;
  bool unique_inputs = false;
  std::map<std::string, std::vector<std::string>> slots;  // ordered for determinism
  std::vector<GrammarTemplate> templates;
  std::vector<std::string> ood_templates;
  int ood_count = 0;
};

GrammarSpec load_grammar(const std::string& path);

struct SynthFiles {
  std::string train;
  std::string valid;
  std::string paraphrases;
  std::string ood;
};

// Deterministically renders train/valid JSONL, the aligned paraphrase table,
// and the OOD pool under out_dir. Errors out if any rendered segment exceeds
// the m_seg token budget.
SynthFiles generate_synthetic_corpus(const GrammarSpec& spec, uint64_t seed, int m_seg,
                                     const std::string& out_dir);

// The grammar's full surface token inventory (fillers substituted), used to
// bound generated vocabularies in tests.
std::vector<std::string> grammar_token_inventory(const GrammarSpec& spec);

}  // namespace sld
