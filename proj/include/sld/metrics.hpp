#pragma once

#include <string>
#include <vector>

namespace sld {

// Corpus-level BLEU up to 4-grams: unsmoothed unigram precision, add-one
// smoothing on higher orders, brevity penalty over total lengths. Candidates
// with no tokens score 0.
double bleu_corpus(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references);

double bleu_pair(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference);

// LCS-based F1: P = LCS/|cand|, R = LCS/|ref|, F1 = 2PR/(P+R); 0 when the LCS
// is empty.
double rouge_l_f1(const std::vector<std::string>& candidate,
                  const std::vector<std::string>& reference);

}  // namespace sld
