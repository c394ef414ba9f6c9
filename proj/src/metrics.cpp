#include "sld/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sld/error.hpp"

namespace sld {

namespace {

constexpr int kMaxOrder = 4;

std::map<std::vector<std::string>, long long> ngram_counts(const std::vector<std::string>& toks,
                                                           int order) {
  std::map<std::vector<std::string>, long long> counts;
  if ((int)toks.size() < order) return counts;
  for (size_t i = 0; i + order <= toks.size(); ++i) {
    counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + order)] += 1;
  }
  return counts;
}

}  // namespace

double bleu_corpus(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size()) {
    throw ValidationError("bleu: candidate/reference count mismatch");
  }
  if (candidates.empty()) throw ValidationError("bleu: empty corpus");

  long long matched[kMaxOrder] = {0, 0, 0, 0};
  long long total[kMaxOrder] = {0, 0, 0, 0};
  long long cand_len = 0, ref_len = 0;
  for (size_t e = 0; e < candidates.size(); ++e) {
    const auto& cand = candidates[e];
    const auto& ref = references[e];
    cand_len += (long long)cand.size();
    ref_len += (long long)ref.size();
    for (int order = 1; order <= kMaxOrder; ++order) {
      const auto cc = ngram_counts(cand, order);
      const auto rc = ngram_counts(ref, order);
      for (const auto& [gram, cnt] : cc) {
        total[order - 1] += cnt;
        auto it = rc.find(gram);
        if (it != rc.end()) matched[order - 1] += std::min(cnt, it->second);
      }
    }
  }

  if (cand_len == 0 || total[0] == 0 || matched[0] == 0) return 0.0;
  double logsum = std::log((double)matched[0] / (double)total[0]);
  for (int o = 1; o < kMaxOrder; ++o) {
    logsum += std::log((double)(matched[o] + 1) / (double)(total[o] + 1));
  }
  double bleu = std::exp(logsum / kMaxOrder);
  if (cand_len < ref_len) bleu *= std::exp(1.0 - (double)ref_len / (double)cand_len);
  return bleu;
}

double bleu_pair(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference) {
  return bleu_corpus({candidate}, {reference});
}

double rouge_l_f1(const std::vector<std::string>& candidate,
                  const std::vector<std::string>& reference) {
  const size_t nc = candidate.size(), nr = reference.size();
  if (nc == 0 || nr == 0) return 0.0;
  std::vector<long long> prev(nr + 1, 0), cur(nr + 1, 0);
  for (size_t i = 1; i <= nc; ++i) {
    for (size_t j = 1; j <= nr; ++j) {
      if (candidate[i - 1] == reference[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const double lcs = (double)prev[nr];
  if (lcs == 0) return 0.0;
  const double p = lcs / (double)nc;
  const double r = lcs / (double)nr;
  return 2.0 * p * r / (p + r);
}

}  // namespace sld
