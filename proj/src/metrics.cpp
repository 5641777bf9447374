#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "ega/errors.hpp"
#include "ega/harness.hpp"

namespace ega::harness {

std::vector<Fold> kfold_split(const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold: k must be >= 2");
  if (k > labels.size())
    throw ConfigError("kfold: k = " + std::to_string(k) + " exceeds the sample count " +
                      std::to_string(labels.size()));
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<std::vector<std::size_t>> eval(k);
  std::size_t next = 0;  // continue dealing where the previous class stopped
  for (auto& [label, idx] : by_class) {
    if (idx.size() < k)
      throw ConfigError("kfold: class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                        " samples, fewer than k = " + std::to_string(k));
    std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(label)};
    std::mt19937_64 rng(sseq);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) {
      eval[next].push_back(i);
      next = (next + 1) % k;
    }
  }

  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(eval[f].begin(), eval[f].end());
    folds[f].eval = eval[f];
    std::vector<bool> in_eval(labels.size(), false);
    for (std::size_t i : eval[f]) in_eval[i] = true;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (!in_eval[i]) folds[f].train.push_back(i);
  }
  return folds;
}

double f1_score(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("f1: " + std::to_string(preds.size()) + " predictions for " +
                                std::to_string(labels.size()) + " labels");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == 1, l = labels[i] == 1;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auroc: " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(labels.size()) + " labels");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) {
        rank_sum += midrank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auroc: eval set has a single class");
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

}  // namespace ega::harness
