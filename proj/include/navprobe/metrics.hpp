#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "navprobe/common.hpp"

namespace navprobe {

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;  // a zero-variance input; r reported as 0
};

// Sample Pearson correlation. Zero variance on either side yields r=0 with the
// degenerate flag set instead of NaN.
inline PearsonResult pearson(const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ValidationError("pearson: inputs must have equal length >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return {0.0, true};
  return {sab / std::sqrt(saa * sbb), false};
}

struct AucResult {
  double auc = 0.0;
  bool defined = false;  // false when labels contain a single class
};

// Rank-based ROC AUC: probability that a random positive outscores a random
// negative, ties counting one half.
inline AucResult roc_auc(const Vec& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ValidationError("roc_auc: scores and labels must have equal length");
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("roc_auc: labels must be 0/1");
    n_pos += static_cast<size_t>(y);
  }
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return {0.0, false};

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t x, size_t y) { return scores[x] < scores[y]; });

  // average ranks within tie groups, 1-based
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return {(rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn), true};
}

struct EpisodeOutcome {
  bool success = false;
  double path_length = 0.0;      // meters traveled
  double shortest_length = 0.0;  // geodesic spawn -> goal, meters
  int steps = 0;
};

// Success weighted by Path Length: mean over episodes of S_i * l_i / max(p_i, l_i).
// An episode that starts at the goal (l_i = 0) and succeeds contributes 1.
inline double spl(const std::vector<EpisodeOutcome>& outcomes) {
  if (outcomes.empty()) throw ValidationError("spl: empty outcome list");
  double total = 0.0;
  for (const auto& o : outcomes) {
    if (!o.success) continue;
    if (o.shortest_length <= 0.0) {
      total += 1.0;
      continue;
    }
    total += o.shortest_length / std::max(o.path_length, o.shortest_length);
  }
  return total / static_cast<double>(outcomes.size());
}

inline double success_rate(const std::vector<EpisodeOutcome>& outcomes) {
  if (outcomes.empty()) throw ValidationError("success_rate: empty outcome list");
  double s = 0.0;
  for (const auto& o : outcomes) s += o.success ? 1.0 : 0.0;
  return s / static_cast<double>(outcomes.size());
}

inline double mean_episode_length(const std::vector<EpisodeOutcome>& outcomes) {
  if (outcomes.empty()) throw ValidationError("mean_episode_length: empty outcome list");
  double s = 0.0;
  for (const auto& o : outcomes) s += static_cast<double>(o.steps);
  return s / static_cast<double>(outcomes.size());
}

}  // namespace navprobe
