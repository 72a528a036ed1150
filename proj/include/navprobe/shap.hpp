#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "navprobe/common.hpp"
#include "navprobe/gbt.hpp"

namespace navprobe {

struct ShapExplanation {
  long long example_id = 0;
  Vec phi;                 // one Shapley value per feature, margin units
  double base_value = 0.0; // expected margin over the training distribution
  double fx = 0.0;         // model margin at x
};

struct UnitRanking {
  std::string concept_name;
  Vec mean_abs_shap;
  std::vector<int> order;  // descending mean |phi|, ties toward the lower index
};

// ----------------------------------------------------------------------------
// Conditional expectation of a single tree under the path-dependent (cover
// weighted) estimator: at a split on a feature in S follow x, otherwise
// average both children by cover.

inline double cond_expectation(const Tree& tree, const Vec& x,
                               const std::vector<uint8_t>& in_set, int node = 0) {
  const TreeNode& nd = tree[node];
  if (nd.is_leaf()) return nd.leaf_value;
  if (in_set[nd.feature])
    return cond_expectation(tree, x, in_set,
                            x[nd.feature] < nd.threshold ? nd.left : nd.right);
  const double wl = tree[nd.left].cover;
  const double wr = tree[nd.right].cover;
  return (wl * cond_expectation(tree, x, in_set, nd.left) +
          wr * cond_expectation(tree, x, in_set, nd.right)) /
         (wl + wr);
}

// ----------------------------------------------------------------------------
// Exact Shapley values by subset enumeration. The enumeration oracle for
// tree_shap; refuses M > 15.

inline Vec brute_force_shapley(const TreeEnsemble& e, const Vec& x) {
  const int m = e.n_features;
  if (static_cast<int>(x.size()) != m) throw ValidationError("brute_force_shapley: dimension mismatch");
  if (m > 15)
    throw ValidationError("brute_force_shapley: feature count > 15; use tree_shap instead");

  // f_x(S) summed over trees for every subset (base score cancels in differences)
  const uint32_t n_masks = 1u << m;
  Vec value(n_masks, 0.0);
  std::vector<uint8_t> in_set(m, 0);
  for (uint32_t mask = 0; mask < n_masks; ++mask) {
    for (int f = 0; f < m; ++f) in_set[f] = (mask >> f) & 1u;
    double v = 0.0;
    for (const Tree& t : e.trees) v += cond_expectation(t, x, in_set);
    value[mask] = v;
  }

  Vec factorial(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) factorial[i] = factorial[i - 1] * i;

  Vec phi(m, 0.0);
  for (uint32_t mask = 0; mask < n_masks; ++mask) {
    const int s = std::popcount(mask);
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) continue;
      const double weight = factorial[s] * factorial[m - s - 1] / factorial[m];
      phi[i] += weight * (value[mask | (1u << i)] - value[mask]);
    }
  }
  return phi;
}

// ----------------------------------------------------------------------------
// Path-dependent TreeSHAP. One root-to-leaf recursion per tree maintains the
// weighted set of feature-subset path contributions (the EXTEND / UNWIND
// bookkeeping over path elements carrying zero/one fractions and proportional
// covers). Per-tree totals combine through exactly rounded summation so tree
// concatenation behaves additively.

namespace detail {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

inline void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                        int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / (depth + 1);
    path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / (depth + 1);
  }
}

inline void unwind_path(PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one = path[depth].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one * (depth + 1) / ((i + 1) * one_fraction);
      next_one = tmp - path[i].pweight * zero_fraction * (depth - i) / (depth + 1);
    } else {
      path[i].pweight = path[i].pweight * (depth + 1) / (zero_fraction * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

inline double unwound_path_sum(const PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one = path[depth].pweight;
  double total = 0.0;
  if (one_fraction != 0.0) {
    for (int i = depth - 1; i >= 0; --i) {
      const double tmp = next_one / ((i + 1) * one_fraction);
      total += tmp;
      next_one = path[i].pweight - tmp * zero_fraction * (depth - i);
    }
  } else {
    for (int i = depth - 1; i >= 0; --i) total += path[i].pweight / (zero_fraction * (depth - i));
  }
  return total * (depth + 1);
}

inline void tree_shap_recurse(const Tree& tree, const Vec& x, Vec& phi, int node, int depth,
                              PathElement* parent_path, double parent_zero, double parent_one,
                              int parent_feature) {
  PathElement* path = parent_path + depth + 1;
  std::copy(parent_path, parent_path + depth + 1, path);
  extend_path(path, depth, parent_zero, parent_one, parent_feature);

  const TreeNode& nd = tree[node];
  if (nd.is_leaf()) {
    for (int i = 1; i <= depth; ++i) {
      const double w = unwound_path_sum(path, depth, i);
      const PathElement& el = path[i];
      phi[el.feature] += w * (el.one_fraction - el.zero_fraction) * nd.leaf_value;
    }
    return;
  }

  if (tree[nd.left].cover + tree[nd.right].cover != nd.cover)
    throw ValidationError("tree_shap: cover not conserved during descent");

  const int hot = x[nd.feature] < nd.threshold ? nd.left : nd.right;
  const int cold = hot == nd.left ? nd.right : nd.left;
  const double hot_zero = tree[hot].cover / nd.cover;
  const double cold_zero = tree[cold].cover / nd.cover;

  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  int path_index = 0;
  for (; path_index <= depth; ++path_index)
    if (path[path_index].feature == nd.feature) break;
  if (path_index != depth + 1) {
    incoming_zero = path[path_index].zero_fraction;
    incoming_one = path[path_index].one_fraction;
    unwind_path(path, depth, path_index);
    depth -= 1;
  }

  tree_shap_recurse(tree, x, phi, hot, depth + 1, path, hot_zero * incoming_zero, incoming_one,
                    nd.feature);
  tree_shap_recurse(tree, x, phi, cold, depth + 1, path, cold_zero * incoming_zero, 0.0,
                    nd.feature);
}

inline int tree_max_depth(const Tree& tree, int node = 0) {
  if (tree[node].is_leaf()) return 0;
  return 1 + std::max(tree_max_depth(tree, tree[node].left), tree_max_depth(tree, tree[node].right));
}

// cover-weighted mean of the leaves below every node
inline double tree_root_expectation(const Tree& tree, int node = 0) {
  const TreeNode& nd = tree[node];
  if (nd.is_leaf()) return nd.leaf_value;
  const double wl = tree[nd.left].cover;
  const double wr = tree[nd.right].cover;
  return (wl * tree_root_expectation(tree, nd.left) + wr * tree_root_expectation(tree, nd.right)) /
         (wl + wr);
}

}  // namespace detail

inline ShapExplanation tree_shap(const TreeEnsemble& e, const Vec& x, long long example_id = 0) {
  const int m = e.n_features;
  if (static_cast<int>(x.size()) != m) throw ValidationError("tree_shap: dimension mismatch");

  std::vector<ExactSum> phi_sum(m);
  ExactSum base_sum;
  Vec tree_phi(m);
  std::vector<detail::PathElement> path_buffer;

  for (const Tree& tree : e.trees) {
    std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
    const int maxd = detail::tree_max_depth(tree) + 2;
    path_buffer.assign(static_cast<size_t>(maxd) * (maxd + 1) / 2, {});
    detail::tree_shap_recurse(tree, x, tree_phi, 0, 0, path_buffer.data(), 1.0, 1.0, -1);
    for (int f = 0; f < m; ++f)
      if (tree_phi[f] != 0.0) phi_sum[f].add(tree_phi[f]);
    base_sum.add(detail::tree_root_expectation(tree));
  }

  ShapExplanation out;
  out.example_id = example_id;
  out.phi.resize(m);
  for (int f = 0; f < m; ++f) out.phi[f] = phi_sum[f].value();
  out.base_value = base_sum.value() + e.base_score;
  out.fx = predict_margin(e, x);

  double check = out.base_value;
  for (double p : out.phi) check += p;
  if (std::abs(check - out.fx) > 1e-8)
    throw NumericError("tree_shap: local accuracy violated (|base + sum(phi) - margin| = " +
                       fmt_double(std::abs(check - out.fx)) + ")");
  return out;
}

// ----------------------------------------------------------------------------
// Aggregation: mean of absolute SHAP values over examples, plus the descending
// unit order used everywhere downstream.

inline UnitRanking aggregate_and_rank(const std::vector<ShapExplanation>& explanations,
                                      const std::string& concept_name) {
  if (explanations.empty()) throw ValidationError("aggregate_and_rank: no explanations");
  const size_t m = explanations.front().phi.size();
  UnitRanking ranking;
  ranking.concept_name = concept_name;
  ranking.mean_abs_shap.assign(m, 0.0);
  for (const auto& ex : explanations) {
    if (ex.phi.size() != m) throw ValidationError("aggregate_and_rank: inconsistent dimensions");
    for (size_t f = 0; f < m; ++f) ranking.mean_abs_shap[f] += std::abs(ex.phi[f]);
  }
  for (size_t f = 0; f < m; ++f) ranking.mean_abs_shap[f] /= static_cast<double>(explanations.size());
  ranking.order.resize(m);
  std::iota(ranking.order.begin(), ranking.order.end(), 0);
  std::stable_sort(ranking.order.begin(), ranking.order.end(), [&](int a, int b) {
    if (ranking.mean_abs_shap[a] != ranking.mean_abs_shap[b])
      return ranking.mean_abs_shap[a] > ranking.mean_abs_shap[b];
    return a < b;
  });
  return ranking;
}

inline nlohmann::json ranking_to_json(const UnitRanking& r) {
  return {{"concept", r.concept_name}, {"mean_abs_shap", r.mean_abs_shap}, {"order", r.order}};
}

inline UnitRanking ranking_from_json(const nlohmann::json& j) {
  UnitRanking r;
  r.concept_name = j.at("concept").get<std::string>();
  r.mean_abs_shap = j.at("mean_abs_shap").get<Vec>();
  r.order = j.at("order").get<std::vector<int>>();
  return r;
}

// ----------------------------------------------------------------------------
// Beeswarm table: one row per (top-k unit, example), rank-major then example
// order. `activation` is the raw hidden-unit output for the colored axis.

struct BeeswarmRow {
  int unit = 0;
  long long example = 0;
  double shap = 0.0;
  double activation = 0.0;
};

inline std::vector<BeeswarmRow> beeswarm_export(const std::vector<ShapExplanation>& explanations,
                                                const Mat& activations, const UnitRanking& ranking,
                                                int k) {
  if (k < 0 || k > static_cast<int>(ranking.order.size()))
    throw ValidationError("beeswarm_export: k out of range");
  if (activations.rows != static_cast<int>(explanations.size()))
    throw ValidationError("beeswarm_export: activation rows do not match explanations");
  std::vector<BeeswarmRow> rows;
  rows.reserve(static_cast<size_t>(k) * explanations.size());
  for (int r = 0; r < k; ++r) {
    const int unit = ranking.order[r];
    for (size_t i = 0; i < explanations.size(); ++i) {
      rows.push_back({unit, explanations[i].example_id, explanations[i].phi[unit],
                      activations.at(static_cast<int>(i), unit)});
    }
  }
  return rows;
}

}  // namespace navprobe
