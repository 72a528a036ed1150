#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "navprobe/common.hpp"

namespace navprobe {

enum class Objective { squared_error, logistic };

inline std::string objective_name(Objective o) {
  return o == Objective::squared_error ? "squared_error" : "logistic";
}

inline Objective objective_from_name(const std::string& name) {
  if (name == "squared_error") return Objective::squared_error;
  if (name == "logistic") return Objective::logistic;
  throw ValidationError("unknown objective: " + name);
}

struct TreeNode {
  int feature = -1;        // >= 0 iff internal; go left iff x[feature] < threshold
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
  double cover = 0.0;      // training rows that reached this node

  bool is_leaf() const { return feature < 0; }
};

using Tree = std::vector<TreeNode>;

struct TreeEnsemble {
  Objective objective = Objective::squared_error;
  double base_score = 0.0;  // raw margin
  double learning_rate = 0.3;
  int n_features = 0;
  std::vector<Tree> trees;
  bool degenerate = false;  // logistic fit received a single class
};

struct GbtParams {
  int rounds = 100;
  int max_depth = 10;
  double learning_rate = 0.3;
  double reg_lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  uint64_t seed = 0;  // reserved: exact greedy needs no randomness
  int jobs = 1;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// numerically stable log(1 + e^x)
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double objective_loss(Objective obj, const Vec& margins, const Vec& y) {
  double loss = 0.0;
  for (size_t i = 0; i < margins.size(); ++i) {
    if (obj == Objective::squared_error) {
      const double d = margins[i] - y[i];
      loss += 0.5 * d * d;
    } else {
      loss += softplus(margins[i]) - y[i] * margins[i];
    }
  }
  return loss;
}

// ----------------------------- prediction -----------------------------------

inline double tree_leaf_value(const Tree& tree, const double* x) {
  int node = 0;
  while (!tree[node].is_leaf())
    node = x[tree[node].feature] < tree[node].threshold ? tree[node].left : tree[node].right;
  return tree[node].leaf_value;
}

inline double predict_margin(const TreeEnsemble& e, const Vec& x) {
  if (static_cast<int>(x.size()) != e.n_features)
    throw ValidationError("predict: feature dimension mismatch");
  double m = e.base_score;
  for (const Tree& t : e.trees) m += tree_leaf_value(t, x.data());
  return m;
}

// probability for logistic, identity for squared error
inline double predict_value(const TreeEnsemble& e, const Vec& x) {
  const double m = predict_margin(e, x);
  return e.objective == Objective::logistic ? sigmoid(m) : m;
}

inline Vec predict_margins(const TreeEnsemble& e, const Mat& X) {
  if (X.cols != e.n_features) throw ValidationError("predict: feature dimension mismatch");
  Vec out(X.rows, e.base_score);
  for (const Tree& t : e.trees)
    for (int i = 0; i < X.rows; ++i) out[i] += tree_leaf_value(t, X.row(i));
  return out;
}

// ----------------------------- validation -----------------------------------

inline void validate_ensemble(const TreeEnsemble& e, size_t expected_root_cover = 0) {
  for (size_t t = 0; t < e.trees.size(); ++t) {
    const Tree& tree = e.trees[t];
    if (tree.empty()) throw ValidationError("ensemble: tree " + std::to_string(t) + " is empty");
    if (expected_root_cover > 0 && tree[0].cover != static_cast<double>(expected_root_cover))
      throw ValidationError("ensemble: tree " + std::to_string(t) + " root cover mismatch");
    for (size_t n = 0; n < tree.size(); ++n) {
      const TreeNode& node = tree[n];
      const std::string where = "tree " + std::to_string(t) + " node " + std::to_string(n);
      if (node.cover <= 0.0) throw ValidationError("ensemble: nonpositive cover at " + where);
      if (node.is_leaf()) {
        if (!std::isfinite(node.leaf_value))
          throw ValidationError("ensemble: non-finite leaf value at " + where);
        continue;
      }
      if (node.feature >= e.n_features)
        throw ValidationError("ensemble: feature index out of range at " + where);
      if (!std::isfinite(node.threshold))
        throw ValidationError("ensemble: non-finite threshold at " + where);
      if (node.left < 0 || node.right < 0 || node.left >= static_cast<int>(tree.size()) ||
          node.right >= static_cast<int>(tree.size()))
        throw ValidationError("ensemble: bad child index at " + where);
      if (tree[node.left].cover + tree[node.right].cover != node.cover)
        throw ValidationError("ensemble: cover not conserved at " + where);
    }
  }
}

// ----------------------------- training -------------------------------------

namespace detail {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool valid = false;
};

struct NodeStats {
  double grad = 0.0;
  double hess = 0.0;
  int count = 0;
};

}  // namespace detail

// Exact greedy boosting. Feature columns are pre-sorted once per fit; every
// level walks each column in value order, accumulating per-node partial sums,
// so no re-sorting happens inside the tree build. The cross-feature reduction
// runs in fixed feature order, which keeps results independent of `jobs`.
inline TreeEnsemble fit_gbt(const Mat& X, const Vec& y, Objective objective,
                            const GbtParams& params) {
  const int n = X.rows;
  const int m = X.cols;
  if (n < 2) throw ValidationError("fit_gbt: need at least 2 rows");
  if (y.size() != static_cast<size_t>(n)) throw ValidationError("fit_gbt: target length mismatch");

  TreeEnsemble ensemble;
  ensemble.objective = objective;
  ensemble.base_score = 0.0;  // raw margin; 0 = logit(0.5) for logistic
  ensemble.learning_rate = params.learning_rate;
  ensemble.n_features = m;

  if (objective == Objective::logistic) {
    bool has0 = false, has1 = false;
    for (double v : y) {
      if (v == 0.0) has0 = true;
      else if (v == 1.0) has1 = true;
      else throw ValidationError("fit_gbt: logistic targets must be 0/1");
    }
    if (!has0 || !has1) {
      ensemble.degenerate = true;  // base-only model
      return ensemble;
    }
  }

  // pre-sorted column order, ties by row index
  std::vector<std::vector<int>> sorted(m);
  parallel_for(static_cast<size_t>(m), params.jobs, [&](size_t f) {
    auto& idx = sorted[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return X.at(a, static_cast<int>(f)) < X.at(b, static_cast<int>(f)); });
  });

  Vec margins(n, ensemble.base_score);
  Vec grad(n), hess(n);
  std::vector<int> node_of(n);      // row -> tree node index
  std::vector<int> slot_of;         // tree node index -> level slot, or -1

  for (int round = 0; round < params.rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      if (objective == Objective::squared_error) {
        grad[i] = margins[i] - y[i];
        hess[i] = 1.0;
      } else {
        const double p = sigmoid(margins[i]);
        grad[i] = p - y[i];
        hess[i] = std::max(p * (1.0 - p), 1e-16);
      }
    }

    Tree tree;
    tree.push_back(TreeNode{});
    tree[0].cover = n;
    std::fill(node_of.begin(), node_of.end(), 0);

    std::vector<int> level_nodes{0};  // tree node indices open at this depth
    std::vector<detail::NodeStats> level_stats(1);
    for (int i = 0; i < n; ++i) {
      level_stats[0].grad += grad[i];
      level_stats[0].hess += hess[i];
      level_stats[0].count += 1;
    }

    for (int depth = 0; depth < params.max_depth && !level_nodes.empty(); ++depth) {
      const int slots = static_cast<int>(level_nodes.size());
      slot_of.assign(tree.size(), -1);
      for (int s = 0; s < slots; ++s) slot_of[level_nodes[s]] = s;

      // per-feature best split per slot
      std::vector<detail::SplitCandidate> per_feature(static_cast<size_t>(m) * slots);
      parallel_for(static_cast<size_t>(m), params.jobs, [&](size_t fs) {
        const int f = static_cast<int>(fs);
        std::vector<detail::NodeStats> acc(slots);
        std::vector<double> last_val(slots);
        std::vector<uint8_t> started(slots, 0);
        detail::SplitCandidate* best = per_feature.data() + static_cast<size_t>(f) * slots;
        for (int k = 0; k < n; ++k) {
          const int row = sorted[f][k];
          const int node = node_of[row];
          if (node >= static_cast<int>(slot_of.size())) continue;
          const int s = slot_of[node];
          if (s < 0) continue;
          const double v = X.at(row, f);
          if (started[s] && v > last_val[s]) {
            const double threshold = 0.5 * (last_val[s] + v);
            if (last_val[s] < threshold && threshold <= v) {
              const detail::NodeStats& tot = level_stats[s];
              const double gl = acc[s].grad, hl = acc[s].hess;
              const double gr = tot.grad - gl, hr = tot.hess - hl;
              if (hl >= params.min_child_weight && hr >= params.min_child_weight) {
                const double lam = params.reg_lambda;
                const double gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) -
                                           tot.grad * tot.grad / (tot.hess + lam)) -
                                    params.gamma;
                if (!best[s].valid || gain > best[s].gain) {
                  best[s] = {gain, f, threshold, true};
                }
              }
            }
          }
          acc[s].grad += grad[row];
          acc[s].hess += hess[row];
          acc[s].count += 1;
          last_val[s] = v;
          started[s] = 1;
        }
      });

      // reduce across features in ascending feature order (ties keep the
      // lower feature; within a feature the scan already keeps the lowest
      // threshold among equal gains)
      std::vector<detail::SplitCandidate> chosen(slots);
      for (int f = 0; f < m; ++f) {
        const detail::SplitCandidate* best = per_feature.data() + static_cast<size_t>(f) * slots;
        for (int s = 0; s < slots; ++s) {
          if (best[s].valid && (!chosen[s].valid || best[s].gain > chosen[s].gain)) chosen[s] = best[s];
        }
      }

      std::vector<int> next_nodes;
      std::vector<detail::NodeStats> next_stats;
      std::vector<uint8_t> splits(slots, 0);
      for (int s = 0; s < slots; ++s) {
        if (!chosen[s].valid || chosen[s].gain <= 0.0) continue;
        splits[s] = 1;
        const int node = level_nodes[s];
        const int left = static_cast<int>(tree.size());
        tree.push_back(TreeNode{});
        const int right = static_cast<int>(tree.size());
        tree.push_back(TreeNode{});
        tree[node].feature = chosen[s].feature;
        tree[node].threshold = chosen[s].threshold;
        tree[node].left = left;
        tree[node].right = right;
        next_nodes.push_back(left);
        next_nodes.push_back(right);
        next_stats.push_back({});
        next_stats.push_back({});
      }
      if (next_nodes.empty()) break;

      // partition rows of split nodes; children stats accumulate in row order
      std::vector<int> child_slot(tree.size(), -1);
      for (size_t s2 = 0; s2 < next_nodes.size(); ++s2) child_slot[next_nodes[s2]] = static_cast<int>(s2);
      for (int i = 0; i < n; ++i) {
        const int node = node_of[i];
        if (node >= static_cast<int>(slot_of.size())) continue;
        const int s = slot_of[node];
        if (s < 0 || !splits[s]) continue;
        const TreeNode& parent = tree[node];
        const int child = X.at(i, parent.feature) < parent.threshold ? parent.left : parent.right;
        node_of[i] = child;
        detail::NodeStats& st = next_stats[child_slot[child]];
        st.grad += grad[i];
        st.hess += hess[i];
        st.count += 1;
      }
      for (size_t s2 = 0; s2 < next_nodes.size(); ++s2)
        tree[next_nodes[s2]].cover = next_stats[s2].count;

      level_nodes = std::move(next_nodes);
      level_stats = std::move(next_stats);
    }

    // finalize leaves: every node without children gets the Newton step value
    slot_of.assign(tree.size(), -1);
    for (int s = 0; s < static_cast<int>(level_nodes.size()); ++s) slot_of[level_nodes[s]] = s;
    std::vector<detail::NodeStats> leaf_stats(tree.size());
    for (int i = 0; i < n; ++i) {
      detail::NodeStats& st = leaf_stats[node_of[i]];
      st.grad += grad[i];
      st.hess += hess[i];
      st.count += 1;
    }
    for (size_t nd = 0; nd < tree.size(); ++nd) {
      if (!tree[nd].is_leaf()) continue;
      const detail::NodeStats& st = leaf_stats[nd];
      tree[nd].leaf_value =
          st.count == 0 ? 0.0
                        : -st.grad / (st.hess + params.reg_lambda) * params.learning_rate;
    }
    for (int i = 0; i < n; ++i) margins[i] += tree[node_of[i]].leaf_value;

    ensemble.trees.push_back(std::move(tree));
  }

  validate_ensemble(ensemble, static_cast<size_t>(n));
  return ensemble;
}

// ----------------------------- serialization --------------------------------
// {"objective", "base_score", "learning_rate", "n_features", "degenerate",
//  "trees": [[{node}...]...]}; internal nodes carry feature/threshold/left/
//  right/cover, leaves carry leaf_value/cover.

inline nlohmann::json ensemble_to_json(const TreeEnsemble& e) {
  nlohmann::json j;
  j["objective"] = objective_name(e.objective);
  j["base_score"] = e.base_score;
  j["learning_rate"] = e.learning_rate;
  j["n_features"] = e.n_features;
  j["degenerate"] = e.degenerate;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const Tree& tree : e.trees) {
    nlohmann::json jt = nlohmann::json::array();
    for (const TreeNode& node : tree) {
      if (node.is_leaf()) {
        jt.push_back({{"leaf_value", node.leaf_value}, {"cover", node.cover}});
      } else {
        jt.push_back({{"feature", node.feature},
                      {"threshold", node.threshold},
                      {"left", node.left},
                      {"right", node.right},
                      {"cover", node.cover}});
      }
    }
    trees.push_back(std::move(jt));
  }
  return j;
}

inline TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
  TreeEnsemble e;
  try {
    e.objective = objective_from_name(j.at("objective").get<std::string>());
    e.base_score = j.at("base_score").get<double>();
    e.learning_rate = j.at("learning_rate").get<double>();
    e.n_features = j.at("n_features").get<int>();
    e.degenerate = j.value("degenerate", false);
    size_t ti = 0;
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      size_t ni = 0;
      for (const auto& jn : jt) {
        TreeNode node;
        if (jn.contains("leaf_value")) {
          if (jn.contains("feature"))
            throw ValidationError("model file: tree " + std::to_string(ti) + " node " +
                                  std::to_string(ni) + " mixes leaf and internal fields");
          node.leaf_value = jn.at("leaf_value").get<double>();
        } else {
          node.feature = jn.at("feature").get<int>();
          node.threshold = jn.at("threshold").get<double>();
          node.left = jn.at("left").get<int>();
          node.right = jn.at("right").get<int>();
        }
        node.cover = jn.at("cover").get<double>();
        tree.push_back(node);
        ++ni;
      }
      e.trees.push_back(std::move(tree));
      ++ti;
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("model file: malformed JSON: ") + ex.what());
  }
  validate_ensemble(e);
  return e;
}

inline void save_ensemble(const TreeEnsemble& e, const std::filesystem::path& path) {
  write_text_file(path, ensemble_to_json(e).dump() + "\n");
}

inline TreeEnsemble load_ensemble(const std::filesystem::path& path) {
  return ensemble_from_json(nlohmann::json::parse(read_text_file(path)));
}

}  // namespace navprobe
