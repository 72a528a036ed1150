#pragma once

// Self-contained property suites behind the `verify` subcommand: the SHAP
// enumeration-oracle equivalence, the BPTT finite-difference check, and the
// gridworld metadata invariants. The acceptance harness drives the same
// functions at the full advertised sample counts.

#include <string>
#include <vector>

#include "navprobe/agent.hpp"
#include "navprobe/common.hpp"
#include "navprobe/gbt.hpp"
#include "navprobe/gridworld.hpp"
#include "navprobe/rollout.hpp"
#include "navprobe/scene.hpp"
#include "navprobe/shap.hpp"

namespace navprobe {

struct SuiteResult {
  std::string name;
  int passed = 0;
  int failed = 0;
  double worst = 0.0;  // suite-specific figure of merit (max error seen)
  std::string detail;
};

// ----------------------------- fixtures -------------------------------------

// Random valid ensemble: arbitrary structure, repeated features along a path,
// integer covers conserved bottom-up.
inline Tree random_fixture_tree(Rng& rng, int max_depth, int n_features) {
  Tree tree;
  auto build = [&](auto&& self, int depth) -> int {
    const int node = static_cast<int>(tree.size());
    tree.push_back(TreeNode{});
    const bool split = depth < max_depth && rng.real() < 0.75;
    if (!split) {
      tree[node].leaf_value = rng.range(-2.0, 2.0);
      tree[node].cover = static_cast<double>(1 + rng.uniform(8));
      return node;
    }
    const int feature = static_cast<int>(rng.uniform(static_cast<uint64_t>(n_features)));
    const double threshold = rng.range(-1.0, 1.0);
    const int left = self(self, depth + 1);
    const int right = self(self, depth + 1);
    tree[node].feature = feature;
    tree[node].threshold = threshold;
    tree[node].left = left;
    tree[node].right = right;
    tree[node].cover = tree[left].cover + tree[right].cover;
    return node;
  };
  build(build, 0);
  return tree;
}

inline TreeEnsemble random_fixture_ensemble(uint64_t seed, int max_trees, int max_depth,
                                            int n_features) {
  Rng rng(seed);
  TreeEnsemble e;
  e.n_features = n_features;
  const int n_trees = 1 + static_cast<int>(rng.uniform(static_cast<uint64_t>(max_trees)));
  for (int t = 0; t < n_trees; ++t)
    e.trees.push_back(random_fixture_tree(rng, max_depth, n_features));
  return e;
}

inline Vec random_fixture_input(Rng& rng, int n_features) {
  Vec x(n_features);
  for (double& v : x) v = rng.range(-1.2, 1.2);
  return x;
}

// ----------------------------- suites ---------------------------------------

// tree_shap vs brute-force enumeration, plus local accuracy and exact-zero
// dummies on every explanation checked.
inline SuiteResult verify_shap_oracle(int n_ensembles = 200, int inputs_per_ensemble = 10,
                                      double tolerance = 1e-9, int jobs = 1) {
  SuiteResult res{"shap_oracle", 0, 0, 0.0, ""};
  std::vector<double> worst(n_ensembles, 0.0);
  std::vector<uint8_t> ok(n_ensembles, 0);
  parallel_for(static_cast<size_t>(n_ensembles), jobs, [&](size_t i) {
    Rng rng(0x5eedULL + i);
    const int m = 2 + static_cast<int>(rng.uniform(11));  // M <= 12
    const TreeEnsemble e =
        random_fixture_ensemble(9000 + i, /*max_trees=*/20, /*max_depth=*/4, m);
    double local_worst = 0.0;
    bool local_ok = true;
    for (int k = 0; k < inputs_per_ensemble; ++k) {
      const Vec x = random_fixture_input(rng, m);
      const Vec oracle = brute_force_shapley(e, x);
      const ShapExplanation ex = tree_shap(e, x);
      double sum = ex.base_value;
      for (int f = 0; f < m; ++f) {
        local_worst = std::max(local_worst, std::abs(ex.phi[f] - oracle[f]));
        sum += ex.phi[f];
      }
      local_worst = std::max(local_worst, std::abs(sum - ex.fx));
      if (local_worst > tolerance) local_ok = false;
    }
    worst[i] = local_worst;
    ok[i] = local_ok ? 1 : 0;
  });
  for (int i = 0; i < n_ensembles; ++i) {
    res.worst = std::max(res.worst, worst[i]);
    ok[i] ? ++res.passed : ++res.failed;
  }
  res.detail = "max |tree_shap - brute_force| = " + fmt_double(res.worst);
  return res;
}

// analytic BPTT vs central finite differences on seeded small models, plus a
// mutation canary per model (a corrupted gradient must be flagged)
inline SuiteResult verify_grad_check(int n_models = 10, double tolerance = 1e-4) {
  SuiteResult res{"grad_check", 0, 0, 0.0, ""};
  for (int i = 0; i < n_models; ++i) {
    const uint64_t seed = 0xadadULL + i;
    Rng rng(seed);
    const TaskMode mode = i % 2 == 0 ? TaskMode::objectnav : TaskMode::pointnav;
    const int obs_dim = 3 + static_cast<int>(rng.uniform(4));
    const int hidden = 4 + static_cast<int>(rng.uniform(5));
    GruParams p = init_gru(mode, obs_dim, hidden, 3, 2, seed);

    std::vector<TrainSequence> batch;
    for (int s = 0; s < 2; ++s) {
      TrainSequence seq;
      seq.mode = mode;
      seq.target_class = mode == TaskMode::objectnav ? static_cast<int>(rng.uniform(2)) : -1;
      const int steps = 2 + static_cast<int>(rng.uniform(4));  // T <= 5
      for (int t = 0; t < steps; ++t) {
        TrainStep st;
        st.obs.resize(obs_dim);
        for (double& v : st.obs) v = rng.range(-1.0, 1.0);
        st.r_t = rng.range(0.0, 3.0);
        st.theta_t = rng.range(0.0, 360.0);
        st.label = static_cast<int>(rng.uniform(kNumActions));
        seq.steps.push_back(std::move(st));
      }
      batch.push_back(std::move(seq));
    }

    GruParams analytic = zeros_like(p);
    bptt_gradients(p, batch, analytic);
    const GruParams numeric = fd_gradients(p, batch);
    const double err = max_relative_error(analytic, numeric);
    res.worst = std::max(res.worst, err);

    GruParams corrupted = analytic;
    corrupted.U_h.at(hidden / 2, hidden / 3) += 1.0 + 2.0 * std::abs(corrupted.U_h.at(hidden / 2, hidden / 3));
    const bool mutation_flagged = max_relative_error(corrupted, numeric) > 1e-2;

    (err <= tolerance && mutation_flagged) ? ++res.passed : ++res.failed;
  }
  res.detail = "max relative gradient error = " + fmt_double(res.worst);
  return res;
}

// bearing/rotation equivariance, the exact threshold boundary, visited-chain
// implications on explorer episodes, collision <-> unchanged pose, step
// purity, and the blocked-ahead reachability signature
inline SuiteResult verify_metadata(int n_scenes = 6) {
  SuiteResult res{"metadata", 0, 0, 0.0, ""};
  const GridConfig cfg{};
  auto check = [&](bool ok) { ok ? ++res.passed : ++res.failed; };

  for (int i = 0; i < n_scenes; ++i) {
    const Scene scene =
        gen_scene(0x9c0ULL + i, {.width = 12, .depth = 12, .wall_density = 0.18, .n_objects = 2});
    const ObjectInstance& target = scene.objects.front();

    // rotation equivariance at every spawn
    for (const Spawn& spawn : scene.spawns) {
      const AgentPose pose = pose_from_spawn(scene, spawn);
      const TargetMetadata base_t = target_metadata(scene, pose, target, cfg);
      const auto base_bits = reachability_metadata(scene, pose, cfg);
      const int angles = cfg.probe_angles();
      bool ok = true;
      for (int delta = 90; delta < 360; delta += 90) {
        AgentPose rotated = pose;
        rotated.rotation = mod360(pose.rotation + delta);
        const TargetMetadata rot_t = target_metadata(scene, rotated, target, cfg);
        ok = ok && rot_t.R_t == base_t.R_t;
        ok = ok && std::abs(rot_t.theta_t - norm_deg(base_t.theta_t - delta)) < 1e-9;
        const auto bits = reachability_metadata(scene, rotated, cfg);
        const int shift = delta / cfg.probe_angle_step;
        for (int r = 0; r < static_cast<int>(cfg.radii.size()); ++r)
          for (int a = 0; a < angles; ++a)
            ok = ok && bits[r * angles + a] == base_bits[r * angles + (a + shift) % angles];
      }
      check(ok);
    }

    // explorer episode: visited chain, collision <-> unchanged pose, and the
    // collision => blocked-front-probe signature
    const GruParams params = init_gru(TaskMode::objectnav, observation_dim(cfg), 8, 4, 6, 7 + i);
    TaskSpec task;
    task.mode = TaskMode::objectnav;
    task.scene_id = scene.id;
    task.spawn = scene.spawns.front();
    task.target_index = 0;
    task.target_class = scene.objects[0].class_id;
    const auto actions = explorer_actions(scene, task.spawn, 0xabcULL + i, {}, cfg);
    const auto records = rollout_forced(scene, task, params, actions, {}, cfg, i);
    bool chain_ok = true, collision_ok = true, reach_ok = true;
    for (size_t t = 0; t < records.size(); ++t) {
      const auto& c = records[t].concepts;
      chain_ok = chain_ok && (!c.visited_lrh || c.visited_lr) && (!c.visited_lr || c.visited_l);
      const StepResult re = step(scene, records[t].pose, records[t].action, cfg);
      const bool pose_unchanged = re.pose.x == records[t].pose.x &&
                                  re.pose.z == records[t].pose.z &&
                                  re.pose.rotation == records[t].pose.rotation &&
                                  re.pose.horizon == records[t].pose.horizon;
      if (records[t].collision) collision_ok = collision_ok && pose_unchanged;
      if (records[t].action == Action::MoveAhead)
        collision_ok = collision_ok && (records[t].collision == pose_unchanged);
      if (records[t].collision) {
        const auto bits = reachability_metadata(scene, records[t].pose, cfg);
        reach_ok = reach_ok && bits[0] == 0;  // radius 2, angle 0
      }
    }
    check(chain_ok);
    check(collision_ok);
    check(reach_ok);

    // step purity on a sample of poses and actions
    bool purity_ok = true;
    for (const Spawn& spawn : scene.spawns) {
      const AgentPose pose = pose_from_spawn(scene, spawn);
      for (int a = 0; a < kNumActions; ++a) {
        const StepResult r1 = step(scene, pose, static_cast<Action>(a), cfg);
        const StepResult r2 = step(scene, pose, static_cast<Action>(a), cfg);
        purity_ok = purity_ok && r1.pose.x == r2.pose.x && r1.pose.z == r2.pose.z &&
                    r1.pose.rotation == r2.pose.rotation && r1.collision == r2.collision &&
                    r1.done == r2.done;
      }
    }
    check(purity_ok);

    // shortest-path symmetry and triangle inequality on a cell sample
    bool path_ok = true;
    const auto& cells = scene.reachable;
    for (size_t a = 0; a < cells.size(); a += 7) {
      for (size_t b = a; b < cells.size(); b += 11) {
        const int dab = shortest_path_cells(scene, cells[a], cells[b]);
        path_ok = path_ok && dab == shortest_path_cells(scene, cells[b], cells[a]);
        for (size_t c = b; c < cells.size(); c += 13) {
          path_ok = path_ok && dab <= shortest_path_cells(scene, cells[a], cells[c]) +
                                          shortest_path_cells(scene, cells[c], cells[b]);
        }
      }
    }
    check(path_ok);
  }

  // exact threshold boundary: squared distance == gs^2/2 counts as reachable
  {
    Scene s;
    s.id = "boundary";
    s.grid_size = 0.25;
    s.width = 3;
    s.depth = 3;
    s.reachable.push_back({1, 1});
    s.rebuild_mask();
    const double gs = s.grid_size;
    bool ok = point_near_reachable(s, s.center_x(1) + gs / 2, s.center_z(1) + gs / 2);
    ok = ok && !point_near_reachable(s, s.center_x(1) + gs / 2 + 1e-9, s.center_z(1) + gs / 2);
    check(ok);
  }
  res.detail = "scenes, spawns and explorer episodes exercised";
  return res;
}

inline std::vector<SuiteResult> run_verify_suites(int jobs = 1, bool full = true) {
  std::vector<SuiteResult> out;
  out.push_back(verify_shap_oracle(full ? 200 : 40, 10, 1e-9, jobs));
  out.push_back(verify_grad_check(full ? 10 : 4));
  out.push_back(verify_metadata(full ? 6 : 2));
  return out;
}

}  // namespace navprobe
