#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "navprobe/agent.hpp"
#include "navprobe/gridworld.hpp"
#include "navprobe/metrics.hpp"
#include "navprobe/scene.hpp"

namespace navprobe {

struct TimestepRecord {
  long long episode = 0;
  int step = 0;
  Action action = Action::End;
  bool collision = false;
  AgentPose pose;        // pose at which `hidden` and `concepts` were captured
  Vec hidden;
  ConceptRecord concepts;
};

// ----------------------------------------------------------------------------
// Shared rollout loop. Per step: observe at the current pose, update the GRU
// (clamps overwrite hidden units right after the update, so they feed both the
// policy head and the next recurrence), pick an action, execute it. The record
// carries the pre-step pose, the hidden state that chose the action, and the
// executed action's collision flag.

namespace detail {

struct RolloutState {
  AgentPose pose;
  Vec hidden;
  std::vector<AgentPose> history;
};

inline ObjectInstance concept_target(const Scene& scene, const TaskSpec& task) {
  if (task.mode == TaskMode::objectnav) return scene.objects.at(task.target_index);
  return ObjectInstance{-1, task.goal};
}

}  // namespace detail

struct RolloutResult {
  EpisodeOutcome outcome;
  std::vector<TimestepRecord> records;
};

// Executes a fixed action list regardless of the policy output; identical
// action lists produce step-aligned concept streams for any parameter set.
inline std::vector<TimestepRecord> rollout_forced(const Scene& scene, const TaskSpec& task,
                                                  const GruParams& params,
                                                  const std::vector<Action>& actions,
                                                  const Intervention& interv,
                                                  const GridConfig& cfg, long long episode_id = 0) {
  if (static_cast<int>(actions.size()) > task.max_steps)
    throw ValidationError("rollout_forced: action list exceeds max_steps");
  const ObjectInstance target = detail::concept_target(scene, task);

  detail::RolloutState st{pose_from_spawn(scene, task.spawn), Vec(params.hidden_dim, 0.0), {}};
  const AgentPose spawn_pose = st.pose;
  Rng noise(Rng::derive(interv.noise_seed, static_cast<uint64_t>(episode_id)));

  std::vector<TimestepRecord> records;
  records.reserve(actions.size());
  for (size_t t = 0; t < actions.size(); ++t) {
    const TargetMetadata tm = target_metadata(scene, st.pose, target, cfg);
    const Vec obs = render_observation(
        scene, st.pose, task.mode == TaskMode::objectnav ? task.target_class : -1, cfg);
    const Vec x = encode_input(obs, task.mode, task.target_class, tm.R_t, tm.theta_t, interv,
                               &noise, params);
    st.hidden = gru_forward(x, st.hidden, params);
    for (const auto& [unit, value] : interv.clamp_units) {
      if (unit < 0 || unit >= params.hidden_dim)
        throw ValidationError("intervention: clamp unit out of range");
      st.hidden[unit] = value;
    }

    TimestepRecord rec;
    rec.episode = episode_id;
    rec.step = static_cast<int>(t);
    rec.action = actions[t];
    rec.pose = st.pose;
    rec.hidden = st.hidden;

    const StepResult res = step(scene, st.pose, actions[t], cfg);
    rec.collision = res.collision;
    rec.concepts = extract_concepts(scene, st.pose, spawn_pose, target, st.history, res.collision, cfg);
    records.push_back(std::move(rec));

    st.history.push_back(st.pose);
    st.pose = res.pose;
    if (res.done) break;
  }
  return records;
}

// Greedy policy rollout (argmax logits, ties to the lowest action index) until
// End or max_steps.
inline RolloutResult rollout_policy(const Scene& scene, const TaskSpec& task,
                                    const GruParams& params, const Intervention& interv,
                                    const GridConfig& cfg, long long episode_id = 0) {
  const ObjectInstance target = detail::concept_target(scene, task);
  const Cell goal = task_goal_cell(scene, task);

  detail::RolloutState st{pose_from_spawn(scene, task.spawn), Vec(params.hidden_dim, 0.0), {}};
  const AgentPose spawn_pose = st.pose;
  Rng noise(Rng::derive(interv.noise_seed, static_cast<uint64_t>(episode_id)));

  RolloutResult result;
  result.outcome.shortest_length = shortest_path_meters(scene, cell_of(scene, spawn_pose), goal);

  for (int t = 0; t < task.max_steps; ++t) {
    const TargetMetadata tm = target_metadata(scene, st.pose, target, cfg);
    const Vec obs = render_observation(
        scene, st.pose, task.mode == TaskMode::objectnav ? task.target_class : -1, cfg);
    const Vec x = encode_input(obs, task.mode, task.target_class, tm.R_t, tm.theta_t, interv,
                               &noise, params);
    st.hidden = gru_forward(x, st.hidden, params);
    for (const auto& [unit, value] : interv.clamp_units) {
      if (unit < 0 || unit >= params.hidden_dim)
        throw ValidationError("intervention: clamp unit out of range");
      st.hidden[unit] = value;
    }
    const Action action = static_cast<Action>(argmax_action(policy_logits(st.hidden, params)));

    TimestepRecord rec;
    rec.episode = episode_id;
    rec.step = t;
    rec.action = action;
    rec.pose = st.pose;
    rec.hidden = st.hidden;

    const StepResult res = step(scene, st.pose, action, cfg);
    rec.collision = res.collision;
    rec.concepts = extract_concepts(scene, st.pose, spawn_pose, target, st.history, res.collision, cfg);
    result.records.push_back(std::move(rec));
    result.outcome.steps = t + 1;

    if (action == Action::MoveAhead && !res.collision)
      result.outcome.path_length += scene.grid_size;

    if (res.done) {
      if (task.mode == TaskMode::objectnav)
        result.outcome.success = tm.visible_t && tm.R_t <= 1.0;
      else
        result.outcome.success = tm.R_t <= task.success_distance;
      break;
    }
    st.history.push_back(st.pose);
    st.pose = res.pose;
  }
  return result;
}

// ----------------------------------------------------------------------------
// Seeded coverage walk: frontier-seeking BFS paths with deliberate collisions,
// revisits, and occasional camera moves so every visited/horizon concept has
// variance in the logs.

struct ExplorerParams {
  int len_cap = 500;
  double revisit_bias = 0.15;
  double collision_rate = 0.05;
  double look_rate = 0.05;
};

inline std::vector<Action> explorer_actions(const Scene& scene, const Spawn& spawn, uint64_t seed,
                                            const ExplorerParams& params, const GridConfig& cfg) {
  Rng rng(Rng::derive(seed, 0xe85ULL));
  AgentPose pose = pose_from_spawn(scene, spawn);
  std::set<Cell> visited{cell_of(scene, pose)};
  std::vector<Action> actions;

  auto push = [&](Action a) {
    if (static_cast<int>(actions.size()) >= params.len_cap) return false;
    actions.push_back(a);
    pose = step(scene, pose, a, cfg).pose;
    visited.insert(cell_of(scene, pose));
    return true;
  };

  auto heading_to = [](const Cell& from, const Cell& to) {
    if (to.ix == from.ix + 1) return 90;
    if (to.ix == from.ix - 1) return 270;
    if (to.iz == from.iz + 1) return 0;
    return 180;
  };

  auto rotate_to = [&](int heading) {
    const int diff = mod360(heading - pose.rotation);
    if (diff == 90) return push(Action::RotateRight);
    if (diff == 270) return push(Action::RotateLeft);
    if (diff == 180) return push(Action::RotateRight) && push(Action::RotateRight);
    return true;
  };

  // BFS path (list of cells after the current one) to the target cell
  auto path_to = [&](const Cell& target) {
    const Cell start = cell_of(scene, pose);
    std::vector<int> parent(static_cast<size_t>(scene.width) * scene.depth, -2);
    std::deque<Cell> queue{start};
    parent[static_cast<size_t>(start.iz) * scene.width + start.ix] = -1;
    while (!queue.empty()) {
      const Cell c = queue.front();
      queue.pop_front();
      if (c == target) break;
      for (const Cell& n : neighbors4(c)) {
        if (!scene.is_reachable(n)) continue;
        auto& pn = parent[static_cast<size_t>(n.iz) * scene.width + n.ix];
        if (pn != -2) continue;
        pn = static_cast<int>(static_cast<size_t>(c.iz) * scene.width + c.ix);
        queue.push_back(n);
      }
    }
    std::vector<Cell> path;
    Cell c = target;
    while (!(c == start)) {
      path.push_back(c);
      const int pidx = parent[static_cast<size_t>(c.iz) * scene.width + c.ix];
      if (pidx < 0) break;
      c = {pidx % scene.width, pidx / scene.width};
    }
    std::reverse(path.begin(), path.end());
    return path;
  };

  auto walk_to = [&](const Cell& target) {
    for (const Cell& next : path_to(target)) {
      if (!rotate_to(heading_to(cell_of(scene, pose), next))) return false;
      if (!push(Action::MoveAhead)) return false;
    }
    return true;
  };

  while (static_cast<int>(actions.size()) < params.len_cap) {
    const double roll = rng.real();
    if (roll < params.collision_rate) {
      // face an adjacent wall and bump into it
      std::vector<int> headings;
      for (int h : {0, 90, 180, 270}) {
        const Cell here = cell_of(scene, pose);
        const Cell c{here.ix + static_cast<int>(std::llround(sin_deg(h))),
                     here.iz + static_cast<int>(std::llround(cos_deg(h)))};
        if (!scene.is_reachable(c)) headings.push_back(h);
      }
      if (!headings.empty()) {
        const int h = headings[rng.uniform(headings.size())];
        if (!rotate_to(h) || !push(Action::MoveAhead)) break;
        continue;
      }
    } else if (roll < params.collision_rate + params.look_rate) {
      if (!push(rng.uniform(2) ? Action::LookUp : Action::LookDown)) break;
      continue;
    } else if (roll < params.collision_rate + params.look_rate + params.revisit_bias &&
               visited.size() > 1) {
      auto it = visited.begin();
      std::advance(it, rng.uniform(visited.size()));
      if (!(*it == cell_of(scene, pose))) {
        if (!walk_to(*it)) break;
        continue;
      }
    }

    // frontier seeking: nearest unvisited reachable cell by BFS order
    const auto dist = bfs_distances(scene, cell_of(scene, pose));
    Cell best{-1, -1};
    int best_d = kUnreachable;
    for (const Cell& c : scene.reachable) {
      if (visited.count(c)) continue;
      const int d = dist[static_cast<size_t>(c.iz) * scene.width + c.ix];
      if (d == kUnreachable) continue;
      if (best_d == kUnreachable || d < best_d) {
        best = c;
        best_d = d;
      }
    }
    if (best_d == kUnreachable) {
      // everything visited: hop to a random reachable cell to keep moving
      best = scene.reachable[rng.uniform(scene.reachable.size())];
      if (best == cell_of(scene, pose)) continue;
    }
    if (!walk_to(best)) break;
  }
  if (static_cast<int>(actions.size()) > params.len_cap) actions.resize(params.len_cap);
  return actions;
}

// ----------------------------------------------------------------------------
// JSONL: one record per line with keys {episode, step, action, collision,
// pose:{x,z,rot,hor}, hidden:[...], concepts:{...}}.

inline nlohmann::json concepts_to_json(const ConceptRecord& c, const GridConfig& cfg) {
  nlohmann::json j;
  j["R_t"] = c.R_t;
  j["theta_t"] = c.theta_t;
  j["visible_t"] = c.visible_t;
  j["Area_t"] = c.Area_t;
  j["R_a"] = c.R_a;
  j["theta_a"] = c.theta_a;
  const int angles = cfg.probe_angles();
  for (int r = 0; r < static_cast<int>(cfg.radii.size()); ++r)
    for (int a = 0; a < angles; ++a)
      j[reach_concept_name(cfg.radii[r], a * cfg.probe_angle_step)] =
          c.reach[static_cast<size_t>(r) * angles + a] != 0;
  j["visited_l"] = c.visited_l;
  j["visited_lr"] = c.visited_lr;
  j["visited_lrh"] = c.visited_lrh;
  j["collision"] = c.collision;
  return j;
}

inline ConceptRecord concepts_from_json(const nlohmann::json& j, const GridConfig& cfg) {
  ConceptRecord c;
  c.R_t = j.at("R_t").get<double>();
  c.theta_t = j.at("theta_t").get<double>();
  c.visible_t = j.at("visible_t").get<bool>();
  c.Area_t = j.at("Area_t").get<double>();
  c.R_a = j.at("R_a").get<double>();
  c.theta_a = j.at("theta_a").get<double>();
  const int angles = cfg.probe_angles();
  c.reach.resize(cfg.reach_bits());
  for (int r = 0; r < static_cast<int>(cfg.radii.size()); ++r)
    for (int a = 0; a < angles; ++a)
      c.reach[static_cast<size_t>(r) * angles + a] =
          j.at(reach_concept_name(cfg.radii[r], a * cfg.probe_angle_step)).get<bool>() ? 1 : 0;
  c.visited_l = j.at("visited_l").get<bool>();
  c.visited_lr = j.at("visited_lr").get<bool>();
  c.visited_lrh = j.at("visited_lrh").get<bool>();
  c.collision = j.at("collision").get<bool>();
  return c;
}

inline nlohmann::json record_to_json(const TimestepRecord& rec, const GridConfig& cfg) {
  nlohmann::json j;
  j["episode"] = rec.episode;
  j["step"] = rec.step;
  j["action"] = action_name(rec.action);
  j["collision"] = rec.collision;
  j["pose"] = {{"x", rec.pose.x}, {"z", rec.pose.z}, {"rot", rec.pose.rotation},
               {"hor", rec.pose.horizon}};
  j["hidden"] = rec.hidden;
  j["concepts"] = concepts_to_json(rec.concepts, cfg);
  return j;
}

inline TimestepRecord record_from_json(const nlohmann::json& j, const GridConfig& cfg) {
  TimestepRecord rec;
  rec.episode = j.at("episode").get<long long>();
  rec.step = j.at("step").get<int>();
  rec.action = action_from_name(j.at("action").get<std::string>());
  rec.collision = j.at("collision").get<bool>();
  rec.pose.x = j.at("pose").at("x").get<double>();
  rec.pose.z = j.at("pose").at("z").get<double>();
  rec.pose.rotation = j.at("pose").at("rot").get<int>();
  rec.pose.horizon = j.at("pose").at("hor").get<int>();
  rec.hidden = j.at("hidden").get<Vec>();
  rec.concepts = concepts_from_json(j.at("concepts"), cfg);
  return rec;
}

inline void append_records_jsonl(std::string& out, const std::vector<TimestepRecord>& records,
                                 const GridConfig& cfg) {
  for (const TimestepRecord& rec : records) {
    out += record_to_json(rec, cfg).dump();
    out += '\n';
  }
}

inline void save_records_jsonl(const std::vector<TimestepRecord>& records,
                               const std::filesystem::path& path, const GridConfig& cfg) {
  std::string out;
  append_records_jsonl(out, records, cfg);
  write_text_file(path, out);
}

inline std::vector<TimestepRecord> load_records_jsonl(const std::filesystem::path& path,
                                                      const GridConfig& cfg) {
  std::vector<TimestepRecord> records;
  std::istringstream in(read_text_file(path));
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line), cfg));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("rollout file " + path.string() + " line " + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return records;
}

// Action list files: JSON array of action names.
inline void save_actions(const std::vector<Action>& actions, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (Action a : actions) j.push_back(action_name(a));
  write_text_file(path, j.dump() + "\n");
}

inline std::vector<Action> load_actions(const std::filesystem::path& path) {
  std::vector<Action> actions;
  for (const auto& name : nlohmann::json::parse(read_text_file(path)))
    actions.push_back(action_from_name(name.get<std::string>()));
  return actions;
}

}  // namespace navprobe
