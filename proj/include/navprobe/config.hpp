#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "navprobe/agent.hpp"
#include "navprobe/gridworld.hpp"
#include "navprobe/scene.hpp"

namespace navprobe {

// Plain-text key/value tree: one `key = value` per line, `#` comments,
// dotted keys for grouping. Unknown keys are configuration errors.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text) {
    KeyValueFile kv;
    size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto strip = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      const std::string stripped = strip(line);
      if (stripped.empty()) continue;
      const size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = strip(stripped.substr(0, eq));
      const std::string value = strip(stripped.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      if (!kv.values_.emplace(key, value).second)
        throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    }
    return kv;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) {
    seen_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: missing required key " + key);
    return it->second;
  }

  long long get_int(const std::string& key, long long fallback) {
    const std::string s = get_string(key, "");
    if (s.empty()) return fallback;
    return parse_int(key, s);
  }

  long long require_int(const std::string& key) { return parse_int(key, require_string(key)); }

  double get_double(const std::string& key, double fallback) {
    const std::string s = get_string(key, "");
    if (s.empty()) return fallback;
    return parse_double(key, s);
  }

  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) {
    const std::string s = get_string(key, "");
    if (s.empty()) return fallback;
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s + ",") {
      if (ch == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else if (ch != ' ' && ch != '\t') {
        cur += ch;
      }
    }
    return out;
  }

  void reject_unknown_keys() const {
    for (const auto& [key, value] : values_)
      if (!seen_.count(key)) throw ConfigError("config: unknown key " + key);
  }

 private:
  static long long parse_int(const std::string& key, const std::string& s) {
    try {
      size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + " expects an integer, got '" + s + "'");
    }
  }
  static double parse_double(const std::string& key, const std::string& s) {
    try {
      size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + " expects a number, got '" + s + "'");
    }
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> seen_;
};

struct RunConfig {
  uint64_t seed = 0;

  // scenes
  int scene_count = 6;
  int scene_train = 4;  // leading scenes host training episodes; the rest validation
  SceneGenParams scene;

  GridConfig grid;

  // agent
  TaskMode mode = TaskMode::objectnav;
  int hidden_dim = 64;
  int goal_dim = 8;

  // behavior cloning
  int train_epochs = 3;
  double train_lr = 1e-3;
  int train_bptt = 20;
  int train_episodes = 240;
  int checkpoint_every = 1;

  // exploration trajectories
  int explore_train_episodes = 20;
  int explore_val_episodes = 14;
  ExplorerParams explorer;

  GbtParams gbt;

  // probing
  std::vector<std::string> probe_concepts{"all"};
  std::string theta_mode = "raw";  // raw | sincos
  std::vector<std::string> sweep_concepts{"visible_t", "reach_2_000", "visited_l",
                                          "R_t",       "theta_t",    "R_a"};

  // explain
  std::vector<std::string> explain_concepts{"visible_t", "reach_2_000"};
  int explain_top_k = 4;

  // ablation
  std::vector<std::string> ablate_concepts{"visible_t", "reach_2_000"};
  std::vector<int> ablate_sizes_pct{0, 2, 4, 6, 8, 10};
  int ablate_random_seeds = 5;
  double ablate_irrelevant_fraction = 0.25;

  // evaluation episodes
  int eval_episodes = 50;
  int eval_max_steps = 500;
};

inline RunConfig parse_run_config(const std::string& text) {
  KeyValueFile kv = KeyValueFile::parse(text);
  RunConfig cfg;
  cfg.seed = static_cast<uint64_t>(kv.require_int("seed"));  // no entropy defaults

  cfg.scene_count = static_cast<int>(kv.get_int("scene.count", cfg.scene_count));
  cfg.scene_train = static_cast<int>(kv.get_int("scene.train", (cfg.scene_count * 2 + 2) / 3));
  cfg.scene.width = static_cast<int>(kv.get_int("scene.width", cfg.scene.width));
  cfg.scene.depth = static_cast<int>(kv.get_int("scene.depth", cfg.scene.depth));
  cfg.scene.wall_density = kv.get_double("scene.wall_density", cfg.scene.wall_density);
  cfg.scene.n_objects = static_cast<int>(kv.get_int("scene.objects", cfg.scene.n_objects));
  cfg.scene.n_spawns = static_cast<int>(kv.get_int("scene.spawns", cfg.scene.n_spawns));
  cfg.scene.grid_size = kv.get_double("scene.grid_size", cfg.scene.grid_size);
  cfg.scene.vocab_size = static_cast<int>(kv.get_int("scene.vocab", cfg.scene.vocab_size));

  cfg.grid.rotation_step = static_cast<int>(kv.get_int("grid.rotation_step", cfg.grid.rotation_step));
  cfg.grid.probe_angle_step =
      static_cast<int>(kv.get_int("grid.probe_angle_step", cfg.grid.probe_angle_step));
  cfg.grid.visibility_distance =
      kv.get_double("grid.visibility_distance", cfg.grid.visibility_distance);
  cfg.grid.fov_deg = kv.get_double("grid.fov", cfg.grid.fov_deg);
  cfg.grid.patch = static_cast<int>(kv.get_int("grid.patch", cfg.grid.patch));

  cfg.mode = task_mode_from_name(kv.get_string("agent.mode", task_mode_name(cfg.mode)));
  cfg.hidden_dim = static_cast<int>(kv.get_int("agent.hidden_dim", cfg.hidden_dim));
  cfg.goal_dim = static_cast<int>(kv.get_int("agent.goal_dim", cfg.goal_dim));

  cfg.train_epochs = static_cast<int>(kv.get_int("train.epochs", cfg.train_epochs));
  cfg.train_lr = kv.get_double("train.lr", cfg.train_lr);
  cfg.train_bptt = static_cast<int>(kv.get_int("train.bptt", cfg.train_bptt));
  cfg.train_episodes = static_cast<int>(kv.get_int("train.episodes", cfg.train_episodes));
  cfg.checkpoint_every = static_cast<int>(kv.get_int("train.checkpoint_every", cfg.checkpoint_every));

  cfg.explore_train_episodes =
      static_cast<int>(kv.get_int("explore.train_episodes", cfg.explore_train_episodes));
  cfg.explore_val_episodes =
      static_cast<int>(kv.get_int("explore.val_episodes", cfg.explore_val_episodes));
  cfg.explorer.len_cap = static_cast<int>(kv.get_int("explore.len_cap", cfg.explorer.len_cap));
  cfg.explorer.revisit_bias = kv.get_double("explore.revisit_bias", cfg.explorer.revisit_bias);
  cfg.explorer.collision_rate =
      kv.get_double("explore.collision_rate", cfg.explorer.collision_rate);
  cfg.explorer.look_rate = kv.get_double("explore.look_rate", cfg.explorer.look_rate);

  cfg.gbt.rounds = static_cast<int>(kv.get_int("gbt.rounds", cfg.gbt.rounds));
  cfg.gbt.max_depth = static_cast<int>(kv.get_int("gbt.max_depth", cfg.gbt.max_depth));
  cfg.gbt.learning_rate = kv.get_double("gbt.learning_rate", cfg.gbt.learning_rate);
  cfg.gbt.reg_lambda = kv.get_double("gbt.lambda", cfg.gbt.reg_lambda);
  cfg.gbt.gamma = kv.get_double("gbt.gamma", cfg.gbt.gamma);
  cfg.gbt.min_child_weight = kv.get_double("gbt.min_child_weight", cfg.gbt.min_child_weight);

  cfg.probe_concepts = kv.get_list("probe.concepts", cfg.probe_concepts);
  cfg.theta_mode = kv.get_string("probe.theta_mode", cfg.theta_mode);
  if (cfg.theta_mode != "raw" && cfg.theta_mode != "sincos")
    throw ConfigError("config: probe.theta_mode must be raw or sincos");
  cfg.sweep_concepts = kv.get_list("sweep.concepts", cfg.sweep_concepts);

  cfg.explain_concepts = kv.get_list("explain.concepts", cfg.explain_concepts);
  cfg.explain_top_k = static_cast<int>(kv.get_int("explain.top_k", cfg.explain_top_k));

  cfg.ablate_concepts = kv.get_list("ablate.concepts", cfg.ablate_concepts);
  {
    std::vector<std::string> fallback;
    for (int p : cfg.ablate_sizes_pct) fallback.push_back(std::to_string(p));
    cfg.ablate_sizes_pct.clear();
    for (const std::string& s : kv.get_list("ablate.sizes_pct", fallback))
      cfg.ablate_sizes_pct.push_back(std::stoi(s));
  }
  cfg.ablate_random_seeds =
      static_cast<int>(kv.get_int("ablate.random_seeds", cfg.ablate_random_seeds));
  cfg.ablate_irrelevant_fraction =
      kv.get_double("ablate.irrelevant_fraction", cfg.ablate_irrelevant_fraction);

  cfg.eval_episodes = static_cast<int>(kv.get_int("eval.episodes", cfg.eval_episodes));
  cfg.eval_max_steps = static_cast<int>(kv.get_int("eval.max_steps", cfg.eval_max_steps));

  kv.reject_unknown_keys();

  if (cfg.scene_count < 2 || cfg.scene_train < 1 || cfg.scene_train >= cfg.scene_count)
    throw ConfigError("config: need at least one training and one validation scene");
  if (cfg.hidden_dim < 1 || cfg.goal_dim < 1) throw ConfigError("config: bad agent dimensions");
  if (360 % cfg.grid.probe_angle_step != 0 || 360 % cfg.grid.rotation_step != 0)
    throw ConfigError("config: rotation steps must divide 360");
  if (cfg.explore_train_episodes < 1 || cfg.explore_val_episodes < 1)
    throw ConfigError("config: need at least one explorer episode per split");
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path));
}

// Expand concept selectors: literal names, group names, or "all".
inline std::vector<std::string> expand_concepts(const std::vector<std::string>& selectors,
                                                const GridConfig& grid) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  const auto add = [&](const std::string& name) {
    if (seen.insert(name).second) out.push_back(name);
  };
  const auto groups = concept_groups(grid);
  for (const std::string& sel : selectors) {
    if (sel == "all") {
      for (const auto& info : concept_catalog(grid)) add(info.name);
      continue;
    }
    bool is_group = false;
    for (const auto& [group, names] : groups) {
      if (group == sel) {
        for (const auto& n : names) add(n);
        is_group = true;
        break;
      }
    }
    if (!is_group) {
      concept_is_binary(sel, grid);  // throws on unknown names
      add(sel);
    }
  }
  return out;
}

}  // namespace navprobe
