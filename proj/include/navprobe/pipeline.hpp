#pragma once

// End-to-end pipeline commands over the out/ directory layout:
//
//   scenes/scene_###.json        gridworld geometry
//   params/{trained,random}_*.json, params/train_curve_*.csv
//   checkpoints/*.json           periodic training snapshots
//   actions/ep_###.json          explorer action files
//   episodes.json, split.json    episode definitions and the split manifest
//   rollouts/{tag}.{split}.jsonl forced-rollout logs
//   models/{tag}/{concept}.json  fitted probes
//   reports/…                    metric tables (CSV + JSON) and group files
//   explain/{tag}/…              rankings, beeswarm CSV/SVG, polar CSV
//   ablate/…                     removal curves (CSV + SVG)
//   sweep/sweep.csv              checkpoint sweep table
//
// Every command validates its inputs before writing anything.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "navprobe/ablate.hpp"
#include "navprobe/agent.hpp"
#include "navprobe/config.hpp"
#include "navprobe/gbt.hpp"
#include "navprobe/gridworld.hpp"
#include "navprobe/probe.hpp"
#include "navprobe/rollout.hpp"
#include "navprobe/scene.hpp"
#include "navprobe/shap.hpp"
#include "navprobe/svg.hpp"
#include "navprobe/verify.hpp"

namespace navprobe {

namespace fs = std::filesystem;

// ----------------------------- episode definitions --------------------------

struct EpisodeDef {
  long long id = 0;
  int scene_index = 0;
  Spawn spawn;
  int target_index = 0;  // objectnav
  Cell goal;             // pointnav
  bool is_val = false;
};

inline nlohmann::json episode_to_json(const EpisodeDef& e) {
  return {{"id", e.id},
          {"scene", e.scene_index},
          {"spawn", {e.spawn.cell.ix, e.spawn.cell.iz, e.spawn.rotation}},
          {"target_index", e.target_index},
          {"goal", {e.goal.ix, e.goal.iz}},
          {"split", e.is_val ? "val" : "train"}};
}

inline EpisodeDef episode_from_json(const nlohmann::json& j) {
  EpisodeDef e;
  e.id = j.at("id").get<long long>();
  e.scene_index = j.at("scene").get<int>();
  e.spawn = {{j.at("spawn").at(0).get<int>(), j.at("spawn").at(1).get<int>()},
             j.at("spawn").at(2).get<int>()};
  e.target_index = j.at("target_index").get<int>();
  e.goal = {j.at("goal").at(0).get<int>(), j.at("goal").at(1).get<int>()};
  e.is_val = j.at("split").get<std::string>() == "val";
  return e;
}

inline TaskSpec task_for_episode(const RunConfig& cfg, const Scene& scene, const EpisodeDef& def,
                                 int max_steps) {
  TaskSpec task;
  task.mode = cfg.mode;
  task.scene_id = scene.id;
  task.spawn = def.spawn;
  task.max_steps = max_steps;
  if (cfg.mode == TaskMode::objectnav) {
    task.target_index = def.target_index;
    task.target_class = scene.objects.at(def.target_index).class_id;
  } else {
    task.goal = def.goal;
  }
  return task;
}

// ----------------------------- shared loading --------------------------------

inline fs::path scene_path(const fs::path& out, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d.json", index);
  return out / "scenes" / buf;
}

inline std::vector<Scene> load_all_scenes(const RunConfig& cfg, const fs::path& out) {
  std::vector<Scene> scenes;
  for (int i = 0; i < cfg.scene_count; ++i) {
    const fs::path path = scene_path(out, i);
    if (!fs::exists(path)) throw ConfigError("missing scene file " + path.string() + "; run scene-gen");
    scenes.push_back(load_scene(path));
  }
  return scenes;
}

inline std::vector<EpisodeDef> load_episodes(const fs::path& out) {
  const fs::path path = out / "episodes.json";
  if (!fs::exists(path)) throw ConfigError("missing " + path.string() + "; run explore");
  std::vector<EpisodeDef> episodes;
  for (const auto& j : nlohmann::json::parse(read_text_file(path)))
    episodes.push_back(episode_from_json(j));
  return episodes;
}

// ----------------------------- commands -------------------------------------

inline void cmd_scene_gen(const RunConfig& cfg, const fs::path& out) {
  std::vector<Scene> scenes;
  for (int i = 0; i < cfg.scene_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d", i);
    scenes.push_back(gen_scene(Rng::derive(cfg.seed, 0x5ce9e000ULL + i), cfg.scene, name));
  }
  for (int i = 0; i < cfg.scene_count; ++i) save_scene(scenes[i], scene_path(out, i));
}

// sampled BC episodes over the training scenes
inline std::vector<std::pair<int, TaskSpec>> sample_training_episodes(const RunConfig& cfg,
                                                                      const std::vector<Scene>& scenes) {
  Rng rng(Rng::derive(cfg.seed, 0x7a58ULL));
  std::vector<std::pair<int, TaskSpec>> episodes;
  for (int i = 0; i < cfg.train_episodes; ++i) {
    const int scene_index = i % cfg.scene_train;
    const Scene& scene = scenes[scene_index];
    TaskSpec task;
    task.mode = cfg.mode;
    task.scene_id = scene.id;
    task.spawn = scene.spawns[rng.uniform(scene.spawns.size())];
    if (cfg.mode == TaskMode::objectnav) {
      task.target_index = static_cast<int>(rng.uniform(scene.objects.size()));
      task.target_class = scene.objects[task.target_index].class_id;
    } else {
      task.goal = scene.reachable[rng.uniform(scene.reachable.size())];
    }
    episodes.push_back({scene_index, task});
  }
  return episodes;
}

struct TrainOutputs {
  fs::path trained;
  fs::path random_baseline;
  std::vector<fs::path> checkpoints;
};

inline TrainOutputs cmd_train(const RunConfig& cfg, const fs::path& out) {
  const std::vector<Scene> scenes = load_all_scenes(cfg, out);
  const auto episodes = sample_training_episodes(cfg, scenes);

  const GruParams init = init_gru(cfg.mode, observation_dim(cfg.grid), cfg.hidden_dim,
                                  cfg.goal_dim, cfg.scene.vocab_size, Rng::derive(cfg.seed, 0x171ULL));

  BcConfig bc;
  bc.epochs = cfg.train_epochs;
  bc.adam.lr = cfg.train_lr;
  bc.bptt_len = cfg.train_bptt;
  bc.seed = cfg.seed;
  bc.checkpoint_every = cfg.checkpoint_every;

  const std::string mode = task_mode_name(cfg.mode);
  TrainOutputs paths;
  paths.trained = out / "params" / ("trained_" + mode + ".json");
  paths.random_baseline = out / "params" / ("random_" + mode + ".json");

  std::vector<std::pair<int, GruParams>> checkpoints;
  const BcResult result = bc_train(scenes, episodes, cfg.grid, init, bc,
                                   [&](int epoch, const GruParams& p) {
                                     checkpoints.push_back({epoch, p});
                                   });

  save_params(init, paths.random_baseline);
  save_params(result.params, paths.trained);
  for (const auto& [epoch, p] : checkpoints) {
    char name[48];
    std::snprintf(name, sizeof(name), "%s_epoch_%03d.json", mode.c_str(), epoch);
    const fs::path path = out / "checkpoints" / name;
    save_params(p, path);
    paths.checkpoints.push_back(path);
  }
  std::string curve = "epoch,mean_step_loss\n";
  for (size_t e = 0; e < result.loss_curve.size(); ++e)
    curve += std::to_string(e + 1) + "," + fmt_double(result.loss_curve[e]) + "\n";
  write_text_file(out / "params" / ("train_curve_" + mode + ".csv"), curve);
  return paths;
}

inline std::vector<EpisodeDef> make_explorer_episodes(const RunConfig& cfg,
                                                      const std::vector<Scene>& scenes) {
  Rng rng(Rng::derive(cfg.seed, 0xe58170ULL));
  std::vector<EpisodeDef> defs;
  const int total = cfg.explore_train_episodes + cfg.explore_val_episodes;
  for (int i = 0; i < total; ++i) {
    EpisodeDef def;
    def.id = i;
    def.is_val = i >= cfg.explore_train_episodes;
    const int pool_begin = def.is_val ? cfg.scene_train : 0;
    const int pool_size = def.is_val ? cfg.scene_count - cfg.scene_train : cfg.scene_train;
    def.scene_index = pool_begin + (def.is_val ? i - cfg.explore_train_episodes : i) % pool_size;
    const Scene& scene = scenes[def.scene_index];
    def.spawn = scene.spawns[rng.uniform(scene.spawns.size())];
    def.target_index = static_cast<int>(rng.uniform(scene.objects.size()));
    def.goal = scene.reachable[rng.uniform(scene.reachable.size())];
    defs.push_back(def);
  }
  return defs;
}

inline void cmd_explore(const RunConfig& cfg, const fs::path& out) {
  const std::vector<Scene> scenes = load_all_scenes(cfg, out);
  const auto defs = make_explorer_episodes(cfg, scenes);

  nlohmann::json index = nlohmann::json::array();
  SplitManifest manifest;
  std::vector<std::pair<fs::path, std::vector<Action>>> files;
  for (const EpisodeDef& def : defs) {
    const Scene& scene = scenes[def.scene_index];
    const auto actions = explorer_actions(scene, def.spawn,
                                          Rng::derive(cfg.seed, 0xac7100ULL + def.id),
                                          cfg.explorer, cfg.grid);
    char name[24];
    std::snprintf(name, sizeof(name), "ep_%03lld.json", def.id);
    files.push_back({out / "actions" / name, actions});
    index.push_back(episode_to_json(def));
    (def.is_val ? manifest.val : manifest.train).push_back(def.id);
  }
  for (const auto& [path, actions] : files) save_actions(actions, path);
  write_text_file(out / "episodes.json", index.dump(2) + "\n");
  save_manifest(manifest, out / "split.json");
}

inline Intervention sensor_intervention(const RunConfig& cfg, const std::string& sensor) {
  Intervention interv;
  if (sensor == "full") return interv;
  if (sensor == "gps-noise") {
    interv.gps_noise = true;
    interv.noise_seed = Rng::derive(cfg.seed, 0x65970ULL);
    return interv;
  }
  if (sensor == "image-zero") {
    interv.image_zero = true;
    return interv;
  }
  throw ConfigError("unknown sensor condition: " + sensor + " (full|gps-noise|image-zero)");
}

// in-memory collection over the explorer episodes; parallel across episodes
inline std::vector<std::vector<TimestepRecord>> collect_records(
    const RunConfig& cfg, const std::vector<Scene>& scenes, const std::vector<EpisodeDef>& defs,
    const std::vector<std::vector<Action>>& action_lists, const GruParams& params,
    const Intervention& interv, int jobs) {
  std::vector<std::vector<TimestepRecord>> per_episode(defs.size());
  parallel_for(defs.size(), jobs, [&](size_t i) {
    const Scene& scene = scenes[defs[i].scene_index];
    const TaskSpec task = task_for_episode(cfg, scene, defs[i], cfg.explorer.len_cap);
    per_episode[i] =
        rollout_forced(scene, task, params, action_lists[i], interv, cfg.grid, defs[i].id);
  });
  return per_episode;
}

inline std::vector<std::vector<Action>> load_action_lists(const fs::path& out,
                                                          const std::vector<EpisodeDef>& defs) {
  std::vector<std::vector<Action>> lists;
  for (const EpisodeDef& def : defs) {
    char name[24];
    std::snprintf(name, sizeof(name), "ep_%03lld.json", def.id);
    lists.push_back(load_actions(out / "actions" / name));
  }
  return lists;
}

inline void cmd_collect(const RunConfig& cfg, const fs::path& out, const fs::path& params_file,
                        const std::string& sensor, std::string tag, int jobs) {
  if (!fs::exists(params_file)) throw ConfigError("params file not found: " + params_file.string());
  const GruParams params = load_params(params_file);
  const std::vector<Scene> scenes = load_all_scenes(cfg, out);
  const auto defs = load_episodes(out);
  const auto action_lists = load_action_lists(out, defs);
  const Intervention interv = sensor_intervention(cfg, sensor);
  if (tag.empty()) tag = params_file.stem().string() + "_" + sensor;

  const auto per_episode = collect_records(cfg, scenes, defs, action_lists, params, interv, jobs);

  std::string train_out, val_out;
  for (size_t i = 0; i < defs.size(); ++i)
    append_records_jsonl(defs[i].is_val ? val_out : train_out, per_episode[i], cfg.grid);
  write_text_file(out / "rollouts" / (tag + ".train.jsonl"), train_out);
  write_text_file(out / "rollouts" / (tag + ".val.jsonl"), val_out);
}

// ----------------------------- probing --------------------------------------

inline std::vector<std::string> resolve_probe_concepts(const RunConfig& cfg) {
  std::vector<std::string> concepts = expand_concepts(cfg.probe_concepts, cfg.grid);
  if (cfg.theta_mode == "sincos") {
    for (const std::string& extra :
         {"theta_t_sin", "theta_t_cos", "theta_a_sin", "theta_a_cos"})
      concepts.push_back(extra);
  }
  return concepts;
}

struct ConceptProbe {
  std::string concept_name;
  ProbeResult result;
};

inline std::vector<ConceptProbe> probe_all_concepts(const std::vector<TimestepRecord>& records,
                                                    const std::vector<std::string>& concepts,
                                                    const SplitManifest& manifest,
                                                    const RunConfig& cfg, int jobs) {
  std::vector<ConceptProbe> probes(concepts.size());
  std::vector<std::string> errors(concepts.size());
  parallel_for(concepts.size(), jobs, [&](size_t i) {
    try {
      const ProbeDataset ds = build_dataset(records, concepts[i], manifest, cfg.grid);
      probes[i] = {concepts[i], train_probe(ds, cfg.gbt)};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (size_t i = 0; i < concepts.size(); ++i)
    if (!errors[i].empty()) throw ValidationError("probe " + concepts[i] + ": " + errors[i]);
  return probes;
}

inline std::vector<TimestepRecord> load_tag_records(const fs::path& out, const std::string& tag,
                                                    const GridConfig& grid) {
  std::vector<TimestepRecord> records;
  for (const char* split : {"train", "val"}) {
    const fs::path path = out / "rollouts" / (tag + "." + split + ".jsonl");
    if (!fs::exists(path)) throw ConfigError("missing rollout file " + path.string() + "; run collect");
    auto part = load_records_jsonl(path, grid);
    records.insert(records.end(), part.begin(), part.end());
  }
  return records;
}

inline void cmd_probe(const RunConfig& cfg, const fs::path& out,
                      const std::vector<std::string>& tags, int jobs) {
  if (tags.empty()) throw ConfigError("probe: need at least one --tags entry");
  const SplitManifest manifest = load_manifest(out / "split.json");
  const auto concepts = resolve_probe_concepts(cfg);

  std::vector<std::vector<TimestepRecord>> record_sets;
  for (const std::string& tag : tags) record_sets.push_back(load_tag_records(out, tag, cfg.grid));
  check_step_aligned(record_sets);

  std::vector<ReportRow> rows;
  std::vector<std::pair<fs::path, std::string>> model_files;
  for (size_t t = 0; t < tags.size(); ++t) {
    const auto probes = probe_all_concepts(record_sets[t], concepts, manifest, cfg, jobs);
    for (const auto& probe : probes) {
      append_report_rows(rows, tags[t], probe.concept_name, probe.result.metrics);
      model_files.push_back({out / "models" / tags[t] / (probe.concept_name + ".json"),
                             ensemble_to_json(probe.result.model).dump() + "\n"});
    }
  }

  for (const auto& [path, content] : model_files) write_text_file(path, content);
  write_text_file(out / "reports" / "report.csv", report_csv(rows));
  write_text_file(out / "reports" / "report.json", report_json(rows).dump(2) + "\n");

  // grouped-bar data files, concepts in canonical group order
  for (const auto& [group, names] : concept_groups(cfg.grid)) {
    std::vector<ReportRow> group_rows;
    for (const std::string& name : names)
      for (const auto& row : rows)
        if (row.concept_name == name) group_rows.push_back(row);
    if (!group_rows.empty())
      write_text_file(out / "reports" / "groups" / (group + ".csv"), report_csv(group_rows));
  }
}

// ----------------------------- explain --------------------------------------

struct ExplainOutput {
  UnitRanking ranking;
  std::vector<ShapExplanation> explanations;
  Mat activations;
};

inline ExplainOutput explain_concept(const std::vector<TimestepRecord>& records,
                                     const TreeEnsemble& model, const std::string& concept_name,
                                     const SplitManifest& manifest, const GridConfig& grid,
                                     int jobs) {
  const ProbeDataset ds = build_dataset(records, concept_name, manifest, grid);
  ExplainOutput out;
  out.activations = ds.X_val;
  out.explanations.resize(ds.X_val.rows);
  std::vector<std::string> errors(static_cast<size_t>(std::max(ds.X_val.rows, 0)));
  parallel_for(static_cast<size_t>(ds.X_val.rows), jobs, [&](size_t i) {
    Vec x(ds.X_val.row(static_cast<int>(i)), ds.X_val.row(static_cast<int>(i)) + ds.X_val.cols);
    try {
      out.explanations[i] = tree_shap(model, x, static_cast<long long>(i));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& err : errors)
    if (!err.empty()) throw NumericError("explain " + concept_name + ": " + err);
  out.ranking = aggregate_and_rank(out.explanations, concept_name);
  return out;
}

inline std::string beeswarm_csv(const std::string& concept_name,
                                const std::vector<BeeswarmRow>& rows) {
  std::string out = "concept,unit,example,shap,activation\n";
  for (const auto& r : rows) {
    out += concept_name;
    out += ',';
    out += std::to_string(r.unit);
    out += ',';
    out += std::to_string(r.example);
    out += ',';
    out += fmt_double(r.shap);
    out += ',';
    out += fmt_double(r.activation);
    out += '\n';
  }
  return out;
}

// per-step trajectory context for the top-ranked unit (polar-plot style data)
inline std::string polar_csv(const std::vector<TimestepRecord>& val_records, int unit) {
  std::string out = "episode,step,R_t,theta_t,R_a,theta_a,unit,activation\n";
  for (const auto& rec : val_records) {
    out += std::to_string(rec.episode);
    out += ',';
    out += std::to_string(rec.step);
    out += ',';
    out += fmt_double(rec.concepts.R_t);
    out += ',';
    out += fmt_double(rec.concepts.theta_t);
    out += ',';
    out += fmt_double(rec.concepts.R_a);
    out += ',';
    out += fmt_double(rec.concepts.theta_a);
    out += ',';
    out += std::to_string(unit);
    out += ',';
    out += fmt_double(rec.hidden[unit]);
    out += '\n';
  }
  return out;
}

inline void cmd_explain(const RunConfig& cfg, const fs::path& out, const std::string& tag,
                        int jobs) {
  const SplitManifest manifest = load_manifest(out / "split.json");
  const auto records = load_tag_records(out, tag, cfg.grid);
  std::vector<TimestepRecord> val_records;
  {
    std::set<long long> val_ids(manifest.val.begin(), manifest.val.end());
    for (const auto& rec : records)
      if (val_ids.count(rec.episode)) val_records.push_back(rec);
    std::stable_sort(val_records.begin(), val_records.end(), [](const auto& a, const auto& b) {
      return a.episode != b.episode ? a.episode < b.episode : a.step < b.step;
    });
  }

  std::vector<std::pair<fs::path, std::string>> outputs;
  for (const std::string& concept_name : cfg.explain_concepts) {
    const fs::path model_path = out / "models" / tag / (concept_name + ".json");
    if (!fs::exists(model_path))
      throw ConfigError("missing probe model " + model_path.string() + "; run probe");
    const TreeEnsemble model = load_ensemble(model_path);
    const ExplainOutput ex = explain_concept(records, model, concept_name, manifest, cfg.grid, jobs);

    const int k = std::min(cfg.explain_top_k, static_cast<int>(ex.ranking.order.size()));
    const auto rows = beeswarm_export(ex.explanations, ex.activations, ex.ranking, k);
    const fs::path dir = out / "explain" / tag;
    outputs.push_back({dir / (concept_name + "_ranking.json"),
                       ranking_to_json(ex.ranking).dump() + "\n"});
    outputs.push_back({dir / (concept_name + "_beeswarm.csv"), beeswarm_csv(concept_name, rows)});
    outputs.push_back({dir / (concept_name + "_beeswarm.svg"),
                       beeswarm_svg(rows, ex.ranking, k, cfg.seed)});
    outputs.push_back({dir / (concept_name + "_polar.csv"),
                       polar_csv(val_records, ex.ranking.order.empty() ? 0 : ex.ranking.order[0])});
  }
  for (const auto& [path, content] : outputs) write_text_file(path, content);
}

// ----------------------------- ablate ---------------------------------------

inline std::vector<EvalEpisode> make_eval_episodes(const RunConfig& cfg,
                                                   const std::vector<Scene>& scenes) {
  Rng rng(Rng::derive(cfg.seed, 0xeba1ULL));
  std::vector<EvalEpisode> episodes;
  for (int i = 0; i < cfg.eval_episodes; ++i) {
    const int scene_index = cfg.scene_train + i % (cfg.scene_count - cfg.scene_train);
    const Scene& scene = scenes[scene_index];
    TaskSpec task;
    task.mode = cfg.mode;
    task.scene_id = scene.id;
    task.spawn = scene.spawns[rng.uniform(scene.spawns.size())];
    task.max_steps = cfg.eval_max_steps;
    if (cfg.mode == TaskMode::objectnav) {
      task.target_index = static_cast<int>(rng.uniform(scene.objects.size()));
      task.target_class = scene.objects[task.target_index].class_id;
    } else {
      task.goal = scene.reachable[rng.uniform(scene.reachable.size())];
    }
    episodes.push_back({&scenes[scene_index], task});
  }
  return episodes;
}

inline std::vector<int> ablation_sizes(const RunConfig& cfg, int hidden_dim) {
  std::vector<int> sizes;
  for (int pct : cfg.ablate_sizes_pct)
    sizes.push_back(static_cast<int>(std::llround(pct / 100.0 * hidden_dim)));
  return sizes;
}

inline void cmd_ablate(const RunConfig& cfg, const fs::path& out, const fs::path& params_file,
                       const std::string& tag, int jobs) {
  if (!fs::exists(params_file)) throw ConfigError("params file not found: " + params_file.string());
  const GruParams params = load_params(params_file);
  const std::vector<Scene> scenes = load_all_scenes(cfg, out);

  // training-episode activation means (the clamp constants)
  const auto train_records = load_records_jsonl(out / "rollouts" / (tag + ".train.jsonl"), cfg.grid);
  const UnitMoments moments = unit_means(train_records);

  std::vector<UnitRanking> rankings;
  for (const std::string& concept_name : cfg.ablate_concepts) {
    const fs::path path = out / "explain" / tag / (concept_name + "_ranking.json");
    if (!fs::exists(path)) throw ConfigError("missing ranking " + path.string() + "; run explain");
    rankings.push_back(ranking_from_json(nlohmann::json::parse(read_text_file(path))));
  }

  const auto episodes = make_eval_episodes(cfg, scenes);
  std::vector<uint64_t> random_seeds;
  for (int i = 0; i < cfg.ablate_random_seeds; ++i)
    random_seeds.push_back(Rng::derive(cfg.seed, 0x8a2d0ULL + i));

  const auto rows = ablate_eval(episodes, params, moments, rankings, cfg.ablate_concepts,
                                ablation_sizes(cfg, params.hidden_dim), random_seeds,
                                cfg.ablate_irrelevant_fraction, cfg.grid, jobs);
  write_text_file(out / "ablate" / "curve.csv", ablation_csv(rows));

  // svg line charts: one per metric, random seeds averaged per size
  const auto sizes = ablation_sizes(cfg, params.hidden_dim);
  Vec xs(sizes.begin(), sizes.end());
  const auto metric_of = [](const AblationRow& r, int metric) {
    return metric == 0 ? r.spl_value : metric == 1 ? r.success : r.mean_length;
  };
  const char* metric_names[3] = {"spl", "success_rate", "mean_episode_length"};
  for (int metric = 0; metric < 3; ++metric) {
    std::vector<ChartSeries> series;
    for (const std::string& concept_name : cfg.ablate_concepts) {
      ChartSeries s{"topk_" + concept_name, {}};
      for (int size : sizes)
        for (const auto& r : rows)
          if (r.strategy == "topk_" + concept_name && r.size == size)
            s.y.push_back(metric_of(r, metric));
      series.push_back(std::move(s));
    }
    ChartSeries rand_series{"random(mean)", {}};
    for (int size : sizes) {
      double sum = 0.0;
      int count = 0;
      for (const auto& r : rows)
        if (r.strategy == "random" && r.size == size) {
          sum += metric_of(r, metric);
          ++count;
        }
      if (count > 0) rand_series.y.push_back(sum / count);
    }
    series.push_back(std::move(rand_series));
    write_text_file(out / "ablate" / (std::string(metric_names[metric]) + ".svg"),
                    line_chart_svg(metric_names[metric], xs, series));
  }
}

// ----------------------------- sweep ----------------------------------------

inline void cmd_sweep(const RunConfig& cfg, const fs::path& out,
                      const std::vector<std::string>& concepts, int jobs) {
  const std::vector<Scene> scenes = load_all_scenes(cfg, out);
  const auto defs = load_episodes(out);
  const auto action_lists = load_action_lists(out, defs);
  const SplitManifest manifest = load_manifest(out / "split.json");

  std::vector<fs::path> checkpoint_files;
  const fs::path dir = out / "checkpoints";
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".json") checkpoint_files.push_back(entry.path());
  std::sort(checkpoint_files.begin(), checkpoint_files.end());
  if (checkpoint_files.size() < 2)
    throw ConfigError("sweep: need at least two checkpoints under " + dir.string());

  std::string csv = "checkpoint,concept,metric,value,n_val\n";
  for (const fs::path& file : checkpoint_files) {
    const GruParams params = load_params(file);
    const auto per_episode = collect_records(cfg, scenes, defs, action_lists, params, {}, jobs);
    std::vector<TimestepRecord> records;
    for (const auto& part : per_episode) records.insert(records.end(), part.begin(), part.end());
    const auto probes = probe_all_concepts(records, concepts, manifest, cfg, jobs);
    for (const auto& probe : probes) {
      std::vector<ReportRow> rows;
      append_report_rows(rows, file.stem().string(), probe.concept_name, probe.result.metrics);
      for (const auto& r : rows)
        csv += r.model + "," + r.concept_name + "," + r.metric + "," + fmt_double(r.value) + "," +
               std::to_string(r.n_val) + "\n";
    }
  }
  write_text_file(out / "sweep" / "sweep.csv", csv);
}

// ----------------------------- verify ---------------------------------------

inline int cmd_verify(int jobs, bool full, std::string& report) {
  const auto suites = run_verify_suites(jobs, full);
  int failures = 0;
  for (const auto& s : suites) {
    report += s.name + ": " + std::to_string(s.passed) + "/" +
              std::to_string(s.passed + s.failed) + " checks passed (" + s.detail + ")\n";
    failures += s.failed;
  }
  return failures == 0 ? 0 : 2;
}

}  // namespace navprobe
