// navprobe: probing and unit-attribution pipeline for gridworld navigation
// agents. Subcommands cover the full loop: scene-gen -> train -> explore ->
// collect -> probe -> explain -> ablate (and sweep / verify).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "navprobe/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "runs/out";
  int jobs = 1;
};

navprobe::RunConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) throw navprobe::ConfigError("--config is required");
  return navprobe::load_run_config(args.config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridworld navigation agents: GBT probing, Shapley attribution, unit ablation"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  CommonArgs common;
  app.add_option("--config", common.config_path, "pipeline configuration file");
  app.add_option("--out", common.out_dir, "output directory (artifacts live under it)");
  app.add_option("--jobs", common.jobs, "worker threads (outputs are independent of this)")
      ->check(CLI::Range(1, 256));

  auto* scene_gen = app.add_subcommand("scene-gen", "generate the seeded scene set");

  auto* train = app.add_subcommand("train", "behavior-clone a recurrent policy");
  std::string mode_override;
  train->add_option("--mode", mode_override, "objectnav|pointnav (overrides the config)");

  auto* explore = app.add_subcommand("explore", "emit seeded explorer action files");

  auto* collect = app.add_subcommand("collect", "forced rollouts over the explorer actions");
  std::string params_file, sensor = "full", tag;
  collect->add_option("--params", params_file, "agent params file")->required();
  collect->add_option("--sensor", sensor, "full|gps-noise|image-zero");
  collect->add_option("--tag", tag, "rollout tag (default: params stem + sensor)");

  auto* probe = app.add_subcommand("probe", "fit one GBT per concept and report metrics");
  std::vector<std::string> tags;
  probe->add_option("--tags", tags, "rollout tags to probe (comparisons stay step-aligned)")
      ->required()
      ->delimiter(',');

  auto* explain = app.add_subcommand("explain", "Shapley attributions, rankings and beeswarm data");
  std::string explain_tag;
  explain->add_option("--tag", explain_tag, "rollout/model tag to explain")->required();

  auto* ablate = app.add_subcommand("ablate", "mean-clamp removal curves");
  std::string ablate_params, ablate_tag;
  ablate->add_option("--params", ablate_params, "agent params file")->required();
  ablate->add_option("--tag", ablate_tag, "tag whose rankings and training means to use")
      ->required();

  auto* sweep = app.add_subcommand("sweep", "probe metrics across training checkpoints");

  auto* verify = app.add_subcommand("verify", "run the property suites and print pass counts");
  bool quick = false;
  verify->add_flag("--quick", quick, "reduced sample counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::filesystem::path out = common.out_dir;
    if (scene_gen->parsed()) {
      navprobe::cmd_scene_gen(load_config(common), out);
    } else if (train->parsed()) {
      navprobe::RunConfig cfg = load_config(common);
      if (!mode_override.empty()) cfg.mode = navprobe::task_mode_from_name(mode_override);
      const auto paths = navprobe::cmd_train(cfg, out);
      std::printf("trained -> %s\n", paths.trained.c_str());
      std::printf("random baseline -> %s\n", paths.random_baseline.c_str());
    } else if (explore->parsed()) {
      navprobe::cmd_explore(load_config(common), out);
    } else if (collect->parsed()) {
      navprobe::cmd_collect(load_config(common), out, params_file, sensor, tag, common.jobs);
    } else if (probe->parsed()) {
      navprobe::cmd_probe(load_config(common), out, tags, common.jobs);
    } else if (explain->parsed()) {
      navprobe::cmd_explain(load_config(common), out, explain_tag, common.jobs);
    } else if (ablate->parsed()) {
      navprobe::cmd_ablate(load_config(common), out, ablate_params, ablate_tag, common.jobs);
    } else if (sweep->parsed()) {
      const navprobe::RunConfig cfg = load_config(common);
      navprobe::cmd_sweep(cfg, out, cfg.sweep_concepts, common.jobs);
    } else if (verify->parsed()) {
      std::string report;
      const int status = navprobe::cmd_verify(common.jobs, !quick, report);
      std::fputs(report.c_str(), stdout);
      return status;
    }
    return kExitOk;
  } catch (const navprobe::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const navprobe::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const navprobe::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
}
