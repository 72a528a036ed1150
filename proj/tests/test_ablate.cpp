#include <catch2/catch_amalgamated.hpp>

#include "navprobe/ablate.hpp"

using namespace navprobe;

namespace {

const GridConfig kCfg{};

UnitRanking ranking_of(const std::string& concept_name, const std::vector<int>& order, int h) {
  UnitRanking r;
  r.concept_name = concept_name;
  r.order = order;
  r.mean_abs_shap.assign(h, 0.0);
  for (size_t i = 0; i < order.size(); ++i)
    r.mean_abs_shap[order[i]] = static_cast<double>(order.size() - i);
  return r;
}

}  // namespace

TEST_CASE("unit means and variances") {
  TimestepRecord a, b;
  a.hidden = {1.0, -2.0, 0.5};
  b.hidden = {-1.0, 2.0, 0.5};

  SECTION("single record: means equal the hidden vector") {
    const UnitMoments m = unit_means({a});
    CHECK(m.mean == Vec{1.0, -2.0, 0.5});
    CHECK(m.variance == Vec{0.0, 0.0, 0.0});
  }
  SECTION("opposite records cancel; frozen unit has zero variance") {
    const UnitMoments m = unit_means({a, b});
    CHECK(m.mean == Vec{0.0, 0.0, 0.5});
    CHECK(m.variance[0] == 1.0);
    CHECK(m.variance[2] == 0.0);
  }
}

TEST_CASE("select_units strategies") {
  const int h = 8;
  const std::vector<UnitRanking> rankings{
      ranking_of("visible_t", {3, 1, 7, 0, 2, 4, 5, 6}, h),
      ranking_of("reach_2_000", {3, 5, 0, 6, 1, 2, 4, 7}, h),
  };

  SECTION("concept_topk takes the ranking prefix") {
    AblationSpec spec{AblationStrategy::concept_topk, "visible_t", 3, 0, 0.10, false};
    CHECK(select_units(spec, rankings, h) == std::vector<int>{3, 1, 7});
    spec.k = 99;
    CHECK_THROWS_AS(select_units(spec, rankings, h), ValidationError);
    spec.k = 3;
    spec.concept_name = "unknown";
    CHECK_THROWS_AS(select_units(spec, rankings, h), ValidationError);
  }
  SECTION("random is seeded and repeatable") {
    AblationSpec spec{AblationStrategy::random_units, "", 4, 9, 0.10, false};
    const auto a = select_units(spec, rankings, h);
    const auto b = select_units(spec, rankings, h);
    CHECK(a == b);
    CHECK(a.size() == 4);
    std::set<int> unique(a.begin(), a.end());
    CHECK(unique.size() == 4);
  }
  SECTION("random with exclusion avoids the concept's top units") {
    AblationSpec spec{AblationStrategy::random_units, "visible_t", 3, 5, 0.10, true};
    const auto picked = select_units(spec, rankings, h);
    for (int u : picked) {
      CHECK(u != 3);
      CHECK(u != 1);
      CHECK(u != 7);
    }
  }
  SECTION("irrelevant picks the complement of the top-q union") {
    // q = ceil(0.10 * 8) = 1: relevant = {3}; complement has 7 units
    AblationSpec spec{AblationStrategy::irrelevant, "", 2, 0, 0.10, false};
    const auto picked = select_units(spec, rankings, h);
    CHECK(picked.size() == 2);
    for (int u : picked) CHECK(u != 3);
    spec.k = 8;
    CHECK_THROWS_WITH(select_units(spec, rankings, h),
                      Catch::Matchers::ContainsSubstring("irrelevant"));
  }
}

TEST_CASE("ablation sweep rows and baselines") {
  const Scene scene = gen_scene(500, {.width = 11, .depth = 11, .wall_density = 0.1, .n_objects = 2});
  GruParams params = init_gru(TaskMode::objectnav, observation_dim(kCfg), 8, 4, 6, 3);

  std::vector<EvalEpisode> episodes;
  for (size_t s = 0; s < scene.spawns.size(); ++s) {
    TaskSpec task;
    task.mode = TaskMode::objectnav;
    task.scene_id = scene.id;
    task.spawn = scene.spawns[s];
    task.target_index = 0;
    task.target_class = scene.objects[0].class_id;
    task.max_steps = 60;
    episodes.push_back({&scene, task});
  }

  // moments from a short forced walk
  const auto actions = explorer_actions(scene, scene.spawns[0], 4, {.len_cap = 80}, kCfg);
  TaskSpec probe_task = episodes[0].task;
  probe_task.max_steps = 500;
  const auto records = rollout_forced(scene, probe_task, params, actions, {}, kCfg, 0);
  const UnitMoments moments = unit_means(records);

  const std::vector<UnitRanking> rankings{ranking_of("visible_t", {0, 1, 2, 3, 4, 5, 6, 7}, 8)};

  SECTION("row layout covers strategies x sizes x seeds") {
    const auto rows = ablate_eval(episodes, params, moments, rankings, {"visible_t"}, {0, 2},
                                  {1, 2, 3}, 0.25, kCfg);
    // topk: 2 sizes; random: 2 sizes x 3 seeds; irrelevant: 1
    CHECK(rows.size() == 2 + 6 + 1);
    CHECK(rows[0].strategy == "topk_visible_t");
    CHECK(rows.back().strategy == "irrelevant");
    const std::string csv = ablation_csv(rows);
    CHECK(csv.rfind("strategy,size,seed,spl,success_rate,mean_episode_length\n", 0) == 0);
  }
  SECTION("size-zero ablation reproduces the baseline bit for bit") {
    const auto base = eval_episodes(episodes, params, {}, kCfg);
    AblationSpec spec{AblationStrategy::concept_topk, "visible_t", 0, 0, 0.10, false};
    const auto units = select_units(spec, rankings, 8);
    const auto ablated = eval_episodes(episodes, params, clamp_for_units(units, moments.mean), kCfg);
    REQUIRE(base.size() == ablated.size());
    for (size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].success == ablated[i].success);
      CHECK(base[i].path_length == ablated[i].path_length);
      CHECK(base[i].steps == ablated[i].steps);
    }
  }
  SECTION("clamping a frozen unit to its mean is a no-op") {
    // freeze unit 2 at tanh(0.7) via saturated gates
    for (int c = 0; c < params.W_z.cols; ++c)
      params.W_z.at(2, c) = params.W_r.at(2, c) = params.W_h.at(2, c) = 0.0;
    for (int c = 0; c < params.hidden_dim; ++c)
      params.U_z.at(2, c) = params.U_r.at(2, c) = params.U_h.at(2, c) = 0.0;
    params.b_z[2] = -1000.0;  // z = 0 exactly
    params.b_h[2] = 0.7;

    const auto frozen_records = rollout_forced(scene, probe_task, params, actions, {}, kCfg, 0);
    const UnitMoments frozen = unit_means(frozen_records);
    REQUIRE(frozen.variance[2] == 0.0);

    const auto base = eval_episodes(episodes, params, {}, kCfg);
    const auto clamped =
        eval_episodes(episodes, params, clamp_for_units({2}, frozen.mean), kCfg);
    for (size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].success == clamped[i].success);
      CHECK(base[i].steps == clamped[i].steps);
      CHECK(base[i].path_length == clamped[i].path_length);
    }
  }
  SECTION("outcomes are independent of the worker count") {
    const auto seq = eval_episodes(episodes, params, {}, kCfg, 1);
    const auto par = eval_episodes(episodes, params, {}, kCfg, 4);
    REQUIRE(seq.size() == par.size());
    for (size_t i = 0; i < seq.size(); ++i) {
      CHECK(seq[i].success == par[i].success);
      CHECK(seq[i].path_length == par[i].path_length);
      CHECK(seq[i].steps == par[i].steps);
    }
  }
}
