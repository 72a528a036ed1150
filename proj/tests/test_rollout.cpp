#include <catch2/catch_amalgamated.hpp>

#include "navprobe/rollout.hpp"

using namespace navprobe;

namespace {

const GridConfig kCfg{};

struct Fixture {
  Scene scene;
  TaskSpec task;
  GruParams params;
};

Fixture make_fixture(uint64_t seed, TaskMode mode = TaskMode::objectnav) {
  Fixture f{gen_scene(seed, {.width = 11, .depth = 11, .wall_density = 0.15, .n_objects = 2}),
            {},
            {}};
  f.task.mode = mode;
  f.task.scene_id = f.scene.id;
  f.task.spawn = f.scene.spawns.front();
  if (mode == TaskMode::objectnav) {
    f.task.target_index = 0;
    f.task.target_class = f.scene.objects[0].class_id;
  } else {
    f.task.goal = f.scene.objects[0].cell;
  }
  f.params = init_gru(mode, observation_dim(kCfg), 8, 4, 6, seed + 1);
  return f;
}

}  // namespace

TEST_CASE("forced rollout basics") {
  Fixture f = make_fixture(301);

  SECTION("empty action list yields no records") {
    CHECK(rollout_forced(f.scene, f.task, f.params, {}, {}, kCfg).empty());
  }
  SECTION("identical actions, different params: same concepts, different hidden") {
    const auto actions = explorer_actions(f.scene, f.task.spawn, 5, {.len_cap = 80}, kCfg);
    const GruParams other = init_gru(TaskMode::objectnav, observation_dim(kCfg), 8, 4, 6, 999);
    const auto a = rollout_forced(f.scene, f.task, f.params, actions, {}, kCfg, 1);
    const auto b = rollout_forced(f.scene, f.task, other, actions, {}, kCfg, 1);
    REQUIRE(a.size() == b.size());
    bool hidden_differ = false;
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(concepts_to_json(a[i].concepts, kCfg) == concepts_to_json(b[i].concepts, kCfg));
      CHECK(a[i].pose.x == b[i].pose.x);
      CHECK(a[i].pose.z == b[i].pose.z);
      hidden_differ = hidden_differ || a[i].hidden != b[i].hidden;
    }
    CHECK(hidden_differ);
  }
  SECTION("concept stream is also invariant to interventions") {
    const auto actions = explorer_actions(f.scene, f.task.spawn, 6, {.len_cap = 60}, kCfg);
    Intervention interv;
    interv.image_zero = true;
    interv.clamp_units = {{0, 0.5}, {3, -0.25}};
    const auto a = rollout_forced(f.scene, f.task, f.params, actions, {}, kCfg, 1);
    const auto b = rollout_forced(f.scene, f.task, f.params, actions, interv, kCfg, 1);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(concepts_to_json(a[i].concepts, kCfg) == concepts_to_json(b[i].concepts, kCfg));
      CHECK(b[i].hidden[0] == 0.5);
      CHECK(b[i].hidden[3] == -0.25);
    }
  }
  SECTION("a forced wall hit is recorded as a collision with unchanged pose") {
    // rotate until facing a wall, then move
    AgentPose pose = pose_from_spawn(f.scene, f.task.spawn);
    std::vector<Action> actions;
    int guard = 0;
    while (guard++ < 8) {
      const StepResult probe = step(f.scene, pose, Action::MoveAhead, kCfg);
      if (probe.collision) break;
      actions.push_back(Action::RotateRight);
      pose = step(f.scene, pose, Action::RotateRight, kCfg).pose;
    }
    // walk forward until the wall is hit
    while (guard++ < 60) {
      actions.push_back(Action::MoveAhead);
      const StepResult res = step(f.scene, pose, Action::MoveAhead, kCfg);
      pose = res.pose;
      if (res.collision) break;
    }
    const auto records = rollout_forced(f.scene, f.task, f.params, actions, {}, kCfg, 2);
    REQUIRE_FALSE(records.empty());
    const auto& last = records.back();
    CHECK(last.collision);
    CHECK(last.concepts.collision);
    // collision implies the pose did not change: compare with a re-step
    const StepResult res = step(f.scene, last.pose, Action::MoveAhead, kCfg);
    CHECK(res.pose.x == last.pose.x);
    CHECK(res.pose.z == last.pose.z);
  }
  SECTION("expert replay ends successfully") {
    const auto actions = expert_actions(f.scene, f.task, kCfg);
    const auto records = rollout_forced(f.scene, f.task, f.params, actions, {}, kCfg, 3);
    REQUIRE(records.back().action == Action::End);
    const TargetMetadata t =
        target_metadata(f.scene, records.back().pose, f.scene.objects[0], kCfg);
    CHECK(t.visible_t);
    CHECK(t.R_t <= 1.0);
  }
}

TEST_CASE("policy rollout determinism and exhaustion") {
  Fixture f = make_fixture(311);

  SECTION("deterministic without interventions") {
    const auto a = rollout_policy(f.scene, f.task, f.params, {}, kCfg, 7);
    const auto b = rollout_policy(f.scene, f.task, f.params, {}, kCfg, 7);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i)
      CHECK(a.records[i].hidden == b.records[i].hidden);
    CHECK(a.outcome.success == b.outcome.success);
    CHECK(a.outcome.path_length == b.outcome.path_length);
  }
  SECTION("max_steps exhaustion fails with full episode length") {
    // zero params: constant logits, argmax ties to MoveAhead, End never issued
    GruParams zero = zeros_like(f.params);
    const RolloutResult r = rollout_policy(f.scene, f.task, zero, {}, kCfg, 8);
    CHECK_FALSE(r.outcome.success);
    CHECK(r.outcome.steps == f.task.max_steps);
    CHECK(static_cast<int>(r.records.size()) == 500);
  }
  SECTION("clamping every unit to zero freezes the action distribution") {
    Intervention interv;
    for (int u = 0; u < f.params.hidden_dim; ++u) interv.clamp_units[u] = 0.0;
    f.task.max_steps = 40;
    const RolloutResult r = rollout_policy(f.scene, f.task, f.params, interv, kCfg, 9);
    const int expected = argmax_action(f.params.policy_b);
    for (const auto& rec : r.records) {
      CHECK(static_cast<int>(rec.action) == expected);
      for (double h : rec.hidden) CHECK(h == 0.0);
    }
  }
}

TEST_CASE("gps noise draws are seeded per episode") {
  Fixture f = make_fixture(321, TaskMode::pointnav);
  const auto actions = explorer_actions(f.scene, f.task.spawn, 5, {.len_cap = 40}, kCfg);
  Intervention interv;
  interv.gps_noise = true;
  interv.noise_seed = 77;
  const auto a = rollout_forced(f.scene, f.task, f.params, actions, interv, kCfg, 4);
  const auto b = rollout_forced(f.scene, f.task, f.params, actions, interv, kCfg, 4);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].hidden == b[i].hidden);

  const auto c = rollout_forced(f.scene, f.task, f.params, actions, interv, kCfg, 5);
  bool differs = false;
  for (size_t i = 0; i < std::min(a.size(), c.size()); ++i)
    differs = differs || a[i].hidden != c[i].hidden;
  CHECK(differs);  // a different episode id shifts the noise stream
}

TEST_CASE("explorer walk properties") {
  const Scene room = gen_scene(900, {.width = 12, .depth = 12, .wall_density = 0.0, .n_objects = 1});

  SECTION("deterministic per seed") {
    const auto a = explorer_actions(room, room.spawns[0], 42, {}, kCfg);
    const auto b = explorer_actions(room, room.spawns[0], 42, {}, kCfg);
    CHECK(a == b);
    const auto c = explorer_actions(room, room.spawns[0], 43, {}, kCfg);
    CHECK(a != c);
  }
  SECTION("zero collision rate leaves no collision records") {
    ExplorerParams p;
    p.collision_rate = 0.0;
    const auto actions = explorer_actions(room, room.spawns[0], 11, p, kCfg);
    AgentPose pose = pose_from_spawn(room, room.spawns[0]);
    for (Action a : actions) {
      const StepResult res = step(room, pose, a, kCfg);
      CHECK_FALSE(res.collision);
      pose = res.pose;
    }
  }
  SECTION("default settings cover at least 60% of a 10x10 interior in 500 steps") {
    // 12x12 generated room with zero wall density has a 10x10 open interior
    REQUIRE(room.reachable.size() == 100);
    const auto actions = explorer_actions(room, room.spawns[0], 21, {}, kCfg);
    std::set<Cell> visited;
    AgentPose pose = pose_from_spawn(room, room.spawns[0]);
    visited.insert(cell_of(room, pose));
    for (Action a : actions) {
      pose = step(room, pose, a, kCfg).pose;
      visited.insert(cell_of(room, pose));
    }
    CHECK(visited.size() >= 60);
  }
  SECTION("intentional collisions appear at the default rate") {
    const auto actions = explorer_actions(room, room.spawns[0], 31, {}, kCfg);
    AgentPose pose = pose_from_spawn(room, room.spawns[0]);
    int collisions = 0;
    for (Action a : actions) {
      const StepResult res = step(room, pose, a, kCfg);
      collisions += res.collision;
      pose = res.pose;
    }
    CHECK(collisions > 0);
  }
}

TEST_CASE("jsonl round-trip preserves records bitwise") {
  Fixture f = make_fixture(331);
  const auto actions = explorer_actions(f.scene, f.task.spawn, 3, {.len_cap = 50}, kCfg);
  const auto records = rollout_forced(f.scene, f.task, f.params, actions, {}, kCfg, 12);

  const auto path = std::filesystem::temp_directory_path() / "navprobe_rollout_test.jsonl";
  save_records_jsonl(records, path, kCfg);
  const auto loaded = load_records_jsonl(path, kCfg);
  std::filesystem::remove(path);

  REQUIRE(loaded.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].episode == records[i].episode);
    CHECK(loaded[i].step == records[i].step);
    CHECK(loaded[i].action == records[i].action);
    CHECK(loaded[i].hidden == records[i].hidden);
    CHECK(concepts_to_json(loaded[i].concepts, kCfg) ==
          concepts_to_json(records[i].concepts, kCfg));
  }
}

TEST_CASE("visited chain and collision concepts hold on explorer episodes") {
  Fixture f = make_fixture(341);
  const auto actions = explorer_actions(f.scene, f.task.spawn, 17, {}, kCfg);
  const auto records = rollout_forced(f.scene, f.task, f.params, actions, {}, kCfg, 1);
  REQUIRE(records.size() > 100);
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& c = records[i].concepts;
    CHECK((!c.visited_lrh || c.visited_lr));
    CHECK((!c.visited_lr || c.visited_l));
    if (records[i].collision && i + 1 < records.size()) {
      CHECK(records[i + 1].pose.x == records[i].pose.x);
      CHECK(records[i + 1].pose.z == records[i].pose.z);
    }
  }
}

TEST_CASE("action files round-trip") {
  const auto path = std::filesystem::temp_directory_path() / "navprobe_actions_test.json";
  const std::vector<Action> actions{Action::MoveAhead, Action::RotateLeft, Action::End};
  save_actions(actions, path);
  CHECK(load_actions(path) == actions);
  std::filesystem::remove(path);
}
