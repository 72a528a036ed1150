#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "navprobe/agent.hpp"

using namespace navprobe;

namespace {

const GridConfig kCfg{};

GruParams tiny_params(TaskMode mode, uint64_t seed, int obs_dim = 4, int hidden = 6) {
  return init_gru(mode, obs_dim, hidden, /*goal_dim=*/3, /*n_classes=*/2, seed);
}

TrainSequence random_sequence(TaskMode mode, uint64_t seed, int obs_dim, int steps) {
  Rng rng(seed);
  TrainSequence seq;
  seq.mode = mode;
  seq.target_class = mode == TaskMode::objectnav ? static_cast<int>(rng.uniform(2)) : -1;
  for (int t = 0; t < steps; ++t) {
    TrainStep st;
    st.obs.resize(obs_dim);
    for (double& v : st.obs) v = rng.range(-1.0, 1.0);
    st.r_t = rng.range(0.0, 3.0);
    st.theta_t = rng.range(0.0, 360.0);
    st.label = static_cast<int>(rng.uniform(kNumActions));
    seq.steps.push_back(std::move(st));
  }
  return seq;
}

}  // namespace

TEST_CASE("gru_forward closed-form cases") {
  SECTION("zero parameters halve the previous hidden state") {
    GruParams p = tiny_params(TaskMode::objectnav, 1);
    p.for_each_tensor([](const char*, Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
    Vec h_prev{0.5, -1.0, 0.25, 2.0, 0.0, -0.125};
    const Vec h = gru_forward(Vec(p.input_dim, 0.3), h_prev, p);
    for (int i = 0; i < 6; ++i) CHECK(h[i] == 0.5 * h_prev[i]);
  }
  SECTION("zero state and zero parameters stay at zero") {
    GruParams p = tiny_params(TaskMode::objectnav, 1);
    p.for_each_tensor([](const char*, Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
    const Vec h = gru_forward(Vec(p.input_dim, 1.0), Vec(6, 0.0), p);
    for (double v : h) CHECK(v == 0.0);
  }
  SECTION("gate saturation drives the unit to tanh(b_h)") {
    GruParams p = init_gru(TaskMode::pointnav, 1, 1, 0, 0, 2);
    p.for_each_tensor([](const char*, Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
    p.b_h[0] = 5.0;
    p.b_z[0] = -1000.0;  // z = 0 exactly after exp overflow
    const Vec h = gru_forward(Vec(p.input_dim, 0.0), {0.0}, p);
    CHECK(h[0] == std::tanh(5.0));
    CHECK(h[0] > 0.999);
  }
  SECTION("dimension mismatch is rejected") {
    GruParams p = tiny_params(TaskMode::objectnav, 1);
    CHECK_THROWS_AS(gru_forward(Vec(3, 0.0), Vec(6, 0.0), p), ValidationError);
  }
}

TEST_CASE("gru output is bounded by max(|h_prev|, 1) per unit") {
  Rng rng(5);
  GruParams p = tiny_params(TaskMode::objectnav, 3);
  for (int trial = 0; trial < 200; ++trial) {
    Vec x(p.input_dim), h_prev(p.hidden_dim);
    for (double& v : x) v = rng.range(-3.0, 3.0);
    for (double& v : h_prev) v = rng.range(-2.0, 2.0);
    const Vec h = gru_forward(x, h_prev, p);
    for (int i = 0; i < p.hidden_dim; ++i)
      CHECK(std::abs(h[i]) <= std::max(std::abs(h_prev[i]), 1.0) + 1e-12);
  }
}

TEST_CASE("encode_input composes observation and goal") {
  GruParams p = tiny_params(TaskMode::pointnav, 7);
  const Vec obs(p.input_dim - kGpsDim, 0.5);

  SECTION("pointnav GPS triple") {
    const Vec x = encode_input(obs, TaskMode::pointnav, -1, 2.0, 90.0, {}, nullptr, p);
    REQUIRE(static_cast<int>(x.size()) == p.input_dim);
    CHECK(x[x.size() - 3] == 2.0);
    CHECK(x[x.size() - 2] == Catch::Approx(1.0));
    CHECK(x[x.size() - 1] == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("image_zero blanks the observation slice") {
    Intervention interv;
    interv.image_zero = true;
    const Vec x = encode_input(obs, TaskMode::pointnav, -1, 2.0, 90.0, interv, nullptr, p);
    for (size_t i = 0; i + kGpsDim < x.size(); ++i) CHECK(x[i] == 0.0);
    CHECK(x[x.size() - 3] == 2.0);
  }
  SECTION("gps_noise replaces the triple with seeded draws") {
    Intervention interv;
    interv.gps_noise = true;
    Rng noise_a(42), noise_b(42);
    const Vec xa = encode_input(obs, TaskMode::pointnav, -1, 2.0, 90.0, interv, &noise_a, p);
    const Vec xb = encode_input(obs, TaskMode::pointnav, -1, 2.0, 90.0, interv, &noise_b, p);
    CHECK(xa == xb);
    CHECK(xa[xa.size() - 3] != 2.0);
  }
  SECTION("objectnav goal embedding row is appended verbatim") {
    GruParams po = tiny_params(TaskMode::objectnav, 7);
    const Vec obs_o(po.input_dim - po.goal_dim, 0.25);
    const Vec x = encode_input(obs_o, TaskMode::objectnav, 1, 0.0, 0.0, {}, nullptr, po);
    for (int g = 0; g < po.goal_dim; ++g)
      CHECK(x[x.size() - po.goal_dim + g] == po.goal_table.at(1, g));
    CHECK_THROWS_AS(encode_input(obs_o, TaskMode::objectnav, 5, 0.0, 0.0, {}, nullptr, po),
                    ValidationError);
  }
}

TEST_CASE("analytic BPTT gradients match central finite differences") {
  for (uint64_t seed : {11ull, 12ull, 13ull}) {
    GruParams p = tiny_params(TaskMode::objectnav, seed);
    const int obs_dim = p.input_dim - p.goal_dim;
    std::vector<TrainSequence> batch{random_sequence(TaskMode::objectnav, seed + 100, obs_dim, 5),
                                     random_sequence(TaskMode::objectnav, seed + 200, obs_dim, 3)};
    CHECK(grad_check(p, batch) <= 1e-4);
  }
}

TEST_CASE("pointnav gradients also pass the finite-difference oracle") {
  GruParams p = init_gru(TaskMode::pointnav, 5, 7, 0, 0, 21);
  std::vector<TrainSequence> batch{random_sequence(TaskMode::pointnav, 22, 5, 4)};
  CHECK(grad_check(p, batch) <= 1e-4);
}

TEST_CASE("a corrupted gradient is detected") {
  GruParams p = tiny_params(TaskMode::objectnav, 31);
  const int obs_dim = p.input_dim - p.goal_dim;
  std::vector<TrainSequence> batch{random_sequence(TaskMode::objectnav, 32, obs_dim, 5)};

  GruParams analytic = zeros_like(p);
  bptt_gradients(p, batch, analytic);
  const GruParams numeric = fd_gradients(p, batch);
  REQUIRE(max_relative_error(analytic, numeric) <= 1e-4);

  analytic.U_h.at(2, 3) += 1.0 + 2.0 * std::abs(analytic.U_h.at(2, 3));
  CHECK(max_relative_error(analytic, numeric) > 1e-2);
}

TEST_CASE("dead parameters get exactly zero gradient from both routes") {
  GruParams p = tiny_params(TaskMode::objectnav, 41);
  const int obs_dim = p.input_dim - p.goal_dim;
  // class 0 never appears in the batch, so its embedding row is dead
  TrainSequence seq = random_sequence(TaskMode::objectnav, 43, obs_dim, 4);
  seq.target_class = 1;
  std::vector<TrainSequence> batch{seq};

  GruParams analytic = zeros_like(p);
  bptt_gradients(p, batch, analytic);
  const GruParams numeric = fd_gradients(p, batch);
  for (int g = 0; g < p.goal_dim; ++g) {
    CHECK(analytic.goal_table.at(0, g) == 0.0);
    CHECK(numeric.goal_table.at(0, g) == 0.0);
  }
}

TEST_CASE("params json round-trips bitwise") {
  GruParams p = tiny_params(TaskMode::objectnav, 51);
  const auto path = std::filesystem::temp_directory_path() / "navprobe_params_test.json";
  save_params(p, path);
  GruParams loaded = load_params(path);
  std::filesystem::remove(path);
  CHECK(params_to_json(loaded) == params_to_json(p));
  CHECK(loaded.hidden_dim == p.hidden_dim);
  CHECK(loaded.input_dim == p.input_dim);
}

TEST_CASE("expert reaches the goal and succeeds") {
  const Scene scene = gen_scene(61, {.width = 12, .depth = 12, .wall_density = 0.2, .n_objects = 2});
  for (size_t spawn_idx = 0; spawn_idx < scene.spawns.size(); ++spawn_idx) {
    TaskSpec task;
    task.mode = TaskMode::objectnav;
    task.scene_id = scene.id;
    task.spawn = scene.spawns[spawn_idx];
    task.target_index = 0;
    task.target_class = scene.objects[0].class_id;

    const auto actions = expert_actions(scene, task, kCfg);
    REQUIRE_FALSE(actions.empty());
    REQUIRE(actions.back() == Action::End);

    // replay: no collisions, success condition holds at End
    AgentPose pose = pose_from_spawn(scene, task.spawn);
    for (size_t i = 0; i + 1 < actions.size(); ++i) {
      const StepResult r = step(scene, pose, actions[i], kCfg);
      REQUIRE_FALSE(r.collision);
      pose = r.pose;
    }
    const TargetMetadata t = target_metadata(scene, pose, scene.objects[0], kCfg);
    CHECK(t.visible_t);
    CHECK(t.R_t <= 1.0);
  }
}

TEST_CASE("behavior cloning memorizes a one-step episode") {
  const Scene scene = gen_scene(71, {.width = 10, .depth = 10, .wall_density = 0.0, .n_objects = 1});
  TaskSpec task;
  task.mode = TaskMode::objectnav;
  task.scene_id = scene.id;
  // spawn on the target cell: the expert immediately issues End
  task.spawn = {scene.objects[0].cell, 0};
  task.target_index = 0;
  task.target_class = scene.objects[0].class_id;

  BcConfig cfg;
  cfg.epochs = 400;
  cfg.adam.lr = 0.02;
  cfg.seed = 9;
  const BcResult result =
      bc_train({scene}, {{0, task}}, kCfg, init_gru(TaskMode::objectnav, observation_dim(kCfg), 8,
                                                    4, 6, 9),
               cfg);
  CHECK(result.loss_curve.back() < 0.01);
}

TEST_CASE("behavior cloning is deterministic given the seed") {
  const Scene scene = gen_scene(81, {.width = 10, .depth = 10, .wall_density = 0.15, .n_objects = 2});
  std::vector<std::pair<int, TaskSpec>> episodes;
  for (size_t s = 0; s < scene.spawns.size(); ++s) {
    TaskSpec task;
    task.mode = TaskMode::objectnav;
    task.scene_id = scene.id;
    task.spawn = scene.spawns[s];
    task.target_index = static_cast<int>(s % scene.objects.size());
    task.target_class = scene.objects[task.target_index].class_id;
    episodes.push_back({0, task});
  }
  BcConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 77;
  const GruParams init = init_gru(TaskMode::objectnav, observation_dim(kCfg), 8, 4, 6, 77);
  const BcResult a = bc_train({scene}, episodes, kCfg, init, cfg);
  const BcResult b = bc_train({scene}, episodes, kCfg, init, cfg);
  REQUIRE(a.loss_curve.size() == b.loss_curve.size());
  for (size_t i = 0; i < a.loss_curve.size(); ++i) CHECK(a.loss_curve[i] == b.loss_curve[i]);
  CHECK(params_to_json(a.params) == params_to_json(b.params));
}
