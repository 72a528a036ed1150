#include <catch2/catch_amalgamated.hpp>

#include "navprobe/gridworld.hpp"

using namespace navprobe;

namespace {

Scene all_open(int w, int d, double gs = 0.25) {
  Scene s;
  s.id = "open";
  s.grid_size = gs;
  s.width = w;
  s.depth = d;
  for (int iz = 0; iz < d; ++iz)
    for (int ix = 0; ix < w; ++ix) s.reachable.push_back({ix, iz});
  s.rebuild_mask();
  return s;
}

const GridConfig kCfg{};

}  // namespace

TEST_CASE("step moves, collides and rotates per the grid rules") {
  Scene s = all_open(5, 5);
  AgentPose pose = pose_at(s, {2, 2}, 0);
  REQUIRE(pose.x == 0.5);
  REQUIRE(pose.z == 0.5);

  SECTION("open cell ahead") {
    StepResult r = step(s, pose, Action::MoveAhead, kCfg);
    CHECK(r.pose.x == 0.5);
    CHECK(r.pose.z == 0.75);
    CHECK_FALSE(r.collision);
    CHECK_FALSE(r.done);
  }
  SECTION("blocked cell ahead") {
    AgentPose edge = pose_at(s, {2, 4}, 0);  // facing out of the grid
    StepResult r = step(s, edge, Action::MoveAhead, kCfg);
    CHECK(r.collision);
    CHECK(r.pose.x == edge.x);
    CHECK(r.pose.z == edge.z);
  }
  SECTION("rotation wraps mod 360") {
    AgentPose p = pose_at(s, {2, 2}, 270);
    CHECK(step(s, p, Action::RotateRight, kCfg).pose.rotation == 0);
    CHECK(step(s, p, Action::RotateLeft, kCfg).pose.rotation == 180);
  }
  SECTION("look actions clamp the horizon without collision") {
    AgentPose p = pose_at(s, {2, 2}, 0, 60);
    StepResult r = step(s, p, Action::LookDown, kCfg);
    CHECK(r.pose.horizon == 60);
    CHECK_FALSE(r.collision);
    p.horizon = -30;
    CHECK(step(s, p, Action::LookUp, kCfg).pose.horizon == -30);
    p.horizon = 0;
    CHECK(step(s, p, Action::LookDown, kCfg).pose.horizon == 30);
    CHECK(step(s, p, Action::LookUp, kCfg).pose.horizon == -30);
  }
  SECTION("end raises done only") {
    StepResult r = step(s, pose, Action::End, kCfg);
    CHECK(r.done);
    CHECK_FALSE(r.collision);
  }
  SECTION("invalid pose rejected") {
    AgentPose bad = pose;
    bad.rotation = 45;
    CHECK_THROWS_AS(step(s, bad, Action::MoveAhead, kCfg), ValidationError);
  }
}

TEST_CASE("step is a pure function") {
  Scene s = all_open(5, 5);
  AgentPose pose = pose_at(s, {1, 3}, 90);
  for (Action a : {Action::MoveAhead, Action::RotateLeft, Action::End}) {
    StepResult r1 = step(s, pose, a, kCfg);
    StepResult r2 = step(s, pose, a, kCfg);
    CHECK(r1.pose.x == r2.pose.x);
    CHECK(r1.pose.z == r2.pose.z);
    CHECK(r1.pose.rotation == r2.pose.rotation);
    CHECK(r1.collision == r2.collision);
    CHECK(r1.done == r2.done);
  }
}

TEST_CASE("target metadata matches hand geometry") {
  Scene s = all_open(9, 9);
  AgentPose pose = pose_at(s, {4, 4}, 0);

  SECTION("two cells straight ahead") {
    ObjectInstance target{0, {4, 6}};
    TargetMetadata m = target_metadata(s, pose, target, kCfg);
    CHECK(m.R_t == Catch::Approx(0.5));
    CHECK(m.theta_t == Catch::Approx(0.0).margin(1e-12));
    CHECK(m.visible_t);
    CHECK(m.Area_t == Catch::Approx(0.25));
  }
  SECTION("directly behind is outside the field of view") {
    ObjectInstance target{0, {4, 2}};
    TargetMetadata m = target_metadata(s, pose, target, kCfg);
    CHECK(m.theta_t == Catch::Approx(180.0));
    CHECK_FALSE(m.visible_t);
    CHECK(m.Area_t == 0.0);
  }
  SECTION("target at the agent's own cell") {
    ObjectInstance target{0, {4, 4}};
    TargetMetadata m = target_metadata(s, pose, target, kCfg);
    CHECK(m.R_t == 0.0);
    CHECK(m.visible_t);
    CHECK(m.Area_t == 1.0);
  }
  SECTION("beyond the visibility distance") {
    Scene big = all_open(15, 15);
    AgentPose p = pose_at(big, {7, 2}, 0);
    ObjectInstance target{0, {7, 9}};  // 7 cells = 1.75 m > 1.5 m
    TargetMetadata m = target_metadata(big, p, target, kCfg);
    CHECK(m.R_t == Catch::Approx(1.75));
    CHECK_FALSE(m.visible_t);
  }
  SECTION("line of sight blocked by a wall cell") {
    Scene walled = all_open(9, 9);
    walled.reachable.erase(
        std::remove(walled.reachable.begin(), walled.reachable.end(), Cell{4, 5}),
        walled.reachable.end());
    walled.rebuild_mask();
    ObjectInstance target{0, {4, 6}};
    TargetMetadata m = target_metadata(walled, pose, target, kCfg);
    CHECK_FALSE(m.visible_t);
    CHECK(m.Area_t == 0.0);
    CHECK(m.R_t == Catch::Approx(0.5));  // distance unaffected by occlusion
  }
}

TEST_CASE("agent metadata uses the spawn frame") {
  AgentPose spawn{0.0, 0.0, 0, 0};
  SECTION("identity") {
    AgentMetadata m = agent_metadata(spawn, spawn);
    CHECK(m.R_a == 0.0);
    CHECK(m.theta_a == 0.0);
  }
  SECTION("straight ahead of spawn") {
    AgentPose pose{0.0, 1.0, 180, 0};  // own heading is irrelevant
    AgentMetadata m = agent_metadata(pose, spawn);
    CHECK(m.R_a == Catch::Approx(1.0));
    CHECK(m.theta_a == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("clockwise bearing convention") {
    AgentPose pose{1.0, 0.0, 0, 0};
    AgentMetadata m = agent_metadata(pose, spawn);
    CHECK(m.R_a == Catch::Approx(1.0));
    CHECK(m.theta_a == Catch::Approx(90.0));
  }
}

TEST_CASE("reachability bits") {
  SECTION("everything reachable around a centered agent") {
    Scene s = all_open(15, 15);
    AgentPose pose = pose_at(s, {7, 7}, 0);
    const auto bits = reachability_metadata(s, pose, kCfg);
    REQUIRE(static_cast<int>(bits.size()) == 36);
    for (uint8_t b : bits) CHECK(b == 1);
  }
  SECTION("wall ahead clears the front bit at radius two") {
    Scene s = all_open(15, 15);
    for (int ix = 6; ix <= 8; ++ix)
      s.reachable.erase(std::remove(s.reachable.begin(), s.reachable.end(), Cell{ix, 9}),
                        s.reachable.end());
    s.rebuild_mask();
    AgentPose pose = pose_at(s, {7, 7}, 0);
    const auto bits = reachability_metadata(s, pose, kCfg);
    CHECK(bits[0] == 0);  // radius 2, angle 0
  }
  SECTION("probe point exactly on a reachable center") {
    Scene s = all_open(15, 15);
    AgentPose pose = pose_at(s, {7, 7}, 0);
    // radius 2, angle 0 probes (7, 9) exactly
    CHECK(point_near_reachable(s, pose.x, pose.z + 2 * s.grid_size));
  }
}

TEST_CASE("threshold boundary: distance exactly gridSize/sqrt(2) counts as reachable") {
  Scene s = all_open(3, 3);
  // point offset by (gs/2, gs/2) from center (1,1); squared distance is exactly gs^2/2
  const double gs = s.grid_size;
  CHECK(point_near_reachable(s, s.center_x(1) + gs / 2, s.center_z(1) + gs / 2));

  // nudge strictly past the threshold with every nearby center removed
  Scene corner;
  corner.id = "corner";
  corner.grid_size = gs;
  corner.width = 3;
  corner.depth = 3;
  corner.reachable.push_back({1, 1});
  corner.rebuild_mask();
  CHECK_FALSE(point_near_reachable(corner, corner.center_x(1) + gs / 2 + 1e-9,
                                   corner.center_z(1) + gs / 2));
}

TEST_CASE("rotation equivariance of bearings and reachability bits") {
  Scene s = gen_scene(31, {.width = 13, .depth = 13, .wall_density = 0.2, .n_objects = 2});
  const ObjectInstance& target = s.objects.front();
  for (const auto& spawn : s.spawns) {
    AgentPose pose = pose_from_spawn(s, spawn);
    const TargetMetadata base_t = target_metadata(s, pose, target, kCfg);
    const AgentMetadata base_a = agent_metadata(pose, pose);
    const auto base_bits = reachability_metadata(s, pose, kCfg);
    const int angles = kCfg.probe_angles();

    for (int delta = 90; delta < 360; delta += 90) {
      AgentPose rotated = pose;
      rotated.rotation = mod360(pose.rotation + delta);
      const TargetMetadata rot_t = target_metadata(s, rotated, target, kCfg);
      CHECK(rot_t.R_t == base_t.R_t);
      CHECK(rot_t.theta_t == Catch::Approx(norm_deg(base_t.theta_t - delta)).margin(1e-9));
      CHECK(agent_metadata(rotated, rotated).R_a == base_a.R_a);

      const auto rot_bits = reachability_metadata(s, rotated, kCfg);
      const int shift = delta / kCfg.probe_angle_step;
      for (int r = 0; r < 3; ++r)
        for (int a = 0; a < angles; ++a)
          CHECK(rot_bits[r * angles + a] == base_bits[r * angles + (a + shift) % angles]);
    }
  }
}

TEST_CASE("visited history chain") {
  Scene s = all_open(5, 5);
  AgentPose pose = pose_at(s, {2, 2}, 0);

  SECTION("empty history") {
    VisitedMetadata v = visited_metadata(s, {}, pose);
    CHECK_FALSE(v.visited_l);
    CHECK_FALSE(v.visited_lr);
    CHECK_FALSE(v.visited_lrh);
  }
  SECTION("same cell, different rotation") {
    VisitedMetadata v = visited_metadata(s, {pose_at(s, {2, 2}, 90)}, pose);
    CHECK(v.visited_l);
    CHECK_FALSE(v.visited_lr);
    CHECK_FALSE(v.visited_lrh);
  }
  SECTION("same cell and rotation, different horizon") {
    VisitedMetadata v = visited_metadata(s, {pose_at(s, {2, 2}, 0, 30)}, pose);
    CHECK(v.visited_l);
    CHECK(v.visited_lr);
    CHECK_FALSE(v.visited_lrh);
  }
  SECTION("identical prior pose") {
    VisitedMetadata v = visited_metadata(s, {pose}, pose);
    CHECK(v.visited_l);
    CHECK(v.visited_lr);
    CHECK(v.visited_lrh);
  }
}

TEST_CASE("egocentric observation") {
  SECTION("empty room: the forward cone is visible, behind is not") {
    Scene s = all_open(9, 9);
    AgentPose pose = pose_at(s, {4, 4}, 0);
    const Vec obs = render_observation(s, pose, -1, kCfg);
    REQUIRE(obs.size() == 2u * 7 * 7);
    // fov 90: cell (fwd, lat) visible iff it is the agent's own cell or
    // fwd >= 1 with |lat| <= fwd
    for (int row = 0; row < 7; ++row) {
      const int fwd = 3 - row;
      for (int col = 0; col < 7; ++col) {
        const int lat = col - 3;
        const bool in_cone = (fwd == 0 && lat == 0) || (fwd >= 1 && std::abs(lat) <= fwd);
        CHECK(obs[row * 7 + col] == (in_cone ? 1.0 : 0.0));
      }
    }
    for (int i = 49; i < 98; ++i) CHECK(obs[i] == 0.0);
  }
  SECTION("occlusion: cells beyond a wall read zero") {
    Scene s = all_open(9, 9);
    // wall directly ahead at two cells
    s.reachable.erase(std::remove(s.reachable.begin(), s.reachable.end(), Cell{4, 6}),
                      s.reachable.end());
    s.rebuild_mask();
    AgentPose pose = pose_at(s, {4, 4}, 0);
    const Vec obs = render_observation(s, pose, -1, kCfg);
    CHECK(obs[2 * 7 + 3] == 1.0);  // one ahead, open and visible
    CHECK(obs[1 * 7 + 3] == 0.0);  // the wall cell itself
    CHECK(obs[0 * 7 + 3] == 0.0);  // occluded behind the wall
  }
  SECTION("rotating the world and the agent together leaves the view unchanged") {
    Scene s = gen_scene(17, {.width = 13, .depth = 13, .wall_density = 0.2, .n_objects = 1});
    const AgentPose pose = pose_from_spawn(s, s.spawns.front());
    const Cell pivot = cell_of(s, pose);

    // clockwise quarter turn about the pivot: offset (dx, dz) -> (dz, -dx)
    const auto turn = [&](const Cell& c) {
      return Cell{pivot.ix + (c.iz - pivot.iz), pivot.iz - (c.ix - pivot.ix)};
    };
    int min_ix = 0, min_iz = 0;
    for (const Cell& c : s.reachable) {
      const Cell t = turn(c);
      min_ix = std::min(min_ix, t.ix);
      min_iz = std::min(min_iz, t.iz);
    }
    Scene rotated;
    rotated.id = "rotated";
    rotated.grid_size = s.grid_size;
    int max_ix = 0, max_iz = 0;
    for (const Cell& c : s.reachable) {
      const Cell t{turn(c).ix - min_ix, turn(c).iz - min_iz};
      rotated.reachable.push_back(t);
      max_ix = std::max(max_ix, t.ix);
      max_iz = std::max(max_iz, t.iz);
    }
    rotated.width = max_ix + 1;
    rotated.depth = max_iz + 1;
    rotated.rebuild_mask();

    AgentPose rotated_pose =
        pose_at(rotated, {pivot.ix - min_ix, pivot.iz - min_iz}, mod360(pose.rotation + 90));
    const Vec base = render_observation(s, pose, -1, kCfg);
    const Vec view = render_observation(rotated, rotated_pose, -1, kCfg);
    CHECK(view == base);
  }
  SECTION("visible target two cells ahead occupies one forward-column entry") {
    Scene s = all_open(9, 9);
    s.objects.push_back({3, {4, 6}});
    AgentPose pose = pose_at(s, {4, 4}, 0);
    const Vec obs = render_observation(s, pose, 3, kCfg);
    int nonzero = 0;
    for (int i = 49; i < 98; ++i) nonzero += obs[i] != 0.0;
    CHECK(nonzero == 1);
    // row = half - 2 = 1, col = half = 3 in the target channel
    CHECK(obs[49 + 1 * 7 + 3] == 1.0);
  }
}

TEST_CASE("concept record invariants hold on extraction") {
  Scene s = gen_scene(23, {.width = 11, .depth = 11, .wall_density = 0.15, .n_objects = 2});
  AgentPose spawn = pose_from_spawn(s, s.spawns.front());
  std::vector<AgentPose> history;
  AgentPose pose = spawn;
  Rng rng(4);
  for (int t = 0; t < 60; ++t) {
    const ConceptRecord c =
        extract_concepts(s, pose, spawn, s.objects.front(), history, false, kCfg);
    CHECK_NOTHROW(validate_concepts(c));
    CHECK((!c.visited_lrh || c.visited_lr));
    CHECK((!c.visited_lr || c.visited_l));
    history.push_back(pose);
    const Action a = static_cast<Action>(rng.uniform(5));  // skip End
    pose = step(s, pose, a, kCfg).pose;
  }
}
