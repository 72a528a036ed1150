#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "navprobe/common.hpp"
#include "navprobe/scene.hpp"

namespace navprobe {

enum class Action : int {
  MoveAhead = 0,
  RotateLeft = 1,
  RotateRight = 2,
  LookUp = 3,
  LookDown = 4,
  End = 5,
};
constexpr int kNumActions = 6;

inline const char* action_name(Action a) {
  switch (a) {
    case Action::MoveAhead: return "MoveAhead";
    case Action::RotateLeft: return "RotateLeft";
    case Action::RotateRight: return "RotateRight";
    case Action::LookUp: return "LookUp";
    case Action::LookDown: return "LookDown";
    case Action::End: return "End";
  }
  throw ValidationError("unknown action");
}

inline Action action_from_name(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i)
    if (name == action_name(static_cast<Action>(i))) return static_cast<Action>(i);
  throw ValidationError("unknown action name: " + name);
}

// Camera pitch values, mirroring common simulator defaults.
constexpr std::array<int, 4> kHorizons{-30, 0, 30, 60};

struct AgentPose {
  double x = 0.0;       // meters, cell center (= ix * grid_size)
  double z = 0.0;
  int rotation = 0;     // degrees, clockwise from +z
  int horizon = 0;      // degrees, one of kHorizons
};

struct StepResult {
  AgentPose pose;
  bool collision = false;
  bool done = false;
};

struct GridConfig {
  int rotation_step = 90;               // agent motion rotation step
  int probe_angle_step = 30;            // reachability probe resolution
  std::array<int, 3> radii{2, 4, 6};    // probe radii, multiples of grid_size
  double visibility_distance = 1.5;     // meters
  double fov_deg = 90.0;
  int patch = 7;                        // egocentric observation size, odd

  int probe_angles() const { return 360 / probe_angle_step; }
  int reach_bits() const { return static_cast<int>(radii.size()) * probe_angles(); }
};

// ----------------------------- angle helpers --------------------------------

constexpr double kPi = 3.14159265358979323846;

inline double norm_deg(double d) {
  d = std::fmod(d, 360.0);
  if (d < 0.0) d += 360.0;
  return d;
}

// (-180, 180]
inline double signed_deg(double d) {
  d = norm_deg(d);
  return d > 180.0 ? d - 360.0 : d;
}

inline int mod360(int d) { return ((d % 360) + 360) % 360; }

inline double sin_deg(double d) { return std::sin(d * kPi / 180.0); }
inline double cos_deg(double d) { return std::cos(d * kPi / 180.0); }

// Bearing of displacement (dx, dz) relative to a heading, clockwise, [0, 360).
// Zero displacement maps to bearing 0 by convention.
inline double bearing_deg(double dx, double dz, int heading) {
  if (dx == 0.0 && dz == 0.0) return 0.0;
  return norm_deg(std::atan2(dx, dz) * 180.0 / kPi - heading);
}

// ----------------------------- pose helpers ---------------------------------

inline Cell cell_of(const Scene& scene, const AgentPose& pose) {
  return {static_cast<int>(std::llround(pose.x / scene.grid_size)),
          static_cast<int>(std::llround(pose.z / scene.grid_size))};
}

inline AgentPose pose_at(const Scene& scene, const Cell& c, int rotation, int horizon = 0) {
  return {scene.center_x(c.ix), scene.center_z(c.iz), mod360(rotation), horizon};
}

inline AgentPose pose_from_spawn(const Scene& scene, const Spawn& s) {
  return pose_at(scene, s.cell, s.rotation, 0);
}

inline void validate_pose(const Scene& scene, const AgentPose& pose, const GridConfig& cfg) {
  const Cell c = cell_of(scene, pose);
  if (!scene.is_reachable(c)) throw ValidationError("pose not on a reachable cell");
  if (mod360(pose.rotation) % cfg.rotation_step != 0)
    throw ValidationError("pose rotation not a multiple of the rotation step");
  bool ok = false;
  for (int h : kHorizons) ok = ok || h == pose.horizon;
  if (!ok) throw ValidationError("pose horizon outside the allowed set");
}

// ----------------------------- step ------------------------------------------

inline StepResult step(const Scene& scene, const AgentPose& pose, Action action,
                       const GridConfig& cfg) {
  validate_pose(scene, pose, cfg);
  StepResult res{pose, false, false};
  switch (action) {
    case Action::MoveAhead: {
      const double nx = pose.x + scene.grid_size * sin_deg(mod360(pose.rotation));
      const double nz = pose.z + scene.grid_size * cos_deg(mod360(pose.rotation));
      const Cell target{static_cast<int>(std::llround(nx / scene.grid_size)),
                        static_cast<int>(std::llround(nz / scene.grid_size))};
      if (scene.is_reachable(target)) {
        res.pose.x = scene.center_x(target.ix);
        res.pose.z = scene.center_z(target.iz);
      } else {
        res.collision = true;
      }
      break;
    }
    case Action::RotateLeft:
      res.pose.rotation = mod360(pose.rotation - cfg.rotation_step);
      break;
    case Action::RotateRight:
      res.pose.rotation = mod360(pose.rotation + cfg.rotation_step);
      break;
    case Action::LookUp:
    case Action::LookDown: {
      int idx = 0;
      for (int i = 0; i < static_cast<int>(kHorizons.size()); ++i)
        if (kHorizons[i] == pose.horizon) idx = i;
      idx += (action == Action::LookDown) ? 1 : -1;
      idx = std::clamp(idx, 0, static_cast<int>(kHorizons.size()) - 1);
      res.pose.horizon = kHorizons[idx];
      break;
    }
    case Action::End:
      res.done = true;
      break;
  }
  return res;
}

// ----------------------------- line of sight --------------------------------

// Supercover grid traversal (all cells the segment between two cell centers
// passes through; corner crossings include both adjacent cells). Sight is
// blocked by unreachable cells only.
inline bool line_of_sight(const Scene& scene, const Cell& from, const Cell& to) {
  const auto blocked = [&](int ix, int iz) { return !scene.is_reachable({ix, iz}); };

  int x = from.ix, y = from.iz;
  int dx = to.ix - from.ix, dy = to.iz - from.iz;
  const int xstep = dx < 0 ? -1 : 1;
  const int ystep = dy < 0 ? -1 : 1;
  dx = std::abs(dx);
  dy = std::abs(dy);
  if (blocked(x, y)) return false;
  const int ddx = 2 * dx, ddy = 2 * dy;
  int error, errorprev;
  if (ddx >= ddy) {
    errorprev = error = dx;
    for (int i = 0; i < dx; ++i) {
      x += xstep;
      error += ddy;
      if (error > ddx) {
        y += ystep;
        error -= ddx;
        if (error + errorprev < ddx) {
          if (blocked(x, y - ystep)) return false;
        } else if (error + errorprev > ddx) {
          if (blocked(x - xstep, y)) return false;
        } else {
          if (blocked(x, y - ystep) || blocked(x - xstep, y)) return false;
        }
      }
      if (blocked(x, y)) return false;
      errorprev = error;
    }
  } else {
    errorprev = error = dy;
    for (int i = 0; i < dy; ++i) {
      y += ystep;
      error += ddx;
      if (error > ddy) {
        x += xstep;
        error -= ddy;
        if (error + errorprev < ddy) {
          if (blocked(x - xstep, y)) return false;
        } else if (error + errorprev > ddy) {
          if (blocked(x, y - ystep)) return false;
        } else {
          if (blocked(x - xstep, y) || blocked(x, y - ystep)) return false;
        }
      }
      if (blocked(x, y)) return false;
      errorprev = error;
    }
  }
  return true;
}

// ----------------------------- metadata -------------------------------------

struct TargetMetadata {
  double R_t = 0.0;
  double theta_t = 0.0;
  bool visible_t = false;
  double Area_t = 0.0;
};

inline bool visibility_test(const Scene& scene, const AgentPose& pose, const Cell& target_cell,
                            const GridConfig& cfg, bool apply_distance = true) {
  const double dx = scene.center_x(target_cell.ix) - pose.x;
  const double dz = scene.center_z(target_cell.iz) - pose.z;
  const double dist = std::hypot(dx, dz);
  if (apply_distance && dist > cfg.visibility_distance) return false;
  const double rel = signed_deg(bearing_deg(dx, dz, mod360(pose.rotation)));
  // inclusive edge: cells on the cone boundary (exactly fov/2) stay visible
  if (std::abs(rel) > cfg.fov_deg / 2.0 + 1e-9) return false;
  return line_of_sight(scene, cell_of(scene, pose), target_cell);
}

inline TargetMetadata target_metadata(const Scene& scene, const AgentPose& pose,
                                      const ObjectInstance& target, const GridConfig& cfg) {
  TargetMetadata m;
  const double dx = scene.center_x(target.cell.ix) - pose.x;
  const double dz = scene.center_z(target.cell.iz) - pose.z;
  m.R_t = std::hypot(dx, dz);
  m.theta_t = bearing_deg(dx, dz, mod360(pose.rotation));
  m.visible_t = visibility_test(scene, pose, target.cell, cfg);
  if (m.visible_t) {
    // apparent-size proxy: inverse-square of distance, saturating at one cell
    const double denom = std::max(m.R_t, scene.grid_size);
    m.Area_t = std::clamp(scene.grid_size * scene.grid_size / (denom * denom), 0.0, 1.0);
  }
  return m;
}

struct AgentMetadata {
  double R_a = 0.0;
  double theta_a = 0.0;
};

inline AgentMetadata agent_metadata(const AgentPose& pose, const AgentPose& spawn) {
  AgentMetadata m;
  const double dx = pose.x - spawn.x;
  const double dz = pose.z - spawn.z;
  m.R_a = std::hypot(dx, dz);
  m.theta_a = bearing_deg(dx, dz, mod360(spawn.rotation));
  return m;
}

// True iff some reachable cell center lies within grid_size/sqrt(2) of (px, pz).
// Compared on squared distances so a point exactly at the threshold counts.
inline bool point_near_reachable(const Scene& scene, double px, double pz) {
  const double gs = scene.grid_size;
  const double thr_sq = gs * gs / 2.0;
  const int cx = static_cast<int>(std::llround(px / gs));
  const int cz = static_cast<int>(std::llround(pz / gs));
  for (int ix = cx - 1; ix <= cx + 1; ++ix) {
    for (int iz = cz - 1; iz <= cz + 1; ++iz) {
      if (!scene.is_reachable({ix, iz})) continue;
      const double dx = px - scene.center_x(ix);
      const double dz = pz - scene.center_z(iz);
      if (dx * dx + dz * dz <= thr_sq) return true;
    }
  }
  return false;
}

// One bit per (radius, probe angle): is some reachable grid point near the
// probed location? Probe angles are relative to the heading, clockwise,
// 0 = straight ahead. Layout: [radius_index * probe_angles + angle_index].
inline std::vector<uint8_t> reachability_metadata(const Scene& scene, const AgentPose& pose,
                                                  const GridConfig& cfg) {
  if (360 % cfg.probe_angle_step != 0)
    throw ValidationError("probe_angle_step must divide 360");
  std::vector<uint8_t> bits;
  bits.reserve(cfg.reach_bits());
  const int angles = cfg.probe_angles();
  for (int r = 0; r < static_cast<int>(cfg.radii.size()); ++r) {
    const double radius = cfg.radii[r] * scene.grid_size;
    for (int a = 0; a < angles; ++a) {
      const int ang = mod360(pose.rotation + a * cfg.probe_angle_step);
      const double px = pose.x + radius * sin_deg(ang);
      const double pz = pose.z + radius * cos_deg(ang);
      bits.push_back(point_near_reachable(scene, px, pz) ? 1 : 0);
    }
  }
  return bits;
}

struct VisitedMetadata {
  bool visited_l = false;
  bool visited_lr = false;
  bool visited_lrh = false;
};

inline VisitedMetadata visited_metadata(const Scene& scene, const std::vector<AgentPose>& history,
                                        const AgentPose& pose) {
  VisitedMetadata v;
  const Cell here = cell_of(scene, pose);
  for (const AgentPose& h : history) {
    if (cell_of(scene, h) != here) continue;
    v.visited_l = true;
    if (mod360(h.rotation) != mod360(pose.rotation)) continue;
    v.visited_lr = true;
    if (h.horizon == pose.horizon) {
      v.visited_lrh = true;
      return v;
    }
  }
  return v;
}

// ----------------------------- observation ----------------------------------

// Two k x k egocentric patches centered on the agent, rotated so row 0 is
// ahead; row-major, occupancy channel first. Both channels are gated by the
// same forward FOV + line-of-sight test as visible_t (a camera view, not a
// map): cells behind the agent, beyond walls, or outside the scene read 0.
inline Vec render_observation(const Scene& scene, const AgentPose& pose, int target_class,
                              const GridConfig& cfg) {
  const int k = cfg.patch;
  if (k < 1 || k % 2 == 0) throw ValidationError("patch size must be odd and positive");
  const int half = k / 2;

  // heading snapped to the nearest axis (exact for 90-degree motion)
  const int hi = ((mod360(pose.rotation) + 45) / 90) % 4;
  static constexpr std::array<std::array<int, 2>, 4> kHeading{{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};
  static constexpr std::array<std::array<int, 2>, 4> kRight{{{1, 0}, {0, -1}, {-1, 0}, {0, 1}}};
  const auto& h = kHeading[hi];
  const auto& r = kRight[hi];
  const Cell agent = cell_of(scene, pose);
  AgentPose camera = pose;
  camera.rotation = hi * 90;  // the cone follows the snapped heading

  Vec obs(static_cast<size_t>(2) * k * k, 0.0);
  for (int row = 0; row < k; ++row) {
    const int fwd = half - row;
    for (int col = 0; col < k; ++col) {
      const int lat = col - half;
      const Cell c{agent.ix + fwd * h[0] + lat * r[0], agent.iz + fwd * h[1] + lat * r[1]};
      const size_t at = static_cast<size_t>(row) * k + col;
      if (scene.is_reachable(c) && visibility_test(scene, camera, c, cfg, /*apply_distance=*/false))
        obs[at] = 1.0;
      if (target_class >= 0) {
        for (const auto& o : scene.objects) {
          if (o.class_id == target_class && o.cell == c &&
              visibility_test(scene, pose, c, cfg, /*apply_distance=*/false)) {
            obs[static_cast<size_t>(k) * k + at] = 1.0;
            break;
          }
        }
      }
    }
  }
  return obs;
}

// ----------------------------- concept record -------------------------------

struct ConceptRecord {
  double R_t = 0.0;
  double theta_t = 0.0;
  bool visible_t = false;
  double Area_t = 0.0;
  double R_a = 0.0;
  double theta_a = 0.0;
  std::vector<uint8_t> reach;  // GridConfig::reach_bits() entries
  bool visited_l = false;
  bool visited_lr = false;
  bool visited_lrh = false;
  bool collision = false;
};

inline void validate_concepts(const ConceptRecord& c) {
  if (c.Area_t > 0.0 && !c.visible_t)
    throw ValidationError("concept invariant violated: Area_t > 0 without visibility");
  if (c.R_t < 0.0 || c.R_a < 0.0) throw ValidationError("concept invariant violated: negative distance");
  if (c.visited_lrh && !c.visited_lr)
    throw ValidationError("concept invariant violated: visited_lrh without visited_lr");
  if (c.visited_lr && !c.visited_l)
    throw ValidationError("concept invariant violated: visited_lr without visited_l");
}

inline ConceptRecord extract_concepts(const Scene& scene, const AgentPose& pose,
                                      const AgentPose& spawn, const ObjectInstance& target,
                                      const std::vector<AgentPose>& history, bool collision,
                                      const GridConfig& cfg) {
  ConceptRecord c;
  const TargetMetadata t = target_metadata(scene, pose, target, cfg);
  c.R_t = t.R_t;
  c.theta_t = t.theta_t;
  c.visible_t = t.visible_t;
  c.Area_t = t.Area_t;
  const AgentMetadata a = agent_metadata(pose, spawn);
  c.R_a = a.R_a;
  c.theta_a = a.theta_a;
  c.reach = reachability_metadata(scene, pose, cfg);
  const VisitedMetadata v = visited_metadata(scene, history, pose);
  c.visited_l = v.visited_l;
  c.visited_lr = v.visited_lr;
  c.visited_lrh = v.visited_lrh;
  c.collision = collision;
  validate_concepts(c);
  return c;
}

// ----------------------------- concept catalog ------------------------------

struct ConceptInfo {
  std::string name;
  bool binary = false;
};

inline std::string reach_concept_name(int radius_mult, int angle_deg) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "reach_%d_%03d", radius_mult, angle_deg);
  return buf;
}

inline std::vector<ConceptInfo> concept_catalog(const GridConfig& cfg) {
  std::vector<ConceptInfo> out = {
      {"R_t", false},     {"theta_t", false}, {"visible_t", true},
      {"Area_t", false},  {"R_a", false},     {"theta_a", false},
  };
  for (int r : cfg.radii)
    for (int a = 0; a < 360; a += cfg.probe_angle_step) out.push_back({reach_concept_name(r, a), true});
  out.push_back({"visited_l", true});
  out.push_back({"visited_lr", true});
  out.push_back({"visited_lrh", true});
  out.push_back({"collision", true});
  return out;
}

// Report layout used by the grouped-bar exports: angles ordered 0..330 within
// each radius group.
inline std::vector<std::pair<std::string, std::vector<std::string>>> concept_groups(
    const GridConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  groups.push_back({"target", {"R_t", "theta_t", "visible_t", "Area_t"}});
  for (int r : cfg.radii) {
    std::vector<std::string> names;
    for (int a = 0; a < 360; a += cfg.probe_angle_step) names.push_back(reach_concept_name(r, a));
    groups.push_back({"reach_" + std::to_string(r), std::move(names)});
  }
  groups.push_back({"visited", {"visited_l", "visited_lr", "visited_lrh"}});
  groups.push_back({"agent", {"R_a", "theta_a"}});
  groups.push_back({"collision", {"collision"}});
  return groups;
}

inline double concept_value(const ConceptRecord& c, const std::string& name,
                            const GridConfig& cfg) {
  if (name == "R_t") return c.R_t;
  if (name == "theta_t") return c.theta_t;
  if (name == "visible_t") return c.visible_t ? 1.0 : 0.0;
  if (name == "Area_t") return c.Area_t;
  if (name == "R_a") return c.R_a;
  if (name == "theta_a") return c.theta_a;
  if (name == "visited_l") return c.visited_l ? 1.0 : 0.0;
  if (name == "visited_lr") return c.visited_lr ? 1.0 : 0.0;
  if (name == "visited_lrh") return c.visited_lrh ? 1.0 : 0.0;
  if (name == "collision") return c.collision ? 1.0 : 0.0;
  if (name.rfind("reach_", 0) == 0) {
    const size_t second = name.find('_', 6);
    if (second != std::string::npos) {
      const int mult = std::stoi(name.substr(6, second - 6));
      const int angle = std::stoi(name.substr(second + 1));
      const int angles = cfg.probe_angles();
      for (int r = 0; r < static_cast<int>(cfg.radii.size()); ++r) {
        if (cfg.radii[r] != mult) continue;
        if (angle % cfg.probe_angle_step != 0 || angle < 0 || angle >= 360) break;
        const size_t idx = static_cast<size_t>(r) * angles + angle / cfg.probe_angle_step;
        if (idx < c.reach.size()) return c.reach[idx] ? 1.0 : 0.0;
      }
    }
  }
  throw ValidationError("unknown concept: " + name);
}

inline bool concept_is_binary(const std::string& name, const GridConfig& cfg) {
  for (const auto& info : concept_catalog(cfg))
    if (info.name == name) return info.binary;
  throw ValidationError("unknown concept: " + name);
}

}  // namespace navprobe
