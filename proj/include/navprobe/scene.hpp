#pragma once

#include <array>
#include <deque>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "navprobe/common.hpp"

namespace navprobe {

struct Cell {
  int ix = 0;
  int iz = 0;
  auto operator<=>(const Cell&) const = default;
};

struct ObjectInstance {
  int class_id = 0;
  Cell cell;
};

struct Spawn {
  Cell cell;
  int rotation = 0;  // degrees
};

constexpr int kUnreachable = -1;

// Immutable gridworld geometry. reachable cells are stored both as a sorted
// list (stable iteration) and a dense mask (O(1) lookup).
struct Scene {
  std::string id;
  double grid_size = 0.25;
  int width = 0;
  int depth = 0;
  std::vector<Cell> reachable;
  std::vector<ObjectInstance> objects;
  std::vector<Spawn> spawns;

  std::vector<uint8_t> mask;  // width*depth, 1 = reachable

  bool in_bounds(const Cell& c) const {
    return c.ix >= 0 && c.ix < width && c.iz >= 0 && c.iz < depth;
  }
  bool is_reachable(const Cell& c) const {
    return in_bounds(c) && mask[static_cast<size_t>(c.iz) * width + c.ix] != 0;
  }
  double center_x(int ix) const { return ix * grid_size; }
  double center_z(int iz) const { return iz * grid_size; }

  void rebuild_mask() {
    mask.assign(static_cast<size_t>(width) * depth, 0);
    for (const auto& c : reachable) {
      if (!in_bounds(c)) throw ValidationError("scene " + id + ": reachable cell out of bounds");
      mask[static_cast<size_t>(c.iz) * width + c.ix] = 1;
    }
  }
};

// Neighbor order is fixed (+z, +x, -z, -x) so every BFS-derived artifact is
// reproducible.
inline std::array<Cell, 4> neighbors4(const Cell& c) {
  return {Cell{c.ix, c.iz + 1}, Cell{c.ix + 1, c.iz}, Cell{c.ix, c.iz - 1}, Cell{c.ix - 1, c.iz}};
}

// BFS distance field (in cells) from `from` over reachable cells; kUnreachable
// marks cells no path reaches.
inline std::vector<int> bfs_distances(const Scene& scene, const Cell& from) {
  std::vector<int> dist(static_cast<size_t>(scene.width) * scene.depth, kUnreachable);
  if (!scene.is_reachable(from)) return dist;
  std::deque<Cell> queue{from};
  dist[static_cast<size_t>(from.iz) * scene.width + from.ix] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<size_t>(c.iz) * scene.width + c.ix];
    for (const Cell& n : neighbors4(c)) {
      if (!scene.is_reachable(n)) continue;
      int& dn = dist[static_cast<size_t>(n.iz) * scene.width + n.ix];
      if (dn == kUnreachable) {
        dn = d + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

// Geodesic length in cells between two reachable cells; kUnreachable if no path.
inline int shortest_path_cells(const Scene& scene, const Cell& from, const Cell& to) {
  if (!scene.is_reachable(from) || !scene.is_reachable(to))
    throw ValidationError("shortest_path: both cells must be reachable");
  const auto dist = bfs_distances(scene, from);
  return dist[static_cast<size_t>(to.iz) * scene.width + to.ix];
}

inline double shortest_path_meters(const Scene& scene, const Cell& from, const Cell& to) {
  const int cells = shortest_path_cells(scene, from, to);
  if (cells == kUnreachable) throw ValidationError("shortest_path: cells are not connected");
  return cells * scene.grid_size;
}

inline void validate_scene(const Scene& scene, int vocab_size = -1) {
  if (scene.grid_size <= 0.0) throw ValidationError("scene " + scene.id + ": grid_size must be > 0");
  if (scene.width <= 0 || scene.depth <= 0)
    throw ValidationError("scene " + scene.id + ": width/depth must be positive");
  if (scene.reachable.empty()) throw ValidationError("scene " + scene.id + ": no reachable cells");
  if (scene.mask.size() != static_cast<size_t>(scene.width) * scene.depth)
    throw ValidationError("scene " + scene.id + ": mask not built");

  std::set<Cell> seen;
  for (const auto& c : scene.reachable) {
    if (!scene.in_bounds(c)) throw ValidationError("scene " + scene.id + ": reachable cell out of bounds");
    if (!seen.insert(c).second) throw ValidationError("scene " + scene.id + ": duplicate reachable cell");
  }
  for (const auto& o : scene.objects) {
    if (o.class_id < 0 || (vocab_size >= 0 && o.class_id >= vocab_size))
      throw ValidationError("scene " + scene.id + ": object class_id outside vocabulary");
    if (!scene.is_reachable(o.cell))
      throw ValidationError("scene " + scene.id + ": object cell not reachable");
  }
  for (const auto& s : scene.spawns) {
    if (!scene.is_reachable(s.cell))
      throw ValidationError("scene " + scene.id + ": spawn cell not reachable");
  }

  // single connected component
  const auto dist = bfs_distances(scene, scene.reachable.front());
  for (const auto& c : scene.reachable) {
    if (dist[static_cast<size_t>(c.iz) * scene.width + c.ix] == kUnreachable)
      throw ValidationError("scene " + scene.id + ": reachable set is not connected");
  }
}

// ----------------------------------------------------------------------------
// JSON schema:
// {"id", "grid_size", "width", "depth", "reachable": [[ix,iz],...],
//  "objects": [{"class",ix,iz},...], "spawns": [[ix,iz,rot],...]}

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["id"] = scene.id;
  j["grid_size"] = scene.grid_size;
  j["width"] = scene.width;
  j["depth"] = scene.depth;
  auto& reach = j["reachable"] = nlohmann::json::array();
  for (const auto& c : scene.reachable) reach.push_back({c.ix, c.iz});
  auto& objs = j["objects"] = nlohmann::json::array();
  for (const auto& o : scene.objects)
    objs.push_back({{"class", o.class_id}, {"ix", o.cell.ix}, {"iz", o.cell.iz}});
  auto& spawns = j["spawns"] = nlohmann::json::array();
  for (const auto& s : scene.spawns) spawns.push_back({s.cell.ix, s.cell.iz, s.rotation});
  return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  try {
    scene.id = j.at("id").get<std::string>();
    scene.grid_size = j.at("grid_size").get<double>();
    scene.width = j.at("width").get<int>();
    scene.depth = j.at("depth").get<int>();
    for (const auto& c : j.at("reachable")) scene.reachable.push_back({c.at(0), c.at(1)});
    for (const auto& o : j.at("objects"))
      scene.objects.push_back({o.at("class").get<int>(), {o.at("ix").get<int>(), o.at("iz").get<int>()}});
    for (const auto& s : j.at("spawns"))
      scene.spawns.push_back({{s.at(0).get<int>(), s.at(1).get<int>()}, s.at(2).get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scene file: malformed JSON: ") + e.what());
  }
  scene.rebuild_mask();
  validate_scene(scene);
  return scene;
}

inline void save_scene(const Scene& scene, const std::filesystem::path& path) {
  write_text_file(path, scene_to_json(scene).dump(2) + "\n");
}

inline Scene load_scene(const std::filesystem::path& path) {
  return scene_from_json(nlohmann::json::parse(read_text_file(path)));
}

// ----------------------------------------------------------------------------
// Procedural rooms: a boundary wall ring plus random interior rectangles.
// Obstacle rectangles have side >= 2 so any blocked cell is backed by a second
// blocked cell, which keeps the collision/reachability metadata consistent.

struct SceneGenParams {
  int width = 12;
  int depth = 12;
  double wall_density = 0.15;  // in [0, 0.4]
  int n_objects = 3;
  int n_spawns = 4;
  double grid_size = 0.25;
  int vocab_size = 6;
  int max_retries = 100;
};

inline Scene gen_scene(uint64_t seed, const SceneGenParams& p, const std::string& id = "") {
  if (p.width < 6 || p.depth < 6) throw ConfigError("gen_scene: width/depth must be >= 6");
  if (p.wall_density < 0.0 || p.wall_density > 0.4)
    throw ConfigError("gen_scene: wall_density must be in [0, 0.4]");
  if (p.n_objects < 0 || p.n_spawns <= 0 || p.grid_size <= 0.0)
    throw ConfigError("gen_scene: invalid parameters");

  Rng rng(Rng::derive(seed, 0x5ce9eULL));
  const int interior = (p.width - 2) * (p.depth - 2);

  for (int attempt = 0; attempt < p.max_retries; ++attempt) {
    Scene scene;
    scene.id = id.empty() ? ("scene_" + std::to_string(seed)) : id;
    scene.grid_size = p.grid_size;
    scene.width = p.width;
    scene.depth = p.depth;

    std::vector<uint8_t> blocked(static_cast<size_t>(p.width) * p.depth, 0);
    auto block = [&](int ix, int iz) { blocked[static_cast<size_t>(iz) * p.width + ix] = 1; };
    for (int ix = 0; ix < p.width; ++ix) {
      block(ix, 0);
      block(ix, p.depth - 1);
    }
    for (int iz = 0; iz < p.depth; ++iz) {
      block(0, iz);
      block(p.width - 1, iz);
    }

    int target_blocked = static_cast<int>(p.wall_density * interior);
    int placed = 0;
    int guard = 0;
    while (placed < target_blocked && guard++ < 200) {
      const int w = 2 + static_cast<int>(rng.uniform(3));
      const int d = 2 + static_cast<int>(rng.uniform(3));
      if (p.width - 2 - w <= 1 || p.depth - 2 - d <= 1) continue;
      const int x0 = 1 + static_cast<int>(rng.uniform(static_cast<uint64_t>(p.width - 2 - w)));
      const int z0 = 1 + static_cast<int>(rng.uniform(static_cast<uint64_t>(p.depth - 2 - d)));
      for (int ix = x0; ix < x0 + w; ++ix)
        for (int iz = z0; iz < z0 + d; ++iz) block(ix, iz);
      placed += w * d;
    }

    for (int iz = 0; iz < p.depth; ++iz)
      for (int ix = 0; ix < p.width; ++ix)
        if (!blocked[static_cast<size_t>(iz) * p.width + ix]) scene.reachable.push_back({ix, iz});
    scene.rebuild_mask();

    const int need = p.n_objects + p.n_spawns;
    if (static_cast<int>(scene.reachable.size()) < std::max(need, 4)) continue;

    const auto dist = bfs_distances(scene, scene.reachable.front());
    bool connected = true;
    for (const auto& c : scene.reachable)
      if (dist[static_cast<size_t>(c.iz) * scene.width + c.ix] == kUnreachable) {
        connected = false;
        break;
      }
    if (!connected) continue;

    // objects and spawns on distinct reachable cells
    std::vector<size_t> order(scene.reachable.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    size_t next = 0;
    for (int i = 0; i < p.n_objects; ++i) {
      const Cell c = scene.reachable[order[next++]];
      scene.objects.push_back({static_cast<int>(rng.uniform(static_cast<uint64_t>(p.vocab_size))), c});
    }
    for (int i = 0; i < p.n_spawns; ++i) {
      const Cell c = scene.reachable[order[next++]];
      scene.spawns.push_back({c, static_cast<int>(rng.uniform(4)) * 90});
    }

    validate_scene(scene, p.vocab_size);
    return scene;
  }
  throw ValidationError("gen_scene: no connected layout found after retries");
}

}  // namespace navprobe
