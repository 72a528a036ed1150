#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "navprobe/common.hpp"
#include "navprobe/gridworld.hpp"
#include "navprobe/scene.hpp"

namespace navprobe {

enum class TaskMode { objectnav, pointnav };

inline std::string task_mode_name(TaskMode m) {
  return m == TaskMode::objectnav ? "objectnav" : "pointnav";
}

inline TaskMode task_mode_from_name(const std::string& name) {
  if (name == "objectnav") return TaskMode::objectnav;
  if (name == "pointnav") return TaskMode::pointnav;
  throw ConfigError("unknown task mode: " + name);
}

struct TaskSpec {
  TaskMode mode = TaskMode::objectnav;
  std::string scene_id;
  Spawn spawn;
  int target_class = -1;  // objectnav
  int target_index = -1;  // objectnav: index into scene.objects
  Cell goal;              // pointnav
  double success_distance = 1.0;
  int max_steps = 500;
};

inline Cell task_goal_cell(const Scene& scene, const TaskSpec& task) {
  if (task.mode == TaskMode::objectnav) {
    if (task.target_index < 0 || task.target_index >= static_cast<int>(scene.objects.size()))
      throw ValidationError("task target not resolvable in scene " + scene.id);
    return scene.objects[task.target_index].cell;
  }
  if (!scene.is_reachable(task.goal)) throw ValidationError("pointnav goal not reachable");
  return task.goal;
}

struct Intervention {
  std::map<int, double> clamp_units;  // hidden unit -> clamped constant
  bool gps_noise = false;
  bool image_zero = false;
  uint64_t noise_seed = 0;
};

// ----------------------------- parameters -----------------------------------

constexpr int kGpsDim = 3;  // [R_t, sin theta_t, cos theta_t]

struct GruParams {
  int input_dim = 0;
  int hidden_dim = 0;
  int goal_dim = 0;
  int n_classes = 0;

  Mat W_z, W_r, W_h;  // hidden x input
  Mat U_z, U_r, U_h;  // hidden x hidden
  Vec b_z, b_r, b_h;  // hidden
  Mat goal_table;     // n_classes x goal_dim
  Mat policy_W;       // actions x hidden
  Vec policy_b;       // actions

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("W_z", W_z.data);
    fn("W_r", W_r.data);
    fn("W_h", W_h.data);
    fn("U_z", U_z.data);
    fn("U_r", U_r.data);
    fn("U_h", U_h.data);
    fn("b_z", b_z);
    fn("b_r", b_r);
    fn("b_h", b_h);
    fn("goal_table", goal_table.data);
    fn("policy_W", policy_W.data);
    fn("policy_b", policy_b);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    const_cast<GruParams*>(this)->for_each_tensor(
        [&](const char* name, Vec& v) { fn(name, const_cast<const Vec&>(v)); });
  }
};

inline void validate_params(const GruParams& p) {
  const int h = p.hidden_dim;
  const int in = p.input_dim;
  auto expect = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("params: inconsistent shape for ") + what);
  };
  expect(p.W_z.rows == h && p.W_z.cols == in, "W_z");
  expect(p.W_r.rows == h && p.W_r.cols == in, "W_r");
  expect(p.W_h.rows == h && p.W_h.cols == in, "W_h");
  expect(p.U_z.rows == h && p.U_z.cols == h, "U_z");
  expect(p.U_r.rows == h && p.U_r.cols == h, "U_r");
  expect(p.U_h.rows == h && p.U_h.cols == h, "U_h");
  expect(static_cast<int>(p.b_z.size()) == h && static_cast<int>(p.b_r.size()) == h &&
             static_cast<int>(p.b_h.size()) == h,
         "biases");
  expect(p.goal_table.rows == p.n_classes && p.goal_table.cols == p.goal_dim, "goal_table");
  expect(p.policy_W.rows == kNumActions && p.policy_W.cols == h, "policy_W");
  expect(static_cast<int>(p.policy_b.size()) == kNumActions, "policy_b");
  p.for_each_tensor([&](const char* name, const Vec& v) {
    if (!all_finite(v)) throw ValidationError(std::string("params: non-finite entries in ") + name);
  });
}

inline GruParams zeros_like(const GruParams& p) {
  GruParams g = p;
  g.for_each_tensor([](const char*, Vec& v) { std::fill(v.begin(), v.end(), 0.0); });
  return g;
}

// observation length for a square egocentric patch with two channels
inline int observation_dim(const GridConfig& cfg) { return 2 * cfg.patch * cfg.patch; }

inline int input_dim_for(TaskMode mode, int obs_dim, int goal_dim) {
  return obs_dim + (mode == TaskMode::objectnav ? goal_dim : kGpsDim);
}

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init; biases zero. Exported as-is
// (seeded, untrained) this doubles as the random baseline.
inline GruParams init_gru(TaskMode mode, int obs_dim, int hidden_dim, int goal_dim, int n_classes,
                          uint64_t seed) {
  GruParams p;
  p.hidden_dim = hidden_dim;
  p.goal_dim = goal_dim;
  p.n_classes = n_classes;
  p.input_dim = input_dim_for(mode, obs_dim, goal_dim);

  p.W_z = Mat(hidden_dim, p.input_dim);
  p.W_r = Mat(hidden_dim, p.input_dim);
  p.W_h = Mat(hidden_dim, p.input_dim);
  p.U_z = Mat(hidden_dim, hidden_dim);
  p.U_r = Mat(hidden_dim, hidden_dim);
  p.U_h = Mat(hidden_dim, hidden_dim);
  p.b_z.assign(hidden_dim, 0.0);
  p.b_r.assign(hidden_dim, 0.0);
  p.b_h.assign(hidden_dim, 0.0);
  p.goal_table = Mat(n_classes, goal_dim);
  p.policy_W = Mat(kNumActions, hidden_dim);
  p.policy_b.assign(kNumActions, 0.0);

  Rng rng(Rng::derive(seed, 0x6121ULL));
  auto fill = [&](Mat& m) {
    const double a = 1.0 / std::sqrt(static_cast<double>(std::max(m.cols, 1)));
    for (double& v : m.data) v = rng.range(-a, a);
  };
  fill(p.W_z);
  fill(p.W_r);
  fill(p.W_h);
  fill(p.U_z);
  fill(p.U_r);
  fill(p.U_h);
  fill(p.goal_table);
  fill(p.policy_W);
  validate_params(p);
  return p;
}

// ----------------------------- params file ----------------------------------
// JSON map: tensor name -> {"shape": [...], "data": row-major floats}

inline nlohmann::json params_to_json(const GruParams& p) {
  nlohmann::json j;
  auto put = [&](const char* name, const std::vector<int>& shape, const Vec& data) {
    j[name] = {{"shape", shape}, {"data", data}};
  };
  put("W_z", {p.W_z.rows, p.W_z.cols}, p.W_z.data);
  put("W_r", {p.W_r.rows, p.W_r.cols}, p.W_r.data);
  put("W_h", {p.W_h.rows, p.W_h.cols}, p.W_h.data);
  put("U_z", {p.U_z.rows, p.U_z.cols}, p.U_z.data);
  put("U_r", {p.U_r.rows, p.U_r.cols}, p.U_r.data);
  put("U_h", {p.U_h.rows, p.U_h.cols}, p.U_h.data);
  put("b_z", {static_cast<int>(p.b_z.size())}, p.b_z);
  put("b_r", {static_cast<int>(p.b_r.size())}, p.b_r);
  put("b_h", {static_cast<int>(p.b_h.size())}, p.b_h);
  put("goal_table", {p.goal_table.rows, p.goal_table.cols}, p.goal_table.data);
  put("policy_W", {p.policy_W.rows, p.policy_W.cols}, p.policy_W.data);
  put("policy_b", {static_cast<int>(p.policy_b.size())}, p.policy_b);
  return j;
}

inline GruParams params_from_json(const nlohmann::json& j) {
  GruParams p;
  try {
    auto mat = [&](const char* name) {
      const auto& t = j.at(name);
      const auto shape = t.at("shape").get<std::vector<int>>();
      if (shape.size() != 2) throw ValidationError(std::string("params: ") + name + " must be 2-D");
      Mat m(shape[0], shape[1]);
      m.data = t.at("data").get<Vec>();
      if (m.data.size() != static_cast<size_t>(shape[0]) * shape[1])
        throw ValidationError(std::string("params: ") + name + " data length mismatch");
      return m;
    };
    auto vec = [&](const char* name) {
      const auto& t = j.at(name);
      const auto shape = t.at("shape").get<std::vector<int>>();
      Vec v = t.at("data").get<Vec>();
      if (shape.size() != 1 || v.size() != static_cast<size_t>(shape[0]))
        throw ValidationError(std::string("params: ") + name + " data length mismatch");
      return v;
    };
    p.W_z = mat("W_z");
    p.W_r = mat("W_r");
    p.W_h = mat("W_h");
    p.U_z = mat("U_z");
    p.U_r = mat("U_r");
    p.U_h = mat("U_h");
    p.b_z = vec("b_z");
    p.b_r = vec("b_r");
    p.b_h = vec("b_h");
    p.goal_table = mat("goal_table");
    p.policy_W = mat("policy_W");
    p.policy_b = vec("policy_b");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("params file: malformed JSON: ") + e.what());
  }
  p.hidden_dim = p.W_z.rows;
  p.input_dim = p.W_z.cols;
  p.goal_dim = p.goal_table.cols;
  p.n_classes = p.goal_table.rows;
  validate_params(p);
  return p;
}

inline void save_params(const GruParams& p, const std::filesystem::path& path) {
  write_text_file(path, params_to_json(p).dump() + "\n");
}

inline GruParams load_params(const std::filesystem::path& path) {
  return params_from_json(nlohmann::json::parse(read_text_file(path)));
}

// ----------------------------- forward --------------------------------------

// z = sig(W_z x + U_z h + b_z); r = sig(W_r x + U_r h + b_r)
// htilde = tanh(W_h x + U_h (r*h) + b_h); h' = z*h + (1-z)*htilde
struct GruCache {
  Vec x, h_prev, z, r, htilde, h;
};

inline Vec gru_forward(const Vec& x, const Vec& h_prev, const GruParams& p,
                       GruCache* cache = nullptr) {
  const int h = p.hidden_dim;
  if (static_cast<int>(x.size()) != p.input_dim || static_cast<int>(h_prev.size()) != h)
    throw ValidationError("gru_forward: dimension mismatch");

  Vec az(p.b_z), ar(p.b_r), ah(p.b_h);
  matvec_acc(p.W_z, x.data(), az.data());
  matvec_acc(p.U_z, h_prev.data(), az.data());
  matvec_acc(p.W_r, x.data(), ar.data());
  matvec_acc(p.U_r, h_prev.data(), ar.data());

  Vec z(h), r(h);
  for (int i = 0; i < h; ++i) {
    z[i] = 1.0 / (1.0 + std::exp(-az[i]));
    r[i] = 1.0 / (1.0 + std::exp(-ar[i]));
  }
  Vec rh(h);
  for (int i = 0; i < h; ++i) rh[i] = r[i] * h_prev[i];
  matvec_acc(p.W_h, x.data(), ah.data());
  matvec_acc(p.U_h, rh.data(), ah.data());

  Vec htilde(h), out(h);
  for (int i = 0; i < h; ++i) {
    htilde[i] = std::tanh(ah[i]);
    out[i] = z[i] * h_prev[i] + (1.0 - z[i]) * htilde[i];
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = z;
    cache->r = r;
    cache->htilde = htilde;
    cache->h = out;
  }
  return out;
}

inline Vec policy_logits(const Vec& h, const GruParams& p) {
  Vec logits(p.policy_b);
  matvec_acc(p.policy_W, h.data(), logits.data());
  return logits;
}

inline int argmax_action(const Vec& logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i)
    if (logits[i] > logits[best]) best = i;  // ties keep the lowest index
  return best;
}

// ----------------------------- input encoding -------------------------------

// objectnav: concat(obs, goal_table[class]); pointnav: concat(obs, GPS triple).
// image_zero blanks the observation; gps_noise replaces the GPS triple with
// draws from `noise_rng`.
inline Vec encode_input(const Vec& obs, TaskMode mode, int target_class, double r_t,
                        double theta_t, const Intervention& interv, Rng* noise_rng,
                        const GruParams& p) {
  Vec x;
  x.reserve(p.input_dim);
  if (interv.image_zero) {
    x.assign(obs.size(), 0.0);
  } else {
    x = obs;
  }
  if (mode == TaskMode::objectnav) {
    if (target_class < 0 || target_class >= p.n_classes)
      throw ValidationError("encode_input: unknown goal class " + std::to_string(target_class));
    const double* row = p.goal_table.row(target_class);
    x.insert(x.end(), row, row + p.goal_dim);
  } else {
    double gps[kGpsDim] = {r_t, sin_deg(theta_t), cos_deg(theta_t)};
    if (interv.gps_noise) {
      if (!noise_rng) throw ValidationError("encode_input: gps_noise requires a noise stream");
      for (double& g : gps) g = noise_rng->normal();
    }
    x.insert(x.end(), gps, gps + kGpsDim);
  }
  if (static_cast<int>(x.size()) != p.input_dim)
    throw ValidationError("encode_input: input dimension mismatch");
  return x;
}

// ----------------------------- loss and BPTT --------------------------------

struct TrainStep {
  Vec obs;
  double r_t = 0.0;      // pointnav GPS
  double theta_t = 0.0;
  int label = 0;         // expert action index
};

struct TrainSequence {
  TaskMode mode = TaskMode::objectnav;
  int target_class = -1;
  std::vector<TrainStep> steps;
};

// cross-entropy of one step; fills dlogits = softmax - onehot when requested
inline double cross_entropy(const Vec& logits, int label, Vec* dlogits = nullptr) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - mx);
  const double log_denom = std::log(denom) + mx;
  if (dlogits) {
    dlogits->resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i)
      (*dlogits)[i] = std::exp(logits[i] - log_denom) - (i == static_cast<size_t>(label) ? 1.0 : 0.0);
  }
  return log_denom - logits[label];
}

// Analytic gradients of the summed cross-entropy over full sequences (BPTT to
// the start of each sequence). Also the building block of the truncated
// trainer, which calls it chunk by chunk.
inline double bptt_chunk(const GruParams& p, const TrainSequence& seq, size_t begin, size_t end,
                         const Vec& h0, GruParams& grads, Vec* h_out = nullptr,
                         const Intervention& interv = {}) {
  const int hd = p.hidden_dim;
  std::vector<GruCache> caches(end - begin);
  std::vector<Vec> logit_grads(end - begin);
  double loss = 0.0;

  Vec h = h0;
  for (size_t t = begin; t < end; ++t) {
    const TrainStep& st = seq.steps[t];
    const Vec x = encode_input(st.obs, seq.mode, seq.target_class, st.r_t, st.theta_t, interv,
                               nullptr, p);
    h = gru_forward(x, h, p, &caches[t - begin]);
    const Vec logits = policy_logits(h, p);
    loss += cross_entropy(logits, st.label, &logit_grads[t - begin]);
  }
  if (h_out) *h_out = h;

  Vec dh(hd, 0.0);
  Vec da_z(hd), da_r(hd), da_h(hd), ds(hd), rh(hd);
  for (size_t ti = end; ti-- > begin;) {
    const GruCache& c = caches[ti - begin];
    const Vec& dlogits = logit_grads[ti - begin];

    outer_acc(grads.policy_W, dlogits.data(), c.h.data());
    for (int a = 0; a < kNumActions; ++a) grads.policy_b[a] += dlogits[a];
    matvec_t_acc(p.policy_W, dlogits.data(), dh.data());

    for (int i = 0; i < hd; ++i) {
      const double dz = dh[i] * (c.h_prev[i] - c.htilde[i]);
      const double dht = dh[i] * (1.0 - c.z[i]);
      da_h[i] = dht * (1.0 - c.htilde[i] * c.htilde[i]);
      da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
      ds[i] = 0.0;
    }
    matvec_t_acc(p.U_h, da_h.data(), ds.data());
    for (int i = 0; i < hd; ++i) {
      const double dr = ds[i] * c.h_prev[i];
      da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
      rh[i] = c.r[i] * c.h_prev[i];
    }

    outer_acc(grads.W_z, da_z.data(), c.x.data());
    outer_acc(grads.W_r, da_r.data(), c.x.data());
    outer_acc(grads.W_h, da_h.data(), c.x.data());
    outer_acc(grads.U_z, da_z.data(), c.h_prev.data());
    outer_acc(grads.U_r, da_r.data(), c.h_prev.data());
    outer_acc(grads.U_h, da_h.data(), rh.data());
    for (int i = 0; i < hd; ++i) {
      grads.b_z[i] += da_z[i];
      grads.b_r[i] += da_r[i];
      grads.b_h[i] += da_h[i];
    }

    if (seq.mode == TaskMode::objectnav) {
      // gradient through the goal-embedding slice of x
      Vec dx(p.input_dim, 0.0);
      matvec_t_acc(p.W_z, da_z.data(), dx.data());
      matvec_t_acc(p.W_r, da_r.data(), dx.data());
      matvec_t_acc(p.W_h, da_h.data(), dx.data());
      double* row = grads.goal_table.row(seq.target_class);
      for (int g = 0; g < p.goal_dim; ++g) row[g] += dx[p.input_dim - p.goal_dim + g];
    }

    // dh_prev
    Vec dh_prev(hd, 0.0);
    for (int i = 0; i < hd; ++i) dh_prev[i] = dh[i] * c.z[i] + ds[i] * c.r[i];
    matvec_t_acc(p.U_z, da_z.data(), dh_prev.data());
    matvec_t_acc(p.U_r, da_r.data(), dh_prev.data());
    dh = std::move(dh_prev);
  }
  return loss;
}

inline double bptt_gradients(const GruParams& p, const std::vector<TrainSequence>& batch,
                             GruParams& grads) {
  double loss = 0.0;
  for (const TrainSequence& seq : batch) {
    if (seq.steps.empty()) continue;
    loss += bptt_chunk(p, seq, 0, seq.steps.size(), Vec(p.hidden_dim, 0.0), grads);
  }
  return loss;
}

inline double batch_loss(const GruParams& p, const std::vector<TrainSequence>& batch) {
  GruParams scratch = zeros_like(p);
  return bptt_gradients(p, batch, scratch);
}

// central finite differences over every parameter entry; the independent
// oracle for the analytic gradients
inline GruParams fd_gradients(const GruParams& p, const std::vector<TrainSequence>& batch,
                              double step = 1e-5) {
  GruParams grads = zeros_like(p);
  GruParams work = p;
  std::vector<std::pair<Vec*, Vec*>> pairs;
  work.for_each_tensor([&](const char*, Vec& v) { pairs.push_back({&v, nullptr}); });
  {
    size_t k = 0;
    grads.for_each_tensor([&](const char*, Vec& v) { pairs[k++].second = &v; });
  }
  for (auto& [pv, gv] : pairs) {
    for (size_t i = 0; i < pv->size(); ++i) {
      const double saved = (*pv)[i];
      (*pv)[i] = saved + step;
      const double up = batch_loss(work, batch);
      (*pv)[i] = saved - step;
      const double down = batch_loss(work, batch);
      (*pv)[i] = saved;
      (*gv)[i] = (up - down) / (2.0 * step);
    }
  }
  return grads;
}

inline double max_relative_error(const GruParams& a, const GruParams& b) {
  double worst = 0.0;
  std::vector<const Vec*> av, bv;
  a.for_each_tensor([&](const char*, const Vec& v) { av.push_back(&v); });
  b.for_each_tensor([&](const char*, const Vec& v) { bv.push_back(&v); });
  for (size_t t = 0; t < av.size(); ++t)
    for (size_t i = 0; i < av[t]->size(); ++i) {
      const double ga = (*av[t])[i];
      const double gn = (*bv[t])[i];
      const double rel = std::abs(ga - gn) / std::max({std::abs(ga), std::abs(gn), 1e-8});
      worst = std::max(worst, rel);
    }
  return worst;
}

inline double grad_check(const GruParams& p, const std::vector<TrainSequence>& batch,
                         double fd_step = 1e-5) {
  GruParams analytic = zeros_like(p);
  bptt_gradients(p, batch, analytic);
  const GruParams numeric = fd_gradients(p, batch, fd_step);
  return max_relative_error(analytic, numeric);
}

// ----------------------------- Adam -----------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  GruParams m, v;
  long long t = 0;
  explicit AdamState(const GruParams& p) : m(zeros_like(p)), v(zeros_like(p)) {}
};

inline void adam_step(GruParams& p, const GruParams& grads, AdamState& state,
                      const AdamConfig& cfg) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::vector<Vec*> pv, gv, mv, vv;
  p.for_each_tensor([&](const char*, Vec& v) { pv.push_back(&v); });
  const_cast<GruParams&>(grads).for_each_tensor([&](const char*, Vec& v) { gv.push_back(&v); });
  state.m.for_each_tensor([&](const char*, Vec& v) { mv.push_back(&v); });
  state.v.for_each_tensor([&](const char*, Vec& v) { vv.push_back(&v); });
  for (size_t t = 0; t < pv.size(); ++t) {
    for (size_t i = 0; i < pv[t]->size(); ++i) {
      const double g = (*gv[t])[i];
      double& m = (*mv[t])[i];
      double& v = (*vv[t])[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      (*pv[t])[i] -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    }
  }
}

// ----------------------------- expert ----------------------------------------

// Greedy rotate-then-move shortest-path expert. Action preference where
// several geodesic moves exist: MoveAhead > RotateRight > RotateLeft.
inline std::vector<Action> expert_actions(const Scene& scene, const TaskSpec& task,
                                          const GridConfig& cfg) {
  const Cell goal = task_goal_cell(scene, task);
  const auto dist = bfs_distances(scene, goal);
  auto d_of = [&](const Cell& c) {
    return scene.is_reachable(c) ? dist[static_cast<size_t>(c.iz) * scene.width + c.ix]
                                 : kUnreachable;
  };

  AgentPose pose = pose_from_spawn(scene, task.spawn);
  const ObjectInstance goal_obj{task.mode == TaskMode::objectnav && task.target_index >= 0
                                    ? scene.objects[task.target_index].class_id
                                    : -1,
                                goal};
  auto succeeded = [&]() {
    const TargetMetadata t = target_metadata(scene, pose, goal_obj, cfg);
    if (task.mode == TaskMode::objectnav) return t.visible_t && t.R_t <= 1.0;
    return t.R_t <= task.success_distance;
  };

  std::vector<Action> actions;
  auto cell_toward = [&](int heading) {
    const Cell here = cell_of(scene, pose);
    return Cell{here.ix + static_cast<int>(std::llround(sin_deg(mod360(heading)))),
                here.iz + static_cast<int>(std::llround(cos_deg(mod360(heading))))};
  };

  while (static_cast<int>(actions.size()) < task.max_steps) {
    if (succeeded()) {
      actions.push_back(Action::End);
      return actions;
    }
    const int d_here = d_of(cell_of(scene, pose));
    if (d_here == kUnreachable)
      throw ValidationError("expert_actions: no path from spawn to goal in scene " + scene.id);

    Action next;
    if (d_of(cell_toward(pose.rotation)) == d_here - 1) {
      next = Action::MoveAhead;
    } else if (d_of(cell_toward(pose.rotation + cfg.rotation_step)) == d_here - 1) {
      next = Action::RotateRight;
    } else if (d_of(cell_toward(pose.rotation - cfg.rotation_step)) == d_here - 1) {
      next = Action::RotateLeft;
    } else {
      next = Action::RotateRight;  // goal is behind; turn around clockwise
    }
    actions.push_back(next);
    const StepResult res = step(scene, pose, next, cfg);
    if (res.collision)
      throw ValidationError("expert_actions: expert collided; BFS field inconsistent");
    pose = res.pose;
  }
  return actions;  // truncated by the step cap
}

// ----------------------------- behavior cloning ------------------------------

struct BcConfig {
  int epochs = 3;
  AdamConfig adam;
  int bptt_len = 20;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs; 0 disables
};

struct BcResult {
  GruParams params;
  Vec loss_curve;  // mean per-step loss per epoch
};

// expert trajectory unrolled into supervised steps (teacher forcing)
inline TrainSequence sequence_for_task(const Scene& scene, const TaskSpec& task,
                                       const std::vector<Action>& actions, const GridConfig& cfg) {
  TrainSequence seq;
  seq.mode = task.mode;
  seq.target_class = task.target_class;
  AgentPose pose = pose_from_spawn(scene, task.spawn);
  const Cell goal = task_goal_cell(scene, task);
  const ObjectInstance goal_obj{-1, goal};
  for (Action a : actions) {
    TrainStep st;
    st.obs = render_observation(scene, pose,
                                task.mode == TaskMode::objectnav ? task.target_class : -1, cfg);
    if (task.mode == TaskMode::pointnav) {
      const TargetMetadata t = target_metadata(scene, pose, goal_obj, cfg);
      st.r_t = t.R_t;
      st.theta_t = t.theta_t;
    }
    st.label = static_cast<int>(a);
    seq.steps.push_back(std::move(st));
    pose = step(scene, pose, a, cfg).pose;
  }
  return seq;
}

inline BcResult bc_train(const std::vector<Scene>& scenes,
                         const std::vector<std::pair<int, TaskSpec>>& episodes,
                         const GridConfig& grid_cfg, GruParams params, const BcConfig& cfg,
                         const std::function<void(int, const GruParams&)>& on_checkpoint = {}) {
  if (scenes.empty() || episodes.empty()) throw ValidationError("bc_train: nothing to train on");

  std::vector<TrainSequence> sequences;
  sequences.reserve(episodes.size());
  for (const auto& [scene_idx, task] : episodes) {
    const Scene& scene = scenes.at(scene_idx);
    sequences.push_back(
        sequence_for_task(scene, task, expert_actions(scene, task, grid_cfg), grid_cfg));
  }

  AdamState adam(params);
  Rng order_rng(Rng::derive(cfg.seed, 0xbc0ULL));
  std::vector<size_t> order(sequences.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  BcResult result{std::move(params), {}};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t epoch_steps = 0;
    for (size_t idx : order) {
      const TrainSequence& seq = sequences[idx];
      if (seq.steps.empty()) continue;
      Vec h(result.params.hidden_dim, 0.0);
      for (size_t begin = 0; begin < seq.steps.size(); begin += cfg.bptt_len) {
        const size_t end = std::min(begin + cfg.bptt_len, seq.steps.size());
        GruParams grads = zeros_like(result.params);
        Vec h_next;
        const double loss = bptt_chunk(result.params, seq, begin, end, h, grads, &h_next);
        if (!std::isfinite(loss))
          throw NumericError("bc_train: non-finite loss at epoch " + std::to_string(epoch) +
                             " sequence " + std::to_string(idx));
        const double scale = 1.0 / static_cast<double>(end - begin);
        grads.for_each_tensor([&](const char*, Vec& v) {
          for (double& g : v) g *= scale;
        });
        adam_step(result.params, grads, adam, cfg.adam);
        epoch_loss += loss;
        epoch_steps += end - begin;
        h = std::move(h_next);  // carried across chunks, detached
      }
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(std::max<size_t>(epoch_steps, 1)));
    if (on_checkpoint && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
      on_checkpoint(epoch + 1, result.params);
  }
  return result;
}

}  // namespace navprobe
