#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "navprobe/agent.hpp"
#include "navprobe/metrics.hpp"
#include "navprobe/rollout.hpp"
#include "navprobe/shap.hpp"

namespace navprobe {

struct UnitMoments {
  Vec mean;
  Vec variance;  // population variance; flags frozen units
};

inline UnitMoments unit_means(const std::vector<TimestepRecord>& records) {
  if (records.empty()) throw ValidationError("unit_means: no records");
  const size_t h = records.front().hidden.size();
  UnitMoments m;
  m.mean.assign(h, 0.0);
  m.variance.assign(h, 0.0);
  Vec lo(records.front().hidden), hi(records.front().hidden);
  for (const auto& rec : records) {
    if (rec.hidden.size() != h) throw ValidationError("unit_means: inconsistent hidden dimension");
    for (size_t i = 0; i < h; ++i) {
      m.mean[i] += rec.hidden[i];
      lo[i] = std::min(lo[i], rec.hidden[i]);
      hi[i] = std::max(hi[i], rec.hidden[i]);
    }
  }
  const double n = static_cast<double>(records.size());
  for (size_t i = 0; i < h; ++i) m.mean[i] /= n;
  // a unit that never moved is exactly constant: report its value, not the
  // rounding residue of the averaged sum
  for (size_t i = 0; i < h; ++i)
    if (lo[i] == hi[i]) m.mean[i] = lo[i];
  for (const auto& rec : records)
    for (size_t i = 0; i < h; ++i) {
      const double d = rec.hidden[i] - m.mean[i];
      m.variance[i] += d * d;
    }
  for (size_t i = 0; i < h; ++i) m.variance[i] /= n;
  return m;
}

enum class AblationStrategy { concept_topk, random_units, irrelevant };

inline std::string strategy_name(AblationStrategy s) {
  switch (s) {
    case AblationStrategy::concept_topk: return "concept_topk";
    case AblationStrategy::random_units: return "random";
    case AblationStrategy::irrelevant: return "irrelevant";
  }
  throw ValidationError("unknown ablation strategy");
}

struct AblationSpec {
  AblationStrategy strategy = AblationStrategy::random_units;
  std::string concept_name;             // concept_topk: which ranking to follow
  int k = 0;                            // units to remove
  uint64_t seed = 0;                    // random strategy
  double irrelevant_top_q = 0.10;       // per-concept share counted as relevant
  bool exclude_concept_units = false;   // random strategy sensitivity flag
};

inline const UnitRanking& ranking_for(const std::vector<UnitRanking>& rankings,
                                      const std::string& concept_name) {
  for (const auto& r : rankings)
    if (r.concept_name == concept_name) return r;
  throw ValidationError("select_units: no ranking for concept " + concept_name);
}

inline std::vector<int> select_units(const AblationSpec& spec,
                                     const std::vector<UnitRanking>& rankings, int hidden_dim) {
  if (spec.k < 0 || spec.k > hidden_dim)
    throw ValidationError("select_units: k exceeds the unit pool");

  switch (spec.strategy) {
    case AblationStrategy::concept_topk: {
      const UnitRanking& r = ranking_for(rankings, spec.concept_name);
      if (spec.k > static_cast<int>(r.order.size()))
        throw ValidationError("select_units: k exceeds the ranking size");
      return {r.order.begin(), r.order.begin() + spec.k};
    }
    case AblationStrategy::random_units: {
      std::vector<int> pool;
      if (spec.exclude_concept_units && !spec.concept_name.empty()) {
        const UnitRanking& r = ranking_for(rankings, spec.concept_name);
        std::set<int> excluded(r.order.begin(), r.order.begin() + spec.k);
        for (int u = 0; u < hidden_dim; ++u)
          if (!excluded.count(u)) pool.push_back(u);
      } else {
        for (int u = 0; u < hidden_dim; ++u) pool.push_back(u);
      }
      if (spec.k > static_cast<int>(pool.size()))
        throw ValidationError("select_units: k exceeds the unit pool");
      Rng rng(Rng::derive(spec.seed, 0xab1a7eULL));
      std::vector<int> out;
      for (int i = 0; i < spec.k; ++i) {
        const size_t at = rng.uniform(pool.size());
        out.push_back(pool[at]);
        pool.erase(pool.begin() + static_cast<long>(at));
      }
      std::sort(out.begin(), out.end());
      return out;
    }
    case AblationStrategy::irrelevant: {
      if (rankings.empty()) throw ValidationError("select_units: no rankings for irrelevant pick");
      const int q = std::max(1, static_cast<int>(std::ceil(spec.irrelevant_top_q * hidden_dim)));
      std::set<int> relevant;
      std::vector<int> max_rank(hidden_dim, 0);
      for (const auto& r : rankings) {
        for (int pos = 0; pos < std::min(q, static_cast<int>(r.order.size())); ++pos)
          relevant.insert(r.order[pos]);
        for (int pos = 0; pos < static_cast<int>(r.order.size()); ++pos)
          max_rank[r.order[pos]] = std::max(max_rank[r.order[pos]], pos);
      }
      std::vector<int> pool;
      for (int u = 0; u < hidden_dim; ++u)
        if (!relevant.count(u)) pool.push_back(u);
      std::stable_sort(pool.begin(), pool.end(), [&](int a, int b) {
        return max_rank[a] != max_rank[b] ? max_rank[a] < max_rank[b] : a < b;
      });
      if (spec.k > static_cast<int>(pool.size()))
        throw ValidationError("select_units: requested more irrelevant units than exist");
      pool.resize(spec.k);
      std::sort(pool.begin(), pool.end());
      return pool;
    }
  }
  throw ValidationError("select_units: unknown strategy");
}

// ----------------------------------------------------------------------------
// Removal curves: clamp the selected units to their training means, run the
// evaluation episodes, report SPL / success rate / mean episode length.

struct AblationRow {
  std::string strategy;
  int size = 0;
  uint64_t seed = 0;
  double spl_value = 0.0;
  double success = 0.0;
  double mean_length = 0.0;
};

struct EvalEpisode {
  const Scene* scene = nullptr;
  TaskSpec task;
};

inline std::vector<EpisodeOutcome> eval_episodes(const std::vector<EvalEpisode>& episodes,
                                                 const GruParams& params,
                                                 const Intervention& interv, const GridConfig& cfg,
                                                 int jobs = 1) {
  std::vector<EpisodeOutcome> outcomes(episodes.size());
  parallel_for(episodes.size(), jobs, [&](size_t i) {
    outcomes[i] =
        rollout_policy(*episodes[i].scene, episodes[i].task, params, interv, cfg,
                       static_cast<long long>(i))
            .outcome;
  });
  return outcomes;
}

inline AblationRow ablation_row(const std::string& strategy, int size, uint64_t seed,
                                const std::vector<EpisodeOutcome>& outcomes) {
  return {strategy, size, seed, spl(outcomes), success_rate(outcomes),
          mean_episode_length(outcomes)};
}

inline Intervention clamp_for_units(const std::vector<int>& units, const Vec& means) {
  Intervention interv;
  for (int u : units) {
    if (u < 0 || u >= static_cast<int>(means.size()))
      throw ValidationError("clamp_for_units: unit index out of range");
    interv.clamp_units[u] = means[u];
  }
  return interv;
}

// Full sweep: strategies x sizes (x seeds for the random baseline), fixed row
// order, reproducible byte-for-byte given the seeds.
inline std::vector<AblationRow> ablate_eval(const std::vector<EvalEpisode>& episodes,
                                            const GruParams& params, const UnitMoments& moments,
                                            const std::vector<UnitRanking>& rankings,
                                            const std::vector<std::string>& topk_concepts,
                                            const std::vector<int>& sizes,
                                            const std::vector<uint64_t>& random_seeds,
                                            double irrelevant_fraction, const GridConfig& cfg,
                                            int jobs = 1) {
  if (episodes.empty()) throw ValidationError("ablate_eval: no evaluation episodes");
  std::vector<AblationRow> rows;

  for (const std::string& concept_name : topk_concepts) {
    for (int size : sizes) {
      AblationSpec spec{AblationStrategy::concept_topk, concept_name, size, 0, 0.10, false};
      const auto units = select_units(spec, rankings, params.hidden_dim);
      const auto outcomes =
          eval_episodes(episodes, params, clamp_for_units(units, moments.mean), cfg, jobs);
      rows.push_back(ablation_row("topk_" + concept_name, size, 0, outcomes));
    }
  }
  for (int size : sizes) {
    for (uint64_t seed : random_seeds) {
      AblationSpec spec{AblationStrategy::random_units, "", size, seed, 0.10, false};
      const auto units = select_units(spec, rankings, params.hidden_dim);
      const auto outcomes =
          eval_episodes(episodes, params, clamp_for_units(units, moments.mean), cfg, jobs);
      rows.push_back(ablation_row("random", size, seed, outcomes));
    }
  }
  if (irrelevant_fraction > 0.0) {
    const int size = static_cast<int>(irrelevant_fraction * params.hidden_dim);
    AblationSpec spec{AblationStrategy::irrelevant, "", size, 0, 0.10, false};
    const auto units = select_units(spec, rankings, params.hidden_dim);
    const auto outcomes =
        eval_episodes(episodes, params, clamp_for_units(units, moments.mean), cfg, jobs);
    rows.push_back(ablation_row("irrelevant", size, 0, outcomes));
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "strategy,size,seed,spl,success_rate,mean_episode_length\n";
  for (const auto& r : rows) {
    out += r.strategy;
    out += ',';
    out += std::to_string(r.size);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += fmt_double(r.spl_value);
    out += ',';
    out += fmt_double(r.success);
    out += ',';
    out += fmt_double(r.mean_length);
    out += '\n';
  }
  return out;
}

}  // namespace navprobe
