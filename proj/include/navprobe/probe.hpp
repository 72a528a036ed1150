#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "navprobe/gbt.hpp"
#include "navprobe/gridworld.hpp"
#include "navprobe/metrics.hpp"
#include "navprobe/rollout.hpp"

namespace navprobe {

struct SplitManifest {
  std::vector<long long> train;
  std::vector<long long> val;
};

inline nlohmann::json manifest_to_json(const SplitManifest& m) {
  return {{"train", m.train}, {"val", m.val}};
}

inline SplitManifest manifest_from_json(const nlohmann::json& j) {
  SplitManifest m;
  m.train = j.at("train").get<std::vector<long long>>();
  m.val = j.at("val").get<std::vector<long long>>();
  return m;
}

inline void save_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_json(m).dump() + "\n");
}

inline SplitManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(nlohmann::json::parse(read_text_file(path)));
}

struct ProbeDataset {
  Mat X_train, X_val;
  Vec y_train, y_val;
  std::string concept_name;
  bool binary = false;
  SplitManifest manifest;
};

// Flattens timestep records into probing rows: hidden vector -> concept value.
// Row order is deterministic (episode id, then step). Every record's episode
// must be named by exactly one side of the manifest.
inline ProbeDataset build_dataset(std::vector<TimestepRecord> records,
                                  const std::string& concept_name, const SplitManifest& manifest,
                                  const GridConfig& cfg) {
  if (records.empty()) throw ValidationError("build_dataset: no records");
  std::set<long long> train_ids(manifest.train.begin(), manifest.train.end());
  std::set<long long> val_ids(manifest.val.begin(), manifest.val.end());
  for (long long id : train_ids)
    if (val_ids.count(id))
      throw ValidationError("build_dataset: episode " + std::to_string(id) + " is in both splits");

  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.episode != b.episode ? a.episode < b.episode : a.step < b.step;
  });

  const int hidden_dim = static_cast<int>(records.front().hidden.size());
  size_t n_train = 0, n_val = 0;
  for (const auto& rec : records) {
    if (train_ids.count(rec.episode)) ++n_train;
    else if (val_ids.count(rec.episode)) ++n_val;
    else
      throw ValidationError("build_dataset: episode " + std::to_string(rec.episode) +
                            " is not in the split manifest");
  }

  ProbeDataset ds;
  ds.concept_name = concept_name;
  ds.binary = concept_is_binary(concept_name, cfg);
  ds.manifest = manifest;
  ds.X_train = Mat(static_cast<int>(n_train), hidden_dim);
  ds.X_val = Mat(static_cast<int>(n_val), hidden_dim);
  ds.y_train.reserve(n_train);
  ds.y_val.reserve(n_val);

  int it = 0, iv = 0;
  for (const auto& rec : records) {
    if (static_cast<int>(rec.hidden.size()) != hidden_dim)
      throw ValidationError("build_dataset: inconsistent hidden dimension");
    double value;
    try {
      value = concept_value(rec.concepts, concept_name, cfg);
    } catch (const ValidationError& e) {
      throw ValidationError("build_dataset: episode " + std::to_string(rec.episode) + " step " +
                            std::to_string(rec.step) + ": " + e.what());
    }
    if (train_ids.count(rec.episode)) {
      std::copy(rec.hidden.begin(), rec.hidden.end(), ds.X_train.row(it++));
      ds.y_train.push_back(value);
    } else {
      std::copy(rec.hidden.begin(), rec.hidden.end(), ds.X_val.row(iv++));
      ds.y_val.push_back(value);
    }
  }
  return ds;
}

struct ProbeMetrics {
  double pearson_r = 0.0;
  bool pearson_degenerate = false;
  double auc = 0.0;
  bool auc_defined = false;
  int n_val = 0;
  bool degenerate_fit = false;
};

struct ProbeResult {
  TreeEnsemble model;
  ProbeMetrics metrics;
};

// One GBT per concept: logistic loss for binary concepts, squared error for
// continuous ones. Validation metrics are computed on raw margins (AUC is
// rank-based, so the sigmoid would not change it; the figure-style correlation
// for binary concepts is the point-biserial pearson against the margin).
inline ProbeResult train_probe(const ProbeDataset& ds, const GbtParams& params) {
  if (ds.X_train.rows < 2 || ds.X_val.rows < 2)
    throw ValidationError("train_probe: dataset too small");
  ProbeResult out;
  const Objective obj = ds.binary ? Objective::logistic : Objective::squared_error;
  out.model = fit_gbt(ds.X_train, ds.y_train, obj, params);
  out.metrics.degenerate_fit = out.model.degenerate;
  out.metrics.n_val = ds.X_val.rows;

  const Vec margins = predict_margins(out.model, ds.X_val);
  const PearsonResult pr = pearson(margins, ds.y_val);
  out.metrics.pearson_r = pr.r;
  out.metrics.pearson_degenerate = pr.degenerate;
  if (ds.binary) {
    std::vector<int> labels(ds.y_val.size());
    for (size_t i = 0; i < ds.y_val.size(); ++i) labels[i] = ds.y_val[i] != 0.0 ? 1 : 0;
    const AucResult ar = roc_auc(margins, labels);
    out.metrics.auc = ar.auc;
    out.metrics.auc_defined = ar.defined;
  }
  return out;
}

// ----------------------------------------------------------------------------
// Report rows (CSV columns model,concept,metric,value,n_val) and the
// step-alignment audit for cross-model comparisons.

struct ReportRow {
  std::string model;
  std::string concept_name;
  std::string metric;
  double value = 0.0;
  int n_val = 0;
};

inline void append_report_rows(std::vector<ReportRow>& rows, const std::string& model_tag,
                               const std::string& concept_name, const ProbeMetrics& m) {
  rows.push_back({model_tag, concept_name, "pearson", m.pearson_r, m.n_val});
  if (m.auc_defined) rows.push_back({model_tag, concept_name, "roc_auc", m.auc, m.n_val});
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "model,concept,metric,value,n_val\n";
  for (const auto& r : rows) {
    out += r.model;
    out += ',';
    out += r.concept_name;
    out += ',';
    out += r.metric;
    out += ',';
    out += fmt_double(r.value);
    out += ',';
    out += std::to_string(r.n_val);
    out += '\n';
  }
  return out;
}

inline nlohmann::json report_json(const std::vector<ReportRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"model", r.model},
                 {"concept", r.concept_name},
                 {"metric", r.metric},
                 {"value", r.value},
                 {"n_val", r.n_val}});
  return j;
}

// Cross-model comparisons assume every model walked the same forced
// trajectories; reject report requests whose record streams disagree.
inline void check_step_aligned(const std::vector<std::vector<TimestepRecord>>& record_sets) {
  for (size_t m = 1; m < record_sets.size(); ++m) {
    if (record_sets[m].size() != record_sets[0].size())
      throw ValidationError("probe_report: record streams are misaligned across models");
    for (size_t i = 0; i < record_sets[m].size(); ++i) {
      if (record_sets[m][i].episode != record_sets[0][i].episode ||
          record_sets[m][i].step != record_sets[0][i].step)
        throw ValidationError("probe_report: record streams are misaligned across models");
    }
  }
}

}  // namespace navprobe
