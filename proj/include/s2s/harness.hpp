#pragma once
// Experiment-matrix runner: trains and evaluates a list of config variants on
// one shared synthetic dataset and seed, so metric differences isolate each
// config delta. Emits a CSV table with relative-improvement columns against
// the row named "baseline" and a JSON summary including the
// combined-vs-single-addition direction check.

#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2s/config.hpp"
#include "s2s/errors.hpp"
#include "s2s/inference.hpp"
#include "s2s/metrics.hpp"
#include "s2s/synth.hpp"
#include "s2s/training.hpp"

namespace s2s {

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"num_blobs", s.num_blobs},
          {"blob_sigma_min", s.blob_sigma_min},
          {"blob_sigma_max", s.blob_sigma_max},
          {"amp_min", s.amp_min},
          {"amp_max", s.amp_max},
          {"noise_sigma", s.noise_sigma},
          {"tissue", tissue_shape_to_string(s.tissue)},
          {"seed", s.seed}};
}

inline void from_json_into(const nlohmann::json& j, SynthSpec& s) {
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.num_blobs = j.value("num_blobs", s.num_blobs);
  s.blob_sigma_min = j.value("blob_sigma_min", s.blob_sigma_min);
  s.blob_sigma_max = j.value("blob_sigma_max", s.blob_sigma_max);
  s.amp_min = j.value("amp_min", s.amp_min);
  s.amp_max = j.value("amp_max", s.amp_max);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  if (j.contains("tissue"))
    s.tissue = tissue_shape_from_string(j["tissue"].get<std::string>());
  s.seed = j.value("seed", s.seed);
}

struct VariantSpec {
  std::string name;
  nlohmann::json delta;  // merged over the base RunConfig JSON
};

struct ExperimentMatrix {
  SynthSpec dataset;
  RunConfig base;
  std::vector<VariantSpec> variants;

  void validate() const {
    dataset.validate();
    base.validate();
    if (variants.empty()) throw ConfigError("matrix has no variants");
    for (std::size_t i = 0; i < variants.size(); ++i) {
      if (variants[i].name.empty()) throw ConfigError("variant without name");
      for (std::size_t j = i + 1; j < variants.size(); ++j)
        if (variants[i].name == variants[j].name)
          throw ConfigError("duplicate variant name: " + variants[i].name);
      resolve_variant(static_cast<int>(i)).validate();
    }
  }

  RunConfig resolve_variant(int i) const {
    RunConfig cfg = base;
    from_json_into(variants[static_cast<std::size_t>(i)].delta, cfg);
    return cfg;
  }
};

inline ExperimentMatrix matrix_from_json(const nlohmann::json& j) {
  ExperimentMatrix m;
  if (j.contains("dataset")) from_json_into(j["dataset"], m.dataset);
  if (j.contains("base_config")) from_json_into(j["base_config"], m.base);
  for (const auto& v : j.value("variants", nlohmann::json::array()))
    m.variants.push_back({v.at("name").get<std::string>(),
                          v.value("delta", nlohmann::json::object())});
  m.validate();
  return m;
}

inline nlohmann::json matrix_to_json(const ExperimentMatrix& m) {
  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : m.variants)
    variants.push_back({{"name", v.name}, {"delta", v.delta}});
  return {{"dataset", to_json(m.dataset)},
          {"base_config", to_json(m.base)},
          {"variants", variants}};
}

struct VariantResult {
  std::string name;
  bool ok = false;
  std::string error;
  EvalReport report;
};

struct MatrixResult {
  std::vector<VariantResult> rows;
  std::string csv;
  nlohmann::json summary;
};

// The ablation matrix: baseline (no GNI, no DC), each single addition, the
// combination, and a cascade-count sweep K in {1,2,3}.
inline ExperimentMatrix default_matrix(const SynthSpec& dataset,
                                       const RunConfig& base) {
  ExperimentMatrix m;
  m.dataset = dataset;
  m.base = base;
  auto delta = [](bool gni, bool dc, int k) {
    return nlohmann::json{{"model", {{"use_dc", dc}, {"cascades", k}}},
                          {"train", {{"gni_cotraining", gni}}}};
  };
  const int k = base.model.num_cascades;
  m.variants.push_back({"baseline", delta(false, false, k)});
  m.variants.push_back({"gni", delta(true, false, k)});
  m.variants.push_back({"dc", delta(false, true, k)});
  m.variants.push_back({"both", delta(true, true, k)});
  for (int kk = 1; kk <= 3; ++kk)
    m.variants.push_back(
        {"cascades_" + std::to_string(kk), delta(true, true, kk)});
  m.validate();
  return m;
}

inline MatrixResult run_matrix(const ExperimentMatrix& matrix,
                               const std::string& out_dir = "") {
  matrix.validate();
  const GeneGrid truth = gen_field(matrix.dataset);
  const int S = matrix.base.train.stride;
  auto [sparse, mask] = simulate_sparse(truth, S);
  (void)mask;

  MatrixResult result;
  for (std::size_t i = 0; i < matrix.variants.size(); ++i) {
    VariantResult row;
    row.name = matrix.variants[i].name;
    try {
      RunConfig cfg = matrix.resolve_variant(static_cast<int>(i));
      TrainDataset data;
      data.slide_medium = sparse;
      if (cfg.train.gni_cotraining)
        data.corpus = make_procedural_corpus(
            24, std::max(96, static_cast<int>(cfg.train.patch * 1.5)),
            derive_seed(cfg.train.seed, 0x6e1));
      TrainState state = run_training(cfg, data);
      InferResult inferred =
          infer_slide(state.model, sparse, S, cfg.train.patch,
                      cfg.infer.window_stride, cfg.infer.weighting);
      Tensor<std::uint8_t> region = truth.tissue;
      if (cfg.metrics.exclude_sampled) {
        const SamplingMask m = make_mask(truth.height(), truth.width(), S);
        for (int r = 0; r < m.rows_out(); ++r)
          for (int c = 0; c < m.cols_out(); ++c)
            region(m.off_row + r * m.stride, m.off_col + c * m.stride) = 0;
      }
      row.report = evaluate(inferred.grid.values, truth.values, region);
      row.report.gene = truth.gene;
      row.report.dataset = "synthetic";
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }

  // improvements against the "baseline" row
  const VariantResult* baseline = nullptr;
  for (const auto& r : result.rows)
    if (r.ok && r.name == "baseline") baseline = &r;

  std::ostringstream csv;
  csv << "variant,status,mae,pcc,ssim,mae_impr_pct,pcc_impr_pct,ssim_impr_pct\n";
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : result.rows) {
    nlohmann::json jr = {{"variant", r.name}, {"ok", r.ok}};
    if (!r.ok) {
      jr["error"] = r.error;
      csv << r.name << ",failed,,,,,,\n";
    } else {
      jr["mae"] = r.report.mae;
      jr["pcc"] = r.report.pcc;
      jr["ssim"] = r.report.ssim;
      csv << r.name << ",ok," << r.report.mae << ',' << r.report.pcc << ','
          << r.report.ssim;
      if (baseline != nullptr && baseline->report.mae > 0.0) {
        const double mae_impr =
            100.0 * (baseline->report.mae - r.report.mae) /
            baseline->report.mae;
        const double pcc_impr =
            100.0 * (r.report.pcc - baseline->report.pcc) /
            std::abs(baseline->report.pcc);
        const double ssim_impr =
            100.0 * (r.report.ssim - baseline->report.ssim) /
            std::abs(baseline->report.ssim);
        jr["mae_impr_pct"] = mae_impr;
        jr["pcc_impr_pct"] = pcc_impr;
        jr["ssim_impr_pct"] = ssim_impr;
        csv << ',' << mae_impr << ',' << pcc_impr << ',' << ssim_impr;
      } else {
        csv << ",,,";
      }
      csv << '\n';
    }
    rows_json.push_back(std::move(jr));
  }

  auto find_ok = [&](const std::string& name) -> const VariantResult* {
    for (const auto& r : result.rows)
      if (r.ok && r.name == name) return &r;
    return nullptr;
  };
  nlohmann::json direction;
  const auto* both = find_ok("both");
  const auto* gni = find_ok("gni");
  const auto* dc = find_ok("dc");
  if (both != nullptr && gni != nullptr && dc != nullptr) {
    const bool holds = both->report.mae <= gni->report.mae &&
                       both->report.mae <= dc->report.mae;
    direction = {{"present", true},
                 {"holds", holds},
                 {"both_mae", both->report.mae},
                 {"gni_mae", gni->report.mae},
                 {"dc_mae", dc->report.mae}};
  } else {
    direction = {{"present", false}};
  }

  result.csv = csv.str();
  result.summary = {{"dataset", to_json(matrix.dataset)},
                    {"rows", rows_json},
                    {"direction_check", direction}};

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir + "/table.csv", result.csv);
    write_text(out_dir + "/summary.json", result.summary.dump(2) + "\n");
  }
  return result;
}

}  // namespace s2s
