#pragma once

#include "ttfe/features.hpp"
#include "ttfe/forest.hpp"
#include "ttfe/linear_model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ttfe {

enum class ModelKind : std::uint8_t { Forest, Linear };
std::string model_name(ModelKind k);

/// Literature importances (sigma, eps, d_e, d_c, d_l) quoted for comparison in reports.
inline constexpr std::array<double, kNumFeatures> kReferenceImportances{0.05, 0.05, 0.65, 0.10,
                                                                        0.15};
inline constexpr double kDefaultNearThresholdMm = 16.6;

struct CaseResult {
  CaseId case_id;
  ModelKind model = ModelKind::Forest;
  double mae = 0.0;  ///< V/cm, over evaluated voxels
  double sd = 0.0;   ///< population SD of the absolute differences
  std::optional<double> near_mse;  ///< (V/cm)^2 where d_e < threshold
  std::optional<double> far_mse;   ///< (V/cm)^2 where d_e >= threshold
  Index n_voxels = 0;
  Index n_near = 0;
  Index n_far = 0;
  double predict_seconds = 0.0;
};

/// |pred - gold| on the mask, 0 elsewhere.
ScalarField error_map(const ScalarField& pred, const ScalarField& gold, const Mask& mask);

CaseResult case_metrics(const ScalarField& pred, const ScalarField& gold, const ScalarField& d_e,
                        const Mask& mask, double threshold_mm = kDefaultNearThresholdMm);
CaseResult case_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold,
                        const Eigen::VectorXd& d_e, const Mask& mask,
                        double threshold_mm = kDefaultNearThresholdMm);

struct Aggregate {
  Index n = 0;
  double mean = 0.0;
  std::optional<double> sd;  ///< sample SD of per-case MAE; absent for n < 2
  double min = 0.0;
  double max = 0.0;
};

struct FoldSummary {
  int held_out = 0;
  Importances importances;
  std::optional<double> oob_mse;
  Index train_rows = 0;
  double forest_fit_seconds = 0.0;
  double linear_fit_seconds = 0.0;
};

struct CaseTiming {
  CaseId case_id;
  double oracle_seconds = 0.0;
  double surrogate_seconds = 0.0;  ///< feature extraction + forest prediction
};

struct EvalReport {
  std::vector<CaseResult> results;  ///< ordered by case, forest before linear
  std::vector<FoldSummary> folds;
  std::vector<CaseTiming> timings;
  double near_threshold_mm = kDefaultNearThresholdMm;
  std::string config_json;

  std::vector<const CaseResult*> of(ModelKind k) const;
  Aggregate aggregate(ModelKind k) const;
};

/// One held-out-ready case: the full (unsubsampled) feature table, whose
/// target column holds the gold |E|.
struct CaseInput {
  FeatureDataset features;
  double oracle_seconds = 0.0;
  double feature_seconds = 0.0;
};

struct FoldArtifacts {
  int held_out = 0;
  const ForestModel& forest;
  const LinearModel& linear;
  const std::vector<FeatureDataset>& test;
  const std::vector<Eigen::VectorXd>& forest_pred;
  const std::vector<Eigen::VectorXd>& linear_pred;
};

struct LoocvOptions {
  ForestParams forest;
  LinearGuards guards;
  std::uint64_t seed = 0;
  double near_threshold_mm = kDefaultNearThresholdMm;
  std::function<void(const FoldArtifacts&)> on_fold;
};

/// Leave-one-phantom-out evaluation of both models. Metrics cover non-air voxels.
EvalReport run_loocv(const std::vector<CaseInput>& cases, const LoocvOptions& options);

enum class ReportFormat { Text, Csv };
std::string render_report(const EvalReport& report, ReportFormat format);

/// Per-case rows recovered from the CSV rendering.
std::vector<CaseResult> parse_report_csv(const std::string& csv);

/// Importances sorted descending with the literature column.
std::string render_importances(const Importances& imp);

}  // namespace ttfe
