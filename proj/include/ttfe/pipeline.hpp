#pragma once

#include "ttfe/evaluation.hpp"
#include "ttfe/oracle.hpp"
#include "ttfe/phantom.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ttfe {

/// Everything needed to reproduce a run. Serializes to JSON; a saved config
/// reproduces the run exactly.
struct RunConfig {
  std::filesystem::path out_dir = "run";
  std::filesystem::path tissue_table;  ///< empty selects the built-in defaults
  PhantomSpec phantom;
  int cohort_size = 8;
  double patch_radius_mm = 15.0;
  SolveParams solve;
  ForestParams forest;
  /// clamp_mm <= 0 selects half the smallest voxel spacing.
  LinearGuards linear{0.0, 1e-9, 1.0};
  std::uint64_t seed = 20200514;
  double near_threshold_mm = kDefaultNearThresholdMm;

  void validate() const;
  TissueTable tissues() const;
  LinearGuards resolved_guards() const;

  std::string to_json_text() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

/// Run-directory layout shared by the stages.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path phantoms() const { return root / "phantoms"; }
  std::filesystem::path phantom(int i) const;
  std::filesystem::path case_dir(const CaseId& id) const { return root / "cases" / id.str(); }
  std::filesystem::path eval() const { return root / "eval"; }
};

/// Writes the cohort label volumes and a manifest. Returns the volume paths.
std::vector<std::filesystem::path> cmd_phantom(const RunConfig& cfg);

struct SolveSummary {
  CaseId case_id;
  long iterations = 0;
  double residual = 0.0;
  double seconds = 0.0;
};

/// Places AP and LR layouts for each phantom (or only `phantom`) and writes
/// layout.json, phi.vvol, efield.vvol and solve_log.json per case.
std::vector<SolveSummary> cmd_solve(const RunConfig& cfg, std::optional<int> phantom = {});

/// Leave-one-phantom-out evaluation over the solved cohort; writes
/// report.txt, report.csv, timing.json, fold models and per-case volumes.
EvalReport cmd_eval(const RunConfig& cfg);

/// Sorted importances of a saved forest model next to the literature values.
std::string cmd_importance(const std::filesystem::path& model_file);

/// Applies a saved forest (.ttrf) or linear (.json) model to a label volume and
/// layout; writes the predicted |E| volume.
ScalarField cmd_predict(const std::filesystem::path& model_file,
                        const std::filesystem::path& labels_file,
                        const std::filesystem::path& layout_file, const TissueTable& tissues,
                        const std::filesystem::path& out_file);

}  // namespace ttfe
