// Command-line driver: phantom -> solve -> eval, plus importance and predict.

#include "ttfe/errors.hpp"
#include "ttfe/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string tissue_table;

  std::optional<int> cohort_size;
  std::vector<int> dims;
  std::vector<double> spacing;
  std::vector<double> semi_axes;
  std::optional<double> skin, skull, csf, grey;
  std::vector<double> tumor_offset;
  std::optional<double> tumor_radius, necrotic_radius;
  std::optional<double> jitter_axes, jitter_offset, jitter_radius;

  std::optional<double> patch_radius;
  std::optional<double> tol;
  std::optional<long> max_iter;
  std::optional<double> voltage_a, voltage_b;

  std::optional<int> trees, min_leaf, max_depth, mtry;
  bool no_bootstrap = false;
  std::optional<double> clamp_mm;
  std::optional<double> threshold;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (overrides config)");
  cmd->add_option("--out", o.out, "run directory (overrides config)");
  cmd->add_option("--tissue-table", o.tissue_table, "JSON tissue table (default: built-in)");
}

void add_phantom_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--cohort-size", o.cohort_size, "number of phantoms");
  cmd->add_option("--dims", o.dims, "grid voxels nx ny nz")->expected(3);
  cmd->add_option("--spacing", o.spacing, "voxel spacing in mm sx sy sz")->expected(3);
  cmd->add_option("--semi-axes", o.semi_axes, "head semi-axes in mm (LR AP SI)")->expected(3);
  cmd->add_option("--skin", o.skin, "skin thickness mm");
  cmd->add_option("--skull", o.skull, "skull thickness mm");
  cmd->add_option("--csf", o.csf, "CSF thickness mm");
  cmd->add_option("--grey", o.grey, "grey matter thickness mm");
  cmd->add_option("--tumor-offset", o.tumor_offset, "tumor center offset mm")->expected(3);
  cmd->add_option("--tumor-radius", o.tumor_radius, "enhancing tumor radius mm");
  cmd->add_option("--necrotic-radius", o.necrotic_radius, "necrotic core radius mm");
  cmd->add_option("--jitter-axes", o.jitter_axes, "semi-axis jitter half-width mm");
  cmd->add_option("--jitter-offset", o.jitter_offset, "tumor offset jitter half-width mm");
  cmd->add_option("--jitter-radius", o.jitter_radius, "tumor radius jitter half-width mm");
}

void add_solve_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--patch-radius", o.patch_radius, "electrode patch radius mm");
  cmd->add_option("--tol", o.tol, "relative residual tolerance");
  cmd->add_option("--max-iter", o.max_iter, "iteration budget (0 = automatic)");
  cmd->add_option("--voltage-a", o.voltage_a, "patch A potential (V)");
  cmd->add_option("--voltage-b", o.voltage_b, "patch B potential (V)");
}

void add_eval_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--trees", o.trees, "number of trees");
  cmd->add_option("--min-leaf", o.min_leaf, "minimum samples per leaf");
  cmd->add_option("--max-depth", o.max_depth, "maximum depth (0 = unlimited)");
  cmd->add_option("--features-per-split", o.mtry, "features sampled per split (1..5)");
  cmd->add_flag("--no-bootstrap", o.no_bootstrap, "train every tree on the full set");
  cmd->add_option("--clamp-mm", o.clamp_mm, "d_e floor for the linear model (mm)");
  cmd->add_option("--threshold", o.threshold, "near/far d_e split (mm)");
}

ttfe::RunConfig resolve(const Overrides& o) {
  ttfe::RunConfig cfg;
  if (!o.config.empty()) {
    cfg = ttfe::RunConfig::load(o.config);
  } else {
    const fs::path existing = ttfe::RunLayout{o.out.empty() ? cfg.out_dir : fs::path(o.out)}.config();
    if (fs::exists(existing)) cfg = ttfe::RunConfig::load(existing);
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.tissue_table.empty()) cfg.tissue_table = o.tissue_table;

  auto& p = cfg.phantom;
  if (o.cohort_size) cfg.cohort_size = *o.cohort_size;
  if (!o.dims.empty()) p.meta.dims = Eigen::Array3i(o.dims[0], o.dims[1], o.dims[2]);
  if (!o.spacing.empty()) p.meta.spacing = Eigen::Array3d(o.spacing[0], o.spacing[1], o.spacing[2]);
  if (!o.semi_axes.empty()) p.semi_axes_mm = {o.semi_axes[0], o.semi_axes[1], o.semi_axes[2]};
  if (o.skin) p.skin_mm = *o.skin;
  if (o.skull) p.skull_mm = *o.skull;
  if (o.csf) p.csf_mm = *o.csf;
  if (o.grey) p.grey_mm = *o.grey;
  if (!o.tumor_offset.empty()) {
    p.tumor_offset_mm = {o.tumor_offset[0], o.tumor_offset[1], o.tumor_offset[2]};
  }
  if (o.tumor_radius) p.tumor_enhancing_radius_mm = *o.tumor_radius;
  if (o.necrotic_radius) p.tumor_necrotic_radius_mm = *o.necrotic_radius;
  if (o.jitter_axes) p.jitter_semi_axes_mm = *o.jitter_axes;
  if (o.jitter_offset) p.jitter_tumor_offset_mm = *o.jitter_offset;
  if (o.jitter_radius) p.jitter_tumor_radius_mm = *o.jitter_radius;

  if (o.patch_radius) cfg.patch_radius_mm = *o.patch_radius;
  if (o.tol) cfg.solve.rel_residual_tol = *o.tol;
  if (o.max_iter) cfg.solve.max_iterations = *o.max_iter;
  if (o.voltage_a) cfg.solve.voltage_a = *o.voltage_a;
  if (o.voltage_b) cfg.solve.voltage_b = *o.voltage_b;

  if (o.trees) cfg.forest.n_trees = *o.trees;
  if (o.min_leaf) cfg.forest.min_samples_leaf = *o.min_leaf;
  if (o.max_depth) cfg.forest.max_depth = *o.max_depth;
  if (o.mtry) cfg.forest.features_per_split = *o.mtry;
  if (o.no_bootstrap) cfg.forest.bootstrap = false;
  if (o.clamp_mm) cfg.linear.clamp_mm = *o.clamp_mm;
  if (o.threshold) cfg.near_threshold_mm = *o.threshold;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel-wise electric field surrogate: phantoms, gold-standard solves, "
               "random-forest and multilinear estimators"};
  app.require_subcommand(1);
  Overrides o;

  auto* phantom = app.add_subcommand("phantom", "generate the phantom cohort");
  add_common(phantom, o);
  add_phantom_flags(phantom, o);

  auto* solve = app.add_subcommand("solve", "place AP/LR arrays and compute gold-standard fields");
  add_common(solve, o);
  add_solve_flags(solve, o);
  std::optional<int> case_index;
  solve->add_option("--case", case_index, "solve only this phantom index");

  auto* eval = app.add_subcommand("eval", "leave-one-phantom-out evaluation");
  add_common(eval, o);
  add_eval_flags(eval, o);

  auto* importance = app.add_subcommand("importance", "print feature importances of a forest model");
  add_common(importance, o);
  std::string model_file;
  importance->add_option("model", model_file, "forest model file (.ttrf)")
      ->required()
      ->check(CLI::ExistingFile);

  auto* predict = app.add_subcommand("predict", "apply a saved model to a volume and layout");
  add_common(predict, o);
  std::string labels_file;
  std::string layout_file;
  std::string predict_model;
  std::string predict_out;
  predict->add_option("--model", predict_model, "forest (.ttrf) or linear (.json) model")->required();
  predict->add_option("--labels", labels_file, "label volume (.vvol)")->required();
  predict->add_option("--layout", layout_file, "electrode layout JSON")->required();
  predict->add_option("--output", predict_out, "predicted |E| volume (.vvol)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*phantom) {
      const auto cfg = resolve(o);
      const auto paths = ttfe::cmd_phantom(cfg);
      std::printf("wrote %zu phantoms to %s\n", paths.size(),
                  ttfe::RunLayout{cfg.out_dir}.phantoms().c_str());
    } else if (*solve) {
      const auto cfg = resolve(o);
      for (const auto& s : ttfe::cmd_solve(cfg, case_index)) {
        std::printf("%s: %ld iterations, residual %.3g, %.2f s\n", s.case_id.str().c_str(),
                    s.iterations, s.residual, s.seconds);
      }
    } else if (*eval) {
      const auto cfg = resolve(o);
      const auto report = ttfe::cmd_eval(cfg);
      std::cout << ttfe::render_report(report, ttfe::ReportFormat::Text);
    } else if (*importance) {
      std::cout << ttfe::cmd_importance(model_file);
    } else if (*predict) {
      const auto cfg = resolve(o);
      const auto field =
          ttfe::cmd_predict(predict_model, labels_file, layout_file, cfg.tissues(), predict_out);
      std::printf("wrote %s (max %.4f V/cm)\n", predict_out.c_str(), field.values.maxCoeff());
    }
  } catch (const ttfe::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const ttfe::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
