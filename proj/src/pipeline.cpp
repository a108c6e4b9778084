#include "ttfe/pipeline.hpp"

#include "ttfe/errors.hpp"
#include "ttfe/random.hpp"
#include "ttfe/volume_io.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ttfe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("write failed for " + p.string());
}

constexpr std::array<Axis, 2> kAxes{Axis::AP, Axis::LR};

std::uint64_t eval_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, 0xe7a1); }

}  // namespace

fs::path RunLayout::phantom(int i) const {
  char name[32];
  std::snprintf(name, sizeof(name), "phantom_%03d.vvol", i);
  return phantoms() / name;
}

void RunConfig::validate() const {
  phantom.validate();
  if (cohort_size < 1) throw DataError("config: cohort_size must be >= 1");
  if (!(patch_radius_mm > 0.0)) throw DataError("config: patch_radius_mm must be positive");
  solve.validate();
  forest.validate();
  resolved_guards().validate();
  if (!(near_threshold_mm > 0.0)) throw DataError("config: near_threshold_mm must be positive");
}

TissueTable RunConfig::tissues() const {
  return tissue_table.empty() ? TissueTable::defaults() : TissueTable::load(tissue_table);
}

LinearGuards RunConfig::resolved_guards() const {
  LinearGuards g = linear;
  if (!(g.clamp_mm > 0.0)) g.clamp_mm = LinearGuards::for_grid(phantom.meta).clamp_mm;
  return g;
}

std::string RunConfig::to_json_text() const {
  json j = {{"out_dir", out_dir.string()},
            {"tissue_table", tissue_table.string()},
            {"phantom", json::parse(phantom.to_json_text())},
            {"cohort_size", cohort_size},
            {"patch_radius_mm", patch_radius_mm},
            {"solve",
             {{"voltage_a", solve.voltage_a},
              {"voltage_b", solve.voltage_b},
              {"rel_residual_tol", solve.rel_residual_tol},
              {"max_iterations", solve.max_iterations},
              {"sigma_floor", solve.sigma_floor}}},
            {"forest",
             {{"n_trees", forest.n_trees},
              {"min_samples_leaf", forest.min_samples_leaf},
              {"max_depth", forest.max_depth},
              {"features_per_split", forest.features_per_split},
              {"bootstrap", forest.bootstrap}}},
            {"linear",
             {{"clamp_mm", linear.clamp_mm},
              {"sigma_floor", linear.sigma_floor},
              {"eps_floor", linear.eps_floor}}},
            {"seed", seed},
            {"near_threshold_mm", near_threshold_mm}};
  return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    c.out_dir = j.value("out_dir", c.out_dir.string());
    c.tissue_table = j.value("tissue_table", std::string());
    if (j.contains("phantom")) c.phantom = PhantomSpec::from_json_text(j.at("phantom").dump());
    c.cohort_size = j.value("cohort_size", c.cohort_size);
    c.patch_radius_mm = j.value("patch_radius_mm", c.patch_radius_mm);
    if (j.contains("solve")) {
      const json& s = j.at("solve");
      c.solve.voltage_a = s.value("voltage_a", c.solve.voltage_a);
      c.solve.voltage_b = s.value("voltage_b", c.solve.voltage_b);
      c.solve.rel_residual_tol = s.value("rel_residual_tol", c.solve.rel_residual_tol);
      c.solve.max_iterations = s.value("max_iterations", c.solve.max_iterations);
      c.solve.sigma_floor = s.value("sigma_floor", c.solve.sigma_floor);
    }
    if (j.contains("forest")) {
      const json& f = j.at("forest");
      c.forest.n_trees = f.value("n_trees", c.forest.n_trees);
      c.forest.min_samples_leaf = f.value("min_samples_leaf", c.forest.min_samples_leaf);
      c.forest.max_depth = f.value("max_depth", c.forest.max_depth);
      c.forest.features_per_split = f.value("features_per_split", c.forest.features_per_split);
      c.forest.bootstrap = f.value("bootstrap", c.forest.bootstrap);
    }
    if (j.contains("linear")) {
      const json& l = j.at("linear");
      c.linear.clamp_mm = l.value("clamp_mm", c.linear.clamp_mm);
      c.linear.sigma_floor = l.value("sigma_floor", c.linear.sigma_floor);
      c.linear.eps_floor = l.value("eps_floor", c.linear.eps_floor);
    }
    c.seed = j.value("seed", c.seed);
    c.near_threshold_mm = j.value("near_threshold_mm", c.near_threshold_mm);
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_json_text(read_text(path)); }

std::vector<fs::path> cmd_phantom(const RunConfig& cfg) {
  cfg.validate();
  const RunLayout run{cfg.out_dir};
  fs::create_directories(run.phantoms());
  write_text(run.config(), cfg.to_json_text() + "\n");

  json manifest = {{"cohort_size", cfg.cohort_size}, {"master_seed", cfg.seed}};
  json members = json::array();
  std::vector<fs::path> paths;
  for (int i = 0; i < cfg.cohort_size; ++i) {
    const PhantomSpec member = cohort_member_spec(cfg.phantom, cfg.seed, i);
    const LabelVolume vol = make_phantom(member);
    save_volume(run.phantom(i), vol);
    paths.push_back(run.phantom(i));
    json counts = json::object();
    const auto c = vol.counts();
    for (std::size_t t = 0; t < c.size(); ++t) {
      if (c[t] > 0) counts[std::string(tissue_name(static_cast<std::uint8_t>(t)))] = c[t];
    }
    members.push_back({{"index", i},
                       {"file", run.phantom(i).filename().string()},
                       {"seed", member.seed},
                       {"rasterized_spec", json::parse(jittered_spec(member).to_json_text())},
                       {"voxel_counts", counts}});
  }
  manifest["phantoms"] = members;
  write_text(run.phantoms() / "manifest.json", manifest.dump(2) + "\n");
  return paths;
}

std::vector<SolveSummary> cmd_solve(const RunConfig& cfg, std::optional<int> phantom) {
  cfg.validate();
  const RunLayout run{cfg.out_dir};
  const TissueTable tissues = cfg.tissues();

  std::vector<int> ids;
  if (phantom) {
    if (*phantom < 0 || *phantom >= cfg.cohort_size) {
      throw DataError("solve: phantom " + std::to_string(*phantom) + " outside cohort of " +
                      std::to_string(cfg.cohort_size));
    }
    ids.push_back(*phantom);
  } else {
    for (int i = 0; i < cfg.cohort_size; ++i) ids.push_back(i);
  }
  for (int i : ids) {
    if (!fs::exists(run.phantom(i))) {
      throw DataError("solve: missing phantom file " + run.phantom(i).string());
    }
  }

  // Each stage records the configuration it ran with; later stages read it back.
  fs::create_directories(run.root);
  write_text(run.config(), cfg.to_json_text() + "\n");

  std::vector<SolveSummary> out;
  for (int i : ids) {
    const LabelVolume vol = load_labels(run.phantom(i));
    for (Axis axis : kAxes) {
      const CaseId id{i, axis};
      try {
        const ElectrodeLayout layout = place_pair(vol, axis, cfg.patch_radius_mm);
        const PotentialSolution sol = solve_potential(vol, tissues, layout, cfg.solve);
        const ScalarField e = field_magnitude(sol, vol.meta);
        const fs::path dir = run.case_dir(id);
        fs::create_directories(dir);
        write_text(dir / "layout.json", layout.to_json_text() + "\n");
        save_volume(dir / "phi.vvol", sol.phi);
        save_volume(dir / "efield.vvol", e);
        json log = json::parse(sol.log_json());
        log["case_id"] = id.str();
        write_text(dir / "solve_log.json", log.dump(2) + "\n");
        out.push_back({id, sol.iterations, sol.final_residual, sol.wall_seconds});
      } catch (const NumericalError& e) {
        throw NumericalError(id.str() + ": " + e.what());
      } catch (const DataError& e) {
        throw DataError(id.str() + ": " + e.what());
      }
    }
  }
  return out;
}

EvalReport cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  const RunLayout run{cfg.out_dir};
  const TissueTable tissues = cfg.tissues();

  std::vector<std::string> missing;
  for (int i = 0; i < cfg.cohort_size; ++i) {
    if (!fs::exists(run.phantom(i))) missing.push_back(run.phantom(i).string());
    for (Axis axis : kAxes) {
      const fs::path dir = run.case_dir({i, axis});
      for (const char* f : {"layout.json", "efield.vvol", "solve_log.json"}) {
        if (!fs::exists(dir / f)) missing.push_back((dir / f).string());
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "eval: missing prerequisites (" + std::to_string(missing.size()) + "):";
    for (const auto& m : missing) msg += "\n  " + m;
    throw DataError(msg);
  }

  std::vector<CaseInput> cases;
  for (int i = 0; i < cfg.cohort_size; ++i) {
    const LabelVolume vol = load_labels(run.phantom(i));
    for (Axis axis : kAxes) {
      const CaseId id{i, axis};
      const fs::path dir = run.case_dir(id);
      const ElectrodeLayout layout = ElectrodeLayout::from_json_text(read_text(dir / "layout.json"));
      const ScalarField gold = load_scalar(dir / "efield.vvol");
      const json log = json::parse(read_text(dir / "solve_log.json"));
      const auto t0 = Clock::now();
      FeatureMaps maps = compute_feature_maps(vol, tissues, layout);
      CaseInput in;
      in.features = assemble_features(vol, maps, gold, id);
      in.feature_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      in.oracle_seconds = log.at("wall_seconds").get<double>();
      cases.push_back(std::move(in));
    }
  }

  write_text(run.config(), cfg.to_json_text() + "\n");
  const fs::path eval_dir = run.eval();
  fs::create_directories(eval_dir / "models");
  fs::create_directories(eval_dir / "volumes");
  const GridMeta meta = cfg.phantom.meta;

  LoocvOptions opts;
  opts.forest = cfg.forest;
  opts.guards = cfg.resolved_guards();
  opts.seed = eval_seed(cfg);
  opts.near_threshold_mm = cfg.near_threshold_mm;
  opts.on_fold = [&](const FoldArtifacts& fold) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "fold_%03d", fold.held_out);
    fold.forest.save(eval_dir / "models" / (std::string(stem) + "_forest.ttrf"));
    fold.linear.save(eval_dir / "models" / (std::string(stem) + "_linear.json"));
    for (std::size_t k = 0; k < fold.test.size(); ++k) {
      const FeatureDataset& t = fold.test[k];
      const Mask mask = (Eigen::Map<const Mask>(t.tissue.data(), t.rows()) != 0).cast<std::uint8_t>();
      const ScalarField gold(meta, t.y.array(), Unit::VoltPerCm);
      const std::string name = t.case_id.str();
      for (const auto& [kind, pred] : {std::pair{std::string("forest"), &fold.forest_pred[k]},
                                       std::pair{std::string("linear"), &fold.linear_pred[k]}}) {
        const ScalarField p(meta, pred->array(), Unit::VoltPerCm);
        save_volume(eval_dir / "volumes" / (name + "_" + kind + "_pred.vvol"), p);
        save_volume(eval_dir / "volumes" / (name + "_" + kind + "_error.vvol"),
                    error_map(p, gold, mask));
      }
    }
  };
  EvalReport report = run_loocv(cases, opts);
  report.config_json = cfg.to_json_text();

  write_text(eval_dir / "report.txt", render_report(report, ReportFormat::Text));
  write_text(eval_dir / "report.csv", render_report(report, ReportFormat::Csv));

  json timing = json::array();
  for (const auto& t : report.timings) {
    timing.push_back({{"case_id", t.case_id.str()},
                      {"oracle_seconds", t.oracle_seconds},
                      {"surrogate_seconds", t.surrogate_seconds}});
  }
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"held_out", f.held_out},
                     {"forest_fit_seconds", f.forest_fit_seconds},
                     {"linear_fit_seconds", f.linear_fit_seconds},
                     {"train_rows", f.train_rows}});
  }
  write_text(eval_dir / "timing.json", json{{"cases", timing}, {"folds", folds}}.dump(2) + "\n");

  const json manifest = {{"config", json::parse(cfg.to_json_text())},
                         {"eval_seed", opts.seed},
                         {"evaluation_mask", "non-air voxels"},
                         {"report_csv", "report.csv"},
                         {"report_text", "report.txt"},
                         {"volumes", "volumes/<case>_<model>_{pred,error}.vvol"},
                         {"models", "models/fold_<phantom>_{forest.ttrf,linear.json}"}};
  write_text(eval_dir / "manifest.json", manifest.dump(2) + "\n");
  return report;
}

std::string cmd_importance(const fs::path& model_file) {
  const ForestModel m = ForestModel::load(model_file);
  const Importances recomputed = compute_importance(m);
  std::string out = render_importances(recomputed);
  if (m.oob_mse) {
    char line[64];
    std::snprintf(line, sizeof(line), "oob_mse  %.6g\n", *m.oob_mse);
    out += line;
  }
  return out;
}

ScalarField cmd_predict(const fs::path& model_file, const fs::path& labels_file,
                        const fs::path& layout_file, const TissueTable& tissues,
                        const fs::path& out_file) {
  const LabelVolume vol = load_labels(labels_file);
  const ElectrodeLayout layout = ElectrodeLayout::from_json_text(read_text(layout_file));
  layout.validate(vol);
  const FeatureMaps maps = compute_feature_maps(vol, tissues, layout);
  const FeatureDataset ds = assemble_features(vol, maps, ScalarField(vol.meta, Unit::VoltPerCm));

  std::ifstream probe(model_file, std::ios::binary);
  if (!probe) throw DataError("cannot open model " + model_file.string());
  char magic[4] = {};
  probe.read(magic, 4);
  Eigen::VectorXd pred;
  if (probe.gcount() == 4 && std::string(magic, 4) == "TTRF") {
    pred = ForestModel::load(model_file).predict(ds.x);
  } else {
    pred = predict_linear(LinearModel::load(model_file), ds.x);
  }
  ScalarField out(vol.meta, pred.array(), Unit::VoltPerCm);
  if (!out_file.empty()) save_volume(out_file, out);
  return out;
}

}  // namespace ttfe
