#include "ttfe/evaluation.hpp"

#include "ttfe/errors.hpp"
#include "ttfe/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace ttfe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

std::string opt(const std::optional<double>& v, const char* f = "%.4f") {
  return v ? fmt(f, *v) : std::string("n/a");
}

}  // namespace

std::string model_name(ModelKind k) { return k == ModelKind::Forest ? "forest" : "linear"; }

ScalarField error_map(const ScalarField& pred, const ScalarField& gold, const Mask& mask) {
  if (!(pred.meta == gold.meta) || mask.size() != gold.meta.size()) {
    throw DataError("error_map: grid mismatch");
  }
  ScalarField out(gold.meta, Unit::VoltPerCm);
  out.values = (mask != 0).select((pred.values - gold.values).abs(), 0.0);
  return out;
}

CaseResult case_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& gold,
                        const Eigen::VectorXd& d_e, const Mask& mask, double threshold_mm) {
  if (pred.size() != gold.size() || d_e.size() != gold.size() || mask.size() != gold.size()) {
    throw DataError("case_metrics: size mismatch");
  }
  CaseResult r;
  double sum = 0.0;
  double near = 0.0;
  double far = 0.0;
  for (Index i = 0; i < gold.size(); ++i) {
    if (!mask[i]) continue;
    const double e = std::abs(pred[i] - gold[i]);
    sum += e;
    ++r.n_voxels;
    if (d_e[i] < threshold_mm) {
      near += e * e;
      ++r.n_near;
    } else {
      far += e * e;
      ++r.n_far;
    }
  }
  if (r.n_voxels == 0) throw DataError("case_metrics: evaluation mask is empty");
  r.mae = sum / double(r.n_voxels);
  double var = 0.0;
  for (Index i = 0; i < gold.size(); ++i) {
    if (!mask[i]) continue;
    const double dev = std::abs(pred[i] - gold[i]) - r.mae;
    var += dev * dev;
  }
  r.sd = std::sqrt(var / double(r.n_voxels));
  if (r.n_near > 0) r.near_mse = near / double(r.n_near);
  if (r.n_far > 0) r.far_mse = far / double(r.n_far);
  return r;
}

CaseResult case_metrics(const ScalarField& pred, const ScalarField& gold, const ScalarField& d_e,
                        const Mask& mask, double threshold_mm) {
  if (!(pred.meta == gold.meta) || !(d_e.meta == gold.meta)) {
    throw DataError("case_metrics: grid mismatch");
  }
  return case_metrics(pred.values.matrix(), gold.values.matrix(), d_e.values.matrix(), mask,
                      threshold_mm);
}

std::vector<const CaseResult*> EvalReport::of(ModelKind k) const {
  std::vector<const CaseResult*> out;
  for (const auto& r : results) {
    if (r.model == k) out.push_back(&r);
  }
  return out;
}

Aggregate EvalReport::aggregate(ModelKind k) const {
  Aggregate a;
  const auto rs = of(k);
  a.n = static_cast<Index>(rs.size());
  if (rs.empty()) return a;
  a.min = rs.front()->mae;
  a.max = rs.front()->mae;
  double sum = 0.0;
  for (const auto* r : rs) {
    sum += r->mae;
    a.min = std::min(a.min, r->mae);
    a.max = std::max(a.max, r->mae);
  }
  a.mean = sum / double(a.n);
  if (a.n >= 2) {
    double var = 0.0;
    for (const auto* r : rs) var += (r->mae - a.mean) * (r->mae - a.mean);
    a.sd = std::sqrt(var / double(a.n - 1));
  }
  return a;
}

EvalReport run_loocv(const std::vector<CaseInput>& cases, const LoocvOptions& options) {
  options.forest.validate();
  options.guards.validate();
  std::set<int> phantoms;
  for (const auto& c : cases) phantoms.insert(c.features.case_id.phantom);
  if (phantoms.size() < 2) throw DataError("run_loocv: need at least two phantoms");

  std::vector<FeatureDataset> all;
  all.reserve(cases.size());
  for (const auto& c : cases) {
    c.features.validate();
    all.push_back(c.features);
  }

  EvalReport report;
  report.near_threshold_mm = options.near_threshold_mm;
  std::vector<std::pair<CaseId, std::array<CaseResult, 2>>> per_case;

  for (int held_out : phantoms) {
    const std::uint64_t fold = static_cast<std::uint64_t>(held_out);
    LoocvSplit split = split_loocv(all, held_out, derive_seed(options.seed, 2000 + fold));

    FoldSummary summary;
    summary.held_out = held_out;
    summary.train_rows = split.train.rows();
    auto t0 = Clock::now();
    const ForestModel forest =
        fit_forest(split.train, options.forest, derive_seed(options.seed, 1000 + fold));
    summary.forest_fit_seconds = seconds_since(t0);
    t0 = Clock::now();
    const LinearModel linear = fit_linear(split.train, options.guards);
    summary.linear_fit_seconds = seconds_since(t0);
    summary.importances = forest.importances;
    summary.oob_mse = forest.oob_mse;
    report.folds.push_back(summary);

    std::vector<Eigen::VectorXd> fpred;
    std::vector<Eigen::VectorXd> lpred;
    for (const auto& test : split.test) {
      const Mask mask = (Eigen::Map<const Mask>(test.tissue.data(), test.rows()) != 0).cast<std::uint8_t>();
      const Eigen::VectorXd d_e = test.x.col(kDe);

      t0 = Clock::now();
      fpred.push_back(forest.predict(test.x));
      const double forest_seconds = seconds_since(t0);
      t0 = Clock::now();
      lpred.push_back(predict_linear(linear, test.x));
      const double linear_seconds = seconds_since(t0);

      CaseResult fr = case_metrics(fpred.back(), test.y, d_e, mask, options.near_threshold_mm);
      fr.case_id = test.case_id;
      fr.model = ModelKind::Forest;
      fr.predict_seconds = forest_seconds;
      CaseResult lr = case_metrics(lpred.back(), test.y, d_e, mask, options.near_threshold_mm);
      lr.case_id = test.case_id;
      lr.model = ModelKind::Linear;
      lr.predict_seconds = linear_seconds;
      per_case.push_back({test.case_id, {fr, lr}});

      for (const auto& c : cases) {
        if (c.features.case_id == test.case_id) {
          report.timings.push_back(
              {test.case_id, c.oracle_seconds, c.feature_seconds + forest_seconds});
        }
      }
    }
    if (options.on_fold) options.on_fold({held_out, forest, linear, split.test, fpred, lpred});
  }

  const auto key = [](const CaseId& c) { return std::pair{c.phantom, c.axis == Axis::AP ? 0 : 1}; };
  std::stable_sort(per_case.begin(), per_case.end(),
                   [&](const auto& a, const auto& b) { return key(a.first) < key(b.first); });
  std::stable_sort(report.timings.begin(), report.timings.end(),
                   [&](const auto& a, const auto& b) { return key(a.case_id) < key(b.case_id); });
  for (auto& [id, pair] : per_case) {
    report.results.push_back(pair[0]);
    report.results.push_back(pair[1]);
  }
  return report;
}

std::string render_importances(const Importances& imp) {
  std::array<int, kNumFeatures> order{0, 1, 2, 3, 4};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return imp.values[a] > imp.values[b]; });
  std::ostringstream os;
  os << "feature  importance  literature\n";
  for (int f : order) {
    char line[96];
    std::snprintf(line, sizeof(line), "%-7s  %10.4f  %10.2f\n", std::string(kFeatureNames[f]).c_str(),
                  imp.values[f], kReferenceImportances[f]);
    os << line;
  }
  double total = 0.0;
  for (double v : imp.values) total += v;
  os << "sum      " << fmt("%10.4f", total) << '\n';
  if (imp.degenerate) os << "note: no splits in any tree; importances set uniform by convention\n";
  return os.str();
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  std::ostringstream os;
  if (format == ReportFormat::Csv) {
    os << "case_id,phantom,axis,model,mae,sd,near_mse,far_mse,n_voxels,n_near,n_far\n";
    for (const auto& r : report.results) {
      os << r.case_id.str() << ',' << r.case_id.phantom << ',' << axis_name(r.case_id.axis) << ','
         << model_name(r.model) << ',' << exact(r.mae) << ',' << exact(r.sd) << ','
         << (r.near_mse ? exact(*r.near_mse) : "") << ',' << (r.far_mse ? exact(*r.far_mse) : "")
         << ',' << r.n_voxels << ',' << r.n_near << ',' << r.n_far << '\n';
    }
    return os.str();
  }

  os << "Leave-one-phantom-out evaluation\n"
     << "Errors are mean (SD) of |prediction - gold| in V/cm over non-air voxels.\n"
     << "Near/far split at d_e = " << fmt("%.1f", report.near_threshold_mm) << " mm.\n\n";

  std::set<int> phantoms;
  for (const auto& r : report.results) phantoms.insert(r.case_id.phantom);
  const auto cell = [&](int p, Axis a, ModelKind k) -> std::string {
    for (const auto& r : report.results) {
      if (r.case_id.phantom == p && r.case_id.axis == a && r.model == k) {
        return fmt("%.3f", r.mae) + " (" + fmt("%.3f", r.sd) + ")";
      }
    }
    return "n/a";
  };
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %-16s %-16s %-16s %-16s\n", "phantom", "forest AP",
                "forest LR", "linear AP", "linear LR");
  os << line;
  for (int p : phantoms) {
    std::snprintf(line, sizeof(line), "%-8d %-16s %-16s %-16s %-16s\n", p,
                  cell(p, Axis::AP, ModelKind::Forest).c_str(),
                  cell(p, Axis::LR, ModelKind::Forest).c_str(),
                  cell(p, Axis::AP, ModelKind::Linear).c_str(),
                  cell(p, Axis::LR, ModelKind::Linear).c_str());
    os << line;
  }

  os << "\nAggregate per-case MAE (V/cm)\n";
  for (ModelKind k : {ModelKind::Forest, ModelKind::Linear}) {
    const Aggregate a = report.aggregate(k);
    os << "  " << model_name(k) << ": mean " << fmt("%.4f", a.mean) << ", SD " << opt(a.sd)
       << ", range " << fmt("%.4f", a.min) << " - " << fmt("%.4f", a.max) << ", N = " << a.n
       << '\n';
  }
  os << "  literature (patient data): forest 0.14, linear 0.29\n";

  os << "\nNear/far MSE, forest ((V/cm)^2)\n";
  for (const auto* r : report.of(ModelKind::Forest)) {
    os << "  " << r->case_id.str() << ": near " << opt(r->near_mse) << " (n=" << r->n_near
       << "), far " << opt(r->far_mse) << " (n=" << r->n_far << ")\n";
  }

  os << "\nFeature importances per fold (sigma, eps, d_e, d_c, d_l)\n";
  for (const auto& f : report.folds) {
    os << "  held out " << f.held_out << ":";
    for (double v : f.importances.values) os << ' ' << fmt("%.4f", v);
    os << "  oob_mse " << opt(f.oob_mse) << (f.importances.degenerate ? "  [degenerate]" : "")
       << '\n';
  }
  os << "  literature: 0.05 0.05 0.65 0.10 0.15\n";

  if (!report.timings.empty()) {
    os << "\nTiming (s): oracle solve vs feature extraction + forest prediction\n";
    for (const auto& t : report.timings) {
      const double ratio = t.surrogate_seconds > 0.0 ? t.oracle_seconds / t.surrogate_seconds : 0.0;
      os << "  " << t.case_id.str() << ": oracle " << fmt("%.3f", t.oracle_seconds)
         << ", surrogate " << fmt("%.3f", t.surrogate_seconds) << ", ratio " << fmt("%.1f", ratio)
         << '\n';
    }
  }
  if (!report.config_json.empty()) os << "\nConfiguration\n" << report.config_json << '\n';
  return os.str();
}

std::vector<CaseResult> parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw DataError("report csv: missing header");
  std::vector<CaseResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 11) throw DataError("report csv: expected 11 fields: " + line);
    CaseResult r;
    r.case_id.phantom = std::stoi(f[1]);
    r.case_id.axis = parse_axis(f[2]);
    if (f[3] == "forest") {
      r.model = ModelKind::Forest;
    } else if (f[3] == "linear") {
      r.model = ModelKind::Linear;
    } else {
      throw DataError("report csv: unknown model " + f[3]);
    }
    r.mae = std::stod(f[4]);
    r.sd = std::stod(f[5]);
    if (!f[6].empty()) r.near_mse = std::stod(f[6]);
    if (!f[7].empty()) r.far_mse = std::stod(f[7]);
    r.n_voxels = std::stoll(f[8]);
    r.n_near = std::stoll(f[9]);
    r.n_far = std::stoll(f[10]);
    out.push_back(r);
  }
  return out;
}

}  // namespace ttfe
