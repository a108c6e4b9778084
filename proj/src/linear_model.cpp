#include "ttfe/linear_model.hpp"

#include "ttfe/errors.hpp"

#include <Eigen/QR>
#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ttfe {

using nlohmann::json;

namespace {

constexpr std::array<const char*, kLinearBasisSize> kBasisNames{
    "1", "1/sigma", "1/eps", "1/d_e", "1/d_e^2", "d_c", "d_l"};

}  // namespace

LinearGuards LinearGuards::for_grid(const GridMeta& meta) {
  LinearGuards g;
  g.clamp_mm = 0.5 * meta.spacing.minCoeff();
  return g;
}

void LinearGuards::validate() const {
  if (!(clamp_mm > 0.0) || !(sigma_floor > 0.0) || !(eps_floor > 0.0) || !std::isfinite(clamp_mm) ||
      !std::isfinite(sigma_floor) || !std::isfinite(eps_floor)) {
    throw DataError("linear guards must be positive and finite");
  }
}

LinearBasis lin_basis(const FeatureVector& x, const LinearGuards& g) {
  const double d = std::max(x[kDe], g.clamp_mm);
  LinearBasis b;
  b << 1.0, 1.0 / std::max(x[kSigma], g.sigma_floor), 1.0 / std::max(x[kEps], g.eps_floor),
      1.0 / d, 1.0 / (d * d), x[kDc], x[kDl];
  return b;
}

LinearBasis lin_basis(const FeatureRow& row, const LinearGuards& g) {
  return lin_basis(row.features(), g);
}

LinearModel fit_linear(const FeatureDataset& ds, const LinearGuards& guards) {
  guards.validate();
  const Index n = ds.rows();
  if (n < kLinearBasisSize) {
    throw DataError("fit_linear: need at least 7 rows, got " + std::to_string(n));
  }
  Eigen::MatrixXd a(n, kLinearBasisSize);
  for (Index r = 0; r < n; ++r) a.row(r) = lin_basis(FeatureVector(ds.x.row(r)), guards).transpose();

  const Eigen::VectorXd scale = a.colwise().norm().transpose();
  for (int c = 0; c < kLinearBasisSize; ++c) {
    if (!(scale[c] > 0.0)) {
      throw DataError(std::string("fit_linear: basis term ") + kBasisNames[c] + " is identically zero");
    }
  }
  const Eigen::MatrixXd scaled = a * scale.cwiseInverse().asDiagonal();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-12);
  if (qr.rank() < kLinearBasisSize) {
    std::string names;
    const auto perm = qr.colsPermutation().indices();
    for (Index k = qr.rank(); k < kLinearBasisSize; ++k) {
      if (!names.empty()) names += ", ";
      names += kBasisNames[perm[k]];
    }
    throw DataError("fit_linear: design matrix is rank deficient (rank " +
                    std::to_string(qr.rank()) + "); dependent terms: " + names);
  }
  LinearModel m;
  m.guards = guards;
  m.coef = qr.solve(ds.y).cwiseQuotient(scale);
  if (!m.coef.allFinite()) throw NumericalError("fit_linear: non-finite coefficients");
  return m;
}

Eigen::VectorXd predict_linear(const LinearModel& model, const FeatureMatrix& x) {
  Eigen::VectorXd out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    out[r] = std::max(0.0, model.predict_raw(FeatureVector(x.row(r))));
  }
  return out;
}

std::string LinearModel::to_json_text() const {
  json j = {{"model", "multilinear"},
            {"basis", kBasisNames},
            {"coefficients", std::vector<double>(coef.data(), coef.data() + kLinearBasisSize)},
            {"guards",
             {{"clamp_mm", guards.clamp_mm},
              {"sigma_floor", guards.sigma_floor},
              {"eps_floor", guards.eps_floor}}}};
  return j.dump(2);
}

LinearModel LinearModel::from_json_text(const std::string& text) {
  LinearModel m;
  try {
    const json j = json::parse(text);
    const auto c = j.at("coefficients").get<std::vector<double>>();
    if (c.size() != kLinearBasisSize) throw DataError("linear model: need 7 coefficients");
    for (int k = 0; k < kLinearBasisSize; ++k) m.coef[k] = c[static_cast<std::size_t>(k)];
    const json& g = j.at("guards");
    m.guards.clamp_mm = g.at("clamp_mm").get<double>();
    m.guards.sigma_floor = g.at("sigma_floor").get<double>();
    m.guards.eps_floor = g.at("eps_floor").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("linear model: ") + e.what());
  }
  if (!m.coef.allFinite()) throw DataError("linear model: non-finite coefficient");
  m.guards.validate();
  return m;
}

void LinearModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json_text() << '\n';
}

LinearModel LinearModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open linear model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

}  // namespace ttfe
