#include "test_support.hpp"
#include "ttfe/errors.hpp"
#include "ttfe/linear_model.hpp"

#include <doctest.h>

#include <random>

using namespace ttfe;
using ttfe::testing::TempDir;

namespace {

FeatureDataset spread_rows(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureDataset ds;
  ds.resize(n);
  for (Index r = 0; r < n; ++r) {
    FeatureRow row;
    row.sigma = 0.05 + 2.0 * u(rng);
    row.eps = 1.0 + 50.0 * u(rng);
    row.d_e = 0.8 + 60.0 * u(rng);
    row.d_c = 25.0 * u(rng);
    row.d_l = 40.0 * u(rng);
    row.voxel_index = r;
    row.tissue = 1;
    ds.set_row(r, row);
  }
  return ds;
}

LinearBasis planted() {
  LinearBasis a;
  a << 0.4, 0.03, 2.0, 1.5, -0.7, 0.01, -0.004;
  return a;
}

Eigen::MatrixXd design(const FeatureDataset& ds, const LinearGuards& g) {
  Eigen::MatrixXd a(ds.rows(), kLinearBasisSize);
  for (Index r = 0; r < ds.rows(); ++r) a.row(r) = lin_basis(FeatureVector(ds.x.row(r)), g).transpose();
  return a;
}

double rss(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const LinearBasis& c) {
  return (a * c - y).squaredNorm();
}

}  // namespace

TEST_CASE("basis examples") {
  LinearGuards g;
  g.clamp_mm = 0.5;
  FeatureRow row;
  row.sigma = 0.5;
  row.eps = 2.0;
  row.d_e = 2.0;
  row.d_c = 3.0;
  row.d_l = 4.0;
  LinearBasis expect;
  expect << 1, 2, 0.5, 0.5, 0.25, 3, 4;
  CHECK(lin_basis(row, g) == expect);

  row.d_e = 0.0;
  CHECK(lin_basis(row, g)[3] == 2.0);
  CHECK(lin_basis(row, g)[4] == 4.0);

  row.sigma = 0.0;
  row.eps = 0.2;
  CHECK(lin_basis(row, g)[1] == doctest::Approx(1e9));
  CHECK(lin_basis(row, g)[2] == 1.0);
  CHECK(lin_basis(row, g).allFinite());
}

TEST_CASE("guards follow the grid and reject bad values") {
  CHECK(LinearGuards::for_grid(GridMeta(2, 2, 2, 1.5, 0.8, 2.0)).clamp_mm == 0.4);
  LinearGuards g;
  g.clamp_mm = 0.0;
  CHECK_THROWS_AS(g.validate(), DataError);
  g = {};
  g.sigma_floor = std::nan("");
  CHECK_THROWS_AS(g.validate(), DataError);
}

TEST_CASE("exact data recovers the planted coefficients") {
  FeatureDataset ds = spread_rows(400, 1);
  const LinearGuards g;
  for (Index r = 0; r < ds.rows(); ++r) ds.y[r] = planted().dot(lin_basis(FeatureVector(ds.x.row(r)), g));
  const LinearModel m = fit_linear(ds, g);
  for (int k = 0; k < kLinearBasisSize; ++k) {
    CHECK(std::abs(m.coef[k] - planted()[k]) <= 1e-6 * std::abs(planted()[k]));
  }
  const Eigen::VectorXd p = predict_linear(m, ds.x);
  for (Index r = 0; r < ds.rows(); ++r) CHECK(p[r] == doctest::Approx(std::max(0.0, ds.y[r])).epsilon(1e-6));
}

TEST_CASE("constant target loads the intercept") {
  FeatureDataset ds = spread_rows(200, 2);
  ds.y.setConstant(0.9);
  const LinearModel m = fit_linear(ds, {});
  CHECK(m.coef[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(m.coef.tail(6).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("least squares agrees with a gradient-descent fit") {
  FeatureDataset ds = spread_rows(500, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.3);
  const LinearGuards g;
  for (Index r = 0; r < ds.rows(); ++r) {
    ds.y[r] = std::abs(planted().dot(lin_basis(FeatureVector(ds.x.row(r)), g)) + noise(rng));
  }
  const Eigen::MatrixXd a = design(ds, g);
  const LinearModel m = fit_linear(ds, g);
  const double best = rss(a, ds.y, m.coef);

  // Gradient descent on column-standardized normal equations, step 1/L with L
  // from power iteration.
  const Eigen::VectorXd scale = a.colwise().norm().transpose();
  const Eigen::MatrixXd s = a * scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd gram = s.transpose() * s;
  const Eigen::VectorXd rhs = s.transpose() * ds.y;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(kLinearBasisSize);
  double lmax = 0.0;
  for (int it = 0; it < 200; ++it) {
    v = gram * v;
    lmax = v.norm();
    v /= lmax;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(kLinearBasisSize);
  for (int it = 0; it < 3000000; ++it) w -= (gram * w - rhs) / lmax;
  const LinearBasis gd = w.cwiseQuotient(scale);
  const double gd_rss = rss(a, ds.y, gd);
  CHECK(std::abs(gd_rss - best) <= 1e-4 * best);
  CHECK(best <= gd_rss * (1 + 1e-12));

  // no single-coefficient nudge improves the fit
  for (int k = 0; k < kLinearBasisSize; ++k) {
    for (double d : {-1e-3, 1e-3}) {
      LinearBasis c = m.coef;
      c[k] += d;
      CHECK(rss(a, ds.y, c) >= best);
    }
  }
}

TEST_CASE("prediction is affine in the coefficients and clamped at zero") {
  const FeatureDataset ds = spread_rows(50, 5);
  LinearModel a;
  LinearModel b;
  a.coef << 0.1, 0.2, -0.3, 0.4, -0.5, 0.06, -0.07;
  b.coef << -0.2, 0.1, 0.3, -0.1, 0.9, -0.02, 0.01;
  LinearModel sum;
  sum.coef = a.coef + b.coef;
  for (Index r = 0; r < ds.rows(); ++r) {
    const FeatureVector x = ds.x.row(r);
    CHECK(sum.predict_raw(x) == doctest::Approx(a.predict_raw(x) + b.predict_raw(x)).epsilon(1e-12));
  }
  const Eigen::VectorXd p = predict_linear(a, ds.x);
  for (Index r = 0; r < ds.rows(); ++r) CHECK(p[r] == std::max(0.0, a.predict_raw(FeatureVector(ds.x.row(r)))));

  LinearModel zero;
  CHECK((predict_linear(zero, ds.x).array() == 0.0).all());
}

TEST_CASE("output is continuous across the distance clamp") {
  LinearModel m;
  m.coef = planted();
  m.guards.clamp_mm = 0.75;
  FeatureVector x;
  x << 0.3, 5.0, 0.75, 1.0, 2.0;
  const double at = m.predict_raw(x);
  x[kDe] = 0.75 - 1e-12;
  CHECK(m.predict_raw(x) == at);
  x[kDe] = 0.75 + 1e-9;
  CHECK(std::abs(m.predict_raw(x) - at) < 1e-7);
  x[kDe] = 0.0;
  CHECK(m.predict_raw(x) == at);
}

TEST_CASE("rank deficiency names the dependent terms") {
  FeatureDataset ds = spread_rows(100, 6);
  ds.x.col(kDl) = ds.x.col(kDc);
  ds.y.setRandom();
  try {
    fit_linear(ds, {});
    FAIL("expected rank deficiency");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("rank deficient") != std::string::npos);
    CHECK((msg.find("d_c") != std::string::npos || msg.find("d_l") != std::string::npos));
  }

  FeatureDataset flat_eps = spread_rows(100, 7);
  flat_eps.x.col(kEps).setConstant(3.0);
  try {
    fit_linear(flat_eps, {});
    FAIL("expected rank deficiency");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK((msg.find("1/eps") != std::string::npos || msg.find("dependent terms: 1") != std::string::npos));
  }

  CHECK_THROWS_AS(fit_linear(spread_rows(6, 8), {}), DataError);
}

TEST_CASE("model JSON round trip") {
  TempDir dir("linear");
  LinearModel m;
  m.coef = planted();
  m.guards.clamp_mm = 0.25;
  m.save(dir / "m.json");
  const LinearModel back = LinearModel::load(dir / "m.json");
  CHECK(back.coef == m.coef);
  CHECK(back.guards.clamp_mm == 0.25);
  CHECK(back.guards.sigma_floor == m.guards.sigma_floor);
  CHECK_THROWS_AS(LinearModel::from_json_text("{\"coefficients\": [1, 2]}"), DataError);
  CHECK_THROWS_AS(LinearModel::load(dir / "missing.json"), DataError);
}
