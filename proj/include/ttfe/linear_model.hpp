#pragma once

#include "ttfe/features.hpp"

#include <filesystem>
#include <string>

namespace ttfe {

inline constexpr int kLinearBasisSize = 7;
using LinearBasis = Eigen::Matrix<double, kLinearBasisSize, 1>;

/// Floors that keep the reciprocal basis finite on electrode and air voxels.
struct LinearGuards {
  double clamp_mm = 0.5;  ///< distance floor for d_e; conventionally half the smallest spacing
  double sigma_floor = 1e-9;
  double eps_floor = 1.0;

  static LinearGuards for_grid(const GridMeta& meta);
  void validate() const;
};

/// [1, 1/sigma, 1/eps, 1/D, 1/D^2, d_c, d_l] with D = max(d_e, clamp_mm).
LinearBasis lin_basis(const FeatureRow& row, const LinearGuards& guards);
LinearBasis lin_basis(const FeatureVector& x, const LinearGuards& guards);

struct LinearModel {
  LinearBasis coef = LinearBasis::Zero();
  LinearGuards guards;

  /// coef . basis, without the non-negativity clamp.
  double predict_raw(const FeatureVector& x) const { return coef.dot(lin_basis(x, guards)); }

  std::string to_json_text() const;
  static LinearModel from_json_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static LinearModel load(const std::filesystem::path& path);
};

/// Ordinary least squares via column-scaled, column-pivoted QR. Throws
/// DataError naming the dependent basis terms when the design is rank deficient.
LinearModel fit_linear(const FeatureDataset& ds, const LinearGuards& guards);

/// Predictions clamped at 0 V/cm.
Eigen::VectorXd predict_linear(const LinearModel& model, const FeatureMatrix& x);

}  // namespace ttfe
