#pragma once

#include "ttfe/electrodes.hpp"
#include "ttfe/tissue.hpp"
#include "ttfe/volume.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ttfe {

inline constexpr int kNumFeatures = 5;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{"sigma", "eps", "d_e",
                                                                          "d_c", "d_l"};
enum Feature : int { kSigma = 0, kEps = 1, kDe = 2, kDc = 3, kDl = 4 };

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumFeatures>;
using FeatureVector = Eigen::Matrix<double, 1, kNumFeatures>;

struct FeatureRow {
  double sigma = 0.0;  ///< S/m
  double eps = 1.0;
  double d_e = 0.0;  ///< mm
  double d_c = 0.0;  ///< mm
  double d_l = 0.0;  ///< mm
  double target_E = 0.0;  ///< V/cm
  Index voxel_index = 0;
  std::uint8_t tissue = 0;

  FeatureVector features() const { return {sigma, eps, d_e, d_c, d_l}; }
};

/// Identifies one phantom/array-pair combination.
struct CaseId {
  int phantom = 0;
  Axis axis = Axis::AP;

  std::string str() const;
  friend bool operator==(const CaseId&, const CaseId&) = default;
};

/// Column-oriented per-voxel rows.
struct FeatureDataset {
  CaseId case_id;
  FeatureMatrix x;
  Eigen::VectorXd y;
  std::vector<Index> voxel_index;
  std::vector<std::uint8_t> tissue;

  Index rows() const { return x.rows(); }
  FeatureRow row(Index r) const;
  void resize(Index n);
  void set_row(Index r, const FeatureRow& row);

  /// Non-empty, consistent column lengths, finite, non-negative distances
  /// and targets, no duplicate voxel indices.
  void validate() const;
};

/// The five per-voxel feature maps for one volume and layout.
struct FeatureMaps {
  ScalarField sigma;
  ScalarField eps;
  ScalarField d_e;
  ScalarField d_c;
  ScalarField d_l;
};

FeatureMaps compute_feature_maps(const LabelVolume& vol, const TissueTable& table,
                                 const ElectrodeLayout& layout);

/// One row per voxel, air included. `gold` supplies the target |E|.
FeatureDataset extract_features(const LabelVolume& vol, const TissueTable& table,
                                const ElectrodeLayout& layout, const ScalarField& gold,
                                CaseId id = {});
FeatureDataset assemble_features(const LabelVolume& vol, const FeatureMaps& maps,
                                 const ScalarField& gold, CaseId id = {});

/// Keeps every non-air row; air rows are sampled without replacement down to
/// round(mean voxel count over the non-air tissues present). Row order is kept.
FeatureDataset subsample_air(const FeatureDataset& ds, std::uint64_t seed);
Index air_target_count(const FeatureDataset& ds);

FeatureDataset select_rows(const FeatureDataset& ds, const std::vector<Index>& rows);
FeatureDataset concatenate(const std::vector<const FeatureDataset*>& parts);

struct LoocvSplit {
  FeatureDataset train;  ///< air-subsampled rows of every other phantom
  std::vector<CaseId> train_cases;
  std::vector<FeatureDataset> test;  ///< full, unsubsampled held-out cases
};

/// Holds out every case of phantom `held_out`.
LoocvSplit split_loocv(const std::vector<FeatureDataset>& cases, int held_out,
                       std::uint64_t seed);

/// Columnar binary file: JSON header line then little-endian columns
/// (features and target as f32, voxel_index as u32, tissue as u8).
void save_features(const std::filesystem::path& path, const FeatureDataset& ds);
FeatureDataset load_features(const std::filesystem::path& path);
void export_features_csv(const std::filesystem::path& path, const FeatureDataset& ds);

}  // namespace ttfe
