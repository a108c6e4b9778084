#pragma once

#include "ttfe/features.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace ttfe {

struct ForestParams {
  int n_trees = 30;
  int min_samples_leaf = 5;
  int max_depth = 0;  ///< 0 = unlimited
  int features_per_split = kNumFeatures;
  bool bootstrap = true;

  void validate() const;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Flat preorder node. Internal nodes send rows with x[feature] < threshold to
/// the left child, which is always the next node; `right` indexes the other.
struct TreeNode {
  std::int32_t feature = -1;  ///< -1 for leaves
  std::int32_t right = -1;
  double threshold = 0.0;
  double value = 0.0;     ///< weighted mean target of the node's training rows
  double weight = 0.0;    ///< training samples reaching the node (bootstrap-weighted)
  double impurity = 0.0;  ///< weighted MSE of the node's training rows

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  template <typename Row>
  double predict(const Row& x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = x[n.feature] < n.threshold ? i + 1 : static_cast<std::size_t>(n.right);
    }
    return nodes[i].value;
  }

  int depth() const;
  std::size_t leaves() const;
};

/// Greedy CART on integer-weighted rows (weight 0 rows are ignored). At each
/// node the sampled features are scanned in index order and thresholds in
/// ascending order; the first strictly best weighted child MSE wins.
RegressionTree fit_tree(const FeatureMatrix& x, const Eigen::VectorXd& y,
                        const std::vector<std::uint32_t>& weights, const ForestParams& params,
                        std::mt19937_64& rng);
RegressionTree fit_tree(const FeatureMatrix& x, const Eigen::VectorXd& y,
                        const ForestParams& params, std::mt19937_64& rng);

struct Importances {
  std::array<double, kNumFeatures> values{};
  bool degenerate = false;  ///< no split anywhere; values set uniform
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  ForestParams params;
  std::uint64_t seed = 0;
  std::optional<double> oob_mse;  ///< absent without bootstrap or OOB rows
  Index oob_rows = 0;
  Importances importances;

  double predict(const FeatureVector& x) const;
  Eigen::VectorXd predict(const FeatureMatrix& x) const;

  std::vector<std::uint8_t> serialize() const;
  static ForestModel deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static ForestModel load(const std::filesystem::path& path);
};

/// Bootstrap multiplicities for tree `tree`: n draws with replacement from a
/// stream seeded by (seed, tree).
std::vector<std::uint32_t> bootstrap_counts(Index n, std::uint64_t seed, int tree);

ForestModel fit_forest(const FeatureDataset& ds, const ForestParams& params, std::uint64_t seed);

/// Batch prediction; same values as ForestModel::predict.
Eigen::VectorXd predict(const ForestModel& model, const FeatureMatrix& x);

/// Mean decrease in impurity per feature, averaged over trees, normalized to 1.
Importances compute_importance(const ForestModel& model);

}  // namespace ttfe
