#include "ttfe/forest.hpp"

#include "ttfe/errors.hpp"
#include "ttfe/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace ttfe {

void ForestParams::validate() const {
  if (n_trees < 1) throw DataError("forest: n_trees must be >= 1");
  if (min_samples_leaf < 1) throw DataError("forest: min_samples_leaf must be >= 1");
  if (max_depth < 0) throw DataError("forest: max_depth must be >= 0 (0 = unlimited)");
  if (features_per_split < 1 || features_per_split > kNumFeatures) {
    throw DataError("forest: features_per_split must lie in 1..5");
  }
}

int RegressionTree::depth() const {
  // Preorder layout: walk with an explicit stack of (node, depth).
  int best = 0;
  std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[i].is_leaf()) {
      stack.emplace_back(i + 1, d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
    }
  }
  return best;
}

std::size_t RegressionTree::leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

using RowOrder = std::vector<std::uint32_t>;

struct Entry {
  double x;
  double y;
  std::uint32_t w;
  std::uint32_t row;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const Eigen::VectorXd& y,
              const std::vector<std::uint32_t>& weights, const ForestParams& params,
              std::mt19937_64& rng)
      : params_(params), rng_(rng), goes_left_(static_cast<std::size_t>(x.rows()), 0), x_(x),
        y_(y), w_(weights) {}

  RegressionTree build(const std::array<RowOrder, kNumFeatures>& orders) {
    for (int f = 0; f < kNumFeatures; ++f) {
      auto& s = sorted_[f];
      s.clear();
      s.reserve(orders[f].size());
      for (std::uint32_t r : orders[f]) {
        if (w_[r] > 0) s.push_back({x_(r, f), y_[r], w_[r], r});
      }
    }
    const std::size_t n = sorted_[0].size();
    if (n == 0) throw DataError("fit_tree: no rows with positive weight");
    scratch_.resize(n);
    nodes_.clear();
    grow(0, n, 0);
    RegressionTree t;
    t.nodes = std::move(nodes_);
    return t;
  }

 private:
  struct Best {
    int feature = -1;
    std::size_t split = 0;  // last index of the left child
    double score = 0.0;
  };

  std::size_t grow(std::size_t begin, std::size_t end, int depth) {
    double w = 0.0;
    double s = 0.0;
    double ss = 0.0;
    double ymin = sorted_[0][begin].y;
    double ymax = ymin;
    for (std::size_t k = begin; k < end; ++k) {
      const Entry& e = sorted_[0][k];
      w += e.w;
      s += e.w * e.y;
      ss += e.w * e.y * e.y;
      ymin = std::min(ymin, e.y);
      ymax = std::max(ymax, e.y);
    }
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    {
      TreeNode& node = nodes_[id];
      // Clamp so rounding never pushes a mean outside its rows' range.
      node.value = ymin == ymax ? ymin : std::clamp(s / w, ymin, ymax);
      node.weight = w;
      node.impurity = ymin == ymax ? 0.0 : std::max(0.0, ss / w - node.value * node.value);
    }

    const double min_leaf = params_.min_samples_leaf;
    const bool depth_capped = params_.max_depth > 0 && depth >= params_.max_depth;
    if (ymin == ymax || w < 2.0 * min_leaf || depth_capped) return id;

    Best best;
    best.score = s * s / w;  // children must beat the parent
    for (int f : candidate_features()) {
      const auto& col = sorted_[f];
      double wl = 0.0;
      double sl = 0.0;
      for (std::size_t k = begin; k + 1 < end; ++k) {
        wl += col[k].w;
        sl += col[k].w * col[k].y;
        if (!(col[k].x < col[k + 1].x)) continue;
        const double wr = w - wl;
        if (wl < min_leaf) continue;
        if (wr < min_leaf) break;
        const double sr = s - sl;
        const double score = sl * sl / wl + sr * sr / wr;
        if (score > best.score) {
          best = {f, k, score};
        }
      }
    }
    if (best.feature < 0) return id;

    const auto& col = sorted_[best.feature];
    const double lo = col[best.split].x;
    const double hi = col[best.split + 1].x;
    double threshold = lo + 0.5 * (hi - lo);
    if (!(threshold > lo) || threshold > hi) threshold = hi;

    for (std::size_t k = begin; k < end; ++k) goes_left_[col[k].row] = k <= best.split ? 1 : 0;
    const std::size_t mid = begin + (best.split - begin + 1);
    for (auto& other : sorted_) stable_partition(other, begin, end);

    nodes_[id].feature = best.feature;
    nodes_[id].threshold = threshold;
    grow(begin, mid, depth + 1);
    const std::size_t right = grow(mid, end, depth + 1);
    nodes_[id].right = static_cast<std::int32_t>(right);
    return id;
  }

  void stable_partition(std::vector<Entry>& v, std::size_t begin, std::size_t end) {
    std::size_t out = begin;
    std::size_t spill = 0;
    for (std::size_t k = begin; k < end; ++k) {
      if (goes_left_[v[k].row]) {
        v[out++] = v[k];
      } else {
        scratch_[spill++] = v[k];
      }
    }
    std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(spill),
              v.begin() + static_cast<std::ptrdiff_t>(out));
  }

  std::vector<int> candidate_features() {
    std::vector<int> f(kNumFeatures);
    std::iota(f.begin(), f.end(), 0);
    if (params_.features_per_split >= kNumFeatures) return f;
    for (int k = 0; k < params_.features_per_split; ++k) {
      std::uniform_int_distribution<int> pick(k, kNumFeatures - 1);
      std::swap(f[k], f[pick(rng_)]);
    }
    f.resize(static_cast<std::size_t>(params_.features_per_split));
    std::sort(f.begin(), f.end());
    return f;
  }

  const ForestParams& params_;
  std::mt19937_64& rng_;
  std::array<std::vector<Entry>, kNumFeatures> sorted_;
  std::vector<Entry> scratch_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<TreeNode> nodes_;
  const FeatureMatrix& x_;
  const Eigen::VectorXd& y_;
  const std::vector<std::uint32_t>& w_;
};

// Row orders per feature, keyed on (value, target, extra) so that equal keys
// carry identical contributions and the order is independent of row positions.
template <typename Extra>
std::array<RowOrder, kNumFeatures> presort(const FeatureMatrix& x, const Eigen::VectorXd& y,
                                           Extra&& extra) {
  std::array<RowOrder, kNumFeatures> orders;
  for (int f = 0; f < kNumFeatures; ++f) {
    RowOrder& o = orders[f];
    o.resize(static_cast<std::size_t>(x.rows()));
    std::iota(o.begin(), o.end(), 0u);
    std::sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (x(a, f) != x(b, f)) return x(a, f) < x(b, f);
      if (y[a] != y[b]) return y[a] < y[b];
      return extra(a) < extra(b);
    });
  }
  return orders;
}

void check_inputs(const FeatureMatrix& x, const Eigen::VectorXd& y, std::size_t weights) {
  if (x.rows() == 0) throw DataError("fit_tree: empty input");
  if (y.size() != x.rows() || weights != static_cast<std::size_t>(x.rows())) {
    throw DataError("fit_tree: row count mismatch");
  }
  if (x.rows() > Index(UINT32_MAX)) throw DataError("fit_tree: too many rows");
  if (!x.allFinite() || !y.allFinite()) throw DataError("fit_tree: non-finite input");
}

}  // namespace

RegressionTree fit_tree(const FeatureMatrix& x, const Eigen::VectorXd& y,
                        const std::vector<std::uint32_t>& weights, const ForestParams& params,
                        std::mt19937_64& rng) {
  params.validate();
  check_inputs(x, y, weights.size());
  const auto orders = presort(x, y, [&](std::uint32_t r) { return weights[r]; });
  return TreeBuilder(x, y, weights, params, rng).build(orders);
}

RegressionTree fit_tree(const FeatureMatrix& x, const Eigen::VectorXd& y,
                        const ForestParams& params, std::mt19937_64& rng) {
  return fit_tree(x, y, std::vector<std::uint32_t>(static_cast<std::size_t>(x.rows()), 1u), params,
                  rng);
}

std::vector<std::uint32_t> bootstrap_counts(Index n, std::uint64_t seed, int tree) {
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(n), 0u);
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(tree)));
  std::uniform_int_distribution<Index> pick(0, n - 1);
  for (Index k = 0; k < n; ++k) ++counts[static_cast<std::size_t>(pick(rng))];
  return counts;
}

ForestModel fit_forest(const FeatureDataset& ds, const ForestParams& params, std::uint64_t seed) {
  params.validate();
  check_inputs(ds.x, ds.y, static_cast<std::size_t>(ds.rows()));
  const Index n = ds.rows();

  ForestModel model;
  model.params = params;
  model.seed = seed;
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));

  // Ties in (value, target) fall back to row index; the weights change per tree.
  const auto orders = presort(ds.x, ds.y, [](std::uint32_t r) { return r; });
  Eigen::VectorXd oob_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi oob_count = Eigen::VectorXi::Zero(n);
  const std::vector<std::uint32_t> ones(static_cast<std::size_t>(n), 1u);

  for (int t = 0; t < params.n_trees; ++t) {
    std::vector<std::uint32_t> counts = params.bootstrap ? bootstrap_counts(n, seed, t) : ones;
    // Feature sampling draws from its own stream so it never perturbs the bootstrap.
    std::mt19937_64 rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(t)), 0xfea7));
    model.trees.push_back(TreeBuilder(ds.x, ds.y, counts, params, rng).build(orders));
    if (params.bootstrap) {
      const RegressionTree& tree = model.trees.back();
      for (Index r = 0; r < n; ++r) {
        if (counts[static_cast<std::size_t>(r)] == 0) {
          oob_sum[r] += tree.predict(ds.x.row(r));
          ++oob_count[r];
        }
      }
    }
  }

  double sq = 0.0;
  for (Index r = 0; r < n; ++r) {
    if (oob_count[r] > 0) {
      const double e = oob_sum[r] / oob_count[r] - ds.y[r];
      sq += e * e;
      ++model.oob_rows;
    }
  }
  if (model.oob_rows > 0) model.oob_mse = sq / double(model.oob_rows);
  model.importances = compute_importance(model);
  return model;
}

double ForestModel::predict(const FeatureVector& x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / double(trees.size());
}

Eigen::VectorXd ForestModel::predict(const FeatureMatrix& x) const {
  // Tree-major traversal keeps one tree hot in cache; per-row sums still run in tree order.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
  const Eigen::Matrix<double, Eigen::Dynamic, kNumFeatures, Eigen::RowMajor> rows = x;
  for (const auto& t : trees) {
    for (Index r = 0; r < rows.rows(); ++r) sum[r] += t.predict(rows.row(r).data());
  }
  return sum / double(trees.size());
}

Eigen::VectorXd predict(const ForestModel& model, const FeatureMatrix& x) {
  return model.predict(x);
}

Importances compute_importance(const ForestModel& model) {
  Importances out;
  for (const auto& tree : model.trees) {
    const double root_weight = tree.nodes.front().weight;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      if (n.is_leaf()) continue;
      const TreeNode& l = tree.nodes[i + 1];
      const TreeNode& r = tree.nodes[static_cast<std::size_t>(n.right)];
      const double decrease =
          n.weight * n.impurity - l.weight * l.impurity - r.weight * r.impurity;
      out.values[static_cast<std::size_t>(n.feature)] += std::max(0.0, decrease) / root_weight;
    }
  }
  const double total = std::accumulate(out.values.begin(), out.values.end(), 0.0);
  if (!(total > 0.0)) {
    out.values.fill(1.0 / kNumFeatures);
    out.degenerate = true;
    return out;
  }
  // Averaging over trees cancels in the normalization.
  for (double& v : out.values) v /= total;
  return out;
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr char kForestMagic[4] = {'T', 'T', 'R', 'F'};
constexpr std::uint32_t kForestVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("forest model: truncated file");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> ForestModel::serialize() const {
  Writer w;
  for (char c : kForestMagic) w.put(c);
  w.put(kForestVersion);
  w.put<std::int32_t>(params.n_trees);
  w.put<std::int32_t>(params.min_samples_leaf);
  w.put<std::int32_t>(params.max_depth);
  w.put<std::int32_t>(params.features_per_split);
  w.put<std::uint8_t>(params.bootstrap ? 1 : 0);
  w.put(seed);
  w.put<std::uint8_t>(oob_mse ? 1 : 0);
  w.put<double>(oob_mse.value_or(0.0));
  w.put<std::int64_t>(oob_rows);
  for (double v : importances.values) w.put(v);
  w.put<std::uint8_t>(importances.degenerate ? 1 : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(trees.size()));
  for (const auto& t : trees) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      w.put(n.feature);
      w.put(n.right);
      w.put(n.threshold);
      w.put(n.value);
      w.put(n.weight);
      w.put(n.impurity);
    }
  }
  return std::move(w.bytes);
}

ForestModel ForestModel::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  for (char c : kForestMagic) {
    if (r.get<char>() != c) throw DataError("forest model: bad magic");
  }
  if (r.get<std::uint32_t>() != kForestVersion) throw DataError("forest model: unsupported version");
  ForestModel m;
  m.params.n_trees = r.get<std::int32_t>();
  m.params.min_samples_leaf = r.get<std::int32_t>();
  m.params.max_depth = r.get<std::int32_t>();
  m.params.features_per_split = r.get<std::int32_t>();
  m.params.bootstrap = r.get<std::uint8_t>() != 0;
  m.params.validate();
  m.seed = r.get<std::uint64_t>();
  const bool has_oob = r.get<std::uint8_t>() != 0;
  const double oob = r.get<double>();
  if (has_oob) m.oob_mse = oob;
  m.oob_rows = r.get<std::int64_t>();
  for (double& v : m.importances.values) v = r.get<double>();
  m.importances.degenerate = r.get<std::uint8_t>() != 0;
  const std::uint32_t n_trees = r.get<std::uint32_t>();
  if (n_trees == 0 || n_trees != static_cast<std::uint32_t>(m.params.n_trees)) {
    throw DataError("forest model: tree count does not match params");
  }
  m.trees.resize(n_trees);
  for (auto& t : m.trees) {
    const std::uint32_t n_nodes = r.get<std::uint32_t>();
    if (n_nodes == 0) throw DataError("forest model: empty tree");
    t.nodes.resize(n_nodes);
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      TreeNode& n = t.nodes[i];
      n.feature = r.get<std::int32_t>();
      n.right = r.get<std::int32_t>();
      n.threshold = r.get<double>();
      n.value = r.get<double>();
      n.weight = r.get<double>();
      n.impurity = r.get<double>();
      if (n.feature >= kNumFeatures || n.feature < -1) throw DataError("forest model: bad feature");
      if (!n.is_leaf() && (n.right <= std::int32_t(i + 1) || std::uint32_t(n.right) >= n_nodes)) {
        throw DataError("forest model: bad child index");
      }
    }
  }
  if (!r.done()) throw DataError("forest model: trailing bytes");
  return m;
}

void ForestModel::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

ForestModel ForestModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open forest model " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace ttfe
