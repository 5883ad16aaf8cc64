#include "partsel/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace partsel {

json GbtParams::to_json() const {
  return json{{"trees", trees},
              {"max_depth", max_depth},
              {"learning_rate", learning_rate},
              {"lambda", lambda},
              {"min_child_weight", min_child_weight},
              {"max_bins", max_bins}};
}

GbtParams GbtParams::from_json(const json& doc) {
  GbtParams p;
  p.trees = doc.value("trees", p.trees);
  p.max_depth = doc.value("max_depth", p.max_depth);
  p.learning_rate = doc.value("learning_rate", p.learning_rate);
  p.lambda = doc.value("lambda", p.lambda);
  p.min_child_weight = doc.value("min_child_weight", p.min_child_weight);
  p.max_bins = doc.value("max_bins", p.max_bins);
  return p;
}

double GbtModel::predict(std::span<const double> x) const {
  double out = base_score_;
  for (const auto& tree : trees_) {
    int node = 0;
    while (tree[static_cast<std::size_t>(node)].feature >= 0) {
      const TreeNode& t = tree[static_cast<std::size_t>(node)];
      node = x[static_cast<std::size_t>(t.feature)] <= t.threshold ? t.left : t.right;
    }
    out += tree[static_cast<std::size_t>(node)].value;
  }
  return out;
}

std::vector<double> GbtModel::feature_gain() const {
  std::vector<double> gain(dimension_, 0.0);
  for (const auto& tree : trees_) {
    for (const auto& n : tree) {
      if (n.feature >= 0) gain[static_cast<std::size_t>(n.feature)] += n.gain;
    }
  }
  return gain;
}

namespace {

json node_json(const std::vector<TreeNode>& tree, int index) {
  const TreeNode& n = tree[static_cast<std::size_t>(index)];
  if (n.feature < 0) return json{{"leaf", n.value}};
  return json{{"feature", n.feature},
              {"threshold", n.threshold},
              {"gain", n.gain},
              {"left", node_json(tree, n.left)},
              {"right", node_json(tree, n.right)}};
}

int node_from_json(const json& j, std::vector<TreeNode>& tree) {
  const int index = static_cast<int>(tree.size());
  tree.emplace_back();
  if (j.contains("leaf")) {
    tree[static_cast<std::size_t>(index)].value = j.at("leaf").get<double>();
    return index;
  }
  TreeNode n;
  n.feature = j.at("feature").get<int>();
  n.threshold = j.at("threshold").get<double>();
  n.gain = j.at("gain").get<double>();
  n.left = node_from_json(j.at("left"), tree);
  n.right = node_from_json(j.at("right"), tree);
  tree[static_cast<std::size_t>(index)] = n;
  return index;
}

}  // namespace

json GbtModel::to_json() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(node_json(t, 0));
  return json{{"params", params_.to_json()}, {"dimension", dimension_}, {"base_score", base_score_}, {"trees", trees}};
}

GbtModel GbtModel::from_json(const json& doc) {
  GbtModel m;
  try {
    m.params_ = GbtParams::from_json(doc.at("params"));
    m.dimension_ = doc.at("dimension").get<std::size_t>();
    m.base_score_ = doc.at("base_score").get<double>();
    for (const auto& t : doc.at("trees")) {
      std::vector<TreeNode> tree;
      node_from_json(t, tree);
      m.trees_.push_back(std::move(tree));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad model document: ") + e.what());
  }
  return m;
}

namespace {

class Trainer {
 public:
  Trainer(const FeatureMatrix& x, std::span<const std::size_t> rows, const GbtParams& params)
      : params_(params), n_(rows.size()), cols_(x.cols), stride_(std::max<std::size_t>(2, params.max_bins)) {
    if (params.max_bins < 2 || params.max_bins > 256) throw RangeError("max_bins must be in [2, 256]");
    cuts_.resize(cols_);
    bins_.resize(n_ * cols_);
    std::vector<double> column(n_);
    for (std::size_t f = 0; f < cols_; ++f) {
      for (std::size_t i = 0; i < n_; ++i) column[i] = x.at(rows[i], f);
      std::vector<double> sorted = column;
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> uniq = sorted;
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      auto& cuts = cuts_[f];
      if (uniq.size() <= params.max_bins) {
        cuts.assign(uniq.begin(), uniq.end());
      } else {
        for (std::size_t q = 1; q < params.max_bins; ++q) cuts.push_back(sorted[q * n_ / params.max_bins]);
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      }
      // A cut at the maximum separates nothing.
      if (!cuts.empty() && cuts.back() >= sorted.back()) cuts.pop_back();
      for (std::size_t i = 0; i < n_; ++i) {
        bins_[i * cols_ + f] =
            static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), column[i]) - cuts.begin());
      }
    }
  }

  void fit(GbtModel& model, std::vector<std::vector<TreeNode>>& trees, double& base, std::span<const double> y) {
    base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n_);
    const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
    if (constant) return;
    pred_.assign(n_, base);
    grad_.resize(n_);
    (void)model;
    for (std::size_t t = 0; t < params_.trees; ++t) {
      for (std::size_t i = 0; i < n_; ++i) grad_[i] = pred_[i] - y[i];
      std::vector<std::uint32_t> all(n_);
      std::iota(all.begin(), all.end(), 0u);
      tree_.clear();
      split_bin_.clear();
      leaf_of_.assign(n_, -1);
      std::vector<double> hist = histogram(all);
      double g = 0.0;
      for (double v : grad_) g += v;
      grow(all, std::move(hist), g, static_cast<double>(n_), 0);
      bool any_split = tree_.size() > 1;
      for (std::size_t i = 0; i < n_; ++i) pred_[i] += tree_[static_cast<std::size_t>(leaf_of_[i])].value;
      trees.push_back(tree_);
      if (!any_split && std::fabs(tree_.front().value) < 1e-15) break;
    }
  }

 private:
  std::vector<double> histogram(const std::vector<std::uint32_t>& rows) const {
    std::vector<double> hist(cols_ * stride_ * 2, 0.0);
    for (auto r : rows) {
      const std::uint8_t* b = &bins_[static_cast<std::size_t>(r) * cols_];
      const double g = grad_[r];
      for (std::size_t f = 0; f < cols_; ++f) {
        double* cell = &hist[(f * stride_ + b[f]) * 2];
        cell[0] += g;
        cell[1] += 1.0;
      }
    }
    return hist;
  }

  double leaf_value(double g, double h) const { return -g / (h + params_.lambda) * params_.learning_rate; }

  int grow(const std::vector<std::uint32_t>& rows, std::vector<double> hist, double g, double h, std::size_t depth) {
    const int index = static_cast<int>(tree_.size());
    tree_.emplace_back();
    split_bin_.push_back(-1);
    auto make_leaf = [&] {
      tree_[static_cast<std::size_t>(index)].value = leaf_value(g, h);
      for (auto r : rows) leaf_of_[r] = index;
      return index;
    };
    if (depth >= params_.max_depth || rows.size() < 2) return make_leaf();

    const double lambda = params_.lambda;
    const double parent = g * g / (h + lambda);
    double best_gain = 1e-12;
    int best_feature = -1;
    int best_bin = -1;
    for (std::size_t f = 0; f < cols_; ++f) {
      const std::size_t nb = cuts_[f].size() + 1;
      double gl = 0.0, hl = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        const double* cell = &hist[(f * stride_ + b) * 2];
        gl += cell[0];
        hl += cell[1];
        const double gr = g - gl, hr = h - hl;
        if (hl <= 0.0 || hr <= 0.0 || hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = static_cast<int>(b);
        }
      }
    }
    if (best_feature < 0) return make_leaf();

    std::vector<std::uint32_t> left, right;
    for (auto r : rows) {
      const auto bin = bins_[static_cast<std::size_t>(r) * cols_ + static_cast<std::size_t>(best_feature)];
      (bin <= best_bin ? left : right).push_back(r);
    }
    double gl = 0.0;
    for (auto r : left) gl += grad_[r];
    const double hl = static_cast<double>(left.size());

    const bool left_small = left.size() <= right.size();
    std::vector<double> small = histogram(left_small ? left : right);
    for (std::size_t i = 0; i < hist.size(); ++i) hist[i] -= small[i];
    std::vector<double> left_hist = left_small ? std::move(small) : std::move(hist);
    std::vector<double> right_hist = left_small ? std::move(hist) : std::move(small);

    TreeNode node;
    node.feature = best_feature;
    node.threshold = cuts_[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(best_bin)];
    node.gain = best_gain;
    split_bin_[static_cast<std::size_t>(index)] = best_bin;
    node.left = grow(left, std::move(left_hist), gl, hl, depth + 1);
    node.right = grow(right, std::move(right_hist), g - gl, h - hl, depth + 1);
    tree_[static_cast<std::size_t>(index)] = node;
    return index;
  }

  const GbtParams& params_;
  std::size_t n_;
  std::size_t cols_;
  std::size_t stride_;
  std::vector<std::vector<double>> cuts_;
  std::vector<std::uint8_t> bins_;
  std::vector<double> pred_;
  std::vector<double> grad_;
  std::vector<TreeNode> tree_;
  std::vector<int> split_bin_;
  std::vector<int> leaf_of_;
};

}  // namespace

GbtModel train_gbt(const FeatureMatrix& x, std::span<const std::size_t> rows, std::span<const double> labels,
                   const GbtParams& params) {
  if (rows.empty()) throw RangeError("cannot train on zero rows");
  if (rows.size() != labels.size()) throw RangeError("label count does not match row count");
  GbtModel model;
  model.params_ = params;
  model.dimension_ = x.cols;
  Trainer trainer(x, rows, params);
  trainer.fit(model, model.trees_, model.base_score_, labels);
  return model;
}

GbtModel train_gbt(const FeatureMatrix& x, std::span<const double> labels, const GbtParams& params) {
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train_gbt(x, rows, labels, params);
}

}  // namespace partsel
