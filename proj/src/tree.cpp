#include "pricecast/tree.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pricecast/error.hpp"

namespace pricecast {

void HyperParams::validate() const {
  if (n_estimators < 1) throw DomainError("n_estimators must be >= 1");
  if (min_samples_split < 2) throw DomainError("min_samples_split must be >= 2");
  if (min_samples_leaf < 1) throw DomainError("min_samples_leaf must be >= 1");
}

void to_json(nlohmann::json& j, const HyperParams& p) {
  j = {{"n_estimators", p.n_estimators},
       {"max_features", p.max_features == MaxFeatures::sqrt ? "sqrt" : "auto"},
       {"max_depth", p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr)},
       {"min_samples_split", p.min_samples_split},
       {"min_samples_leaf", p.min_samples_leaf},
       {"bootstrap", p.bootstrap}};
}

void from_json(const nlohmann::json& j, HyperParams& p) {
  p.n_estimators = j.at("n_estimators");
  const std::string mf = j.at("max_features");
  if (mf == "auto") {
    p.max_features = MaxFeatures::automatic;
  } else if (mf == "sqrt") {
    p.max_features = MaxFeatures::sqrt;
  } else {
    throw SchemaError(fmt::format("unknown max_features '{}'", mf));
  }
  const auto& depth = j.at("max_depth");
  p.max_depth = depth.is_null() ? std::nullopt : std::optional<std::size_t>(depth.get<std::size_t>());
  p.min_samples_split = j.at("min_samples_split");
  p.min_samples_leaf = j.at("min_samples_leaf");
  p.bootstrap = j.at("bootstrap");
}

std::size_t features_per_split(MaxFeatures mode, Task task, std::size_t n_features) {
  if (n_features == 0) return 0;
  if (mode == MaxFeatures::automatic && task == Task::regression) return n_features;
  const auto m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))));
  return std::clamp<std::size_t>(m, 1, n_features);
}

std::vector<std::size_t> FeatureSampler::draw(std::size_t n_features) {
  std::vector<std::size_t> all(n_features);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const std::size_t m = std::min(per_split_, n_features);
  if (m == n_features) return all;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng_->uniform_index(n_features - i);
    std::swap(all[i], all[j]);
  }
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

const TreeNode& Tree::leaf_for(std::span<const double> row) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) {
    node = &nodes[row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right];
  }
  return *node;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> depth(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, depth[i]);
    if (!nodes[i].is_leaf()) {
      depth[nodes[i].left] = depth[i] + 1;
      depth[nodes[i].right] = depth[i] + 1;
    }
  }
  return best;
}

// Node layout in JSON: internal [feature, threshold, left, right, weight],
// regression leaf [value, weight], classification leaf [[counts...], weight].
void to_json(nlohmann::json& j, const Tree& t) {
  j = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    if (!n.is_leaf()) {
      j.push_back({n.feature, n.threshold, n.left, n.right, n.weight});
    } else if (!n.class_counts.empty()) {
      j.push_back({n.class_counts, n.weight});
    } else {
      j.push_back({n.value, n.weight});
    }
  }
}

void from_json(const nlohmann::json& j, Tree& t) {
  t.nodes.clear();
  for (const auto& e : j) {
    TreeNode n;
    if (e.size() == 5) {
      n.feature = e[0];
      n.threshold = e[1];
      n.left = e[2];
      n.right = e[3];
      n.weight = e[4];
    } else if (e.size() == 2 && e[0].is_array()) {
      n.class_counts = e[0].get<std::vector<double>>();
      n.weight = e[1];
    } else if (e.size() == 2) {
      n.value = e[0];
      n.weight = e[1];
    } else {
      throw SchemaError("malformed tree node");
    }
    t.nodes.push_back(std::move(n));
  }
  for (const auto& n : t.nodes) {
    if (!n.is_leaf() && (n.left >= t.nodes.size() || n.right >= t.nodes.size())) {
      throw SchemaError("tree node child index out of range");
    }
  }
  if (t.nodes.empty()) throw SchemaError("tree has no nodes");
}

namespace detail {

std::size_t infer_classes(std::span<const double> y) {
  double top = 0.0;
  for (double v : y) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e6) {
      throw DomainError(fmt::format("classification target must be a class index, got {}", v));
    }
    top = std::max(top, v);
  }
  return static_cast<std::size_t>(top) + 1;
}

std::vector<std::vector<std::uint32_t>> sort_positions(const Matrix& x, std::span<const std::size_t> rows) {
  std::vector<std::vector<std::uint32_t>> sorted(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& order = sorted[f];
    order.resize(rows.size());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(rows[a], f) < x(rows[b], f); });
  }
  return sorted;
}

namespace {

struct NodeStats {
  double weight = 0.0;
  double mean = 0.0;                // regression
  double sse = 0.0;                 // regression: sum of w * (y - mean)^2
  std::vector<double> class_weight;  // classification
  double impurity = 0.0;            // variance or Gini
  bool pure = false;
};

class Grower {
 public:
  Grower(const Matrix& x, std::span<const double> y, std::size_t n_classes, const HyperParams& params, Task task,
         TrainingBag bag, FeatureSampler& sampler, std::vector<double>* importances)
      : x_(x),
        y_(y),
        n_classes_(n_classes),
        params_(params),
        task_(task),
        bag_(std::move(bag)),
        sampler_(sampler),
        importances_(importances),
        goes_left_(bag_.rows.size()),
        buffer_(bag_.rows.size()) {
    const std::size_t n = bag_.rows.size();
    cols_.resize(x_.cols() * n);
    yb_.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
      const auto row = x_.row(bag_.rows[pos]);
      for (std::size_t f = 0; f < row.size(); ++f) cols_[f * n + pos] = row[f];
      yb_[pos] = y_[bag_.rows[pos]];
    }
    members_.resize(n);
    wd_.resize(n);
    wdd_.resize(n);
    std::iota(members_.begin(), members_.end(), std::uint32_t{0});
    if (task_ == Task::classification) {
      labels_.resize(bag_.rows.size());
      for (std::size_t p = 0; p < bag_.rows.size(); ++p) labels_[p] = static_cast<std::size_t>(yb_[p]);
    }
  }

  Tree grow() {
    Tree tree;
    tree.nodes.emplace_back();
    struct Work {
      std::uint32_t node;
      std::size_t begin, end, depth;
    };
    const std::size_t p = x_.cols();
    // constant_[node * p + f] is set once feature f is known constant within the node;
    // such features are neither searched nor kept sorted below that node.
    constant_.assign(p, 0);
    std::vector<Work> stack{{0, 0, bag_.rows.size(), 0}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      const NodeStats stats = node_stats(w.begin, w.end);
      {
        TreeNode& node = tree.nodes[w.node];
        node.weight = stats.weight;
        if (task_ == Task::regression) {
          node.value = stats.mean;
        } else {
          node.class_counts = stats.class_weight;
        }
      }
      const bool depth_ok = !params_.max_depth || w.depth < *params_.max_depth;
      const auto min_leaf = static_cast<double>(params_.min_samples_leaf);
      if (!depth_ok || stats.pure || stats.weight < static_cast<double>(params_.min_samples_split) ||
          stats.weight < 2.0 * min_leaf) {
        continue;
      }
      std::uint8_t* flags = constant_.data() + static_cast<std::size_t>(w.node) * p;
      for (std::size_t f = 0; f < p; ++f) {
        if (flags[f]) continue;
        const auto& order = bag_.sorted[f];
        const double* column = cols_.data() + f * bag_.rows.size();
        if (column[order[w.begin]] == column[order[w.end - 1]]) flags[f] = 1;
      }
      const auto features = sampler_.draw(p);
      const auto split = find_split(w.begin, w.end, features, stats, flags);
      if (!split) continue;

      const std::size_t mid = partition(w.begin, w.end, *split, flags);
      const auto left = static_cast<std::uint32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      constant_.resize(tree.nodes.size() * p);
      flags = constant_.data() + static_cast<std::size_t>(w.node) * p;
      std::copy(flags, flags + p, constant_.data() + static_cast<std::size_t>(left) * p);
      std::copy(flags, flags + p, constant_.data() + static_cast<std::size_t>(left + 1) * p);
      TreeNode& node = tree.nodes[w.node];
      node.feature = static_cast<std::int32_t>(split->feature);
      node.threshold = split->threshold;
      node.left = left;
      node.right = left + 1;
      // Only leaves carry predictions; this keeps serialized trees equal to fitted ones.
      node.value = 0.0;
      node.class_counts.clear();
      if (importances_) (*importances_)[split->feature] += stats.weight * split->gain;
      stack.push_back({left + 1, mid, w.end, w.depth + 1});
      stack.push_back({left, w.begin, mid, w.depth + 1});
    }
    return tree;
  }

  std::optional<Split> root_split(std::span<const std::size_t> features) {
    const NodeStats stats = node_stats(0, bag_.rows.size());
    if (stats.pure) return std::nullopt;
    return find_split(0, bag_.rows.size(), features, stats, nullptr);
  }

 private:
  double value(std::uint32_t pos, std::size_t f) const { return cols_[f * bag_.rows.size() + pos]; }

  NodeStats node_stats(std::size_t begin, std::size_t end) const {
    NodeStats s;
    const auto& order = members_;
    if (task_ == Task::regression) {
      double sum = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t p = order[i];
        s.weight += bag_.weights[p];
        sum += bag_.weights[p] * yb_[p];
      }
      s.mean = sum / s.weight;
      const double first = yb_[order[begin]];
      s.pure = true;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t p = order[i];
        const double yv = yb_[p];
        const double d = yv - s.mean;
        s.sse += bag_.weights[p] * d * d;
        if (yv != first) s.pure = false;
      }
      s.impurity = s.sse / s.weight;
    } else {
      s.class_weight.assign(n_classes_, 0.0);
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t p = order[i];
        s.weight += bag_.weights[p];
        s.class_weight[labels_[p]] += bag_.weights[p];
      }
      double sq = 0.0;
      std::size_t nonzero = 0;
      for (double c : s.class_weight) {
        sq += c * c;
        if (c > 0) ++nonzero;
      }
      s.impurity = 1.0 - sq / (s.weight * s.weight);
      s.pure = nonzero <= 1;
    }
    return s;
  }

  std::optional<Split> find_split(std::size_t begin, std::size_t end, std::span<const std::size_t> features,
                                  const NodeStats& parent, const std::uint8_t* constant) const {
    return task_ == Task::regression ? find_regression_split(begin, end, features, parent, constant)
                                     : find_gini_split(begin, end, features, parent, constant);
  }

  // Keeps `candidate` if it beats the best so far by more than the tolerance.
  static void consider(std::optional<Split>& best, double& best_gain, double tolerance, std::size_t f, double a,
                       double b, double gain) {
    if (gain > best_gain + (best ? tolerance : 0.0)) {
      double threshold = a + (b - a) / 2.0;
      if (!(threshold < b)) threshold = a;
      best = Split{f, threshold, gain};
      best_gain = gain;
    }
  }

  std::optional<Split> find_regression_split(std::size_t begin, std::size_t end, std::span<const std::size_t> features,
                                             const NodeStats& parent, const std::uint8_t* constant) const {
    const double min_leaf = static_cast<double>(params_.min_samples_leaf);
    const double tolerance = 1e-12 * parent.impurity;
    std::optional<Split> best;
    double best_gain = tolerance;

    // Centered weighted targets of the node, by bag position.
    double sum_all = 0.0, sq_all = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t p = members_[i];
      const double wd = bag_.weights[p] * (yb_[p] - parent.mean);
      wd_[p] = wd;
      wdd_[p] = wd * (yb_[p] - parent.mean);
      sum_all += wd_[p];
      sq_all += wdd_[p];
    }

    const double* weights = bag_.weights.data();
    for (std::size_t f : features) {
      if (constant && constant[f]) continue;
      const std::uint32_t* order = bag_.sorted[f].data();
      const double* column = cols_.data() + f * bag_.rows.size();
      double wl = 0.0, sum_l = 0.0, sq_l = 0.0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const std::uint32_t p = order[i];
        wl += weights[p];
        sum_l += wd_[p];
        sq_l += wdd_[p];
        const double a = column[p];
        const double b = column[order[i + 1]];
        if (a == b) continue;
        const double wr = parent.weight - wl;
        if (wl < min_leaf || wr < min_leaf) continue;
        const double sum_r = sum_all - sum_l;
        const double sse_l = sq_l - sum_l * sum_l / wl;
        const double sse_r = (sq_all - sq_l) - sum_r * sum_r / wr;
        consider(best, best_gain, tolerance, f, a, b, (parent.sse - sse_l - sse_r) / parent.weight);
      }
    }
    return best;
  }

  std::optional<Split> find_gini_split(std::size_t begin, std::size_t end, std::span<const std::size_t> features,
                                       const NodeStats& parent, const std::uint8_t* constant) const {
    const double min_leaf = static_cast<double>(params_.min_samples_leaf);
    const double tolerance = 1e-12 * parent.impurity;
    std::optional<Split> best;
    double best_gain = tolerance;
    std::vector<double> left_classes(n_classes_);
    double parent_sq_counts = 0.0;
    for (double c : parent.class_weight) parent_sq_counts += c * c;

    for (std::size_t f : features) {
      if (constant && constant[f]) continue;
      const auto& order = bag_.sorted[f];
      const double* column = cols_.data() + f * bag_.rows.size();
      std::fill(left_classes.begin(), left_classes.end(), 0.0);
      double wl = 0.0;
      double left_sq_counts = 0.0;  // sum over classes of left weight^2
      double right_sq_counts = parent_sq_counts;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const std::uint32_t p = order[i];
        const double w = bag_.weights[p];
        wl += w;
        const std::size_t c = labels_[p];
        const double before_l = left_classes[c];
        const double before_r = parent.class_weight[c] - before_l;
        left_classes[c] += w;
        left_sq_counts += left_classes[c] * left_classes[c] - before_l * before_l;
        const double after_r = before_r - w;
        right_sq_counts += after_r * after_r - before_r * before_r;
        const double a = column[p];
        const double b = column[order[i + 1]];
        if (a == b) continue;
        const double wr = parent.weight - wl;
        if (wl < min_leaf || wr < min_leaf) continue;
        const double gini_l = 1.0 - left_sq_counts / (wl * wl);
        const double gini_r = 1.0 - right_sq_counts / (wr * wr);
        consider(best, best_gain, tolerance, f, a, b,
                 parent.impurity - (wl / parent.weight) * gini_l - (wr / parent.weight) * gini_r);
      }
    }
    return best;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const Split& split, const std::uint8_t* constant) {
    const auto& key = bag_.sorted[split.feature];
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t p = key[i];
      goes_left_[p] = value(p, split.feature) <= split.threshold;
      n_left += goes_left_[p];
    }
    auto stable_partition = [&](std::vector<std::uint32_t>& order) {
      std::size_t l = begin, r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t p = order[i];
        const bool left = goes_left_[p];
        order[l] = p;
        buffer_[r] = p;
        l += left;
        r += !left;
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r), order.begin() + static_cast<std::ptrdiff_t>(l));
    };
    stable_partition(members_);
    for (std::size_t f = 0; f < bag_.sorted.size(); ++f) {
      if (!constant[f]) stable_partition(bag_.sorted[f]);
    }
    return begin + n_left;
  }

  const Matrix& x_;
  std::span<const double> y_;
  std::size_t n_classes_;
  const HyperParams& params_;
  Task task_;
  TrainingBag bag_;
  FeatureSampler& sampler_;
  std::vector<double>* importances_;
  std::vector<std::size_t> labels_;
  std::vector<char> goes_left_;
  std::vector<std::uint32_t> buffer_;
  std::vector<double> cols_;  // bag values, column-major
  std::vector<double> yb_;    // bag targets
  std::vector<std::uint32_t> members_;  // bag positions, partitioned with the nodes
  mutable std::vector<double> wd_;      // w * (y - node mean), by bag position
  mutable std::vector<double> wdd_;     // w * (y - node mean)^2
  std::vector<std::uint8_t> constant_;
};

}  // namespace

Tree grow_tree(const Matrix& x, std::span<const double> y, std::size_t n_classes, const HyperParams& params,
               Task task, TrainingBag bag, FeatureSampler& sampler, std::vector<double>* importances) {
  if (bag.rows.empty()) throw NumericError("fit_tree: no training rows");
  Grower grower(x, y, n_classes, params, task, std::move(bag), sampler, importances);
  return grower.grow();
}

}  // namespace detail

std::optional<Split> best_split(const Matrix& x, std::span<const double> y, std::span<const std::size_t> features,
                                Task task, std::size_t min_samples_leaf) {
  if (y.size() != x.rows()) throw DomainError("best_split: target length does not match row count");
  if (x.rows() < 2) return std::nullopt;
  for (std::size_t f : features) {
    if (f >= x.cols()) throw DomainError(fmt::format("best_split: feature {} out of range", f));
  }
  std::vector<std::size_t> sorted_features(features.begin(), features.end());
  std::sort(sorted_features.begin(), sorted_features.end());

  detail::TrainingBag bag;
  bag.rows.resize(x.rows());
  std::iota(bag.rows.begin(), bag.rows.end(), std::size_t{0});
  bag.weights.assign(x.rows(), 1.0);
  bag.sorted = detail::sort_positions(x, bag.rows);

  HyperParams params;
  params.min_samples_leaf = std::max<std::size_t>(min_samples_leaf, 1);
  Rng unused(0);
  FeatureSampler sampler(unused, x.cols());
  const std::size_t classes = task == Task::classification ? detail::infer_classes(y) : 0;
  detail::Grower grower(x, y, classes, params, task, std::move(bag), sampler, nullptr);
  return grower.root_split(sorted_features);
}

Tree fit_tree(const Matrix& x, std::span<const double> y, const HyperParams& params, Task task,
              FeatureSampler& sampler, const TreeFitOptions& options) {
  params.validate();
  if (x.rows() == 0) throw NumericError("fit_tree: no training rows");
  if (y.size() != x.rows()) throw DomainError("fit_tree: target length does not match row count");
  if (!options.weights.empty() && options.weights.size() != x.rows()) {
    throw DomainError("fit_tree: weight length does not match row count");
  }
  std::size_t classes = 0;
  if (task == Task::classification) {
    classes = std::max(options.n_classes, detail::infer_classes(y));
  }
  detail::TrainingBag bag;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double w = options.weights.empty() ? 1.0 : options.weights[r];
    if (w < 0) throw DomainError("fit_tree: negative weight");
    if (w == 0) continue;
    bag.rows.push_back(r);
    bag.weights.push_back(w);
  }
  bag.sorted = detail::sort_positions(x, bag.rows);
  if (options.importances) options.importances->resize(x.cols(), 0.0);
  return detail::grow_tree(x, y, classes, params, task, std::move(bag), sampler, options.importances);
}

}  // namespace pricecast
