#include "disent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>

#include "disent/errors.hpp"

namespace disent {
namespace {

std::vector<double> column_std(const MatrixD& codes) {
  std::vector<double> mean(codes.cols, 0.0), var(codes.cols, 0.0);
  for (std::size_t i = 0; i < codes.rows; ++i)
    for (std::size_t j = 0; j < codes.cols; ++j) mean[j] += codes(i, j);
  for (auto& m : mean) m /= static_cast<double>(codes.rows);
  for (std::size_t i = 0; i < codes.rows; ++i)
    for (std::size_t j = 0; j < codes.cols; ++j) {
      const double c = codes(i, j) - mean[j];
      var[j] += c * c;
    }
  for (auto& v : var) v = std::sqrt(v / static_cast<double>(codes.rows));
  return var;
}

// Relabels to 0..m-1 in increasing label order; returns m.
std::size_t compact_labels(std::span<const int> labels, std::vector<int>& out) {
  std::vector<int> uniq(labels.begin(), labels.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  out.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    out[i] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
  return uniq.size();
}

// numpy.percentile's default linear interpolation, on a scratch copy.
double linear_quantile(std::vector<double>& values, double q) {
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(lo), values.end());
  const double a = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<long>(lo) + 1, values.end());
  return a + (b - a) * frac;
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

template <class F>
auto tagged(const char* metric, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    std::throw_with_nested(MetricError(metric, e.what()));
  }
}

// ------------------------------------------------------------ decision tree

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;
  int label = 0;
};

class ClassificationTree {
 public:
  ClassificationTree(const MatrixD& x, std::span<const int> y, std::size_t classes,
                     std::vector<std::size_t> rows, int max_depth)
      : x_(x), y_(y), classes_(classes), importance_(x.cols, 0.0) {
    build(rows, 0, max_depth);
  }

  int predict(std::span<const double> features) const {
    int at = 0;
    while (nodes_[at].feature >= 0)
      at = features[nodes_[at].feature] <= nodes_[at].threshold ? nodes_[at].left : nodes_[at].right;
    return nodes_[at].label;
  }

  /// Impurity decrease per feature, normalized to sum to one (all zero for a stump).
  std::vector<double> importances() const {
    std::vector<double> out = importance_;
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    if (total > 0)
      for (auto& v : out) v /= total;
    return out;
  }

 private:
  static double gini(const std::vector<double>& counts, double total) {
    if (total <= 0) return 0.0;
    double s = 0;
    for (double c : counts) s += c * c;
    return 1.0 - s / (total * total);
  }

  int build(std::vector<std::size_t>& rows, int depth, int max_depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    std::vector<double> counts(classes_, 0.0);
    for (auto r : rows) counts[static_cast<std::size_t>(y_[r])] += 1.0;
    nodes_[id].label = static_cast<int>(argmax_lowest(counts));
    const double m = static_cast<double>(rows.size());
    const double impurity = gini(counts, m);
    if (depth >= max_depth || rows.size() < 2 || impurity <= 0.0) return id;

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> sorted(rows.size());
    std::vector<double> left(classes_), right(classes_);
    for (std::size_t f = 0; f < x_.cols; ++f) {
      for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {x_(rows[i], f), y_[rows[i]]};
      std::sort(sorted.begin(), sorted.end());
      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left[static_cast<std::size_t>(sorted[i].second)] += 1.0;
        right[static_cast<std::size_t>(sorted[i].second)] -= 1.0;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double ml = static_cast<double>(i + 1), mr = m - ml;
        const double gain = m * impurity - ml * gini(left, ml) - mr * gini(right, mr);
        const double threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        // Ties go to the smaller threshold so the choice ignores column order.
        if (gain > 1e-12 && (gain > best_gain || (gain == best_gain && threshold < best_threshold))) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = threshold;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows)
      (x_(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? lrows : rrows).push_back(r);
    importance_[static_cast<std::size_t>(best_feature)] += best_gain;
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(lrows, depth + 1, max_depth);
    const int r = build(rrows, depth + 1, max_depth);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const MatrixD& x_;
  std::span<const int> y_;
  std::size_t classes_;
  std::vector<double> importance_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

void MetricConfig::validate() const {
  if (fv_votes_train <= 0 || fv_votes_eval <= 0 || fv_batch <= 0 || fv_std_samples <= 0 ||
      mig_samples <= 0 || dci_trees <= 0 || dci_max_depth <= 0)
    throw ConfigError("metric counts must be positive");
  if (fv_batch < 2) throw ConfigError("fv_batch must be >= 2 to measure variance");
  if (mig_bins < 2) throw ConfigError("mig_bins must be >= 2");
  if (!(dci_test_fraction > 0 && dci_test_fraction < 1))
    throw ConfigError("dci_test_fraction must lie in (0, 1)");
  if (!(irs_diff_quantile > 0 && irs_diff_quantile < 1))
    throw ConfigError("irs_diff_quantile must lie in (0, 1)");
  if (!(prune_std_threshold >= 0)) throw ConfigError("prune_std_threshold must be >= 0");
}

void MetricReport::validate() const {
  for (double v : {factor_vae, sap, dci, irs, mig})
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("metric score outside [0, 1]");
}

// ------------------------------------------------------------------- MIG

Matrix<int> discretize_latents(const MatrixD& codes, int bins) {
  if (bins < 2) throw ConfigError("bins must be >= 2");
  Matrix<int> out(codes.rows, codes.cols);
  for (std::size_t j = 0; j < codes.cols; ++j) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < codes.rows; ++i) {
      lo = std::min(lo, codes(i, j));
      hi = std::max(hi, codes(i, j));
    }
    if (!(hi > lo)) continue;
    for (std::size_t i = 0; i < codes.rows; ++i) {
      const double b = std::floor((codes(i, j) - lo) / (hi - lo) * bins);
      out(i, j) = static_cast<int>(std::clamp(b, 0.0, static_cast<double>(bins - 1)));
    }
  }
  return out;
}

double discrete_entropy(std::span<const int> labels) {
  if (labels.empty()) throw DomainError("entropy of an empty sample");
  std::vector<int> a;
  const std::size_t m = compact_labels(labels, a);
  std::vector<std::size_t> counts(m, 0);
  for (int v : a) ++counts[static_cast<std::size_t>(v)];
  const double n = static_cast<double>(labels.size());
  double h = 0;
  for (auto c : counts) h += (static_cast<double>(c) / n) * std::log(n / static_cast<double>(c));
  return h;
}

double discrete_mutual_information(std::span<const int> a_labels, std::span<const int> b_labels) {
  if (a_labels.empty()) throw DomainError("mutual information of an empty sample");
  if (a_labels.size() != b_labels.size()) throw DomainError("label vectors differ in length");
  std::vector<int> a, b;
  const std::size_t ma = compact_labels(a_labels, a);
  const std::size_t mb = compact_labels(b_labels, b);
  std::vector<std::size_t> ca(ma, 0), cb(mb, 0);
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[static_cast<std::size_t>(a[i])];
    ++cb[static_cast<std::size_t>(b[i])];
    ++joint[{a[i], b[i]}];
  }
  const double n = static_cast<double>(a.size());
  double mi = 0;
  // Same term shape as discrete_entropy so that I(a, a) == H(a) bit for bit.
  for (const auto& [ab, c] : joint) {
    const double nab = static_cast<double>(c);
    const double ratio = (nab * n) / (static_cast<double>(ca[static_cast<std::size_t>(ab.first)]) *
                                      static_cast<double>(cb[static_cast<std::size_t>(ab.second)]));
    mi += (nab / n) * std::log(ratio);
  }
  const double bound = std::min(discrete_entropy(a_labels), discrete_entropy(b_labels));
  return std::clamp(mi, 0.0, bound);
}

double mig(const RepresentationMatrix& rep, const MetricConfig& cfg) {
  rep.validate();
  if (rep.latent_dim() < 2) throw DomainError("MIG needs at least two latent dimensions");
  const Matrix<int> binned = discretize_latents(rep.codes, cfg.mig_bins);
  std::vector<std::vector<int>> latent_cols(rep.latent_dim());
  for (std::size_t j = 0; j < rep.latent_dim(); ++j) latent_cols[j] = binned.column(j);
  double total = 0;
  for (std::size_t k = 0; k < rep.num_factors(); ++k) {
    const auto factor = rep.factors.column(k);
    const double h = discrete_entropy(factor);
    if (h <= 0) throw DomainError("factor " + std::to_string(k) + " never varies");
    std::vector<double> mi(rep.latent_dim());
    for (std::size_t j = 0; j < mi.size(); ++j) mi[j] = discrete_mutual_information(latent_cols[j], factor);
    std::partial_sort(mi.begin(), mi.begin() + 2, mi.end(), std::greater<>());
    total += (mi[0] - mi[1]) / h;
  }
  return std::clamp(total / static_cast<double>(rep.num_factors()), 0.0, 1.0);
}

// -------------------------------------------------------- FactorVAE score

MatrixD EncoderSampler::sample_codes(std::size_t n, Rng& rng) const {
  return encode_tuples(encoder_, dataset_, dataset_.sample_factors(n, rng));
}

MatrixD EncoderSampler::sample_fixed_codes(std::size_t k, std::size_t n, Rng& rng) const {
  return encode_tuples(encoder_, dataset_, dataset_.sample_fixed_factor(k, n, rng).tuples);
}

TableSampler::TableSampler(const RepresentationMatrix& rep) : rep_(rep) {
  rep.validate();
  groups_.resize(rep.num_factors());
  for (std::size_t k = 0; k < rep.num_factors(); ++k) {
    groups_[k].resize(static_cast<std::size_t>(rep.factor_space.cardinalities[k]));
    for (std::size_t i = 0; i < rep.size(); ++i)
      groups_[k][static_cast<std::size_t>(rep.factors(i, k))].push_back(i);
  }
}

MatrixD TableSampler::sample_codes(std::size_t n, Rng& rng) const {
  MatrixD out(n, rep_.latent_dim());
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = rep_.codes.row(rng.uniform_index(rep_.size()));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

MatrixD TableSampler::sample_fixed_codes(std::size_t k, std::size_t n, Rng& rng) const {
  if (k >= groups_.size()) throw DomainError("factor index out of range");
  const auto anchor = rng.uniform_index(rep_.size());
  const auto& group = groups_[k][static_cast<std::size_t>(rep_.factors(anchor, k))];
  MatrixD out(n, rep_.latent_dim());
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = rep_.codes.row(group[rng.uniform_index(group.size())]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double factor_vae_score(const FixedFactorSampler& sampler, std::span<const double> global_std,
                        const MetricConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t d = global_std.size();
  const std::size_t num_factors = sampler.num_factors();
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < d; ++j)
    if (global_std[j] >= cfg.prune_std_threshold && global_std[j] > 0) active.push_back(j);
  if (active.empty()) throw DegenerateRepresentation("every latent dimension was pruned");

  auto vote = [&](std::size_t& dim, std::size_t& factor) {
    factor = rng.uniform_index(num_factors);
    const MatrixD codes = sampler.sample_fixed_codes(factor, static_cast<std::size_t>(cfg.fv_batch), rng);
    if (codes.cols != d) throw DomainError("sampler returned the wrong latent width");
    double best = INFINITY;
    for (auto j : active) {
      double mean = 0, sq = 0;
      for (std::size_t i = 0; i < codes.rows; ++i) mean += codes(i, j) / global_std[j];
      mean /= static_cast<double>(codes.rows);
      for (std::size_t i = 0; i < codes.rows; ++i) {
        const double c = codes(i, j) / global_std[j] - mean;
        sq += c * c;
      }
      const double var = sq / static_cast<double>(codes.rows - 1);
      if (var < best) {
        best = var;
        dim = j;
      }
    }
  };

  Matrix<double> counts(d, num_factors);
  for (int v = 0; v < cfg.fv_votes_train; ++v) {
    std::size_t dim = 0, factor = 0;
    vote(dim, factor);
    counts(dim, factor) += 1.0;
  }
  std::vector<std::size_t> predict(d);
  for (std::size_t j = 0; j < d; ++j) predict[j] = argmax_lowest(counts.row(j));
  int correct = 0;
  for (int v = 0; v < cfg.fv_votes_eval; ++v) {
    std::size_t dim = 0, factor = 0;
    vote(dim, factor);
    if (predict[dim] == factor) ++correct;
  }
  return static_cast<double>(correct) / cfg.fv_votes_eval;
}

double factor_vae_score(const FixedFactorSampler& sampler, const MetricConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto std_dev = column_std(sampler.sample_codes(static_cast<std::size_t>(cfg.fv_std_samples), rng));
  return factor_vae_score(sampler, std_dev, cfg, rng);
}

// ------------------------------------------------------------------- SAP

double sap(const RepresentationMatrix& rep, const MetricConfig&) {
  rep.validate();
  const std::size_t d = rep.latent_dim(), n = rep.size();
  if (d < 2) throw DomainError("SAP needs at least two latent dimensions");
  // Factor k is split at the middle of its value range: v >= card/2 is the positive class.
  std::vector<std::vector<char>> labels(rep.num_factors(), std::vector<char>(n));
  std::vector<double> positives(rep.num_factors(), 0.0);
  for (std::size_t k = 0; k < rep.num_factors(); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      labels[k][i] = 2 * rep.factors(i, k) >= rep.factor_space.cardinalities[k];
      positives[k] += labels[k][i];
    }

  Matrix<double> score(d, rep.num_factors(), 0.5);
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rep.codes(a, j) < rep.codes(b, j); });
    for (std::size_t k = 0; k < rep.num_factors(); ++k) {
      const double pos = positives[k], neg = static_cast<double>(n) - pos;
      if (pos == 0 || neg == 0) continue;
      // Predict positive above the threshold; the flipped rule scores 1 - ba.
      double pos_below = 0, neg_below = 0, best = 0.5;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        (labels[k][order[i]] ? pos_below : neg_below) += 1.0;
        if (rep.codes(order[i], j) == rep.codes(order[i + 1], j)) continue;
        const double ba = 0.5 * ((pos - pos_below) / pos + neg_below / neg);
        best = std::max(best, std::max(ba, 1.0 - ba));
      }
      score(j, k) = best;
    }
  }
  double total = 0;
  for (std::size_t k = 0; k < rep.num_factors(); ++k) {
    auto col = score.column(k);
    std::partial_sort(col.begin(), col.begin() + 2, col.end(), std::greater<>());
    total += col[0] - col[1];
  }
  return std::clamp(total / static_cast<double>(rep.num_factors()), 0.0, 1.0);
}

// ------------------------------------------------------------------- DCI

DciScores dci_from_importance(const MatrixD& importance) {
  const std::size_t d = importance.rows, num_factors = importance.cols;
  double total = 0;
  for (double v : importance.data) {
    if (!(v >= 0)) throw DomainError("importance entries must be non-negative");
    total += v;
  }
  if (total <= 0) throw DegenerateRepresentation("importance matrix is all zero");

  auto normalized_entropy = [](std::span<const double> p, double sum, std::size_t base) {
    if (base < 2) return 0.0;
    double h = 0;
    for (double v : p)
      if (v > 0) h -= (v / sum) * std::log(v / sum);
    return h / std::log(static_cast<double>(base));
  };

  DciScores out;
  for (std::size_t j = 0; j < d; ++j) {
    const auto row = importance.row(j);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    if (s <= 0) continue;
    out.disentanglement += (s / total) * (1.0 - normalized_entropy(row, s, num_factors));
  }
  for (std::size_t k = 0; k < num_factors; ++k) {
    const auto col = importance.column(k);
    const double s = std::accumulate(col.begin(), col.end(), 0.0);
    if (s <= 0) continue;
    out.completeness += (s / total) * (1.0 - normalized_entropy(col, s, d));
  }
  out.disentanglement = std::clamp(out.disentanglement, 0.0, 1.0);
  out.completeness = std::clamp(out.completeness, 0.0, 1.0);
  return out;
}

DciScores dci(const RepresentationMatrix& rep, const MetricConfig& cfg, Rng& rng) {
  cfg.validate();
  rep.validate();
  const std::size_t n = rep.size();
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.dci_test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) throw DomainError("DCI train/test split leaves an empty side");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm.begin(), perm.end());
  const std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<long>(n_test));
  const std::vector<std::size_t> train(perm.begin() + static_cast<long>(n_test), perm.end());

  MatrixD importance(rep.latent_dim(), rep.num_factors());
  double accuracy = 0;
  for (std::size_t k = 0; k < rep.num_factors(); ++k) {
    const auto y = rep.factors.column(k);
    const auto classes = static_cast<std::size_t>(rep.factor_space.cardinalities[k]);
    std::vector<ClassificationTree> forest;
    forest.reserve(static_cast<std::size_t>(cfg.dci_trees));
    for (int t = 0; t < cfg.dci_trees; ++t) {
      std::vector<std::size_t> bag(train.size());
      for (auto& r : bag) r = train[rng.uniform_index(train.size())];
      forest.emplace_back(rep.codes, y, classes, std::move(bag), cfg.dci_max_depth);
      const auto imp = forest.back().importances();
      for (std::size_t j = 0; j < imp.size(); ++j) importance(j, k) += imp[j] / cfg.dci_trees;
    }
    std::size_t correct = 0;
    std::vector<double> votes(classes);
    for (auto r : test) {
      std::fill(votes.begin(), votes.end(), 0.0);
      for (const auto& tree : forest) votes[static_cast<std::size_t>(tree.predict(rep.codes.row(r)))] += 1.0;
      if (static_cast<int>(argmax_lowest(votes)) == y[r]) ++correct;
    }
    accuracy += static_cast<double>(correct) / static_cast<double>(test.size());
  }
  DciScores out = dci_from_importance(importance);
  out.informativeness = accuracy / static_cast<double>(rep.num_factors());
  return out;
}

// ------------------------------------------------------------------- IRS

double irs(const RepresentationMatrix& rep, const MetricConfig& cfg) {
  cfg.validate();
  rep.validate();
  const std::size_t d = rep.latent_dim(), n = rep.size();
  std::vector<double> mean(d, 0.0), variance(d, 0.0), max_dev(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += rep.codes(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = rep.codes(i, j) - mean[j];
      variance[j] += c * c / static_cast<double>(n);
      max_dev[j] = std::max(max_dev[j], std::abs(c));
    }
  const double total_variance = std::accumulate(variance.begin(), variance.end(), 0.0);
  if (!(total_variance > 0)) throw DegenerateRepresentation("representation has zero variance");

  // robustness(j, k): 1 - (mean over realizations of factor k of the quantile
  // deviation of dim j) / max_dev[j].
  Matrix<double> robustness(d, rep.num_factors());
  std::vector<double> scratch;
  for (std::size_t k = 0; k < rep.num_factors(); ++k) {
    std::map<int, std::vector<std::size_t>> realizations;
    for (std::size_t i = 0; i < n; ++i) realizations[rep.factors(i, k)].push_back(i);
    if (realizations.size() < 2)
      throw DomainError("factor " + std::to_string(k) + " has fewer than two realizations");
    std::vector<double> deviation(d, 0.0);
    for (const auto& [value, rows] : realizations) {
      for (std::size_t j = 0; j < d; ++j) {
        double loc = 0;
        for (auto r : rows) loc += rep.codes(r, j);
        loc /= static_cast<double>(rows.size());
        scratch.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) scratch[i] = std::abs(rep.codes(rows[i], j) - loc);
        deviation[j] += linear_quantile(scratch, cfg.irs_diff_quantile);
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (max_dev[j] <= 0) continue;
      const double dev = deviation[j] / static_cast<double>(realizations.size());
      robustness(j, k) = std::clamp(1.0 - dev / max_dev[j], 0.0, 1.0);
    }
  }
  double score = 0;
  for (std::size_t j = 0; j < d; ++j) {
    if (variance[j] <= 0) continue;
    const auto row = robustness.row(j);
    score += variance[j] / total_variance * *std::max_element(row.begin(), row.end());
  }
  return std::clamp(score, 0.0, 1.0);
}

// ------------------------------------------------------------ evaluate_all

MetricReport evaluate_all(const Encoder& encoder, const GroundTruthDataset& dataset,
                          const MetricConfig& cfg, Rng& rng) {
  cfg.validate();
  const RepresentationMatrix rep =
      encode_dataset(encoder, dataset, static_cast<std::size_t>(cfg.mig_samples), rng);
  MetricReport report;
  const EncoderSampler sampler(encoder, dataset);
  const auto std_dev = column_std(rep.codes);
  report.factor_vae = tagged("factor_vae", [&] { return factor_vae_score(sampler, std_dev, cfg, rng); });
  report.mig = tagged("mig", [&] { return mig(rep, cfg); });
  report.sap = tagged("sap", [&] { return sap(rep, cfg); });
  report.dci_detail = tagged("dci", [&] { return dci(rep, cfg, rng); });
  report.dci = report.dci_detail.disentanglement;
  report.irs = tagged("irs", [&] { return irs(rep, cfg); });
  return report;
}

MetricReport evaluate_representation(const RepresentationMatrix& rep, const MetricConfig& cfg,
                                     Rng& rng) {
  cfg.validate();
  rep.validate();
  MetricReport report;
  const auto std_dev = column_std(rep.codes);
  report.factor_vae = tagged("factor_vae", [&] {
    const TableSampler sampler(rep);
    return factor_vae_score(sampler, std_dev, cfg, rng);
  });
  report.mig = tagged("mig", [&] { return mig(rep, cfg); });
  report.sap = tagged("sap", [&] { return sap(rep, cfg); });
  report.dci_detail = tagged("dci", [&] { return dci(rep, cfg, rng); });
  report.dci = report.dci_detail.disentanglement;
  report.irs = tagged("irs", [&] { return irs(rep, cfg); });
  return report;
}

}  // namespace disent
