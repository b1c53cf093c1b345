#include "rankjoint/amce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "rankjoint/error.hpp"
#include "rankjoint/stats.hpp"

namespace rankjoint {

std::string_view to_string(VcovType v) {
  switch (v) {
    case VcovType::CR0: return "CR0";
    case VcovType::CR1: return "CR1";
    case VcovType::CR2: return "CR2";
  }
  return "?";
}

std::string_view to_string(OutcomeKind k) {
  return k == OutcomeKind::PairChoice ? "pair-choice" : "normalized-rank";
}

std::string_view to_string(ClusterBy c) {
  switch (c) {
    case ClusterBy::Subject: return "subject";
    case ClusterBy::Task: return "task";
    case ClusterBy::None: return "none";
  }
  return "?";
}

VcovType parse_vcov(std::string_view text) {
  if (text == "cr0" || text == "CR0") return VcovType::CR0;
  if (text == "cr1" || text == "CR1") return VcovType::CR1;
  if (text == "cr2" || text == "CR2") return VcovType::CR2;
  throw UsageError("unknown vcov type '" + std::string(text) + "'");
}

OutcomeKind parse_outcome(std::string_view text) {
  if (text == "pair-choice" || text == "pairs") return OutcomeKind::PairChoice;
  if (text == "normalized-rank" || text == "rank") return OutcomeKind::NormalizedRank;
  throw UsageError("unknown outcome kind '" + std::string(text) + "'");
}

ClusterBy parse_cluster(std::string_view text) {
  if (text == "subject") return ClusterBy::Subject;
  if (text == "task") return ClusterBy::Task;
  if (text == "none") return ClusterBy::None;
  throw UsageError("unknown cluster level '" + std::string(text) + "'");
}

std::vector<CoefficientLabel> design_labels(const AttributeSchema& schema) {
  std::vector<CoefficientLabel> labels{{kInterceptLabel, ""}};
  for (const auto& a : schema.attributes()) {
    for (std::size_t l = 0; l < a.levels.size(); ++l) {
      if (l != a.baseline) labels.push_back({a.name, a.levels[l]});
    }
  }
  return labels;
}

namespace {

// Assigns dense ids in order of first appearance.
class ClusterIndex {
 public:
  std::uint32_t operator()(std::uint64_t key) {
    auto [it, inserted] = ids_.try_emplace(key, static_cast<std::uint32_t>(ids_.size()));
    return it->second;
  }
  std::size_t size() const { return ids_.size(); }

 private:
  std::unordered_map<std::uint64_t, std::uint32_t> ids_;
};

std::uint64_t cluster_key(ClusterBy by, std::uint32_t subject, std::uint32_t task,
                          std::size_t row) {
  switch (by) {
    case ClusterBy::Subject: return subject;
    case ClusterBy::Task: return (static_cast<std::uint64_t>(subject) << 32) | task;
    case ClusterBy::None: return row;
  }
  return row;
}

}  // namespace

DesignMatrix encode_design(std::span<const LevelMap> rows, const AttributeSchema& schema) {
  std::vector<int> codes(rows.size() * schema.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t a = 0; a < schema.size(); ++a) {
      const auto& name = schema[a].name;
      const auto it = rows[i].find(name);
      if (it == rows[i].end()) {
        throw DataError("row " + std::to_string(i + 1) + ": missing attribute '" + name + "'");
      }
      const int code = schema[a].level_index(it->second);
      if (code < 0) {
        throw DataError("row " + std::to_string(i + 1) + ": attribute '" + name +
                        "' has unknown level '" + it->second + "'");
      }
      codes[i * schema.size() + a] = code;
    }
  }
  DesignMatrix dm;
  dm.X = encode_levels(schema, rows.size(), [&](std::size_t i) {
    return std::span<const int>(codes.data() + i * schema.size(), schema.size());
  });
  dm.y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  dm.cluster.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) dm.cluster[i] = static_cast<std::uint32_t>(i);
  dm.n_clusters = rows.size();
  dm.labels = design_labels(schema);
  return dm;
}

DesignMatrix design_from_pairs(const PairDataset& pairs, ClusterBy cluster) {
  DesignMatrix dm;
  const auto n = pairs.size();
  dm.X = encode_levels(pairs.schema(), n, [&](std::size_t i) { return pairs.focal_levels(i); });
  dm.y.resize(static_cast<Eigen::Index>(n));
  dm.cluster.resize(n);
  ClusterIndex index;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = pairs.rows()[i];
    dm.y(static_cast<Eigen::Index>(i)) = r.y;
    dm.cluster[i] = index(cluster_key(cluster, r.subject, r.task, i));
  }
  dm.n_clusters = index.size();
  dm.labels = design_labels(pairs.schema());
  return dm;
}

DesignMatrix design_from_normalized_rank(const ConjointDataset& d, ClusterBy cluster) {
  const auto rows = normalized_rank_dataset(d);
  std::vector<int> task_size(d.size());
  for (const auto& v : group_tasks(d)) {
    for (auto i : v.rows) task_size[i] = static_cast<int>(v.K());
  }
  DesignMatrix dm;
  dm.X = encode_levels(d.schema(), rows.size(),
                       [&](std::size_t i) { return d.levels(rows[i].row); });
  dm.y.resize(static_cast<Eigen::Index>(rows.size()));
  dm.weights.resize(static_cast<Eigen::Index>(rows.size()));
  dm.cluster.resize(rows.size());
  ClusterIndex index;
  bool uniform = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    dm.y(static_cast<Eigen::Index>(i)) = r.value;
    dm.weights(static_cast<Eigen::Index>(i)) = task_size[r.row] - 1;
    uniform = uniform && task_size[r.row] == task_size[rows.front().row];
    dm.cluster[i] = index(cluster_key(cluster, r.subject, r.task, i));
  }
  // A constant weight does not change the estimator; drop it so the
  // covariance is computed on the unscaled system.
  if (uniform) dm.weights.resize(0);
  dm.n_clusters = index.size();
  dm.labels = design_labels(d.schema());
  return dm;
}

DesignMatrix design_from_pair_means(const PairDataset& pairs, ClusterBy cluster) {
  const auto& d = pairs.source();
  std::vector<double> sum(d.size(), 0.0);
  std::vector<int> count(d.size(), 0);
  for (const auto& r : pairs.rows()) {
    sum[r.focal_row] += r.y;
    ++count[r.focal_row];
  }
  std::vector<std::size_t> profiles;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (count[i] > 0) profiles.push_back(i);
  }
  DesignMatrix dm;
  dm.X = encode_levels(d.schema(), profiles.size(),
                       [&](std::size_t i) { return d.levels(profiles[i]); });
  const auto n = static_cast<Eigen::Index>(profiles.size());
  dm.y.resize(n);
  dm.weights.resize(n);
  dm.cluster.resize(profiles.size());
  ClusterIndex index;
  bool uniform = true;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto row = profiles[i];
    dm.y(static_cast<Eigen::Index>(i)) = sum[row] / count[row];
    dm.weights(static_cast<Eigen::Index>(i)) = count[row];
    uniform = uniform && count[row] == count[profiles.front()];
    dm.cluster[i] = index(cluster_key(cluster, d.row(row).subject, d.row(row).task, i));
  }
  if (uniform) dm.weights.resize(0);
  dm.n_clusters = index.size();
  dm.labels = design_labels(d.schema());
  return dm;
}

DesignMatrix design_from_choices(const ConjointDataset& d, ClusterBy cluster) {
  if (d.mode() != ResponseMode::ForcedChoice) {
    throw DataError("expected a forced-choice dataset");
  }
  std::vector<std::size_t> order;
  order.reserve(d.size());
  for (const auto& v : group_tasks(d)) order.insert(order.end(), v.rows.begin(), v.rows.end());
  DesignMatrix dm;
  dm.X = encode_levels(d.schema(), order.size(),
                       [&](std::size_t i) { return d.levels(order[i]); });
  dm.y.resize(static_cast<Eigen::Index>(order.size()));
  dm.cluster.resize(order.size());
  ClusterIndex index;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = d.row(order[i]);
    dm.y(static_cast<Eigen::Index>(i)) = r.outcome;
    dm.cluster[i] = index(cluster_key(cluster, r.subject, r.task, i));
  }
  dm.n_clusters = index.size();
  dm.labels = design_labels(d.schema());
  return dm;
}

OlsFit fit_ols(const DesignMatrix& dm) {
  const auto n = dm.X.rows();
  const auto p = dm.X.cols();
  if (dm.y.size() != n) throw UsageError("fit_ols: X and y row counts differ");
  if (n < p) {
    throw NumericalError("fit_ols: " + std::to_string(n) + " observations for " +
                         std::to_string(p) + " parameters");
  }
  const bool weighted = dm.weights.size() > 0;
  Eigen::MatrixXd Xw;
  Eigen::VectorXd yw;
  if (weighted) {
    if (dm.weights.minCoeff() <= 0.0) throw UsageError("fit_ols: weights must be positive");
    const Eigen::VectorXd sw = dm.weights.cwiseSqrt();
    Xw = sw.asDiagonal() * dm.X;
    yw = sw.cwiseProduct(dm.y);
  }
  const Eigen::MatrixXd& X = weighted ? Xw : dm.X;
  const Eigen::VectorXd& y = weighted ? yw : dm.y;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      const auto col = static_cast<std::size_t>(perm(k));
      const auto label = col < dm.labels.size() ? dm.labels[col].str()
                                                : "column " + std::to_string(col);
      names += (names.empty() ? "" : ", ") + label;
    }
    throw NumericalError("design matrix is rank deficient (rank " +
                         std::to_string(qr.rank()) + " of " + std::to_string(p) +
                         "); dependent column(s): " + names);
  }

  OlsFit fit;
  fit.beta = qr.solve(y);
  fit.residuals = dm.y - dm.X * fit.beta;

  const Eigen::MatrixXd R =
      qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  const auto P = qr.colsPermutation();
  fit.xtx_inv = P * inner * P.transpose();
  return fit;
}

ClusteredVcov vcov_clustered(const OlsFit& fit, const DesignMatrix& dm, VcovType type) {
  const auto n = dm.X.rows();
  const auto p = dm.X.cols();
  if (dm.cluster.size() != static_cast<std::size_t>(n)) {
    throw UsageError("vcov_clustered: every observation needs a cluster id");
  }
  const bool weighted = dm.weights.size() > 0;
  const Eigen::VectorXd sw =
      weighted ? Eigen::VectorXd(dm.weights.cwiseSqrt()) : Eigen::VectorXd::Ones(n);

  std::vector<std::vector<Eigen::Index>> members(dm.n_clusters);
  for (Eigen::Index i = 0; i < n; ++i) {
    members[dm.cluster[static_cast<std::size_t>(i)]].push_back(i);
  }

  const Eigen::MatrixXd& M = fit.xtx_inv;
  Eigen::MatrixXd S;
  if (type == VcovType::CR2) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    S = eig.eigenvectors() *
        eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
        eig.eigenvectors().transpose();
  }

  ClusteredVcov out;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd Xg;
  Eigen::VectorXd eg;
  for (const auto& rows : members) {
    if (rows.empty()) continue;
    const auto ng = static_cast<Eigen::Index>(rows.size());
    Xg.resize(ng, p);
    eg.resize(ng);
    for (Eigen::Index k = 0; k < ng; ++k) {
      const auto i = rows[static_cast<std::size_t>(k)];
      Xg.row(k) = sw(i) * dm.X.row(i);
      eg(k) = sw(i) * fit.residuals(i);
    }
    Eigen::VectorXd score = Xg.transpose() * eg;
    if (type == VcovType::CR2) {
      // H_gg = Z Z' with Z = X_g M^{1/2}. Its nonzero eigenpairs come from the
      // p x p matrix Z'Z, so (I - H_gg)^{-1/2} e is assembled without forming
      // the n_g x n_g matrix.
      const Eigen::MatrixXd Z = Xg * S;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Z.transpose() * Z);
      Eigen::VectorXd adjusted = eg;
      bool floored = false;
      for (Eigen::Index k = 0; k < p; ++k) {
        const double lambda = std::min(eig.eigenvalues()(k), 1.0);
        if (lambda <= 1e-14) continue;
        const Eigen::VectorXd u = Z * eig.eigenvectors().col(k) / std::sqrt(lambda);
        const double complement = 1.0 - lambda;
        double scale;
        if (complement < kCr2EigenFloor) {
          scale = -1.0;
          floored = true;
        } else {
          scale = 1.0 / std::sqrt(complement) - 1.0;
        }
        adjusted += scale * u.dot(eg) * u;
      }
      if (floored) ++out.pseudo_inverse_clusters;
      score = Xg.transpose() * adjusted;
    }
    meat.noalias() += score * score.transpose();
  }

  Eigen::MatrixXd V = M * meat * M;
  if (type == VcovType::CR1) {
    const auto G = static_cast<double>(dm.n_clusters);
    if (G < 2 || n <= p) {
      throw NumericalError("CR1 needs at least two clusters and more observations than parameters");
    }
    V *= G / (G - 1.0) * (static_cast<double>(n) - 1.0) / static_cast<double>(n - p);
  }
  out.vcov = 0.5 * (V + V.transpose());
  return out;
}

std::optional<std::size_t> AmceFit::index_of(const CoefficientLabel& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  return std::nullopt;
}

AmceFit fit_design(const DesignMatrix& dm, const EstimateOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw UsageError("alpha must lie in (0, 1)");
  }
  const auto ols = fit_ols(dm);
  const auto cv = vcov_clustered(ols, dm, options.vcov);

  AmceFit fit;
  fit.labels = dm.labels;
  fit.beta = ols.beta;
  fit.vcov = cv.vcov;
  fit.n_obs = dm.rows();
  fit.n_clusters = dm.n_clusters;
  fit.n_params = dm.cols();
  fit.vcov_type = options.vcov;
  fit.alpha = options.alpha;
  fit.use_t = options.use_t;
  fit.pseudo_inverse_clusters = cv.pseudo_inverse_clusters;

  const auto p = fit.beta.size();
  fit.se = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  const double df = static_cast<double>(fit.n_clusters) - 1.0;
  if (options.use_t && df < 1.0) {
    throw NumericalError("t critical values need at least two clusters");
  }
  const double crit = options.use_t ? stats::student_t_quantile(1.0 - options.alpha / 2.0, df)
                                    : stats::normal_quantile(1.0 - options.alpha / 2.0);
  fit.ci_lower = fit.beta - crit * fit.se;
  fit.ci_upper = fit.beta + crit * fit.se;
  fit.z.resize(p);
  fit.p.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    double z;
    if (fit.se(i) > 0.0) {
      z = fit.beta(i) / fit.se(i);
    } else {
      z = fit.beta(i) == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), fit.beta(i));
    }
    fit.z(i) = z;
    fit.p(i) = options.use_t ? stats::student_t_two_sided_p(z, df) : stats::normal_two_sided_p(z);
  }
  return fit;
}

AmceFit estimate_amce(const ConjointDataset& d, const EstimateOptions& options) {
  if (d.empty()) throw DataError("cannot estimate AMCEs on an empty dataset");
  AmceFit fit;
  if (d.mode() == ResponseMode::ForcedChoice) {
    fit = fit_design(design_from_choices(d, options.cluster), options);
  } else if (options.outcome == OutcomeKind::PairChoice) {
    fit = fit_design(design_from_pairs(expand_dataset(d), options.cluster), options);
  } else {
    fit = fit_design(design_from_normalized_rank(d, options.cluster), options);
  }
  fit.outcome_kind = options.outcome;
  return fit;
}

AmceFit estimate_amce(const PairDataset& pairs, const EstimateOptions& options) {
  if (pairs.size() == 0) throw DataError("cannot estimate AMCEs on an empty pair dataset");
  AmceFit fit = options.outcome == OutcomeKind::PairChoice
                    ? fit_design(design_from_pairs(pairs, options.cluster), options)
                    : fit_design(design_from_pair_means(pairs, options.cluster), options);
  fit.outcome_kind = options.outcome;
  return fit;
}

ZTestRow z_test(double estimate_a, double se_a, double estimate_b, double se_b) {
  ZTestRow row;
  row.difference = estimate_a - estimate_b;
  const double se = std::sqrt(se_a * se_a + se_b * se_b);
  if (se > 0.0) {
    row.z = row.difference / se;
  } else {
    row.z = row.difference == 0.0
                ? 0.0
                : std::copysign(std::numeric_limits<double>::infinity(), row.difference);
  }
  row.p = stats::normal_two_sided_p(row.z);
  return row;
}

ZTestResult z_test_coefficients(const AmceFit& a, const AmceFit& b) {
  ZTestResult out;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const auto& label = a.labels[i];
    if (label.is_intercept()) continue;
    const auto j = b.index_of(label);
    if (!j) {
      out.skipped.push_back(label);
      continue;
    }
    const auto ia = static_cast<Eigen::Index>(i);
    const auto jb = static_cast<Eigen::Index>(*j);
    auto row = z_test(a.beta(ia), a.se(ia), b.beta(jb), b.se(jb));
    row.label = label;
    out.rows.push_back(std::move(row));
  }
  for (const auto& label : b.labels) {
    if (!label.is_intercept() && !a.index_of(label)) out.skipped.push_back(label);
  }
  if (out.rows.empty()) throw DataError("the two fits share no coefficient labels");
  return out;
}

AmceFit position_effect_check(const ConjointDataset& d, const EstimateOptions& options,
                              PositionOutcome outcome) {
  if (d.empty()) throw DataError("cannot check position effects on an empty dataset");
  const auto views = group_tasks(d);
  std::size_t max_k = 0;
  for (const auto& v : views) max_k = std::max(max_k, v.K());

  auto attributes = d.schema().attributes();
  Attribute position{d.schema().find("position") < 0 ? "position" : "display_position", {}, 0};
  for (std::size_t k = 1; k <= max_k; ++k) position.levels.push_back(std::to_string(k));
  attributes.push_back(position);
  const AttributeSchema augmented(std::move(attributes));

  std::vector<std::size_t> order;
  std::vector<double> y;
  order.reserve(d.size());
  y.reserve(d.size());
  for (const auto& v : views) {
    const int K = static_cast<int>(v.K());
    for (auto i : v.rows) {
      order.push_back(i);
      const int value = d.row(i).outcome;
      if (d.mode() == ResponseMode::ForcedChoice) {
        y.push_back(value);
      } else if (outcome == PositionOutcome::Rank) {
        y.push_back(value);
      } else {
        y.push_back(normalized_rank(value, K));
      }
    }
  }

  const auto L = d.schema().size();
  std::vector<int> codes((L + 1) * order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = d.levels(order[i]);
    std::copy(src.begin(), src.end(), codes.begin() + static_cast<std::ptrdiff_t>(i * (L + 1)));
    codes[i * (L + 1) + L] = d.row(order[i]).position - 1;
  }

  DesignMatrix dm;
  dm.X = encode_levels(augmented, order.size(), [&](std::size_t i) {
    return std::span<const int>(codes.data() + i * (L + 1), L + 1);
  });
  dm.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  dm.cluster.resize(order.size());
  ClusterIndex index;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = d.row(order[i]);
    dm.cluster[i] = index(cluster_key(options.cluster, r.subject, r.task, i));
  }
  dm.n_clusters = index.size();
  dm.labels = design_labels(augmented);
  auto fit = fit_design(dm, options);
  fit.outcome_kind = OutcomeKind::NormalizedRank;
  return fit;
}

}  // namespace rankjoint
