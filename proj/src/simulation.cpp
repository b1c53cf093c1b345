#include "rankjoint/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

#include "rankjoint/error.hpp"
#include "rankjoint/expansion.hpp"
#include "rankjoint/parallel.hpp"

namespace rankjoint {

using nlohmann::json;

void SimDesign::validate() const {
  if (n_subjects < 1) throw UsageError("design: n_subjects must be at least 1");
  if (n_tasks < 1) throw UsageError("design: n_tasks must be at least 1");
  if (K < 2) throw UsageError("design: K must be at least 2");
  if (schema.empty()) throw UsageError("design: schema has no attributes");
  if (gamma.size() != schema.num_effects()) {
    throw UsageError("design: gamma has " + std::to_string(gamma.size()) +
                     " entries but the schema has " + std::to_string(schema.num_effects()) +
                     " non-baseline levels");
  }
  if (!(noise_sd > 0.0) || !std::isfinite(noise_sd)) {
    throw UsageError("design: noise_sd must be positive");
  }
  for (double g : gamma) {
    if (!std::isfinite(g)) throw UsageError("design: gamma entries must be finite");
  }
}

SimDesign SimDesign::from_json(std::string_view text, bool require_gamma_match) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("simulation config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("simulation config must be a JSON object");
  SimDesign d;
  try {
    d.n_subjects = doc.value("n_subjects", d.n_subjects);
    d.n_tasks = doc.value("n_tasks", d.n_tasks);
    d.K = doc.value("K", d.K);
    d.noise_sd = doc.value("noise_sd", d.noise_sd);
    d.seed = doc.value("seed", d.seed);
    d.position_shift = doc.value("position_shift", d.position_shift);
    if (doc.contains("schema")) {
      d.schema = AttributeSchema::from_json(doc["schema"].dump());
    } else {
      d.schema = AttributeSchema::binary(doc.value("n_binary_attributes", std::size_t{6}));
    }
    if (doc.contains("gamma")) {
      d.gamma = doc["gamma"].get<std::vector<double>>();
    } else {
      d.gamma.assign(d.schema.num_effects(), 0.0);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("simulation config: ") + e.what());
  }
  if (require_gamma_match) {
    d.validate();
  } else {
    auto probe = d;
    probe.gamma.assign(d.schema.num_effects(), 0.0);
    probe.validate();
  }
  return d;
}

std::string SimDesign::to_json() const {
  json doc{{"n_subjects", n_subjects}, {"n_tasks", n_tasks}, {"K", K},
           {"schema", json::parse(schema.to_json())}, {"gamma", gamma},
           {"noise_sd", noise_sd}, {"seed", seed}, {"position_shift", position_shift}};
  return doc.dump();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

namespace {

// Utility contribution of each (attribute, level).
std::vector<std::vector<double>> level_utilities(const SimDesign& design) {
  std::vector<std::vector<double>> out;
  std::size_t g = 0;
  for (const auto& a : design.schema.attributes()) {
    std::vector<double> u(a.levels.size(), 0.0);
    for (std::size_t l = 0; l < a.levels.size(); ++l) {
      if (l != a.baseline) u[l] = design.gamma[g++];
    }
    out.push_back(std::move(u));
  }
  return out;
}

double mean_amce_se(const AmceFit& fit) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < fit.labels.size(); ++i) {
    if (fit.labels[i].is_intercept()) continue;
    sum += fit.se(static_cast<Eigen::Index>(i));
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace

ConjointDataset simulate_dataset(const SimDesign& design, ResponseMode mode, std::uint64_t stream,
                                 std::vector<double>* utilities) {
  design.validate();
  Rng rng(derive_seed(design.seed, {stream}));
  const auto& schema = design.schema;
  const auto L = schema.size();
  const auto K = static_cast<std::size_t>(design.K);
  const auto contrib = level_utilities(design);

  std::vector<std::uniform_int_distribution<int>> draw_level;
  for (const auto& a : schema.attributes()) {
    draw_level.emplace_back(0, static_cast<int>(a.levels.size()) - 1);
  }
  std::normal_distribution<double> noise(0.0, design.noise_sd);

  ConjointDataset d(schema, mode);
  d.reserve(design.n_subjects * design.n_tasks * K);
  if (utilities) {
    utilities->clear();
    utilities->reserve(design.n_subjects * design.n_tasks * K);
  }
  std::vector<std::uint32_t> task_ids;
  for (std::size_t t = 0; t < design.n_tasks; ++t) task_ids.push_back(d.intern_task(std::to_string(t + 1)));

  std::vector<int> codes(K * L);
  std::vector<double> u(K);
  std::vector<std::size_t> order(K);
  std::vector<int> rank(K);
  for (std::size_t s = 0; s < design.n_subjects; ++s) {
    const auto sid = d.intern_subject(std::to_string(s + 1));
    for (std::size_t t = 0; t < design.n_tasks; ++t) {
      for (std::size_t k = 0; k < K; ++k) {
        double value = design.position_shift * static_cast<double>(k);
        for (std::size_t a = 0; a < L; ++a) {
          const int code = draw_level[a](rng);
          codes[k * L + a] = code;
          value += contrib[a][static_cast<std::size_t>(code)];
        }
        u[k] = value + noise(rng);
      }
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return u[a] > u[b]; });
      for (std::size_t r = 0; r < K; ++r) rank[order[r]] = static_cast<int>(r + 1);
      for (std::size_t k = 0; k < K; ++k) {
        const int outcome = mode == ResponseMode::Ranked ? rank[k] : (rank[k] == 1 ? 1 : 0);
        d.add_row(sid, task_ids[t], static_cast<int>(k + 1),
                  std::span<const int>(codes.data() + k * L, L), outcome);
        if (utilities) utilities->push_back(u[k]);
      }
    }
  }
  return d;
}

ConjointDataset forced_choice_from_ranked(const ConjointDataset& ranked) {
  if (ranked.mode() != ResponseMode::Ranked) throw DataError("expected a ranked dataset");
  ConjointDataset out(ranked.schema(), ResponseMode::ForcedChoice);
  for (const auto& v : group_tasks(ranked)) {
    const auto a = v.rows[0];
    const auto b = v.rows[1];
    const bool a_wins = ranked.row(a).outcome < ranked.row(b).outcome;
    const auto& sid = ranked.subject_id(v.subject);
    const auto& tid = ranked.task_id(v.task);
    out.add_row(sid, tid, 1, ranked.levels(a), a_wins ? 1 : 0);
    out.add_row(sid, tid, 2, ranked.levels(b), a_wins ? 0 : 1);
  }
  return out;
}

std::vector<double> simulate_true_amce(const SimDesign& design, std::size_t pairs,
                                       std::uint64_t stream) {
  design.validate();
  Rng rng(derive_seed(design.seed, {0x7A11CEULL, stream}));
  const auto& schema = design.schema;
  const auto L = schema.size();
  const auto contrib = level_utilities(design);
  std::vector<std::uniform_int_distribution<int>> draw_level;
  for (const auto& a : schema.attributes()) {
    draw_level.emplace_back(0, static_cast<int>(a.levels.size()) - 1);
  }
  std::normal_distribution<double> noise(0.0, design.noise_sd);

  // wins[a][l], shown[a][l] over both profiles of every pair
  std::vector<std::vector<double>> wins(L), shown(L);
  for (std::size_t a = 0; a < L; ++a) {
    wins[a].assign(schema[a].levels.size(), 0.0);
    shown[a].assign(schema[a].levels.size(), 0.0);
  }
  std::vector<int> first(L), second(L);
  for (std::size_t i = 0; i < pairs; ++i) {
    double u1 = 0.0;
    double u2 = 0.0;
    for (std::size_t a = 0; a < L; ++a) {
      first[a] = draw_level[a](rng);
      u1 += contrib[a][static_cast<std::size_t>(first[a])];
    }
    u1 += noise(rng);
    for (std::size_t a = 0; a < L; ++a) {
      second[a] = draw_level[a](rng);
      u2 += contrib[a][static_cast<std::size_t>(second[a])];
    }
    u2 += noise(rng);
    const double y1 = u1 > u2 ? 1.0 : 0.0;
    for (std::size_t a = 0; a < L; ++a) {
      const auto l1 = static_cast<std::size_t>(first[a]);
      const auto l2 = static_cast<std::size_t>(second[a]);
      wins[a][l1] += y1;
      shown[a][l1] += 1.0;
      wins[a][l2] += 1.0 - y1;
      shown[a][l2] += 1.0;
    }
  }
  std::vector<double> amce;
  for (std::size_t a = 0; a < L; ++a) {
    const auto base = schema[a].baseline;
    const double base_rate = wins[a][base] / shown[a][base];
    for (std::size_t l = 0; l < schema[a].levels.size(); ++l) {
      if (l == base) continue;
      amce.push_back(wins[a][l] / shown[a][l] - base_rate);
    }
  }
  return amce;
}

PowerComparison power_comparison(const std::vector<double>& gamma_grid, const SimDesign& base,
                                 const SimulationOptions& options) {
  if (options.reps < 1) throw UsageError("power_comparison: reps must be at least 1");
  if (gamma_grid.empty()) throw UsageError("power_comparison: empty gamma grid");
  const auto E = base.schema.num_effects();
  const auto n_designs = (gamma_grid.size() + E - 1) / E;

  std::vector<SimDesign> designs;
  for (std::size_t g = 0; g < n_designs; ++g) {
    SimDesign d = base;
    d.gamma.assign(E, 0.0);
    for (std::size_t e = 0; e < E && g * E + e < gamma_grid.size(); ++e) {
      d.gamma[e] = gamma_grid[g * E + e];
    }
    d.validate();
    designs.push_back(std::move(d));
  }
  SimDesign fcc_probe = base;
  fcc_probe.K = 2;
  fcc_probe.gamma.assign(E, 0.0);
  fcc_probe.validate();

  const auto labels = design_labels(base.schema);
  const auto P = labels.size();
  struct Draw {
    std::vector<double> estimate, se;
    std::vector<char> reject;
  };
  const auto items = n_designs * options.reps;
  std::vector<Draw> rcc(items), fcc(items);

  parallel_for(items, options.threads, [&](std::size_t item) {
    const auto g = item / options.reps;
    const auto r = item % options.reps;
    const auto record = [&](const AmceFit& fit, Draw& out) {
      out.estimate.resize(P);
      out.se.resize(P);
      out.reject.resize(P);
      for (std::size_t c = 0; c < P; ++c) {
        const auto i = static_cast<Eigen::Index>(c);
        out.estimate[c] = fit.beta(i);
        out.se[c] = fit.se(i);
        out.reject[c] = fit.p(i) < options.alpha;
      }
    };
    const auto ranked = simulate_dataset(designs[g], ResponseMode::Ranked,
                                         derive_seed(0, {g, r, 0}));
    record(estimate_amce(ranked, options.estimate), rcc[item]);
    SimDesign fcc_design = designs[g];
    fcc_design.K = 2;
    const auto forced = simulate_dataset(fcc_design, ResponseMode::ForcedChoice,
                                         derive_seed(0, {g, r, 1}));
    record(estimate_amce(forced, options.estimate), fcc[item]);
  });

  PowerComparison out;
  out.rcc.arm = "rcc";
  out.rcc.K = base.K;
  out.fcc.arm = "fcc";
  out.fcc.K = 2;
  for (auto* arm : {&out.rcc, &out.fcc}) {
    arm->replications = options.reps;
    arm->alpha = options.alpha;
  }
  const auto reps = static_cast<double>(options.reps);
  for (std::size_t g = 0; g < n_designs; ++g) {
    const auto truth = simulate_true_amce(designs[g], options.oracle_pairs, g);
    for (std::size_t e = 0; e < E && g * E + e < gamma_grid.size(); ++e) {
      const auto c = e + 1;  // skip the intercept
      for (auto [arm, draws] : {std::pair{&out.rcc, &rcc}, std::pair{&out.fcc, &fcc}}) {
        CoefficientPower cp;
        cp.label = labels[c];
        cp.grid_index = g * E + e;
        cp.gamma = gamma_grid[cp.grid_index];
        cp.true_amce = truth[e];
        double rejections = 0.0, sum = 0.0, sum_sq = 0.0, sum_se = 0.0;
        for (std::size_t r = 0; r < options.reps; ++r) {
          const auto& draw = (*draws)[g * options.reps + r];
          rejections += draw.reject[c];
          sum += draw.estimate[c];
          sum_sq += draw.estimate[c] * draw.estimate[c];
          sum_se += draw.se[c];
        }
        cp.power = rejections / reps;
        cp.mean_estimate = sum / reps;
        cp.mean_se = sum_se / reps;
        cp.empirical_se = options.reps > 1
            ? std::sqrt(std::max(0.0, (sum_sq - reps * cp.mean_estimate * cp.mean_estimate) / (reps - 1.0)))
            : 0.0;
        arm->coefficients.push_back(std::move(cp));
      }
    }
  }
  for (std::size_t i = 0; i < out.rcc.coefficients.size(); ++i) {
    out.difference.push_back(out.rcc.coefficients[i].power - out.fcc.coefficients[i].power);
  }
  return out;
}

std::vector<NullEfficiencyRow> null_efficiency_check(const std::vector<int>& K_values,
                                                     const SimDesign& base,
                                                     const SimulationOptions& options) {
  if (options.reps < 1) throw UsageError("null_efficiency_check: reps must be at least 1");
  if (K_values.empty()) throw UsageError("null_efficiency_check: no K values");
  SimDesign null_design = base;
  null_design.gamma.assign(base.schema.num_effects(), 0.0);
  null_design.position_shift = 0.0;

  std::vector<int> arms{2};
  for (int K : K_values) {
    if (K < 2) throw UsageError("null_efficiency_check: K must be at least 2");
    if (std::find(arms.begin(), arms.end(), K) == arms.end()) arms.push_back(K);
  }
  const auto A = arms.size();
  std::vector<double> se(options.reps * A);
  parallel_for(options.reps * A, options.threads, [&](std::size_t item) {
    const auto r = item / A;
    const auto k = arms[item % A];
    SimDesign d = null_design;
    d.K = k;
    const auto data = simulate_dataset(d, ResponseMode::Ranked,
                                       derive_seed(0, {r, static_cast<std::uint64_t>(k)}));
    se[item] = mean_amce_se(estimate_amce(data, options.estimate));
  });

  std::vector<double> mean_se(A, 0.0);
  for (std::size_t r = 0; r < options.reps; ++r) {
    for (std::size_t a = 0; a < A; ++a) mean_se[a] += se[r * A + a];
  }
  for (auto& m : mean_se) m /= static_cast<double>(options.reps);

  std::vector<NullEfficiencyRow> out;
  for (int K : K_values) {
    const auto a = static_cast<std::size_t>(std::find(arms.begin(), arms.end(), K) - arms.begin());
    NullEfficiencyRow row;
    row.K = K;
    row.mean_se_ranked = mean_se[a];
    row.mean_se_forced = mean_se[0];
    row.empirical_ratio = mean_se[a] / mean_se[0];
    const double k = K;
    row.theoretical_ratio = std::sqrt(2.0 * (k + 1.0) / (3.0 * k * (k - 1.0)));
    out.push_back(row);
  }
  return out;
}

SamplingDistribution sampling_distribution(const SimDesign& design,
                                           const SimulationOptions& options) {
  if (options.reps < 2) throw UsageError("sampling_distribution: reps must be at least 2");
  design.validate();
  SamplingDistribution out;
  const auto all_labels = design_labels(design.schema);
  out.labels.assign(all_labels.begin() + 1, all_labels.end());
  const auto C = out.labels.size();
  out.ranked.assign(C, std::vector<double>(options.reps));
  out.forced.assign(C, std::vector<double>(options.reps));

  parallel_for(options.reps, options.threads, [&](std::size_t r) {
    const auto ranked = simulate_dataset(design, ResponseMode::Ranked, derive_seed(0, {r}));
    const auto rf = estimate_amce(ranked, options.estimate);
    const auto ff = estimate_amce(forced_choice_from_ranked(ranked), options.estimate);
    for (std::size_t c = 0; c < C; ++c) {
      out.ranked[c][r] = rf.beta(static_cast<Eigen::Index>(c + 1));
      out.forced[c][r] = ff.beta(static_cast<Eigen::Index>(c + 1));
    }
  });

  const auto summarize = [&](const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    ArmSummary s;
    for (double v : x) s.mean += v;
    s.mean /= n;
    for (double v : x) s.variance += (v - s.mean) * (v - s.mean);
    s.variance /= n - 1.0;
    s.mc_se = std::sqrt(s.variance / n);
    return s;
  };
  for (std::size_t c = 0; c < C; ++c) {
    out.ranked_summary.push_back(summarize(out.ranked[c]));
    out.forced_summary.push_back(summarize(out.forced[c]));
  }
  return out;
}

std::vector<std::size_t> choose_corrupted_pairs(std::size_t M, double p, bool bernoulli, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("corruption fraction must lie in [0, 1]");
  std::vector<std::size_t> chosen;
  if (bernoulli) {
    std::bernoulli_distribution flip(p);
    for (std::size_t i = 0; i < M; ++i) {
      if (flip(rng)) chosen.push_back(i);
    }
    return chosen;
  }
  const auto m = static_cast<std::size_t>(std::llround(p * static_cast<double>(M)));
  std::vector<std::size_t> index(M);
  std::iota(index.begin(), index.end(), 0);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, M - 1);
    std::swap(index[i], index[pick(rng)]);
  }
  index.resize(m);
  return index;
}

SensitivityResult corruption_sensitivity(const ConjointDataset& d, const std::vector<double>& p_grid,
                                         const SensitivityOptions& options) {
  if (options.iterations < 1) throw UsageError("sensitivity: iterations must be at least 1");
  for (double p : p_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("sensitivity: p values must lie in [0, 1]");
  }
  const auto pairs = expand_dataset(d);
  const auto dm = design_from_pairs(pairs, ClusterBy::Subject);
  const auto ols = fit_ols(dm);
  const Eigen::VectorXd xty = dm.X.transpose() * dm.y;

  // unordered pair -> its two directed rows
  std::unordered_map<std::uint64_t, std::size_t> row_of;
  row_of.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = pairs.rows()[i];
    row_of.emplace((static_cast<std::uint64_t>(r.focal_row) << 32) | r.opponent_row, i);
  }
  std::vector<std::pair<std::size_t, std::size_t>> unordered;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = pairs.rows()[i];
    if (r.focal_position < r.opponent_position) {
      const auto j = row_of.at((static_cast<std::uint64_t>(r.opponent_row) << 32) | r.focal_row);
      unordered.emplace_back(i, j);
    }
  }

  SensitivityResult out;
  out.labels.assign(dm.labels.begin() + 1, dm.labels.end());
  const auto C = out.labels.size();
  // Same route as the corrupted refits so that p = 0 reproduces it bit for bit.
  const Eigen::VectorXd baseline = ols.xtx_inv * xty;
  out.baseline.assign(baseline.data() + 1, baseline.data() + 1 + C);
  out.unordered_pairs = unordered.size();
  out.iterations = options.iterations;

  const auto iters = options.iterations;
  const auto items = p_grid.size() * iters;
  std::vector<double> deviation(items);
  std::vector<double> coef(items * C);
  parallel_for(items, options.threads, [&](std::size_t item) {
    const auto pi = item / iters;
    const auto it = item % iters;
    Rng rng(derive_seed(options.seed, {pi, it}));
    const auto chosen = choose_corrupted_pairs(unordered.size(), p_grid[pi], options.bernoulli, rng);
    Eigen::VectorXd b = xty;
    for (auto k : chosen) {
      for (auto row : {unordered[k].first, unordered[k].second}) {
        const auto i = static_cast<Eigen::Index>(row);
        b += (1.0 - 2.0 * dm.y(i)) * dm.X.row(i).transpose();
      }
    }
    const Eigen::VectorXd beta = ols.xtx_inv * b;
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double v = beta(static_cast<Eigen::Index>(c + 1));
      coef[item * C + c] = v;
      sum += std::fabs(v - out.baseline[c]);
    }
    deviation[item] = sum / static_cast<double>(C);
  });

  const auto mean_sd = [](auto&& value, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += value(i);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (value(i) - m) * (value(i) - m);
    const double sd = n > 1 ? std::sqrt(v / static_cast<double>(n - 1)) : 0.0;
    return std::pair{m, sd};
  };
  for (std::size_t pi = 0; pi < p_grid.size(); ++pi) {
    SensitivityRow row;
    row.p = p_grid[pi];
    std::tie(row.mean_deviation, row.sd_deviation) =
        mean_sd([&](std::size_t i) { return deviation[pi * iters + i]; }, iters);
    for (std::size_t c = 0; c < C; ++c) {
      const auto [m, sd] = mean_sd([&](std::size_t i) { return coef[(pi * iters + i) * C + c]; }, iters);
      row.mean_coefficients.push_back(m);
      row.sd_coefficients.push_back(sd);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace rankjoint
