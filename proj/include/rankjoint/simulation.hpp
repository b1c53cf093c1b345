#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "rankjoint/amce.hpp"
#include "rankjoint/dataset.hpp"

namespace rankjoint {

/// Random-utility conjoint design: U = gamma' X + eps, eps ~ N(0, noise_sd^2),
/// attribute levels i.i.d. uniform. `gamma` has one entry per non-baseline
/// level in schema order.
struct SimDesign {
  std::size_t n_subjects = 500;
  std::size_t n_tasks = 3;
  int K = 3;
  AttributeSchema schema = AttributeSchema::binary(6);
  std::vector<double> gamma = std::vector<double>(6, 0.0);
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  /// Utility added per display position after the first (position effects).
  double position_shift = 0.0;

  /// Throws UsageError on an invalid design.
  void validate() const;

  /// Reads the sim.json fields: n_subjects, n_tasks, K, schema or
  /// n_binary_attributes, gamma, noise_sd, seed, position_shift. With
  /// `require_gamma_match` false, gamma may have any length (power grids).
  static SimDesign from_json(std::string_view text, bool require_gamma_match = true);
  std::string to_json() const;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of an independent stream identified by `path` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

using Rng = std::mt19937_64;

/// Ranked: profiles ranked by descending utility (ties to the lower
/// position). ForcedChoice: the highest-utility profile is chosen. Draws
/// depend only on design.seed and `stream`. When `utilities` is non-null it
/// receives the latent utility of every row.
ConjointDataset simulate_dataset(const SimDesign& design, ResponseMode mode,
                                 std::uint64_t stream = 0,
                                 std::vector<double>* utilities = nullptr);

/// Forced-choice data seen by a K = 2 respondent shown only positions 1 and 2
/// of each ranked task (choice follows the ranking).
ConjointDataset forced_choice_from_ranked(const ConjointDataset& ranked);

struct CoefficientPower {
  CoefficientLabel label;
  std::size_t grid_index = 0;
  double gamma = 0.0;
  double true_amce = 0.0;
  double power = 0.0;
  double mean_estimate = 0.0;
  double empirical_se = 0.0;
  double mean_se = 0.0;
};

struct PowerResult {
  std::string arm;
  int K = 2;
  std::vector<CoefficientPower> coefficients;
  std::size_t replications = 0;
  double alpha = 0.05;
};

struct PowerComparison {
  PowerResult rcc;
  PowerResult fcc;
  /// rcc.power - fcc.power per grid entry.
  std::vector<double> difference;
};

struct SimulationOptions {
  std::size_t reps = 1000;
  double alpha = 0.05;
  unsigned threads = 0;
  EstimateOptions estimate{};
  /// Profile pairs drawn for the true-AMCE oracle.
  std::size_t oracle_pairs = 1'000'000;
};

/// Simulates the ranked (base.K) and forced-choice (K = 2) arms with matched
/// N and J. The gamma grid is split into consecutive designs of
/// base.schema.num_effects() coefficients; a short final chunk is padded with
/// zeros that are not reported.
PowerComparison power_comparison(const std::vector<double>& gamma_grid, const SimDesign& base,
                                 const SimulationOptions& options);

/// Large-sample forced-choice AMCEs by difference in choice rates.
std::vector<double> simulate_true_amce(const SimDesign& design, std::size_t pairs,
                                       std::uint64_t stream);

struct NullEfficiencyRow {
  int K = 2;
  double mean_se_ranked = 0.0;
  double mean_se_forced = 0.0;
  double empirical_ratio = 0.0;
  double theoretical_ratio = 0.0;  // sqrt(2(K+1)/(3K(K-1)))
};

/// Mean AMCE standard error of each K arm over a K = 2 arm, gamma forced to 0.
std::vector<NullEfficiencyRow> null_efficiency_check(const std::vector<int>& K_values,
                                                     const SimDesign& base,
                                                     const SimulationOptions& options);

struct ArmSummary {
  double mean = 0.0;
  double variance = 0.0;
  double mc_se = 0.0;  // sqrt(variance / reps)
};

struct SamplingDistribution {
  std::vector<CoefficientLabel> labels;
  /// draws[c][r]: estimate of AMCE coefficient c in replication r.
  std::vector<std::vector<double>> ranked;
  std::vector<std::vector<double>> forced;
  std::vector<ArmSummary> ranked_summary;
  std::vector<ArmSummary> forced_summary;
};

/// Replicated AMCE estimates for the ranked arm and its matched K = 2 arm
/// (positions 1 and 2 of the same tasks). Requires reps >= 2.
SamplingDistribution sampling_distribution(const SimDesign& design,
                                           const SimulationOptions& options);

struct SensitivityRow {
  double p = 0.0;
  double mean_deviation = 0.0;
  double sd_deviation = 0.0;
  std::vector<double> mean_coefficients;
  std::vector<double> sd_coefficients;
};

struct SensitivityResult {
  std::vector<CoefficientLabel> labels;
  std::vector<double> baseline;
  std::size_t unordered_pairs = 0;
  std::size_t iterations = 0;
  std::vector<SensitivityRow> rows;
};

struct SensitivityOptions {
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
  /// Flip each pair independently with probability p instead of flipping
  /// exactly round(p * M) pairs.
  bool bernoulli = false;
  unsigned threads = 0;
};

/// Indices of unordered pairs to corrupt out of `M`.
std::vector<std::size_t> choose_corrupted_pairs(std::size_t M, double p, bool bernoulli, Rng& rng);

/// Flips a fraction p of unordered comparisons (both directed rows together),
/// refits by OLS and records the mean absolute AMCE deviation from the
/// uncorrupted fit.
SensitivityResult corruption_sensitivity(const ConjointDataset& d, const std::vector<double>& p_grid,
                                         const SensitivityOptions& options);

}  // namespace rankjoint
