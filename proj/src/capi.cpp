#include "rankjoint/rankjoint.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <new>
#include <set>
#include <sstream>
#include <string>

#include "rankjoint/digest.hpp"
#include "rankjoint/error.hpp"
#include "rankjoint/report.hpp"
#include "rankjoint/serialize.hpp"

struct rj_schema {
  rankjoint::AttributeSchema value;
};
struct rj_dataset {
  rankjoint::ConjointDataset value;
};
struct rj_pairs {
  rankjoint::PairDataset value;
};
struct rj_fit {
  rankjoint::AmceFit value;
};

namespace {

using namespace rankjoint;

thread_local std::string last_error;

// Runs `f`, translating exceptions into status codes and the thread's last
// error message.
template <class F>
rj_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return RJ_OK;
  } catch (const UsageError& e) {
    last_error = e.what();
    return RJ_ERR_USAGE;
  } catch (const DataError& e) {
    last_error = e.what();
    return RJ_ERR_DATA;
  } catch (const IoError& e) {
    last_error = e.what();
    return RJ_ERR_DATA;
  } catch (const NumericalError& e) {
    last_error = e.what();
    return RJ_ERR_NUMERIC;
  } catch (const Json::exception& e) {
    last_error = std::string("malformed JSON: ") + e.what();
    return RJ_ERR_DATA;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return RJ_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return RJ_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return RJ_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw UsageError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

char* dump(const Json& j) { return dup_string(j.dump(2) + "\n"); }

ResponseMode to_mode(rj_mode m) {
  switch (m) {
    case RJ_MODE_RANKED: return ResponseMode::Ranked;
    case RJ_MODE_FORCED_CHOICE: return ResponseMode::ForcedChoice;
  }
  throw UsageError("invalid response mode");
}

EstimateOptions to_estimate(const rj_fit_options* o) {
  EstimateOptions out;
  if (o == nullptr) return out;
  switch (o->vcov) {
    case RJ_VCOV_CR0: out.vcov = VcovType::CR0; break;
    case RJ_VCOV_CR1: out.vcov = VcovType::CR1; break;
    case RJ_VCOV_CR2: out.vcov = VcovType::CR2; break;
    default: throw UsageError("invalid vcov type");
  }
  switch (o->cluster) {
    case RJ_CLUSTER_SUBJECT: out.cluster = ClusterBy::Subject; break;
    case RJ_CLUSTER_TASK: out.cluster = ClusterBy::Task; break;
    case RJ_CLUSTER_NONE: out.cluster = ClusterBy::None; break;
    default: throw UsageError("invalid cluster level");
  }
  switch (o->outcome) {
    case RJ_OUTCOME_PAIR_CHOICE: out.outcome = OutcomeKind::PairChoice; break;
    case RJ_OUTCOME_NORMALIZED_RANK: out.outcome = OutcomeKind::NormalizedRank; break;
    default: throw UsageError("invalid outcome kind");
  }
  if (!(o->alpha > 0.0 && o->alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  out.alpha = o->alpha;
  out.use_t = o->use_t != 0;
  return out;
}

SimulationOptions to_sim(const rj_sim_options* o) {
  SimulationOptions out;
  if (o == nullptr) return out;
  if (!(o->alpha > 0.0 && o->alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  out.reps = o->reps;
  out.alpha = o->alpha;
  out.threads = o->threads;
  out.oracle_pairs = o->oracle_pairs;
  out.estimate.alpha = o->alpha;
  return out;
}

SimDesign design_from(const char* config_json, std::uint64_t seed, bool require_gamma_match) {
  require(config_json, "config_json");
  auto design = SimDesign::from_json(config_json, require_gamma_match);
  design.seed = seed;
  return design;
}

std::string read_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

extern "C" {

const char* rj_version(void) { return RANKJOINT_VERSION; }

const char* rj_last_error(void) { return last_error.c_str(); }

void rj_string_free(char* s) { std::free(s); }

// ---- schema and data ----

rj_status rj_schema_load(const char* path, rj_schema** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new rj_schema{AttributeSchema::load_json(path)};
  });
}

rj_status rj_schema_parse(const char* json, rj_schema** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new rj_schema{AttributeSchema::from_json(json)};
  });
}

size_t rj_schema_num_attributes(const rj_schema* schema) {
  return schema ? schema->value.size() : 0;
}

void rj_schema_free(rj_schema* schema) { delete schema; }

rj_status rj_dataset_load(const char* path, const rj_schema* schema, rj_mode mode,
                          int invert_ranks, rj_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(schema, "schema");
    require(out, "out");
    LoadOptions options;
    options.invert_ranks = invert_ranks != 0;
    *out = new rj_dataset{load_dataset_csv(path, schema->value, to_mode(mode), options)};
  });
}

size_t rj_dataset_num_rows(const rj_dataset* data) { return data ? data->value.size() : 0; }

size_t rj_dataset_num_subjects(const rj_dataset* data) {
  return data ? data->value.num_subjects() : 0;
}

rj_mode rj_dataset_mode(const rj_dataset* data) {
  return data && data->value.mode() == ResponseMode::ForcedChoice ? RJ_MODE_FORCED_CHOICE
                                                                  : RJ_MODE_RANKED;
}

rj_status rj_dataset_validate(const rj_dataset* data, char** violations_json) {
  return guarded([&] {
    require(data, "data");
    require(violations_json, "violations_json");
    *violations_json = dump(to_json(validate_dataset(data->value)));
  });
}

rj_status rj_dataset_write(const rj_dataset* data, const char* path) {
  return guarded([&] {
    require(data, "data");
    require(path, "path");
    write_dataset_csv(data->value, std::filesystem::path(path));
  });
}

void rj_dataset_free(rj_dataset* data) { delete data; }

// ---- rank expansion ----

rj_status rj_expand(const rj_dataset* data, rj_pairs** out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    *out = new rj_pairs{expand_dataset(data->value)};
  });
}

size_t rj_pairs_num_rows(const rj_pairs* pairs) { return pairs ? pairs->value.size() : 0; }

rj_status rj_pairs_write(const rj_pairs* pairs, const char* path, int with_opponent) {
  return guarded([&] {
    require(pairs, "pairs");
    require(path, "path");
    PairCsvOptions options;
    options.with_opponent = with_opponent != 0;
    write_pairs_csv(pairs->value, std::filesystem::path(path), options);
  });
}

void rj_pairs_free(rj_pairs* pairs) { delete pairs; }

rj_status rj_normalized_rank(int rank, int K, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = normalized_rank(rank, K);
  });
}

// ---- estimation ----

void rj_fit_options_default(rj_fit_options* options) {
  if (options == nullptr) return;
  options->vcov = RJ_VCOV_CR2;
  options->cluster = RJ_CLUSTER_SUBJECT;
  options->alpha = 0.05;
  options->outcome = RJ_OUTCOME_PAIR_CHOICE;
  options->use_t = 0;
}

rj_status rj_fit_dataset(const rj_dataset* data, const rj_fit_options* options, rj_fit** out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    *out = new rj_fit{estimate_amce(data->value, to_estimate(options))};
  });
}

rj_status rj_fit_pairs(const rj_pairs* pairs, const rj_fit_options* options, rj_fit** out) {
  return guarded([&] {
    require(pairs, "pairs");
    require(out, "out");
    *out = new rj_fit{estimate_amce(pairs->value, to_estimate(options))};
  });
}

rj_status rj_position_effects(const rj_dataset* data, const rj_fit_options* options, int raw_rank,
                              rj_fit** out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    *out = new rj_fit{position_effect_check(
        data->value, to_estimate(options),
        raw_rank ? PositionOutcome::Rank : PositionOutcome::NormalizedRank)};
  });
}

rj_status rj_fit_to_json(const rj_fit* fit, char** out) {
  return guarded([&] {
    require(fit, "fit");
    require(out, "out");
    *out = dump(to_json(fit->value));
  });
}

rj_status rj_fit_from_json(const char* json, rj_fit** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    Json doc;
    try {
      doc = Json::parse(json);
    } catch (const Json::exception& e) {
      throw DataError(std::string("malformed fit JSON: ") + e.what());
    }
    // Accept either a bare fit or a CLI output document that wraps one.
    if (!doc.contains("coefficients") && doc.contains("fit")) doc = doc["fit"];
    *out = new rj_fit{fit_from_json(doc)};
  });
}

size_t rj_fit_num_coefficients(const rj_fit* fit) { return fit ? fit->value.labels.size() : 0; }

rj_status rj_fit_coefficient(const rj_fit* fit, size_t index, double* estimate, double* se) {
  return guarded([&] {
    require(fit, "fit");
    if (index >= fit->value.labels.size()) throw UsageError("coefficient index out of range");
    const auto i = static_cast<Eigen::Index>(index);
    if (estimate) *estimate = fit->value.beta(i);
    if (se) *se = fit->value.se(i);
  });
}

void rj_fit_free(rj_fit* fit) { delete fit; }

rj_status rj_z_test(double estimate_a, double se_a, double estimate_b, double se_b, double* z,
                    double* p) {
  return guarded([&] {
    const auto r = rankjoint::z_test(estimate_a, se_a, estimate_b, se_b);
    if (z) *z = r.z;
    if (p) *p = r.p;
  });
}

rj_status rj_z_test_fits(const rj_fit* a, const rj_fit* b, char** out_json) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out_json, "out_json");
    *out_json = dump(to_json(z_test_coefficients(a->value, b->value)));
  });
}

// ---- efficiency ----

rj_status rj_theoretical_variance_ratio(int K, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = theoretical_variance_ratio(K);
  });
}

rj_status rj_theoretical_se_reduction(int K, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = theoretical_se_reduction(K);
  });
}

rj_status rj_fcc_sample_multiplier(int K, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = fcc_sample_multiplier(K);
  });
}

rj_status rj_fcc_sample_multiplier_from_reduction(double reduction, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = fcc_sample_multiplier_from_reduction(reduction);
  });
}

rj_status rj_efficiency_table(const int* K, size_t n, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    if (n == 0) throw UsageError("at least one K is required");
    require(K, "K");
    Json rows = Json::array();
    for (size_t i = 0; i < n; ++i) rows.push_back(to_json(theoretical_efficiency(K[i])));
    *out_json = dump(Json{{"theoretical", std::move(rows)}});
  });
}

rj_status rj_efficiency_compare(const rj_fit* a, const rj_fit* b, double seconds_a,
                                double seconds_b, char** out_json) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out_json, "out_json");
    const auto se = empirical_se_comparison(a->value, b->value);
    Json out{{"se_comparison", to_json(se)},
             {"fcc_sample_multiplier", fcc_sample_multiplier_from_reduction(se.reduction)},
             {"z_tests", to_json(z_test_coefficients(a->value, b->value))},
             {"attribute_importance",
              {{"a", importance_json(a->value)}, {"b", importance_json(b->value)}}}};
    const bool timed = seconds_a > 0.0 && seconds_b > 0.0;
    if (timed) {
      Json ppt = Json::object();
      for (auto agg : {PrecisionAggregation::MeanInverseVariance,
                       PrecisionAggregation::MedianInverseVariance,
                       PrecisionAggregation::InverseMeanSe}) {
        ppt[std::string(to_string(agg))] = {
            {"a", precision_per_time(a->value, seconds_a, agg)},
            {"b", precision_per_time(b->value, seconds_b, agg)},
            {"relative", relative_precision_per_time(a->value, seconds_a, b->value, seconds_b, agg)}};
      }
      out["precision_per_time"] = std::move(ppt);
      out["time_a"] = seconds_a;
      out["time_b"] = seconds_b;
    } else if (seconds_a != 0.0 || seconds_b != 0.0) {
      throw UsageError("completion times must both be positive");
    }
    *out_json = dump(out);
  });
}

// ---- consistency ----

rj_status rj_two_proportion_test(long x1, long n1, long x2, long n2, int continuity_correction,
                                 double* z, double* p) {
  return guarded([&] {
    const auto r = two_proportion_test(x1, n1, x2, n2, continuity_correction != 0);
    if (z) *z = r.statistic;
    if (p) *p = r.p;
  });
}

void rj_consistency_options_default(rj_consistency_options* options) {
  if (options == nullptr) return;
  options->continuity_correction = 0;
  options->adjust = RJ_ADJUST_NONE;
  rj_fit_options_default(&options->fit);
}

rj_status rj_test_consistency(const char* retest_csv, const char* conditions_csv,
                              const rj_dataset* main, const rj_consistency_options* options,
                              char** out_json) {
  return guarded([&] {
    require(retest_csv, "retest_csv");
    require(conditions_csv, "conditions_csv");
    require(out_json, "out_json");
    rj_consistency_options defaults;
    rj_consistency_options_default(&defaults);
    const auto& o = options ? *options : defaults;
    SummaryOptions summary_options;
    summary_options.continuity_correction = o.continuity_correction != 0;
    switch (o.adjust) {
      case RJ_ADJUST_NONE: summary_options.adjust = PAdjust::None; break;
      case RJ_ADJUST_BONFERRONI: summary_options.adjust = PAdjust::Bonferroni; break;
      case RJ_ADJUST_HOLM: summary_options.adjust = PAdjust::Holm; break;
      default: throw UsageError("invalid p-value adjustment");
    }
    const auto records = load_retest_csv(retest_csv);
    const auto condition_of = load_conditions_csv(conditions_csv);

    Json out = Json::object();
    for (auto kind : {RetestKind::Transitivity, RetestKind::IIA}) {
      std::vector<RetestRecord> subset;
      for (const auto& r : records) {
        if (r.kind == kind) subset.push_back(r);
      }
      if (subset.empty()) continue;
      out[std::string(to_string(kind))] =
          to_json(summarize_violations(subset, condition_of, summary_options));
    }
    out["n_records"] = records.size();
    if (main != nullptr) {
      // Refit per condition: each condition's subjects with and without the
      // subjects who violated either assumption.
      const auto estimate = to_estimate(&o.fit);
      std::map<std::string, std::vector<std::string>, decltype(&natural_less)> members(&natural_less);
      for (const auto& [subject, condition] : condition_of) members[condition].push_back(subject);
      Json refits = Json::array();
      for (const auto& [condition, subjects] : members) {
        const std::set<std::string> in_condition(subjects.begin(), subjects.end());
        const auto part =
            main->value.filter_subjects([&](const std::string& s) { return in_condition.count(s) > 0; });
        if (part.empty()) continue;
        std::vector<RetestRecord> mine;
        for (const auto& r : records) {
          if (in_condition.count(r.subject_id)) mine.push_back(r);
        }
        auto refit = to_json(refit_excluding_violators(part, mine, estimate));
        refit["condition"] = condition;
        refits.push_back(std::move(refit));
      }
      out["refit_excluding_violators"] = std::move(refits);
    }
    *out_json = dump(out);
  });
}

// ---- simulation ----

void rj_sim_options_default(rj_sim_options* options) {
  if (options == nullptr) return;
  const SimulationOptions d;
  options->reps = d.reps;
  options->alpha = d.alpha;
  options->threads = d.threads;
  options->oracle_pairs = d.oracle_pairs;
}

rj_status rj_simulate_data(const char* config_json, uint64_t seed, rj_mode mode, rj_dataset** out) {
  return guarded([&] {
    require(out, "out");
    const auto design = design_from(config_json, seed, true);
    *out = new rj_dataset{simulate_dataset(design, to_mode(mode))};
  });
}

rj_status rj_simulate_power(const char* config_json, uint64_t seed, const rj_sim_options* options,
                            char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    const auto design = design_from(config_json, seed, false);
    *out_json = dump(to_json(power_comparison(design.gamma, design, to_sim(options))));
  });
}

rj_status rj_null_efficiency(const char* config_json, uint64_t seed, const int* K, size_t n,
                             const rj_sim_options* options, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    if (n == 0) throw UsageError("at least one K is required");
    require(K, "K");
    const auto design = design_from(config_json, seed, false);
    const std::vector<int> ks(K, K + n);
    *out_json = dump(to_json(null_efficiency_check(ks, design, to_sim(options))));
  });
}

rj_status rj_sampling_distribution(const char* config_json, uint64_t seed,
                                   const rj_sim_options* options, int include_draws,
                                   char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    const auto design = design_from(config_json, seed, true);
    *out_json = dump(to_json(sampling_distribution(design, to_sim(options)), include_draws != 0));
  });
}

rj_status rj_sensitivity(const rj_dataset* data, const double* p, size_t n, size_t iterations,
                         uint64_t seed, int bernoulli, unsigned threads, char** out_json) {
  return guarded([&] {
    require(data, "data");
    require(out_json, "out_json");
    if (n == 0) throw UsageError("at least one corruption fraction is required");
    require(p, "p");
    SensitivityOptions options;
    options.iterations = iterations;
    options.seed = seed;
    options.bernoulli = bernoulli != 0;
    options.threads = threads;
    *out_json = dump(to_json(
        corruption_sensitivity(data->value, std::vector<double>(p, p + n), options)));
  });
}

// ---- reporting ----

rj_status rj_report(const char* request_json, char** out_json, char** out_text) {
  return guarded([&] {
    require(request_json, "request_json");
    require(out_json, "out_json");
    const auto request = Json::parse(request_json);
    ReportInputs inputs;
    for (const auto& f : request.value("fits", Json::array())) {
      const auto path = f.at("path").get<std::string>();
      auto doc = Json::parse(read_file(path.c_str()));
      if (!doc.contains("coefficients") && doc.contains("fit")) doc = doc["fit"];
      NamedFit named{f.value("name", path), fit_from_json(doc), std::nullopt};
      if (f.contains("seconds") && !f["seconds"].is_null()) {
        const double s = f["seconds"].get<double>();
        if (!(s > 0.0)) throw UsageError("completion time for '" + named.name + "' must be positive");
        named.seconds = s;
      }
      inputs.fits.push_back(std::move(named));
    }
    for (const auto& k : request.value("k", Json::array())) inputs.theoretical_K.push_back(k.get<int>());
    if (request.contains("consistency_path")) {
      const auto path = request["consistency_path"].get<std::string>();
      auto doc = Json::parse(read_file(path.c_str()));
      if (doc.is_object()) doc.erase("manifest");
      inputs.consistency = std::move(doc);
    }
    inputs.aggregation = parse_aggregation(request.value("aggregation", std::string("mean")));
    const auto report = build_report(inputs);
    *out_json = dump(report.json);
    if (out_text) *out_text = dup_string(report.text);
  });
}

rj_status rj_sha256_file(const char* path, char** out_hex) {
  return guarded([&] {
    require(path, "path");
    require(out_hex, "out_hex");
    *out_hex = dup_string(sha256_file(path));
  });
}

}  // extern "C"
