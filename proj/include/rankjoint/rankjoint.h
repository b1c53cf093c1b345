/*
 * rankjoint C API.
 *
 * Every object is an opaque handle released by its matching *_free function.
 * Functions return an rj_status; on failure rj_last_error() describes the
 * problem (the message is thread-local and valid until the next call on the
 * same thread). Strings returned through char** are heap allocated and must
 * be released with rj_string_free.
 */
#ifndef RANKJOINT_RANKJOINT_H
#define RANKJOINT_RANKJOINT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(RANKJOINT_BUILDING_LIBRARY)
#    define RJ_API __declspec(dllexport)
#  else
#    define RJ_API __declspec(dllimport)
#  endif
#else
#  define RJ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum rj_status {
  RJ_OK = 0,
  RJ_ERR_USAGE = 1,    /* invalid argument or option */
  RJ_ERR_DATA = 2,     /* input violates the data contract, or I/O failure */
  RJ_ERR_NUMERIC = 3,  /* numerical failure such as a rank-deficient design */
  RJ_ERR_INTERNAL = 4
} rj_status;

typedef enum rj_mode { RJ_MODE_RANKED = 0, RJ_MODE_FORCED_CHOICE = 1 } rj_mode;
typedef enum rj_vcov { RJ_VCOV_CR0 = 0, RJ_VCOV_CR1 = 1, RJ_VCOV_CR2 = 2 } rj_vcov;
typedef enum rj_cluster { RJ_CLUSTER_SUBJECT = 0, RJ_CLUSTER_TASK = 1, RJ_CLUSTER_NONE = 2 } rj_cluster;
typedef enum rj_outcome { RJ_OUTCOME_PAIR_CHOICE = 0, RJ_OUTCOME_NORMALIZED_RANK = 1 } rj_outcome;
typedef enum rj_aggregation {
  RJ_AGG_MEAN_INVERSE_VARIANCE = 0,
  RJ_AGG_MEDIAN_INVERSE_VARIANCE = 1,
  RJ_AGG_INVERSE_MEAN_SE = 2
} rj_aggregation;
typedef enum rj_p_adjust { RJ_ADJUST_NONE = 0, RJ_ADJUST_BONFERRONI = 1, RJ_ADJUST_HOLM = 2 } rj_p_adjust;

typedef struct rj_schema rj_schema;
typedef struct rj_dataset rj_dataset;
typedef struct rj_pairs rj_pairs;
typedef struct rj_fit rj_fit;

RJ_API const char* rj_version(void);
RJ_API const char* rj_last_error(void);
RJ_API void rj_string_free(char* s);

/* ---- schema and data ---------------------------------------------------- */

RJ_API rj_status rj_schema_load(const char* path, rj_schema** out);
RJ_API rj_status rj_schema_parse(const char* json, rj_schema** out);
RJ_API size_t rj_schema_num_attributes(const rj_schema* schema);
RJ_API void rj_schema_free(rj_schema* schema);

/* invert_ranks != 0 treats the rank column as 1 = least preferred. */
RJ_API rj_status rj_dataset_load(const char* path, const rj_schema* schema, rj_mode mode,
                                 int invert_ranks, rj_dataset** out);
RJ_API size_t rj_dataset_num_rows(const rj_dataset* data);
RJ_API size_t rj_dataset_num_subjects(const rj_dataset* data);
RJ_API rj_mode rj_dataset_mode(const rj_dataset* data);
/* JSON array of {subject, task, message}; empty array when valid. */
RJ_API rj_status rj_dataset_validate(const rj_dataset* data, char** violations_json);
RJ_API rj_status rj_dataset_write(const rj_dataset* data, const char* path);
RJ_API void rj_dataset_free(rj_dataset* data);

/* ---- rank expansion ----------------------------------------------------- */

RJ_API rj_status rj_expand(const rj_dataset* data, rj_pairs** out);
RJ_API size_t rj_pairs_num_rows(const rj_pairs* pairs);
RJ_API rj_status rj_pairs_write(const rj_pairs* pairs, const char* path, int with_opponent);
RJ_API void rj_pairs_free(rj_pairs* pairs);
RJ_API rj_status rj_normalized_rank(int rank, int K, double* out);

/* ---- estimation --------------------------------------------------------- */

typedef struct rj_fit_options {
  rj_vcov vcov;
  rj_cluster cluster;
  double alpha;
  rj_outcome outcome;
  int use_t; /* t(G-1) critical values instead of normal */
} rj_fit_options;

RJ_API void rj_fit_options_default(rj_fit_options* options);
RJ_API rj_status rj_fit_dataset(const rj_dataset* data, const rj_fit_options* options, rj_fit** out);
RJ_API rj_status rj_fit_pairs(const rj_pairs* pairs, const rj_fit_options* options, rj_fit** out);
/* Regression on display-position dummies plus attributes. raw_rank != 0 uses
 * the rank itself rather than the normalized rank as the outcome. */
RJ_API rj_status rj_position_effects(const rj_dataset* data, const rj_fit_options* options,
                                     int raw_rank, rj_fit** out);
RJ_API rj_status rj_fit_to_json(const rj_fit* fit, char** out);
RJ_API rj_status rj_fit_from_json(const char* json, rj_fit** out);
RJ_API size_t rj_fit_num_coefficients(const rj_fit* fit);
RJ_API rj_status rj_fit_coefficient(const rj_fit* fit, size_t index, double* estimate, double* se);
RJ_API void rj_fit_free(rj_fit* fit);

/* z = (a - b) / sqrt(se_a^2 + se_b^2) with a two-sided normal p-value. */
RJ_API rj_status rj_z_test(double estimate_a, double se_a, double estimate_b, double se_b,
                           double* z, double* p);
RJ_API rj_status rj_z_test_fits(const rj_fit* a, const rj_fit* b, char** out_json);

/* ---- efficiency --------------------------------------------------------- */

RJ_API rj_status rj_theoretical_variance_ratio(int K, double* out);
RJ_API rj_status rj_theoretical_se_reduction(int K, double* out);
RJ_API rj_status rj_fcc_sample_multiplier(int K, double* out);
RJ_API rj_status rj_fcc_sample_multiplier_from_reduction(double reduction, double* out);
RJ_API rj_status rj_efficiency_table(const int* K, size_t n, char** out_json);
/* SE comparison, precision per time (all aggregations), importance, z-tests. */
RJ_API rj_status rj_efficiency_compare(const rj_fit* a, const rj_fit* b, double seconds_a,
                                       double seconds_b, char** out_json);

/* ---- consistency tests -------------------------------------------------- */

RJ_API rj_status rj_two_proportion_test(long x1, long n1, long x2, long n2,
                                        int continuity_correction, double* z, double* p);

typedef struct rj_consistency_options {
  int continuity_correction;
  rj_p_adjust adjust;
  rj_fit_options fit; /* used when refitting without violators */
} rj_consistency_options;

RJ_API void rj_consistency_options_default(rj_consistency_options* options);
/* Reads the retest and condition CSVs; main may be NULL to skip refits. */
RJ_API rj_status rj_test_consistency(const char* retest_csv, const char* conditions_csv,
                                     const rj_dataset* main, const rj_consistency_options* options,
                                     char** out_json);

/* ---- simulation ---------------------------------------------------------- */

typedef struct rj_sim_options {
  size_t reps;
  double alpha;
  unsigned threads; /* 0 = hardware concurrency */
  size_t oracle_pairs;
} rj_sim_options;

RJ_API void rj_sim_options_default(rj_sim_options* options);
/* config_json mirrors the simulation design; `seed` overrides its seed. */
RJ_API rj_status rj_simulate_data(const char* config_json, uint64_t seed, rj_mode mode,
                                  rj_dataset** out);
RJ_API rj_status rj_simulate_power(const char* config_json, uint64_t seed,
                                   const rj_sim_options* options, char** out_json);
RJ_API rj_status rj_null_efficiency(const char* config_json, uint64_t seed, const int* K, size_t n,
                                    const rj_sim_options* options, char** out_json);
RJ_API rj_status rj_sampling_distribution(const char* config_json, uint64_t seed,
                                          const rj_sim_options* options, int include_draws,
                                          char** out_json);
RJ_API rj_status rj_sensitivity(const rj_dataset* data, const double* p, size_t n, size_t iterations,
                                uint64_t seed, int bernoulli, unsigned threads, char** out_json);

/* ---- reporting ----------------------------------------------------------- */

/* request_json: {"fits":[{"name":..,"path":..,"seconds":..}], "k":[..],
 *                "consistency_path":.., "aggregation":"mean"} */
RJ_API rj_status rj_report(const char* request_json, char** out_json, char** out_text);

RJ_API rj_status rj_sha256_file(const char* path, char** out_hex);

#ifdef __cplusplus
}
#endif

#endif /* RANKJOINT_RANKJOINT_H */
