// rankjoint: command-line front end over the C API.
//
// Every subcommand writes one JSON document that embeds a run manifest
// (subcommand, resolved options, input digests, seed, version, duration).
// Exit codes: 0 ok, 1 usage, 2 data/validation/IO, 3 numerical.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rankjoint/rankjoint.h"

namespace {

using Json = nlohmann::json;

constexpr int kExitUsage = 1;

// Carries an rj_status out of the command bodies.
struct Failure {
  rj_status status;
  std::string message;
};

void check(rj_status s) {
  if (s != RJ_OK) throw Failure{s, rj_last_error()};
}

// Owns a malloc'd string returned through the C API.
struct CString {
  char* p = nullptr;
  CString() = default;
  CString(const CString&) = delete;
  CString& operator=(const CString&) = delete;
  ~CString() { rj_string_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Schema = Handle<rj_schema, rj_schema_free>;
using Dataset = Handle<rj_dataset, rj_dataset_free>;
using Pairs = Handle<rj_pairs, rj_pairs_free>;
using Fit = Handle<rj_fit, rj_fit_free>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{RJ_ERR_DATA, "cannot open " + path};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Run {
  std::string subcommand;
  Json options = Json::object();
  Json inputs = Json::array();
  std::optional<std::uint64_t> seed;
  bool canonical = false;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void input(const std::string& role, const std::string& path) {
    CString hex;
    check(rj_sha256_file(path.c_str(), hex.out()));
    inputs.push_back({{"role", role}, {"path", path}, {"sha256", hex.str()}});
  }

  Json manifest() const {
    Json m{{"subcommand", subcommand},
           {"options", options},
           {"inputs", inputs},
           {"seed", seed ? Json(*seed) : Json(nullptr)},
           {"version", rj_version()}};
    if (!canonical) {
      m["duration_seconds"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return m;
  }

  // Embeds the manifest and writes the document to `out` (stdout when empty).
  void emit(Json result, const std::string& out) const {
    if (!result.is_object()) result = Json{{"result", std::move(result)}};
    result["manifest"] = manifest();
    const auto text = result.dump(2) + "\n";
    if (out.empty() || out == "-") {
      std::cout << text;
      return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw Failure{RJ_ERR_DATA, "cannot write " + out};
    f << text;
    if (!f) throw Failure{RJ_ERR_DATA, "failed writing " + out};
  }
};

unsigned resolve_threads(const std::optional<unsigned>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("RANKJOINT_THREADS"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoul(env, &end, 10);
    if (*end != '\0') throw Failure{RJ_ERR_USAGE, "RANKJOINT_THREADS must be a non-negative integer"};
    return static_cast<unsigned>(v);
  }
  return 0;
}

const std::map<std::string, rj_mode> kModes{{"ranked", RJ_MODE_RANKED},
                                            {"forced-choice", RJ_MODE_FORCED_CHOICE}};
const std::map<std::string, rj_vcov> kVcov{{"cr0", RJ_VCOV_CR0}, {"cr1", RJ_VCOV_CR1}, {"cr2", RJ_VCOV_CR2}};
const std::map<std::string, rj_cluster> kCluster{
    {"subject", RJ_CLUSTER_SUBJECT}, {"task", RJ_CLUSTER_TASK}, {"none", RJ_CLUSTER_NONE}};
const std::map<std::string, rj_outcome> kOutcome{{"pair", RJ_OUTCOME_PAIR_CHOICE},
                                                 {"normalized-rank", RJ_OUTCOME_NORMALIZED_RANK}};
const std::map<std::string, rj_p_adjust> kAdjust{
    {"none", RJ_ADJUST_NONE}, {"bonferroni", RJ_ADJUST_BONFERRONI}, {"holm", RJ_ADJUST_HOLM}};

template <class Map>
std::vector<std::string> keys(const Map& m) {
  std::vector<std::string> out;
  for (const auto& [k, v] : m) out.push_back(k);
  return out;
}

struct DataArgs {
  std::string in;
  std::string schema;
  std::string mode = "ranked";
  bool invert_ranks = false;

  void add(CLI::App* cmd, const char* in_flag = "--in") {
    cmd->add_option(in_flag, in, "Long-format response CSV")->required();
    cmd->add_option("--schema", schema, "Attribute schema JSON")->required();
    cmd->add_option("--mode", mode, "Response mode")->check(CLI::IsMember(keys(kModes)));
    cmd->add_flag("--invert-ranks", invert_ranks, "Rank column uses 1 = least preferred");
  }

  void load(Run& run, Schema& s, Dataset& d) const {
    run.input("data", in);
    run.input("schema", schema);
    run.options["mode"] = mode;
    run.options["invert_ranks"] = invert_ranks;
    check(rj_schema_load(schema.c_str(), s.out()));
    check(rj_dataset_load(in.c_str(), s.get(), kModes.at(mode), invert_ranks ? 1 : 0, d.out()));
  }
};

struct FitArgs {
  std::string vcov = "cr2";
  std::string cluster = "subject";
  std::string outcome = "pair";
  double alpha = 0.05;
  bool use_t = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--vcov", vcov, "Variance estimator")->check(CLI::IsMember(keys(kVcov)));
    cmd->add_option("--cluster", cluster, "Cluster level")->check(CLI::IsMember(keys(kCluster)));
    cmd->add_option("--outcome", outcome, "Outcome for ranked data")
        ->check(CLI::IsMember(keys(kOutcome)));
    cmd->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(1e-12, 1.0 - 1e-12));
    cmd->add_flag("--t-dist", use_t, "t(G-1) critical values");
  }

  rj_fit_options resolve(Run& run) const {
    rj_fit_options o;
    rj_fit_options_default(&o);
    o.vcov = kVcov.at(vcov);
    o.cluster = kCluster.at(cluster);
    o.outcome = kOutcome.at(outcome);
    o.alpha = alpha;
    o.use_t = use_t ? 1 : 0;
    run.options["vcov"] = vcov;
    run.options["cluster"] = cluster;
    run.options["outcome"] = outcome;
    run.options["alpha"] = alpha;
    run.options["t_dist"] = use_t;
    return o;
  }
};

Json parse(const CString& s) { return Json::parse(s.str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ranked-choice conjoint analysis: rank expansion, AMCE estimation with CR2 "
               "standard errors, efficiency diagnostics and consistency tests.",
               "rankjoint"};
  app.set_version_flag("--version", std::string(rj_version()));
  app.require_subcommand(1);
  app.fallthrough();

  bool canonical = false;
  std::optional<unsigned> threads;
  app.add_flag("--canonical", canonical, "Omit run duration from the manifest");
  app.add_option("--threads", threads, "Worker threads (default RANKJOINT_THREADS or all cores)");

  const auto sub = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->set_version_flag("--version", std::string(rj_version()));
    return cmd;
  };

  // expand
  DataArgs expand_data;
  std::string expand_out;
  bool with_opponent = false;
  auto* expand = sub("expand", "Expand rankings into directed pairwise rows");
  expand_data.add(expand);
  expand->add_option("--out", expand_out, "Pairwise CSV to write")->required();
  expand->add_flag("--with-opponent", with_opponent, "Append opponent_<attribute> columns");

  // fit
  DataArgs fit_data;
  FitArgs fit_args;
  std::string fit_out;
  bool position_effects = false, raw_rank = false;
  auto* fit = sub("fit", "Estimate AMCEs with cluster-robust standard errors");
  fit_data.add(fit);
  fit_args.add(fit);
  fit->add_option("--out", fit_out, "Fit JSON (default stdout)");
  fit->add_flag("--position-effects", position_effects, "Regress the outcome on display position");
  fit->add_flag("--raw-rank", raw_rank, "Position check on the raw rank instead of normalized rank");

  // efficiency
  std::vector<int> eff_k;
  std::string fit_a, fit_b, eff_out;
  double time_a = 0.0, time_b = 0.0;
  auto* efficiency = sub("efficiency", "Theoretical and empirical efficiency of ranked designs");
  efficiency->add_option("--k", eff_k, "Profiles per task for the theoretical table");
  efficiency->add_option("--fit-a", fit_a, "Reference fit JSON");
  efficiency->add_option("--fit-b", fit_b, "Comparison fit JSON");
  efficiency->add_option("--time-a", time_a, "Mean completion seconds for fit A")
      ->check(CLI::PositiveNumber);
  efficiency->add_option("--time-b", time_b, "Mean completion seconds for fit B")
      ->check(CLI::PositiveNumber);
  efficiency->add_option("--out", eff_out, "Output JSON (default stdout)");

  // test-consistency
  DataArgs cons_data;
  FitArgs cons_fit;
  std::string retest, conditions, cons_out, adjust = "none";
  bool continuity = false;
  auto* consistency = sub("test-consistency", "Transitivity and IIA violation tests");
  cons_data.add(consistency, "--main");
  cons_fit.add(consistency);
  consistency->add_option("--retest", retest, "Retest CSV")->required();
  consistency->add_option("--conditions", conditions, "Subject condition CSV")->required();
  consistency->add_option("--adjust", adjust, "Multiple-comparison adjustment")
      ->check(CLI::IsMember(keys(kAdjust)));
  consistency->add_flag("--continuity", continuity, "Continuity-corrected proportion tests");
  consistency->add_option("--out", cons_out, "Output JSON (default stdout)");

  // simulate-power
  std::string config, power_out, analysis = "power";
  std::uint64_t seed = 0;
  rj_sim_options sim;
  rj_sim_options_default(&sim);
  std::vector<int> null_k{2, 3, 4, 6};
  bool draws = false;
  auto* power = sub("simulate-power", "Monte Carlo power and efficiency simulations");
  power->add_option("--config", config, "Simulation design JSON")->required();
  power->add_option("--seed", seed, "Random seed")->required();
  power->add_option("--reps", sim.reps, "Replications")->check(CLI::PositiveNumber);
  power->add_option("--alpha", sim.alpha, "Test level")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  power->add_option("--oracle-pairs", sim.oracle_pairs, "Pairs drawn for the true-AMCE oracle")
      ->check(CLI::PositiveNumber);
  power->add_option("--analysis", analysis, "power | null-efficiency | sampling")
      ->check(CLI::IsMember({"power", "null-efficiency", "sampling"}));
  power->add_option("--k", null_k, "K values for null-efficiency");
  power->add_flag("--draws", draws, "Include every replication's estimates (sampling)");
  power->add_option("--out", power_out, "Output JSON (default stdout)");

  // simulate-data
  std::string data_config, data_mode = "ranked", data_out;
  std::uint64_t data_seed = 0;
  auto* simdata = sub("simulate-data", "Draw one synthetic dataset");
  simdata->add_option("--config", data_config, "Simulation design JSON")->required();
  simdata->add_option("--seed", data_seed, "Random seed")->required();
  simdata->add_option("--mode", data_mode, "Response mode")->check(CLI::IsMember(keys(kModes)));
  simdata->add_option("--out", data_out, "CSV to write")->required();

  // sensitivity
  DataArgs sens_data;
  std::vector<double> p_grid;
  std::size_t iters = 200;
  std::uint64_t sens_seed = 0;
  bool bernoulli = false;
  std::string sens_out;
  auto* sensitivity = sub("sensitivity", "Corruption sensitivity of AMCE estimates");
  sens_data.add(sensitivity);
  sensitivity->add_option("--p", p_grid, "Corruption fractions")->required();
  sensitivity->add_option("--iters", iters, "Iterations per fraction")->check(CLI::PositiveNumber);
  sensitivity->add_option("--seed", sens_seed, "Random seed")->required();
  sensitivity->add_flag("--bernoulli", bernoulli, "Flip each pair independently with probability p");
  sensitivity->add_option("--out", sens_out, "Output JSON (default stdout)");

  // report
  std::vector<std::string> report_fits, report_names;
  std::vector<double> report_times;
  std::vector<int> report_k;
  std::string report_consistency, aggregation = "mean", report_out, report_text;
  auto* report = sub("report", "Consolidate fits, efficiency and consistency results");
  report->add_option("--fit", report_fits, "Fit JSON files; the first is the reference");
  report->add_option("--name", report_names, "Display names, one per --fit");
  report->add_option("--time", report_times, "Mean completion seconds, one per --fit");
  report->add_option("--k", report_k, "K values for the theoretical table");
  report->add_option("--consistency", report_consistency, "test-consistency output JSON");
  report->add_option("--aggregation", aggregation, "Precision aggregation")
      ->check(CLI::IsMember({"mean", "median", "inverse-mean-se"}));
  report->add_option("--out", report_out, "Report JSON (default stdout)");
  report->add_option("--text", report_text, "Also write a plain-text table here ('-' for stderr)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "rankjoint: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  Run run;
  run.canonical = canonical;
  try {
    const unsigned nthreads = resolve_threads(threads);

    if (*expand) {
      run.subcommand = "expand";
      Schema s;
      Dataset d;
      expand_data.load(run, s, d);
      run.options["with_opponent"] = with_opponent;
      Pairs pairs;
      check(rj_expand(d.get(), pairs.out()));
      check(rj_pairs_write(pairs.get(), expand_out.c_str(), with_opponent ? 1 : 0));
      run.emit({{"output", expand_out},
                {"profiles", rj_dataset_num_rows(d.get())},
                {"pair_rows", rj_pairs_num_rows(pairs.get())}},
               "");
    } else if (*fit) {
      run.subcommand = "fit";
      Schema s;
      Dataset d;
      fit_data.load(run, s, d);
      const auto options = fit_args.resolve(run);
      run.options["position_effects"] = position_effects;
      if (position_effects) run.options["raw_rank"] = raw_rank;
      Fit f;
      if (position_effects) {
        check(rj_position_effects(d.get(), &options, raw_rank ? 1 : 0, f.out()));
      } else {
        check(rj_fit_dataset(d.get(), &options, f.out()));
      }
      CString json;
      check(rj_fit_to_json(f.get(), json.out()));
      run.emit(parse(json), fit_out);
    } else if (*efficiency) {
      run.subcommand = "efficiency";
      Json result = Json::object();
      if (eff_k.empty() && fit_a.empty() && fit_b.empty()) eff_k = {2, 3, 4, 6};
      if (!eff_k.empty()) {
        run.options["k"] = eff_k;
        CString json;
        check(rj_efficiency_table(eff_k.data(), eff_k.size(), json.out()));
        result["theoretical"] = parse(json)["theoretical"];
      }
      if (!fit_a.empty() || !fit_b.empty()) {
        if (fit_a.empty() || fit_b.empty()) throw Failure{RJ_ERR_USAGE, "--fit-a and --fit-b go together"};
        if ((time_a > 0) != (time_b > 0)) throw Failure{RJ_ERR_USAGE, "--time-a and --time-b go together"};
        run.input("fit_a", fit_a);
        run.input("fit_b", fit_b);
        if (time_a > 0) {
          run.options["time_a"] = time_a;
          run.options["time_b"] = time_b;
        }
        Fit a, b;
        check(rj_fit_from_json(read_text(fit_a).c_str(), a.out()));
        check(rj_fit_from_json(read_text(fit_b).c_str(), b.out()));
        CString json;
        check(rj_efficiency_compare(a.get(), b.get(), time_a, time_b, json.out()));
        result["comparison"] = parse(json);
      }
      run.emit(std::move(result), eff_out);
    } else if (*consistency) {
      run.subcommand = "test-consistency";
      Schema s;
      Dataset d;
      cons_data.load(run, s, d);
      run.input("retest", retest);
      run.input("conditions", conditions);
      rj_consistency_options o;
      rj_consistency_options_default(&o);
      o.fit = cons_fit.resolve(run);
      o.continuity_correction = continuity ? 1 : 0;
      o.adjust = kAdjust.at(adjust);
      run.options["continuity"] = continuity;
      run.options["adjust"] = adjust;
      CString json;
      check(rj_test_consistency(retest.c_str(), conditions.c_str(), d.get(), &o, json.out()));
      run.emit(parse(json), cons_out);
    } else if (*power) {
      run.subcommand = "simulate-power";
      run.seed = seed;
      run.input("config", config);
      sim.threads = nthreads;
      run.options["analysis"] = analysis;
      run.options["reps"] = sim.reps;
      run.options["alpha"] = sim.alpha;
      const auto text = read_text(config);
      CString json;
      if (analysis == "power") {
        run.options["oracle_pairs"] = sim.oracle_pairs;
        check(rj_simulate_power(text.c_str(), seed, &sim, json.out()));
      } else if (analysis == "null-efficiency") {
        run.options["k"] = null_k;
        check(rj_null_efficiency(text.c_str(), seed, null_k.data(), null_k.size(), &sim, json.out()));
      } else {
        run.options["draws"] = draws;
        check(rj_sampling_distribution(text.c_str(), seed, &sim, draws ? 1 : 0, json.out()));
      }
      run.emit(parse(json), power_out);
    } else if (*simdata) {
      run.subcommand = "simulate-data";
      run.seed = data_seed;
      run.input("config", data_config);
      run.options["mode"] = data_mode;
      Dataset d;
      check(rj_simulate_data(read_text(data_config).c_str(), data_seed, kModes.at(data_mode), d.out()));
      check(rj_dataset_write(d.get(), data_out.c_str()));
      run.emit({{"output", data_out}, {"profiles", rj_dataset_num_rows(d.get())}}, "");
    } else if (*sensitivity) {
      run.subcommand = "sensitivity";
      run.seed = sens_seed;
      Schema s;
      Dataset d;
      sens_data.load(run, s, d);
      run.options["p"] = p_grid;
      run.options["iters"] = iters;
      run.options["bernoulli"] = bernoulli;
      CString json;
      check(rj_sensitivity(d.get(), p_grid.data(), p_grid.size(), iters, sens_seed, bernoulli ? 1 : 0,
                           nthreads, json.out()));
      run.emit(parse(json), sens_out);
    } else if (*report) {
      run.subcommand = "report";
      if (!report_names.empty() && report_names.size() != report_fits.size()) {
        throw Failure{RJ_ERR_USAGE, "--name must be given once per --fit"};
      }
      if (!report_times.empty() && report_times.size() != report_fits.size()) {
        throw Failure{RJ_ERR_USAGE, "--time must be given once per --fit"};
      }
      Json request{{"aggregation", aggregation}, {"k", report_k}, {"fits", Json::array()}};
      for (std::size_t i = 0; i < report_fits.size(); ++i) {
        run.input("fit", report_fits[i]);
        Json f{{"path", report_fits[i]},
               {"name", report_names.empty() ? report_fits[i] : report_names[i]}};
        if (!report_times.empty()) f["seconds"] = report_times[i];
        request["fits"].push_back(std::move(f));
      }
      if (!report_consistency.empty()) {
        run.input("consistency", report_consistency);
        request["consistency_path"] = report_consistency;
      }
      run.options = request;
      CString json, text;
      check(rj_report(request.dump().c_str(), json.out(), text.out()));
      if (report_text == "-") {
        std::cerr << text.str();
      } else if (!report_text.empty()) {
        std::ofstream f(report_text, std::ios::binary);
        if (!(f << text.str())) throw Failure{RJ_ERR_DATA, "cannot write " + report_text};
      }
      run.emit(parse(json), report_out);
    }
  } catch (const Failure& f) {
    std::cerr << "rankjoint: " << f.message << "\n";
    return f.status == RJ_ERR_INTERNAL ? 4 : static_cast<int>(f.status);
  } catch (const Json::exception& e) {
    std::cerr << "rankjoint: malformed JSON: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
