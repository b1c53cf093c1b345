// Runs the rankjoint executable end to end.
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / ("rj_cli_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string write(const std::string& name, const std::string& content) {
  const auto p = workdir() / name;
  std::ofstream(p, std::ios::binary) << content;
  return p.string();
}

Result run(const std::string& args, const std::string& env = "") {
  const auto out = workdir() / "stdout.txt";
  const auto err = workdir() / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + RANKJOINT_CLI + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const char* kSchema = R"({"attributes":[{"name":"A1","levels":["0","1"]},{"name":"A2","levels":["0","1"]},{"name":"A3","levels":["0","1"]}]})";
const char* kSim = R"({"n_subjects":80,"n_tasks":3,"K":3,"n_binary_attributes":3,"gamma":[0.4,0.1,0.0]})";

struct Fixture {
  std::string schema = write("schema.json", kSchema);
  std::string sim = write("sim.json", kSim);
  std::string data = (workdir() / "data.csv").string();
  Fixture() {
    static bool ready = false;
    if (!ready) {
      REQUIRE(run("simulate-data --config " + sim + " --seed 11 --out " + data).code == 0);
      ready = true;
    }
  }
};

}  // namespace

TEST_CASE("fit writes a manifest-bearing JSON with 2*C(3,2)*tasks observations") {
  Fixture f;
  const auto out = (workdir() / "fit.json").string();
  const auto r = run("fit --in " + f.data + " --schema " + f.schema +
                     " --mode ranked --vcov cr2 --cluster subject --alpha 0.05 --out " + out);
  REQUIRE(r.code == 0);
  const auto doc = Json::parse(slurp(out));
  CHECK(doc["n_obs"] == 80 * 3 * 6);
  CHECK(doc["n_clusters"] == 80);
  CHECK(doc["vcov_type"] == "CR2");
  CHECK(doc["coefficients"].size() == 4);
  for (const char* key : {"attribute", "level", "estimate", "se", "ci_lower", "ci_upper", "z", "p"}) {
    CHECK(doc["coefficients"][1].contains(key));
  }
  const auto& m = doc["manifest"];
  CHECK(m["subcommand"] == "fit");
  CHECK(m["inputs"].size() == 2);
  CHECK(m["inputs"][0]["sha256"].get<std::string>().size() == 64);
  CHECK(m["options"]["vcov"] == "cr2");
  CHECK(m.contains("duration_seconds"));
  CHECK(m["version"].is_string());
}

TEST_CASE("usage errors exit 1 with usage text") {
  auto r = run("fit --bogus-flag");
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run("").code == 1);
  CHECK(run("fit --in x.csv").code == 1);  // missing --schema
  Fixture f;
  r = run("simulate-power --config " + f.sim + " --reps 2");
  CHECK(r.code == 1);
  CHECK(r.err.find("--seed") != std::string::npos);
  CHECK(run("sensitivity --in " + f.data + " --schema " + f.schema + " --p 0.1").code == 1);
  CHECK(run("simulate-data --config " + f.sim + " --out x.csv").code == 1);
  CHECK(run("fit --in " + f.data + " --schema " + f.schema + " --vcov hc9").code == 1);
}

TEST_CASE("help and version on every subcommand") {
  CHECK(run("--help").code == 0);
  CHECK(run("--version").out.find('.') != std::string::npos);
  for (const char* sub : {"expand", "fit", "efficiency", "test-consistency", "simulate-power",
                          "simulate-data", "sensitivity", "report"}) {
    const auto h = run(std::string(sub) + " --help");
    CHECK(h.code == 0);
    CHECK(h.out.find("Usage") != std::string::npos);
    const auto v = run(std::string(sub) + " --version");
    CHECK(v.code == 0);
    CHECK(v.out.find('.') != std::string::npos);
  }
}

TEST_CASE("data errors exit 2 and numerical errors exit 3") {
  Fixture f;
  const auto bad = write("bad.csv", "subject,task,position,rank,A1,A2,A3\n1,1,1,1,0,0,7\n1,1,2,2,1,0,0\n");
  auto r = run("fit --in " + bad + " --schema " + f.schema);
  CHECK(r.code == 2);
  CHECK(r.err.find("'A3'") != std::string::npos);
  CHECK(run("fit --in /does/not/exist.csv --schema " + f.schema).code == 2);

  const auto collinear = write("collinear.csv",
                               "subject,task,position,rank,A1,A2,A3\n"
                               "1,1,1,1,0,0,1\n1,1,2,2,1,1,0\n2,1,1,2,1,1,0\n2,1,2,1,0,0,1\n"
                               "3,1,1,1,1,1,1\n3,1,2,2,0,0,0\n");
  r = run("fit --in " + collinear + " --schema " + f.schema);
  CHECK(r.code == 3);
  CHECK(r.err.find("dependent column") != std::string::npos);
  CHECK(r.err.find("A2:1") != std::string::npos);
}

TEST_CASE("expand writes the pairwise CSV") {
  Fixture f;
  const auto out = (workdir() / "pairs.csv").string();
  const auto r = run("expand --in " + f.data + " --schema " + f.schema + " --out " + out);
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["pair_rows"] == 80 * 3 * 6);
  const auto text = slurp(out);
  CHECK(text.rfind("subject,task,focal_position,opponent_position,A1,A2,A3,y\n", 0) == 0);
}

TEST_CASE("stochastic subcommands are byte-identical across thread counts") {
  Fixture f;
  const auto p1 = run("--canonical --threads 1 simulate-power --config " + f.sim +
                      " --seed 5 --reps 8 --oracle-pairs 5000");
  const auto p3 = run("simulate-power --config " + f.sim +
                      " --seed 5 --reps 8 --oracle-pairs 5000 --canonical --threads 3");
  REQUIRE(p1.code == 0);
  CHECK(p1.out == p3.out);
  CHECK(p1.out.find("duration_seconds") == std::string::npos);
  const auto penv = run("simulate-power --config " + f.sim + " --seed 5 --reps 8 --oracle-pairs 5000 --canonical",
                        "RANKJOINT_THREADS=2");
  CHECK(penv.out == p1.out);
  CHECK(run("simulate-power --config " + f.sim + " --seed 6 --reps 8 --oracle-pairs 5000 --canonical").out !=
        p1.out);

  const std::string sens = "sensitivity --in " + f.data + " --schema " + f.schema +
                           " --p 0 0.1 0.5 --iters 15 --seed 9 --canonical";
  const auto s1 = run(sens + " --threads 1");
  const auto s2 = run(sens + " --threads 4");
  REQUIRE(s1.code == 0);
  CHECK(s1.out == s2.out);

  const auto n1 = run("simulate-power --analysis null-efficiency --k 2 3 --config " + f.sim +
                      " --seed 2 --reps 6 --canonical --threads 1");
  const auto n2 = run("simulate-power --analysis null-efficiency --k 2 3 --config " + f.sim +
                      " --seed 2 --reps 6 --canonical --threads 2");
  REQUIRE(n1.code == 0);
  CHECK(n1.out == n2.out);

  const auto d1 = (workdir() / "d1.csv").string();
  const auto d2 = (workdir() / "d2.csv").string();
  CHECK(run("simulate-data --config " + f.sim + " --seed 3 --out " + d1 + " --threads 1").code == 0);
  CHECK(run("simulate-data --config " + f.sim + " --seed 3 --out " + d2 + " --threads 2").code == 0);
  CHECK(slurp(d1) == slurp(d2));
}

TEST_CASE("efficiency, test-consistency and report") {
  Fixture f;
  auto r = run("efficiency --k 2 3 4 6");
  REQUIRE(r.code == 0);
  const auto table = Json::parse(r.out)["theoretical"];
  CHECK(table.size() == 4);
  CHECK(table[3]["variance_ratio"].get<double>() == doctest::Approx(7.0 / 45.0));

  const auto rcc = (workdir() / "rcc.json").string();
  const auto fcc = (workdir() / "fcc.json").string();
  const auto fcc_data = (workdir() / "fcc.csv").string();
  REQUIRE(run("fit --in " + f.data + " --schema " + f.schema + " --out " + rcc).code == 0);
  REQUIRE(run("simulate-data --config " + f.sim + " --seed 12 --mode forced-choice --out " + fcc_data).code == 0);
  REQUIRE(run("fit --mode forced-choice --in " + fcc_data + " --schema " + f.schema + " --out " + fcc).code == 0);
  r = run("efficiency --fit-a " + fcc + " --fit-b " + rcc + " --time-a 110 --time-b 154");
  REQUIRE(r.code == 0);
  const auto cmp = Json::parse(r.out)["comparison"];
  CHECK(cmp["se_comparison"]["reduction"].get<double>() > 0.0);
  CHECK(cmp["precision_per_time"]["mean"].contains("relative"));
  CHECK(run("efficiency --fit-a " + fcc).code == 1);

  const auto retest = write("retest.csv",
                            "subject,kind,original_better,retest_better\n"
                            "1,transitivity,1,0\n2,transitivity,1,1\n3,transitivity,0,0\n"
                            "41,transitivity,1,1\n42,transitivity,0,1\n1,iia,1,1\n41,iia,0,1\n");
  std::string cond_text = "subject,condition\n";
  for (int s = 1; s <= 80; ++s) cond_text += std::to_string(s) + (s <= 40 ? ",K3a\n" : ",K3b\n");
  const auto cond = write("cond.csv", cond_text);
  const auto summary = (workdir() / "summary.json").string();
  r = run("test-consistency --main " + f.data + " --retest " + retest + " --schema " + f.schema +
          " --conditions " + cond + " --out " + summary);
  REQUIRE(r.code == 0);
  const auto s = Json::parse(slurp(summary));
  CHECK(s["transitivity"]["conditions"].size() == 2);
  CHECK(s["refit_excluding_violators"].size() == 2);
  CHECK(s["refit_excluding_violators"][0]["excluded_subjects"] == 1);

  const auto text = (workdir() / "report.txt").string();
  r = run("report --fit " + fcc + " " + rcc + " --name fcc rcc --time 110 154 --k 2 3 --consistency " +
          summary + " --text " + text);
  REQUIRE(r.code == 0);
  const auto rep = Json::parse(r.out);
  CHECK(rep["coefficients"].size() == 3);
  CHECK(rep["comparisons"][0]["design"] == "rcc");
  CHECK(rep["consistency"].contains("transitivity"));
  CHECK_FALSE(rep["consistency"].contains("manifest"));
  CHECK(slurp(text).find("AMCE estimates") != std::string::npos);
  CHECK(run("report --fit " + fcc + " " + rcc + " --name onlyone").code == 1);
}
