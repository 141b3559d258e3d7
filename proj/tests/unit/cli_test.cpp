#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "marketpulse/cli.hpp"
#include "marketpulse/simgen.hpp"

namespace marketpulse {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
  json j() const { return json::parse(out); }
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "marketpulse");
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Writes `script` to disk, simulates and ingests it; returns the store path.
fs::path build_store(const testing::TempDir& dir, const json& script) {
  const auto script_path = dir.path() / "script.json";
  std::ofstream(script_path) << script.dump(2);
  const auto ds = (dir.path() / "ds").string(), st = (dir.path() / "st").string();
  const auto sim = cli({"simulate", "--script", script_path.string(), "--out", ds});
  EXPECT_EQ(sim.code, 0) << sim.err;
  const auto ing = cli({"ingest", "--data", ds, "--store", st, "--strict"});
  EXPECT_EQ(ing.code, 0) << ing.err;
  return st;
}

json base_script() {
  return {{"name", "cli-test"},
          {"seed", 5},
          {"n_developers", 80},
          {"observation", {{"start", "2012-02-01"}, {"days", 21}}},
          {"topk", {{"cadence_hours", 24}, {"lists", json::array({{{"type", "Free"}, {"length", 40}}})}}}};
}

TEST(CliTest, HelpExitsZero) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("metrics"), std::string::npos);
}

TEST(CliTest, UnknownSubcommandIsUsageError) {
  const auto r = cli({"frobnicate"});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli({}).code, cli::kExitValidation);
}

TEST(CliTest, BadReportNameAndMissingOptions) {
  EXPECT_EQ(cli({"metrics", "volatility", "--store", "x"}).code, cli::kExitValidation);
  EXPECT_EQ(cli({"topk", "overlap"}).code, cli::kExitValidation);  // --list is required
  EXPECT_EQ(cli({"simulate", "--script", "/no/such/script.json", "--out", "x"}).code, cli::kExitValidation);
}

TEST(CliTest, MissingStoreIsIoError) {
  const auto r = cli({"metrics", "popularity", "--store", "/no/such/marketpulse/store"});
  EXPECT_EQ(r.code, cli::kExitIo);
  EXPECT_NE(r.err.find("IoError"), std::string::npos);
}

TEST(CliTest, ExitCodeMapping) {
  EXPECT_EQ(cli::exit_code_for(ErrorCode::IoError), 2);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::CrawlFailed), 2);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::InvalidInput), 1);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::ConfigError), 1);
  EXPECT_EQ(cli::exit_code_for(ErrorCode::InsufficientData), 1);
}

TEST(CliTest, InvalidScriptIsConfigError) {
  testing::TempDir dir;
  auto script = base_script();
  script["unknown_knob"] = 3;
  std::ofstream(dir.path() / "s.json") << script.dump();
  const auto r = cli({"simulate", "--script", (dir.path() / "s.json").string(), "--out", (dir.path() / "ds").string()});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos);
}

TEST(CliTest, AllFreeMarketHasUndefinedDispersion) {
  testing::TempDir dir;
  auto script = base_script();
  script["paid_fraction"] = 0.0;
  const auto st = build_store(dir, script);
  const auto r = cli({"metrics", "price", "--store", st.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.j();
  EXPECT_EQ(j["paid_apps"], 0);
  EXPECT_TRUE(j["cov"]["cross_section"].is_null());
  EXPECT_TRUE(j["cov"]["mean_per_app"].is_null());
  EXPECT_TRUE(j["median_price_cents"]["all"].is_null());
  EXPECT_TRUE(j["decomposition"].is_null());
  EXPECT_TRUE(j.contains("decomposition_note"));
}

TEST(CliTest, StaticListSimilarityIsOne) {
  testing::TempDir dir;
  auto script = base_script();
  script["topk"]["lists"] = json::array({{{"type", "Free"}, {"length", 30}, {"churn_top", 0.0}, {"churn_bottom", 0.0}}});
  const auto st = build_store(dir, script);
  const auto r = cli({"topk", "similarity", "--list", "Free", "--store", st.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "fetch_time,m,n_raw,n_max");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream cells(line);
    std::string t, m;
    std::getline(cells, t, ',');
    std::getline(cells, m, ',');
    EXPECT_DOUBLE_EQ(std::stod(m), 1.0) << line;
  }
  EXPECT_EQ(rows, 20);

  const auto ov = cli({"topk", "overlap", "--list", "Free", "--slice", "top10", "--store", st.string()});
  ASSERT_EQ(ov.code, 0) << ov.err;
  EXPECT_DOUBLE_EQ(ov.j()["o_mean"].get<double>(), 10.0);
  EXPECT_EQ(ov.j()["o_first_last"], 10);
}

TEST(CliTest, PopularitySharesMatchGroundTruth) {
  testing::TempDir dir;
  auto script = base_script();
  script["n_developers"] = 6000;
  script["observation"]["days"] = 3;
  script["topk"]["lists"] = json::array();
  const auto st = build_store(dir, script);
  const auto truth = json::parse(slurp(dir.path() / "ds" / "ground_truth.json"));
  std::map<std::string, double> expected;
  double n = 0;
  for (const auto& a : truth["apps"]) {
    expected[a["popularity"].get<std::string>()] += 1;
    n += 1;
  }
  ASSERT_GT(n, 10000);

  const auto r = cli({"metrics", "popularity", "--store", st.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.j();
  EXPECT_EQ(j["apps"].get<double>(), n);
  const std::map<std::string, double> target{{"Unpopular", 0.752}, {"Popular", 0.241}, {"MostPopular", 0.007}};
  for (const auto& c : j["classes"]) {
    const auto name = c["class"].get<std::string>();
    EXPECT_DOUBLE_EQ(c["share"].get<double>(), expected[name] / n) << name;
    EXPECT_NEAR(c["share"].get<double>(), target.at(name), 0.005) << name;
  }
}

TEST(CliTest, ReportsGoToOutFile) {
  testing::TempDir dir;
  const auto st = build_store(dir, base_script());
  const auto file = dir.path() / "staleness.json";
  const auto r = cli({"metrics", "staleness", "--store", st.string(), "--out", file.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto j = json::parse(slurp(file));
  EXPECT_EQ(j["report"], "staleness");
  EXPECT_EQ(j["reference"], "2012-02-21");
  EXPECT_EQ(j["stale"].get<int>() + j["active"].get<int>(), j["apps"].get<int>());

  const auto bad = cli({"metrics", "staleness", "--store", st.string(), "--out", "/no/such/dir/x.json"});
  EXPECT_EQ(bad.code, cli::kExitIo);
}

TEST(CliTest, StoreFromEnvironment) {
  testing::TempDir dir;
  const auto st = build_store(dir, base_script());
  ::setenv("MARKETPULSE_STORE", st.c_str(), 1);
  const auto r = cli({"anomaly", "decoupling"});
  ::unsetenv("MARKETPULSE_STORE");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.j()["report"], "decoupling");
  EXPECT_EQ(cli({"anomaly", "decoupling"}).code, cli::kExitValidation);
}

TEST(CliTest, EveryReportRuns) {
  testing::TempDir dir;
  auto script = base_script();
  script["fraud_campaigns"] = json::array({{{"app", "com.sim.d1.a0"}, {"start_day", 12}, {"daily_volume", 300}}});
  script["scam_developers"] = json::array({{{"developer", "Shiny Walls"}, {"n_clones", 8}}});
  const auto st = build_store(dir, script).string();
  for (const auto& r : {"staleness", "popularity", "updates", "price", "association", "powerlaw"}) {
    const auto o = cli({"metrics", r, "--store", st});
    EXPECT_EQ(o.code, 0) << r << ": " << o.err;
  }
  EXPECT_EQ(cli({"metrics", "association", "--universe", "observed", "--store", st}).code, 0);
  EXPECT_EQ(cli({"metrics", "powerlaw", "--xmin", "1", "--store", st}).code, 0);
  for (const auto& r : {"lifecycle", "similarity", "overlap", "occupancy", "lifetime"}) {
    const auto o = cli({"topk", r, "--list", "Free", "--store", st});
    EXPECT_EQ(o.code, 0) << r << ": " << o.err;
  }
  EXPECT_EQ(cli({"topk", "lifetime", "--list", "Free", "--ranks", "1,x", "--store", st}).code, 1);
  EXPECT_EQ(cli({"topk", "overlap", "--list", "Sideways", "--store", st}).code, 1);

  const auto reviews = cli({"anomaly", "reviews", "--store", st});
  ASSERT_EQ(reviews.code, 0) << reviews.err;
  ASSERT_EQ(reviews.j()["apps"].size(), 1u);
  EXPECT_EQ(reviews.j()["apps"][0]["app"], "com.sim.d1.a0");
  EXPECT_EQ(reviews.j()["apps"][0]["spikes"][0]["day"], "2012-02-13");

  const auto scam = cli({"anomaly", "scam", "--store", st});
  ASSERT_EQ(scam.code, 0) << scam.err;
  ASSERT_EQ(scam.j()["clusters"].size(), 1u);
  EXPECT_EQ(scam.j()["clusters"][0]["size"], 8);

  EXPECT_EQ(cli({"anomaly", "permissions", "--store", st}).code, 0);
  EXPECT_EQ(cli({"anomaly", "permissions", "--policy", "/no/such/policy.txt", "--store", st}).code, cli::kExitIo);

  const auto flags = dir.path() / "flags.csv";
  std::ofstream(flags) << "app,flag_count\ncom.sim.d1.a0,5\ncom.sim.d2.a0,1\n";
  const auto joined = cli({"anomaly", "permissions", "--flags", flags.string(), "--store", st});
  ASSERT_EQ(joined.code, 0) << joined.err;
  EXPECT_EQ(joined.j()["external_flags"]["apps"].size(), 2u);

  const auto tl = cli({"timeline", "--app", "com.sim.d1.a0", "--store", st});
  ASSERT_EQ(tl.code, 0) << tl.err;
  EXPECT_EQ(tl.out.rfind("app,day,kind,old,new\n", 0), 0u);
  EXPECT_EQ(cli({"timeline", "--app", "com.nobody", "--store", st}).code, 1);
}

TEST(CliTest, CrawlMockMarketDirectory) {
  testing::TempDir dir;
  const auto script_path = dir.path() / "script.json";
  std::ofstream(script_path) << base_script().dump();
  const auto mm = (dir.path() / "mm").string();
  ASSERT_EQ(cli({"simulate", "--script", script_path.string(), "--out", (dir.path() / "ds").string(), "--mock-market", mm}).code, 0);
  const auto out = dir.path() / "crawl";
  const auto r = cli({"crawl", "--seeds", mm + "/seeds.txt", "--market", mm, "--workers", "3", "--delay-ms", "0",
                      "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = r.j();
  EXPECT_TRUE(report["frontier_exhausted"].get<bool>());
  const auto truth = json::parse(slurp(dir.path() / "ds" / "ground_truth.json"));
  EXPECT_EQ(report["snapshots_emitted"], truth["apps"].size());
  EXPECT_TRUE(fs::exists(out / "crawl_report.json"));

  // the crawled snapshots ingest cleanly
  const auto ing = cli({"ingest", "--data", out.string(), "--store", (dir.path() / "st").string(), "--strict"});
  EXPECT_EQ(ing.code, 0) << ing.err;
}

TEST(CliTest, CrawlUnreachableMarketExitsTwo) {
  testing::TempDir dir;
  std::ofstream(dir.path() / "seeds.txt") << "com.a\n";
  const auto r = cli({"crawl", "--seeds", (dir.path() / "seeds.txt").string(), "--market", "127.0.0.1:1", "--out",
                      (dir.path() / "o").string()});
  EXPECT_EQ(r.code, cli::kExitIo);
  EXPECT_NE(r.err.find("CrawlFailed"), std::string::npos);
}

TEST(CliTest, StrictIngestFailsOnRejects) {
  testing::TempDir dir;
  auto snap = testing::make_snapshot("com.bad", 1);
  snap.rating_avg = 9.0;
  fs::create_directories(dir.path() / "ds");
  std::ofstream(dir.path() / "ds" / "snapshots.jsonl") << encode_line(snap) << '\n'
                                                       << encode_line(testing::make_snapshot("com.good", 1)) << '\n';
  const auto st = (dir.path() / "st").string(), ds = (dir.path() / "ds").string();
  const auto lax = cli({"ingest", "--data", ds, "--store", st});
  EXPECT_EQ(lax.code, 0) << lax.err;
  EXPECT_EQ(lax.j()["snapshots"]["rejected"], 1);
  EXPECT_EQ(cli({"ingest", "--data", ds, "--store", st, "--strict"}).code, cli::kExitValidation);
}

}  // namespace
}  // namespace marketpulse
