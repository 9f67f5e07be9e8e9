#include <set>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "disent/errors.hpp"
#include "disent/runner.hpp"

using namespace disent;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("disent_runner_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kSmallSweep = R"(
[model]
latent_dim = 3
conv_widths = [4, 4, 4]
fc_width = 16

[regularizer]
kind = "beta"
beta = 1.0

[regularizer.factor]
gamma = 5.0

[train]
steps = 4
batch_size = 4
learning_rate = 1e-3

[train.discriminator]
hidden_width = 8
num_layers = 3

[sweep]
kinds = ["beta", "factor"]
latent_dims = [3]
steps = [2, 4]
seeds = [0, 1]

[metrics]
fv_votes_train = 20
fv_votes_eval = 20
fv_batch = 16
fv_std_samples = 200
prune_std_threshold = 0.0
mig_samples = 300
dci_trees = 2
dci_max_depth = 4
)";

SweepSpec small_spec(const fs::path& out) {
  auto spec = parse_sweep_spec(kSmallSweep);
  spec.output_dir = out;
  return spec;
}

RunRecord make_record(std::string kind, int latent, long steps, std::uint64_t seed,
                      std::array<double, 5> m) {
  RunRecord r;
  r.kind = std::move(kind);
  r.latent_dim = latent;
  r.steps = steps;
  r.seed = seed;
  r.config_hash = "h" + std::to_string(latent) + "_" + std::to_string(steps) + "_" + std::to_string(seed);
  r.run_id = r.kind + "-" + r.config_hash;
  r.metrics.factor_vae = m[0];
  r.metrics.sap = m[1];
  r.metrics.dci = m[2];
  r.metrics.irs = m[3];
  r.metrics.mig = m[4];
  r.recon = 123.456789012345678;
  r.wall_time = 1.0 / 3.0;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

bool same_results(const RunRecord& a, const RunRecord& b) {
  return a.run_id == b.run_id && a.config_hash == b.config_hash && a.error == b.error &&
         a.metrics.factor_vae == b.metrics.factor_vae && a.metrics.sap == b.metrics.sap &&
         a.metrics.dci == b.metrics.dci && a.metrics.irs == b.metrics.irs &&
         a.metrics.mig == b.metrics.mig && a.recon == b.recon;
}

}  // namespace

TEST_CASE("sweep config parsing") {
  const auto spec = parse_sweep_spec(kSmallSweep, "/base");
  CHECK(spec.grid.kinds.size() == 2);
  CHECK(spec.regularizer_for(RegularizerKind::factor).gamma == 5.0);
  CHECK(spec.regularizer_for(RegularizerKind::beta).beta == 1.0);
  CHECK(spec.regularizer_for(RegularizerKind::dip_i).lambda_d == 100.0);
  CHECK(spec.train.discriminator.hidden_width == 8);
  CHECK(spec.metrics.mig_samples == 300);
  CHECK(spec.output_dir == fs::path("/base/runs"));

  const auto single = parse_sweep_spec("[train]\nsteps = 7\nseed = 3\n");
  CHECK(single.grid.steps == std::vector<long>{7});
  CHECK(single.grid.seeds == std::vector<std::uint64_t>{3});
  CHECK(expand_sweep(single).size() == 1);

  const auto nested = parse_sweep_spec(
      "[regularizer]\nkind = \"factor\"\ngamma = 20.0\n[regularizer.beta]\nbeta = 1.0\n");
  CHECK(nested.train.regularizer.gamma == 20.0);
  CHECK(nested.regularizer_for(RegularizerKind::beta).beta == 1.0);

  CHECK_THROWS_AS(parse_sweep_spec("[train]\nstepz = 7\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec("[extra]\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec("[sweep]\nseeds = [1, 1]\n"), ConfigError);
  CHECK_THROWS_AS(expand_sweep(parse_sweep_spec("[sweep]\nkinds = []\n")), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec("[regularizer]\nkind = \"bottleneck\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec("[train\n"), ConfigError);
}

TEST_CASE("expand order, hashes and run ids") {
  const auto spec = small_spec("/unused");
  const auto configs = expand_sweep(spec);
  REQUIRE(configs.size() == 8);
  CHECK(configs[0].regularizer.kind == RegularizerKind::beta);
  CHECK(configs[0].steps == 2);
  CHECK(configs[1].seed == 1);
  CHECK(configs[2].steps == 4);
  CHECK(configs[4].regularizer.kind == RegularizerKind::factor);
  CHECK(configs[4].regularizer.gamma == 5.0);

  std::set<std::string> hashes, ids;
  for (const auto& c : configs) {
    const auto h = config_hash(spec.dataset, c, spec.metrics);
    CHECK(h == config_hash(spec.dataset, c, spec.metrics));
    hashes.insert(h);
    ids.insert(make_run_id(c, h));
  }
  CHECK(hashes.size() == 8);
  CHECK(ids.size() == 8);
  const auto h0 = config_hash(spec.dataset, configs[0], spec.metrics);
  CHECK(make_run_id(configs[0], h0) == "beta-d3-s2-seed0-" + h0.substr(0, 8));
  auto m = spec.metrics;
  m.mig_bins = 21;
  CHECK(config_hash(spec.dataset, configs[0], m) != h0);
}

TEST_CASE("a shared trajectory matches separate runs") {
  const auto spec = small_spec("/unused");
  const auto ds = GroundTruthDataset::build(spec.dataset);
  const auto configs = expand_sweep(spec);
  const auto shared = run_trajectory(ds, {configs[4], configs[6]}, spec);
  const auto alone_short = run_trajectory(ds, {configs[4]}, spec);
  const auto alone_long = run_trajectory(ds, {configs[6]}, spec);
  REQUIRE(shared.size() == 2);
  CHECK(shared[0].ok());
  CHECK(same_results(shared[0], alone_short[0]));
  CHECK(same_results(shared[1], alone_long[0]));
  CHECK(shared[1].wall_time >= shared[0].wall_time);
}

TEST_CASE("invalid configs become error rows") {
  const auto spec = small_spec("/unused");
  const auto ds = GroundTruthDataset::build(spec.dataset);
  auto bad = expand_sweep(spec)[0];
  bad.steps = 0;
  const auto rows = run_trajectory(ds, {bad}, spec);
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].ok());
  CHECK(rows[0].error.find("invalid config") != std::string::npos);
  CHECK(std::isnan(rows[0].metrics.mig));
}

TEST_CASE("sweeps are idempotent and independent of the worker count") {
  const auto dir1 = scratch("w1"), dir3 = scratch("w3");
  const auto one = run_sweep(small_spec(dir1), 1);
  CHECK(one.executed == 8);
  REQUIRE(one.records.size() == 8);
  for (const auto& r : one.records) CHECK(r.ok());

  const auto again = run_sweep(small_spec(dir1), 2);
  CHECK(again.executed == 0);
  const auto lines_before = slurp(dir1 / "results.jsonl");

  const auto three = run_sweep(small_spec(dir3), 3);
  CHECK(three.executed == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(same_results(one.records[i], three.records[i]));
    CHECK(same_results(one.records[i], again.records[i]));
  }
  CHECK(slurp(dir1 / "results.jsonl") == lines_before);
  CHECK_FALSE(fs::exists(dir1 / ".pending"));

  // A torn trailing line is ignored and its run is redone.
  {
    std::ofstream out(dir1 / "results.jsonl", std::ios::app);
    out << "{\"run_id\": \"tor";
  }
  CHECK(read_records_jsonl(dir1 / "results.jsonl").size() == 8);
}

TEST_CASE("a sweep only runs the missing configurations") {
  const auto dir = scratch("partial");
  auto spec = small_spec(dir);
  spec.grid.seeds = {0};
  CHECK(run_sweep(spec, 1).executed == 4);
  spec.grid.seeds = {0, 1};
  const auto more = run_sweep(spec, 1);
  CHECK(more.executed == 4);
  CHECK(more.records.size() == 8);
}

TEST_CASE("record json round-trip") {
  auto r = make_record("factor", 10, 5000, 2, {0.1, 0.2, 0.3, 0.4, 0.5});
  r.metrics.dci_detail = {0.3, 0.6, 0.9};
  const auto back = record_from_json(record_to_json(r));
  CHECK(same_results(r, back));
  CHECK(back.metrics.dci_detail.completeness == 0.6);
  RunRecord failed = r;
  failed.error = "training failed: boom";
  const auto fb = record_from_json(record_to_json(failed));
  CHECK_FALSE(fb.ok());
  CHECK(fb.error == failed.error);
  CHECK_THROWS_AS(record_from_json(nlohmann::json{{"run_id", "x"}}), SchemaError);
}

TEST_CASE("results csv round-trip is lossless") {
  const auto dir = scratch("csv");
  std::vector<RunRecord> records{make_record("beta", 8, 5000, 0, {0.1, 1e-17, 0.987654321987654, 2.0 / 3.0, 0.0}),
                                 make_record("factor", 16, 20000, 1, {0.5, 0.25, 0.125, 0.0625, 1.0})};
  records.push_back(records[0]);
  records.back().run_id = "failed-run";
  records.back().error = "error";
  emit_csv(records, dir / "r.csv");
  const auto text = slurp(dir / "r.csv");
  CHECK(text.rfind("run_id,kind,latent_dim,steps,seed,factor_vae,sap,dci,irs,mig,recon,wall_time\n", 0) == 0);
  const auto back = parse_records_csv(dir / "r.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].run_id == records[i].run_id);
    CHECK(back[i].kind == records[i].kind);
    CHECK(back[i].latent_dim == records[i].latent_dim);
    CHECK(back[i].steps == records[i].steps);
    CHECK(back[i].seed == records[i].seed);
    for (auto name : kMetricNames) CHECK(back[i].metric(name) == records[i].metric(name));
    CHECK(back[i].recon == records[i].recon);
    CHECK(back[i].wall_time == records[i].wall_time);
  }
  CHECK_FALSE(back[2].ok());

  emit_csv({}, dir / "empty.csv");
  CHECK(slurp(dir / "empty.csv") == "run_id,kind,latent_dim,steps,seed,factor_vae,sap,dci,irs,mig,recon,wall_time\n");
  CHECK_THROWS(emit_csv(records, dir / "missing_dir" / "r.csv"));
  CHECK_FALSE(fs::exists(dir / "missing_dir" / "r.csv.partial"));
}

TEST_CASE("aggregation uses the sample standard deviation and skips error rows") {
  std::vector<RunRecord> records{make_record("beta", 8, 100, 0, {0.2, 0.1, 0.1, 0.1, 0.1}),
                                 make_record("beta", 8, 100, 1, {0.4, 0.1, 0.1, 0.1, 0.1}),
                                 make_record("beta", 8, 100, 2, {0.6, 0.1, 0.1, 0.1, 0.1}),
                                 make_record("beta", 16, 100, 0, {0.6, 0.1, 0.1, 0.1, 0.1})};
  records.push_back(records[0]);
  records.back().error = "boom";
  const auto rows = aggregate(records);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].n == 3);
  CHECK(rows[0].mean.at("factor_vae") == doctest::Approx(0.4));
  CHECK(rows[0].stddev.at("factor_vae") == doctest::Approx(0.2));
  CHECK(rows[1].n == 1);
  CHECK_FALSE(rows[1].stddev.contains("factor_vae"));
}

TEST_CASE("ranking") {
  std::vector<RunRecord> records{make_record("beta", 8, 100, 0, {0.2, 0.2, 0.2, 0.2, 0.2}),
                                 make_record("beta", 16, 100, 0, {0.3, 0.3, 0.3, 0.3, 0.3}),
                                 make_record("beta", 32, 100, 0, {0.1, 0.1, 0.1, 0.1, 0.1})};
  auto rows = aggregate(records);
  CHECK(rank_rows(rows).front().latent_dim == 16);
  auto shifted = rows;
  for (auto& r : shifted)
    for (auto& [name, v] : r.mean) v += 7.5;
  const auto a = rank_rows(rows), b = rank_rows(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].latent_dim == b[i].latent_dim);

  CHECK(rank_rows({rows[2]}).front().latent_dim == 32);
  auto tie = aggregate({make_record("x", 64, 1, 0, {0.3, 0.3, 0.3, 0.3, 0.3}),
                        make_record("x", 16, 1, 0, {0.3, 0.3, 0.3, 0.3, 0.3})});
  CHECK(rank_rows(tie).front().latent_dim == 16);

  auto missing = rows[0];
  missing.mean.erase("mig");
  CHECK_THROWS_AS(missing.score(), SchemaError);
  CHECK_THROWS_AS(rank_rows({missing}), SchemaError);
}

TEST_CASE("published-style tables rank to their bold rows") {
  const auto latent = rank_rows(read_table_csv(fs::path(DISENT_FIXTURES) / "latent_sensitivity.csv"));
  REQUIRE(latent.size() == 7);
  CHECK(latent.front().latent_dim == 512);
  CHECK(latent.front().score() == doctest::Approx(0.4517).epsilon(1e-4));
  CHECK(latent[1].latent_dim == 256);
  CHECK(latent[1].score() == doctest::Approx(0.4342).epsilon(1e-4));

  const auto steps = rank_rows(read_table_csv(fs::path(DISENT_FIXTURES) / "training_steps.csv"));
  REQUIRE(steps.size() == 3);
  CHECK(steps.front().steps == 1000000);
  CHECK(steps.front().kind == "FactorVAE");
  CHECK(steps.front().score() == doctest::Approx(0.4343).epsilon(1e-4));
}

TEST_CASE("table reader header aliases and errors") {
  const auto dir = scratch("tables");
  {
    std::ofstream out(dir / "t.csv");
    out << "Model,latent_dim,Training Step,factorvae_score,SAP,DCI,IRS,MIG\n"
        << "beta,8,5k,0.1,0.2,0.3,0.4,0.5\n"
        << "\"factor\",8,20k,0.5,0.4,0.3,0.2,0.1\n";
  }
  const auto rows = read_table_csv(dir / "t.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].kind == "beta");
  CHECK(rows[0].steps == 5000);
  CHECK(rows[1].steps == 20000);
  CHECK(rows[1].mean.at("factor_vae") == 0.5);
  {
    std::ofstream out(dir / "missing.csv");
    out << "latent,FactorVAE,sap,dci,irs\n8,0.1,0.2,0.3,0.4\n";
  }
  CHECK_THROWS_AS(rank_rows(read_table_csv(dir / "missing.csv")), SchemaError);
  {
    std::ofstream out(dir / "bad.csv");
    out << "latent,FactorVAE,sap,dci,irs,mig\n8,0.1,zero,0.3,0.4,0.5\n";
  }
  CHECK_THROWS_AS(read_table_csv(dir / "bad.csv"), SchemaError);

  CHECK(parse_step_count("30k") == 30000);
  CHECK(parse_step_count("1000K") == 1000000);
  CHECK(parse_step_count("2M") == 2000000);
  CHECK(parse_step_count(" 512 ") == 512);
  CHECK_THROWS_AS(parse_step_count("lots"), SchemaError);

  // A results CSV is read back as per-group aggregates.
  emit_csv({make_record("beta", 8, 100, 0, {0.2, 0.2, 0.2, 0.2, 0.2}),
            make_record("beta", 8, 100, 1, {0.4, 0.2, 0.2, 0.2, 0.2})},
           dir / "results.csv");
  const auto agg = read_table_csv(dir / "results.csv");
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].n == 2);
}

TEST_CASE("report mirrors the table and bolds the winner") {
  const auto dir = scratch("report");
  const auto rows = read_table_csv(fs::path(DISENT_FIXTURES) / "latent_sensitivity.csv");
  emit_report(rows, dir);
  const auto md = slurp(dir / "report.md");
  for (const char* d : {"256", "768", "1024", "1536", "2048", "3072"})
    CHECK(md.find("| " + std::string(d) + " |") != std::string::npos);
  CHECK(md.find("| **512** |") != std::string::npos);
  CHECK(md.find("**256**") == std::string::npos);
  for (auto name : kMetricNames) {
    const auto png = dir / (std::string(name) + ".png");
    REQUIRE(fs::exists(png));
    std::ifstream in(png, std::ios::binary);
    char sig[8];
    in.read(sig, 8);
    CHECK(std::string(sig + 1, 3) == "PNG");
  }
  const auto agg_path = dir / "aggregate.csv";
  emit_aggregate_csv({}, agg_path);
  CHECK(slurp(agg_path).find("kind,latent_dim,steps,n_seeds,factor_vae_mean") == 0);
}
