// disent: dataset dump, training, evaluation, sweeps and ranking.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "disent/config.hpp"
#include "disent/errors.hpp"
#include "disent/image_io.hpp"
#include "disent/runner.hpp"
#include "disent/serialization.hpp"

namespace fs = std::filesystem;
using namespace disent;

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json report_json(const MetricReport& r, const MetricConfig& cfg) {
  nlohmann::json j = r;
  j["config"] = cfg;
  return j;
}

int data_dump(const fs::path& spec_path, const fs::path& out_dir, long limit) {
  const auto spec = load_sweep_spec(spec_path);
  const auto dataset = GroundTruthDataset::build(spec.dataset);
  fs::create_directories(out_dir);
  std::ofstream index(out_dir / "factors.csv", std::ios::trunc);
  index << "filename";
  for (std::size_t k = 0; k < dataset.factors().size(); ++k) index << ",f" << k;
  index << '\n';
  std::uint64_t total = dataset.num_configurations();
  if (limit > 0) total = std::min<std::uint64_t>(total, static_cast<std::uint64_t>(limit));
  for (std::uint64_t i = 0; i < total; ++i) {
    const auto tuple = dataset.tuple_at(i);
    std::string name = "img";
    for (int v : tuple.values) name += "_" + std::to_string(v);
    name += ".png";
    write_observation_png(out_dir / name, dataset.render(tuple));
    index << name;
    for (int v : tuple.values) index << ',' << v;
    index << '\n';
  }
  if (!index) throw std::runtime_error("failed writing factors.csv");
  std::cout << "wrote " << total << " images to " << out_dir.string() << '\n';
  return 0;
}

int train_cmd(const fs::path& config_path, std::uint64_t seed, fs::path out_dir, bool skip_eval) {
  const auto spec = load_sweep_spec(config_path);
  TrainConfig config = spec.train;
  config.seed = seed;
  config.validate();
  const auto hash = config_hash(spec.dataset, config, spec.metrics);
  const auto run_id = make_run_id(config, hash);
  if (out_dir.empty()) out_dir = spec.output_dir / run_id;
  fs::create_directories(out_dir);
  const auto dataset = GroundTruthDataset::build(spec.dataset);

  TrainOptions options;
  options.trace_csv = out_dir / "trace.csv";
  options.checkpoint_path = out_dir / "checkpoint.bin";
  options.checkpoint_every = std::max<long>(1000, config.steps / 10);
  fs::remove(options.trace_csv);
  const long every = std::max<long>(1, config.steps / 20);
  options.on_step = [&](const StepRecord& r) {
    if ((r.step + 1) % every == 0 || r.step + 1 == config.steps)
      std::printf("step %ld recon %.3f kl %.3f reg %.3f\n", r.step + 1, r.recon, r.kl, r.reg);
  };
  auto result = train(dataset, config, options);
  std::cout << "run " << run_id << " finished; checkpoint " << options.checkpoint_path.string() << '\n';
  if (skip_eval) return 0;
  Rng rng(stream_seed(spec.metrics.seed, config.seed));
  const auto report = evaluate_all(result.state.model, dataset, spec.metrics, rng);
  write_json(out_dir / "metrics.json", report_json(report, spec.metrics));
  std::printf("factor_vae %.4f sap %.4f dci %.4f irs %.4f mig %.4f\n", report.factor_vae,
              report.sap, report.dci, report.irs, report.mig);
  return 0;
}

int eval_cmd(const fs::path& rep_path, const fs::path& out, const fs::path& config_path) {
  MetricConfig cfg;
  if (!config_path.empty()) cfg = load_sweep_spec(config_path).metrics;
  const auto rep = read_representation_csv(rep_path);
  Rng rng(cfg.seed);
  const auto report = evaluate_representation(rep, cfg, rng);
  const auto j = report_json(report, cfg);
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json(out, j);
  return 0;
}

int sweep_cmd(const fs::path& config_path, int workers, const fs::path& out_dir) {
  auto spec = load_sweep_spec(config_path);
  if (!out_dir.empty()) spec.output_dir = out_dir;
  const auto result = run_sweep(spec, workers, [](const RunRecord& r) {
    if (r.ok())
      std::printf("%s factor_vae %.4f sap %.4f dci %.4f irs %.4f mig %.4f (%.0fs)\n",
                  r.run_id.c_str(), r.metrics.factor_vae, r.metrics.sap, r.metrics.dci,
                  r.metrics.irs, r.metrics.mig, r.wall_time);
    else
      std::printf("%s error: %s\n", r.run_id.c_str(), r.error.c_str());
    std::fflush(stdout);
  });
  emit_csv(result.records, spec.output_dir / "results.csv");
  const auto rows = aggregate(result.records);
  emit_aggregate_csv(rows, spec.output_dir / "aggregate.csv");
  std::cout << result.executed << " new runs, " << result.records.size() << " total; results in "
            << spec.output_dir.string() << '\n';
  return 0;
}

int report_cmd(const fs::path& in, const fs::path& out_dir) {
  if (!fs::exists(in)) throw std::runtime_error("no such file " + in.string());
  const auto records = read_records_jsonl(in);
  const auto rows = aggregate(records);
  emit_report(rows, out_dir);
  emit_csv(records, out_dir / "results.csv");
  emit_aggregate_csv(rows, out_dir / "aggregate.csv");
  std::cout << "report written to " << (out_dir / "report.md").string() << '\n';
  return 0;
}

int rank_cmd(const fs::path& in) {
  const auto ranked = rank_rows(read_table_csv(in));
  std::printf("%-4s %-32s %8s", "rank", "config", "mean");
  for (auto name : kMetricNames) std::printf(" %10s", std::string(name).c_str());
  std::printf("\n");
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    std::printf("%-4zu %-32s %8.4f", i + 1, r.label.c_str(), r.score());
    for (auto name : kMetricNames) std::printf(" %10.4f", r.mean.at(std::string(name)));
    std::printf("\n");
  }
  if (!ranked.empty()) {
    const auto& w = ranked.front();
    std::printf("winner: %s kind=%s latent_dim=%ld steps=%ld\n", w.label.c_str(), w.kind.c_str(),
                w.latent_dim, w.steps);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"disent: disentangled representation experiments"};
  app.require_subcommand(1);

  auto* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  auto* dump = data->add_subcommand("dump", "write every rendered image and a factors.csv index");
  fs::path dump_spec, dump_out;
  long dump_limit = 0;
  dump->add_option("--spec", dump_spec, "config file with a [dataset] section")->required();
  dump->add_option("--out", dump_out, "output directory")->required();
  dump->add_option("--limit", dump_limit, "only the first N configurations");

  auto* train = app.add_subcommand("train", "train one model and score it");
  fs::path train_config, train_out;
  std::uint64_t train_seed = 0;
  bool skip_eval = false;
  train->add_option("--config", train_config)->required();
  train->add_option("--seed", train_seed)->required();
  train->add_option("--out", train_out, "run directory (default <output_dir>/<run_id>)");
  train->add_flag("--skip-eval", skip_eval);

  auto* eval = app.add_subcommand("eval", "score a stored representation");
  fs::path eval_rep, eval_out, eval_config;
  eval->add_option("--rep", eval_rep, "CSV with columns z0.., f0..")->required();
  eval->add_option("--out", eval_out, "JSON output (stdout when omitted)");
  eval->add_option("--config", eval_config, "config file whose [metrics] section is used");

  auto* sweep = app.add_subcommand("sweep", "run a grid of trainings");
  fs::path sweep_config;
  int workers = 1;
  sweep->add_option("--config", sweep_config)->required();
  fs::path sweep_out;
  sweep->add_option("--workers", workers)->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "output directory (overrides the config)");

  auto* report = app.add_subcommand("report", "aggregate results into a table and charts");
  fs::path report_in, report_out;
  report->add_option("--in", report_in, "results.jsonl")->required();
  report->add_option("--out", report_out)->required();

  auto* rank = app.add_subcommand("rank", "rank configurations by the mean of the five scores");
  fs::path rank_in;
  rank->add_option("--in", rank_in, "results or table CSV")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (dump->parsed()) return data_dump(dump_spec, dump_out, dump_limit);
    if (train->parsed()) return train_cmd(train_config, train_seed, train_out, skip_eval);
    if (eval->parsed()) return eval_cmd(eval_rep, eval_out, eval_config);
    if (sweep->parsed()) return sweep_cmd(sweep_config, workers, sweep_out);
    if (report->parsed()) return report_cmd(report_in, report_out);
    if (rank->parsed()) return rank_cmd(rank_in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
