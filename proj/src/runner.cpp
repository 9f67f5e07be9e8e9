#include "disent/runner.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "disent/errors.hpp"
#include "disent/image_io.hpp"
#include "disent/serialization.hpp"

namespace disent {
namespace {

constexpr std::size_t kReconWindow = 100;
constexpr long kLargeScaleSteps = 100000;
constexpr int kLargeScaleLatent = 128;

const char* const kCsvHeader =
    "run_id,kind,latent_dim,steps,seed,factor_vae,sap,dci,irs,mig,recon,wall_time";

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.empty()) return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("cannot parse " + what + " value '" + t + "'");
  }
}

// Writes through a temporary sibling so a failed write leaves no partial file.
template <class Body>
void write_atomically(const std::filesystem::path& path, Body&& body) {
  const auto tmp = std::filesystem::path(path.string() + ".partial");
  try {
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      body(out);
      out.flush();
      if (!out) throw std::runtime_error("failed writing " + path.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw;
  }
}

RunRecord error_record(const TrainConfig& config, const std::string& hash, std::string message) {
  RunRecord r;
  r.config_hash = hash;
  r.run_id = make_run_id(config, hash);
  r.kind = std::string(to_string(config.regularizer.kind));
  r.latent_dim = config.model.latent_dim;
  r.steps = config.steps;
  r.seed = config.seed;
  r.recon = std::nan("");
  for (double* m : {&r.metrics.factor_vae, &r.metrics.sap, &r.metrics.dci, &r.metrics.irs,
                    &r.metrics.mig})
    *m = std::nan("");
  r.error = std::move(message);
  return r;
}

std::string describe(const std::exception& e) {
  std::string text = e.what();
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    text += ": " + describe(inner);
  } catch (...) {
  }
  return text;
}

// Configs that may share one training trajectory: identical apart from `steps`.
std::string trajectory_key(const SweepSpec& spec, TrainConfig config) {
  config.steps = 1;
  return config_hash(spec.dataset, config, spec.metrics);
}

}  // namespace

double RunRecord::metric(std::string_view name) const {
  if (name == "factor_vae") return metrics.factor_vae;
  if (name == "sap") return metrics.sap;
  if (name == "dci") return metrics.dci;
  if (name == "irs") return metrics.irs;
  if (name == "mig") return metrics.mig;
  throw SchemaError("unknown metric " + std::string(name));
}

std::string config_hash(const DatasetSpec& dataset, const TrainConfig& config,
                        const MetricConfig& metrics) {
  return stable_digest(nlohmann::json{{"dataset", dataset}, {"train", config}, {"metrics", metrics}});
}

std::string make_run_id(const TrainConfig& config, const std::string& hash) {
  std::ostringstream id;
  id << to_string(config.regularizer.kind) << "-d" << config.model.latent_dim << "-s" << config.steps
     << "-seed" << config.seed << "-" << hash.substr(0, 8);
  return id.str();
}

std::vector<TrainConfig> expand_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<TrainConfig> out;
  for (auto kind : spec.grid.kinds)
    for (int latent : spec.grid.latent_dims)
      for (long steps : spec.grid.steps)
        for (auto seed : spec.grid.seeds) {
          TrainConfig c = spec.train;
          c.regularizer = spec.regularizer_for(kind);
          c.model.latent_dim = latent;
          c.steps = steps;
          c.seed = seed;
          out.push_back(c);
        }
  return out;
}

std::vector<RunRecord> run_trajectory(const GroundTruthDataset& dataset,
                                      const std::vector<TrainConfig>& configs,
                                      const SweepSpec& spec) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::vector<RunRecord> records;
  std::vector<TrainConfig> valid;
  for (const auto& c : configs) {
    try {
      c.validate();
      if (c.model.image_size != dataset.image_size())
        throw ConfigError("model image_size differs from dataset image_size");
      valid.push_back(c);
    } catch (const std::exception& e) {
      records.push_back(error_record(c, config_hash(spec.dataset, c, spec.metrics),
                                     std::string("invalid config: ") + e.what()));
    }
  }
  if (valid.empty()) return records;
  std::stable_sort(valid.begin(), valid.end(),
                   [](const TrainConfig& a, const TrainConfig& b) { return a.steps < b.steps; });

  RunState state = RunState::initial(valid.back());
  std::deque<double> recent;
  std::string failure;
  for (const auto& c : valid) {
    const std::string hash = config_hash(spec.dataset, c, spec.metrics);
    if (!failure.empty()) {
      records.push_back(error_record(c, hash, failure));
      continue;
    }
    try {
      while (state.step < c.steps) {
        recent.push_back(train_step(dataset, state).recon);
        if (recent.size() > kReconWindow) recent.pop_front();
      }
    } catch (const std::exception& e) {
      failure = std::string("training failed: ") + e.what();
      records.push_back(error_record(c, hash, failure));
      continue;
    }
    RunRecord r = error_record(c, hash, "");
    r.recon = std::accumulate(recent.begin(), recent.end(), 0.0) / static_cast<double>(recent.size());
    try {
      Rng rng(stream_seed(spec.metrics.seed, c.seed));
      r.metrics = evaluate_all(state.model, dataset, spec.metrics, rng);
      r.metrics.validate();
    } catch (const std::exception& e) {
      r.error = "evaluation failed: " + describe(e);
    }
    r.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    records.push_back(r);
  }
  return records;
}

nlohmann::json record_to_json(const RunRecord& r) {
  nlohmann::json j{{"run_id", r.run_id},         {"config_hash", r.config_hash},
                   {"kind", r.kind},             {"latent_dim", r.latent_dim},
                   {"steps", r.steps},           {"seed", r.seed},
                   {"wall_time", r.wall_time}};
  if (r.ok()) {
    j["metrics"] = r.metrics;
    j["recon"] = r.recon;
  } else {
    j["error"] = r.error;
  }
  return j;
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    j.at("run_id").get_to(r.run_id);
    j.at("config_hash").get_to(r.config_hash);
    j.at("kind").get_to(r.kind);
    j.at("latent_dim").get_to(r.latent_dim);
    j.at("steps").get_to(r.steps);
    j.at("seed").get_to(r.seed);
    r.wall_time = j.value("wall_time", 0.0);
    if (j.contains("error")) {
      r.error = j.at("error").get<std::string>();
      r.error = r.error.empty() ? "error" : r.error;
      r.recon = std::nan("");
      for (double* m : {&r.metrics.factor_vae, &r.metrics.sap, &r.metrics.dci, &r.metrics.irs,
                        &r.metrics.mig})
        *m = std::nan("");
    } else {
      j.at("metrics").get_to(r.metrics);
      j.at("recon").get_to(r.recon);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

std::vector<RunRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted coordinator; the run will be redone.
      continue;
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

SweepResult run_sweep(const SweepSpec& spec, int workers,
                      const std::function<void(const RunRecord&)>& on_record) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  const auto configs = expand_sweep(spec);
  for (const auto& c : configs)
    if (c.steps > kLargeScaleSteps || c.model.latent_dim > kLargeScaleLatent) {
      std::cerr << "warning: large-scale sweep (steps up to " << c.steps << ", latent_dim "
                << c.model.latent_dim << "); expect a very long CPU runtime\n";
      break;
    }

  std::error_code ec;
  std::filesystem::create_directories(spec.output_dir, ec);
  const auto results_path = spec.output_dir / "results.jsonl";
  const auto pending_dir = spec.output_dir / ".pending";
  std::filesystem::create_directories(pending_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + pending_dir.string() + ": " + ec.message());
  std::ofstream results(results_path, std::ios::app);
  if (!results) throw std::runtime_error("results file is not writable: " + results_path.string());

  std::map<std::string, RunRecord> done;
  for (auto& r : read_records_jsonl(results_path)) done.emplace(r.config_hash, std::move(r));

  std::vector<std::string> hashes;
  std::vector<std::vector<TrainConfig>> jobs;
  std::map<std::string, std::size_t> job_of_key;
  for (const auto& c : configs) {
    hashes.push_back(config_hash(spec.dataset, c, spec.metrics));
    if (done.contains(hashes.back())) continue;
    const auto key = trajectory_key(spec, c);
    auto [it, fresh] = job_of_key.emplace(key, jobs.size());
    if (fresh) jobs.emplace_back();
    auto& job = jobs[it->second];
    if (std::none_of(job.begin(), job.end(), [&](const TrainConfig& o) { return o == c; }))
      job.push_back(c);
  }

  SweepResult result;
  const auto dataset = jobs.empty() ? std::optional<GroundTruthDataset>{}
                                    : std::optional(GroundTruthDataset::build(spec.dataset));
  auto accept = [&](RunRecord r) {
    if (done.contains(r.config_hash)) return;
    results << record_to_json(r).dump() << '\n';
    results.flush();
    if (!results) throw std::runtime_error("failed appending to " + results_path.string());
    ++result.executed;
    if (on_record) on_record(r);
    done.emplace(r.config_hash, std::move(r));
  };

  std::map<pid_t, std::size_t> running;
  std::size_t next = 0;
  while (next < jobs.size() || !running.empty()) {
    while (next < jobs.size() && running.size() < static_cast<std::size_t>(workers)) {
      const auto out_file = pending_dir / ("job" + std::to_string(next) + ".jsonl");
      std::cout.flush();
      std::cerr.flush();
      const pid_t pid = fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          const auto records = run_trajectory(*dataset, jobs[next], spec);
          const auto tmp = std::filesystem::path(out_file.string() + ".tmp");
          {
            std::ofstream out(tmp, std::ios::trunc);
            for (const auto& r : records) out << record_to_json(r).dump() << '\n';
            if (!out) code = 2;
          }
          if (code == 0) std::filesystem::rename(tmp, out_file);
        } catch (...) {
          code = 1;
        }
        _exit(code);
      }
      running.emplace(pid, next++);
    }
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    if (pid < 0) throw std::runtime_error("waitpid failed");
    const auto it = running.find(pid);
    if (it == running.end()) continue;
    const std::size_t job = it->second;
    running.erase(it);
    const auto out_file = pending_dir / ("job" + std::to_string(job) + ".jsonl");
    for (auto& r : read_records_jsonl(out_file)) accept(std::move(r));
    std::filesystem::remove(out_file, ec);
    for (const auto& c : jobs[job]) {
      const auto hash = config_hash(spec.dataset, c, spec.metrics);
      if (done.contains(hash)) continue;
      std::ostringstream msg;
      msg << "worker exited abnormally (status " << status << ")";
      accept(error_record(c, hash, msg.str()));
    }
  }
  std::filesystem::remove(pending_dir, ec);

  for (const auto& h : hashes) result.records.push_back(done.at(h));
  return result;
}

// ------------------------------------------------------------ aggregation

double AggregateRow::score() const {
  double total = 0;
  for (auto name : kMetricNames) {
    const auto it = mean.find(std::string(name));
    if (it == mean.end() || std::isnan(it->second))
      throw SchemaError("row '" + label + "' lacks metric " + std::string(name));
    total += it->second;
  }
  return total / static_cast<double>(kMetricNames.size());
}

namespace {

std::string group_label(const std::string& kind, long latent_dim, long steps) {
  std::ostringstream out;
  out << kind;
  if (latent_dim > 0) out << " d=" << latent_dim;
  if (steps > 0) out << " steps=" << steps;
  return trim(out.str());
}

struct Accumulator {
  AggregateRow row;
  std::map<std::string, std::vector<double>> values;
};

std::vector<AggregateRow> finish(std::vector<Accumulator>& groups) {
  std::vector<AggregateRow> out;
  for (auto& g : groups) {
    for (const auto& [name, vals] : g.values) {
      std::vector<double> present;
      for (double v : vals)
        if (!std::isnan(v)) present.push_back(v);
      if (present.empty()) continue;
      const double n = static_cast<double>(present.size());
      const double mean = std::accumulate(present.begin(), present.end(), 0.0) / n;
      g.row.mean[name] = mean;
      if (present.size() >= 2) {
        double ss = 0;
        for (double v : present) ss += (v - mean) * (v - mean);
        g.row.stddev[name] = std::sqrt(ss / (n - 1));
      }
    }
    out.push_back(std::move(g.row));
  }
  return out;
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records) {
  std::vector<Accumulator> groups;
  std::map<std::tuple<std::string, long, long>, std::size_t> index;
  for (const auto& r : records) {
    if (!r.ok()) continue;
    const auto key = std::make_tuple(r.kind, static_cast<long>(r.latent_dim), r.steps);
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) {
      Accumulator acc;
      acc.row.kind = r.kind;
      acc.row.latent_dim = r.latent_dim;
      acc.row.steps = r.steps;
      acc.row.label = group_label(r.kind, r.latent_dim, r.steps);
      groups.push_back(std::move(acc));
    }
    auto& g = groups[it->second];
    ++g.row.n;
    for (auto name : kMetricNames) g.values[std::string(name)].push_back(r.metric(name));
    g.values["recon"].push_back(r.recon);
  }
  return finish(groups);
}

std::vector<AggregateRow> rank_rows(std::vector<AggregateRow> rows) {
  std::vector<std::pair<double, AggregateRow>> scored;
  for (auto& r : rows) {
    const double s = r.score();
    scored.emplace_back(s, std::move(r));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    if (a.second.latent_dim != b.second.latent_dim) return a.second.latent_dim < b.second.latent_dim;
    if (a.second.steps != b.second.steps) return a.second.steps < b.second.steps;
    return a.second.kind < b.second.kind;
  });
  std::vector<AggregateRow> out;
  for (auto& [s, r] : scored) out.push_back(std::move(r));
  return out;
}

// -------------------------------------------------------------------- CSV

void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  write_atomically(path, [&](std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
      out << csv_field(r.run_id) << ',' << csv_field(r.kind) << ',' << r.latent_dim << ','
          << r.steps << ',' << r.seed;
      for (auto name : kMetricNames) out << ',' << (r.ok() ? format_double(r.metric(name)) : "");
      out << ',' << (r.ok() ? format_double(r.recon) : "") << ',' << format_double(r.wall_time)
          << '\n';
    }
  });
}

std::vector<RunRecord> parse_records_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw SchemaError("empty CSV " + path.string());
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kCsvHeader) throw SchemaError("unexpected results CSV header: " + header);
  std::vector<RunRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 12) throw SchemaError("results CSV row " + std::to_string(i) + " has wrong arity");
    RunRecord r;
    r.run_id = f[0];
    r.kind = f[1];
    r.latent_dim = static_cast<int>(parse_number(f[2], "latent_dim"));
    r.steps = static_cast<long>(parse_number(f[3], "steps"));
    r.seed = std::stoull(f[4]);
    r.metrics.factor_vae = parse_number(f[5], "factor_vae");
    r.metrics.sap = parse_number(f[6], "sap");
    r.metrics.dci = parse_number(f[7], "dci");
    r.metrics.irs = parse_number(f[8], "irs");
    r.metrics.mig = parse_number(f[9], "mig");
    r.metrics.dci_detail.disentanglement = r.metrics.dci;
    r.recon = parse_number(f[10], "recon");
    r.wall_time = parse_number(f[11], "wall_time");
    if (std::isnan(r.metrics.factor_vae)) r.error = "error";
    out.push_back(r);
  }
  return out;
}

void emit_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  write_atomically(path, [&](std::ostream& out) {
    out << "kind,latent_dim,steps,n_seeds";
    for (auto name : kMetricNames) out << ',' << name << "_mean," << name << "_std";
    out << ",recon_mean,score\n";
    for (const auto& r : rows) {
      out << csv_field(r.kind) << ',' << r.latent_dim << ',' << r.steps << ',' << r.n;
      auto get = [](const std::map<std::string, double>& m, const std::string& k) {
        const auto it = m.find(k);
        return it == m.end() ? std::string() : format_double(it->second);
      };
      for (auto name : kMetricNames)
        out << ',' << get(r.mean, std::string(name)) << ',' << get(r.stddev, std::string(name));
      out << ',' << get(r.mean, "recon") << ',' << format_double(r.score()) << '\n';
    }
  });
}

long parse_step_count(std::string_view text) {
  std::string t = trim(std::string(text));
  if (t.empty()) throw SchemaError("empty step count");
  long scale = 1;
  const char suffix = static_cast<char>(std::tolower(static_cast<unsigned char>(t.back())));
  if (suffix == 'k') scale = 1000;
  if (suffix == 'm') scale = 1000000;
  if (scale != 1) t.pop_back();
  const double v = parse_number(t, "step count");
  if (std::isnan(v) || v < 0) throw SchemaError("bad step count '" + std::string(text) + "'");
  return std::lround(v * static_cast<double>(scale));
}

std::vector<AggregateRow> read_table_csv(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw SchemaError("empty CSV " + path.string());
  if (rows[0].size() == 12) {
    std::string header;
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
    if (header == kCsvHeader) return aggregate(parse_records_csv(path));
  }

  enum class Role { metric, kind, latent, steps, ignored, label };
  std::vector<Role> roles;
  std::vector<std::string> metric_of;
  for (const auto& raw : rows[0]) {
    std::string h;
    for (char c : trim(raw)) {
      if (std::isalnum(static_cast<unsigned char>(c))) h += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      else if (!h.empty() && h.back() != '_') h += '_';
    }
    while (!h.empty() && h.back() == '_') h.pop_back();
    std::string metric;
    if (h == "factorvae" || h == "factor_vae" || h == "factorvae_score" || h == "factorvae_metric") metric = "factor_vae";
    else if (h == "sap" || h == "sap_score") metric = "sap";
    else if (h == "dci" || h == "dci_score" || h == "dci_disentanglement") metric = "dci";
    else if (h == "irs" || h == "irs_score") metric = "irs";
    else if (h == "mig" || h == "mig_score") metric = "mig";
    metric_of.push_back(metric);
    if (!metric.empty()) roles.push_back(Role::metric);
    else if (h.find("latent") != std::string::npos) roles.push_back(Role::latent);
    else if (h.find("step") != std::string::npos) roles.push_back(Role::steps);
    else if (h == "kind" || h == "model" || h == "method" || h.find("vae") != std::string::npos ||
             h.find("variant") != std::string::npos)
      roles.push_back(Role::kind);
    else if (h == "seed" || h == "run_id" || h == "recon" || h == "wall_time" || h == "n_seeds")
      roles.push_back(Role::ignored);
    else
      roles.push_back(Role::label);
  }

  // "FactorVAE (30k)" carries both a model name and a count.
  static const std::regex annotated(R"(^\s*(.*?)\s*\(\s*([^()]+?)\s*\)\s*$)");
  std::vector<Accumulator> groups;
  std::map<std::tuple<std::string, long, long, std::string>, std::size_t> index;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != roles.size())
      throw SchemaError("row " + std::to_string(i) + " of " + path.string() + " has wrong arity");
    std::string kind, extra, label;
    long latent = 0, steps = 0;
    std::map<std::string, double> metrics;
    for (std::size_t c = 0; c < f.size(); ++c) {
      std::string value = trim(f[c]);
      switch (roles[c]) {
        case Role::metric:
          metrics[metric_of[c]] = parse_number(value, metric_of[c]);
          break;
        case Role::kind:
          kind = value;
          break;
        case Role::latent:
        case Role::steps: {
          std::smatch m;
          std::string count = value;
          if (std::regex_match(value, m, annotated)) {
            if (!m[1].str().empty()) kind = m[1].str();
            count = m[2].str();
          }
          (roles[c] == Role::latent ? latent : steps) = parse_step_count(count);
          break;
        }
        case Role::label:
          extra += (extra.empty() ? "" : " ") + value;
          break;
        case Role::ignored:
          break;
      }
    }
    label = group_label(kind.empty() ? extra : kind, latent, steps);
    const auto key = std::make_tuple(kind, latent, steps, extra);
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) {
      Accumulator acc;
      acc.row.kind = kind.empty() ? extra : kind;
      acc.row.latent_dim = latent;
      acc.row.steps = steps;
      acc.row.label = label;
      groups.push_back(std::move(acc));
    }
    auto& g = groups[it->second];
    ++g.row.n;
    for (const auto& [name, v] : metrics) g.values[name].push_back(v);
  }
  return finish(groups);
}

// ----------------------------------------------------------------- report

namespace {

void bar_chart(const std::vector<AggregateRow>& rows, const std::string& metric,
               std::size_t winner, const std::filesystem::path& path) {
  constexpr int kWidth = 640, kHeight = 360, kMargin = 20;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(kWidth) * kHeight * 3, 255);
  auto fill = [&](int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> rgb) {
    for (int y = std::max(0, y0); y < std::min(kHeight, y1); ++y)
      for (int x = std::max(0, x0); x < std::min(kWidth, x1); ++x)
        for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * kWidth + x) * 3 + c] = rgb[c];
  };
  double top = 0;
  for (const auto& r : rows) {
    const auto it = r.mean.find(metric);
    if (it != r.mean.end()) top = std::max(top, it->second);
  }
  top = top > 0 ? top : 1.0;
  const int plot_h = kHeight - 2 * kMargin;
  const int slot = rows.empty() ? 0 : (kWidth - 2 * kMargin) / static_cast<int>(rows.size());
  fill(kMargin, kHeight - kMargin, kWidth - kMargin, kHeight - kMargin + 2, {0, 0, 0});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = rows[i].mean.find(metric);
    if (it == rows[i].mean.end()) continue;
    const int h = static_cast<int>(std::lround(std::max(0.0, it->second) / top * plot_h));
    const int x0 = kMargin + static_cast<int>(i) * slot + slot / 6;
    const int x1 = kMargin + static_cast<int>(i + 1) * slot - slot / 6;
    const std::array<std::uint8_t, 3> color =
        i == winner ? std::array<std::uint8_t, 3>{214, 96, 36} : std::array<std::uint8_t, 3>{66, 110, 170};
    fill(x0, kHeight - kMargin - h, x1, kHeight - kMargin, color);
  }
  write_png(path, kWidth, kHeight, 3, px);
}

std::string cell(const AggregateRow& r, const std::string& metric) {
  const auto m = r.mean.find(metric);
  if (m == r.mean.end()) return "-";
  char buf[64];
  const auto s = r.stddev.find(metric);
  if (s != r.stddev.end())
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", m->second, s->second);
  else
    std::snprintf(buf, sizeof buf, "%.4f", m->second);
  return buf;
}

}  // namespace

void emit_report(const std::vector<AggregateRow>& rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<AggregateRow> table = rows;
  std::stable_sort(table.begin(), table.end(), [](const AggregateRow& a, const AggregateRow& b) {
    return std::tie(a.kind, a.latent_dim, a.steps) < std::tie(b.kind, b.latent_dim, b.steps);
  });
  const auto ranked = rank_rows(rows);
  std::size_t winner = table.size();
  for (std::size_t i = 0; i < table.size() && !ranked.empty(); ++i)
    if (table[i].label == ranked.front().label) winner = i;

  const bool show_kind = std::any_of(table.begin(), table.end(), [](const auto& r) { return !r.kind.empty(); });
  const bool show_latent = std::any_of(table.begin(), table.end(), [](const auto& r) { return r.latent_dim > 0; });
  const bool show_steps = std::any_of(table.begin(), table.end(), [](const auto& r) { return r.steps > 0; });

  write_atomically(dir / "report.md", [&](std::ostream& out) {
    out << "# Results\n\n";
    std::string header = "|", rule = "|";
    auto column = [&](const std::string& name) {
      header += " " + name + " |";
      rule += "---|";
    };
    if (show_kind) column("model");
    if (show_latent) column("latent dim");
    if (show_steps) column("steps");
    column("seeds");
    for (const char* name : {"FactorVAE", "sap score", "dci", "irs", "mig", "mean"}) column(name);
    out << header << '\n' << rule << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& r = table[i];
      const bool bold = i == winner;
      auto emit = [&](const std::string& v) { out << ' ' << (bold ? "**" + v + "**" : v) << " |"; };
      out << '|';
      if (show_kind) emit(r.kind);
      if (show_latent) emit(std::to_string(r.latent_dim));
      if (show_steps) emit(std::to_string(r.steps));
      emit(std::to_string(r.n));
      for (auto name : kMetricNames) emit(cell(r, std::string(name)));
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", r.score());
      emit(buf);
      out << '\n';
    }
    if (!ranked.empty()) out << "\nBest configuration (bold): " << ranked.front().label << "\n";
    out << "\nBar charts: ";
    for (std::size_t i = 0; i < kMetricNames.size(); ++i)
      out << (i ? ", " : "") << "[" << kMetricNames[i] << "](" << kMetricNames[i] << ".png)";
    out << "\n";
  });
  for (auto name : kMetricNames)
    bar_chart(table, std::string(name), winner, dir / (std::string(name) + ".png"));
}

}  // namespace disent
