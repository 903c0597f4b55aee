#include "optira/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "optira/error.hpp"
#include "optira/model_json.hpp"

namespace optira {

using nlohmann::json;

namespace {

std::size_t line_of(const std::string& text, std::size_t byte) {
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + std::min(byte, text.size()), '\n')) + 1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<CorpusProblem> parse_corpus(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(origin + ":" + std::to_string(line_of(text, e.byte)) + ": invalid JSON: " + e.what());
  }
  if (!doc.is_array()) throw InputError(origin + ": corpus must be a JSON array");
  if (doc.empty()) throw InputError(origin + ": empty corpus");
  std::vector<CorpusProblem> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& p = doc[i];
    const std::string where = origin + ": [" + std::to_string(i) + "]";
    if (!p.is_object()) throw InputError(where + " must be an object");
    for (const auto& [key, value] : p.items()) {
      if (key != "id" && key != "text" && key != "reference_model" && key != "known_optimum" && key != "tags") {
        throw InputError(where + " has unexpected field '" + key + "'");
      }
    }
    CorpusProblem cp;
    if (!p.contains("id") || !p["id"].is_string() || p["id"].get<std::string>().empty()) {
      throw InputError(where + ".id must be a non-empty string");
    }
    cp.id = p["id"].get<std::string>();
    if (!ids.insert(cp.id).second) throw InputError(origin + ": duplicate problem id '" + cp.id + "'");
    if (!p.contains("text") || !p["text"].is_string()) throw InputError(where + ".text must be a string");
    cp.text = p["text"].get<std::string>();
    if (p.contains("reference_model") && !p["reference_model"].is_null()) {
      try {
        cp.reference_model = model_from_json(p["reference_model"]);
      } catch (const Error& e) {
        throw InputError(where + ".reference_model: " + e.what());
      }
      cp.reference_model->metadata.id = cp.id;
    }
    if (p.contains("known_optimum") && !p["known_optimum"].is_null()) {
      if (!p["known_optimum"].is_number()) throw InputError(where + ".known_optimum must be a number");
      cp.known_optimum = p["known_optimum"].get<double>();
    }
    if (p.contains("tags")) {
      if (!p["tags"].is_array()) throw InputError(where + ".tags must be an array of strings");
      for (const json& t : p["tags"]) {
        if (!t.is_string()) throw InputError(where + ".tags must be an array of strings");
        cp.tags.push_back(t.get<std::string>());
      }
    }
    out.push_back(std::move(cp));
  }
  return out;
}

std::vector<CorpusProblem> load_corpus(const std::string& path) { return parse_corpus(read_file(path), path); }

json to_json(const Metrics& m) {
  json rows = json::array();
  for (const auto& [id, r] : m.per_problem) {
    rows.push_back({{"id", id}, {"trials", r.trials}, {"success_rate", r.success_rate},
                    {"execution_rate", r.execution_rate}});
  }
  return {{"schema", kMetricsSchema},
          {"ablation", m.ablation},
          {"problems", m.problems},
          {"runs", m.runs},
          {"success_rate", m.success_rate},
          {"execution_rate", m.execution_rate},
          {"per_problem", rows}};
}

Metrics compute_metrics(const std::vector<RunRecord>& records) {
  if (records.empty()) throw InputError("no run records");
  Metrics m;
  m.ablation = records.front().ablation;
  struct Sums {
    int n = 0;
    int v = 0;
    int q = 0;
  };
  std::map<std::string, Sums> sums;
  for (const RunRecord& r : records) {
    if (r.ablation != m.ablation) {
      throw InputError("mixed ablation configs '" + m.ablation + "' and '" + r.ablation + "' (reports are per-config)");
    }
    Sums& s = sums[r.problem_id];
    ++s.n;
    s.v += r.V;
    s.q += r.Q;
  }
  double sr = 0.0;
  double er = 0.0;
  for (const auto& [id, s] : sums) {
    ProblemRates pr{s.n, static_cast<double>(s.v) / s.n, static_cast<double>(s.q) / s.n};
    sr += pr.success_rate;
    er += pr.execution_rate;
    m.per_problem[id] = pr;
  }
  m.problems = sums.size();
  m.runs = records.size();
  m.success_rate = sr / static_cast<double>(m.problems);
  m.execution_rate = er / static_cast<double>(m.problems);
  return m;
}

void BenchOptions::validate() const {
  if (N < 1 || N > 100) throw InputError("N must be in 1..100");
  if (jobs < 1) throw InputError("jobs must be at least 1");
  pipeline.validate();
}

void write_records(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  for (const RunRecord& r : records) out << to_json(r).dump() << "\n";
  if (!out) throw InputError("failed writing " + path);
}

std::vector<RunRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<RunRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw InputError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

BenchResult run_benchmark(const std::vector<CorpusProblem>& corpus, LlmBackend* backend,
                          const BenchOptions& options) {
  options.validate();
  if (corpus.empty()) throw InputError("empty corpus");
  const std::size_t N = static_cast<std::size_t>(options.N);
  const std::size_t total = corpus.size() * N;
  std::vector<RunRecord> records(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const CorpusProblem& p = corpus[task / N];
      const int trial = static_cast<int>(task % N) + 1;
      PipelineInput input{p.id, p.text, p.reference_model};
      std::unique_ptr<LlmBackend> session = backend ? backend->session() : nullptr;
      try {
        records[task] = run_pipeline(input, session.get(), options.pipeline, trial);
      } catch (const std::exception& e) {
        RunRecord r;
        r.problem_id = p.id;
        r.trial = trial;
        r.seed = trial_seed(p.id, trial);
        r.ablation = options.pipeline.ablation.label();
        r.outcome = RunOutcome::InternalError;
        r.message = e.what();
        records[task] = std::move(r);
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(total)));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  BenchResult res;
  res.records = std::move(records);
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    res.records_path = (std::filesystem::path(options.out_dir) / "runs.jsonl").string();
    write_records(res.records_path, res.records);
  }
  res.metrics = compute_metrics(res.records);
  return res;
}

BenchResult run_benchmark(const std::vector<CorpusProblem>& corpus, const BackendConfig& backend,
                          const BenchOptions& options) {
  options.validate();
  std::unique_ptr<LlmBackend> b = make_backend(backend);
  return run_benchmark(corpus, b.get(), options);
}

namespace {

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

Report emit_report(const std::vector<RunRecord>& records, const Metrics& metrics) {
  const Metrics check = compute_metrics(records);  // also rejects mixed configs
  if (check.ablation != metrics.ablation) {
    throw InputError("metrics were computed for '" + metrics.ablation + "', records are '" + check.ablation + "'");
  }
  struct Row {
    int trials = 0;
    int ecl = 0;
    int fdc = 0;
    std::map<std::string, int> outcomes;
  };
  std::map<std::string, Row> rows;
  std::map<int, int> k_hist;
  std::map<int, int> l_hist;
  for (const RunRecord& r : records) {
    Row& row = rows[r.problem_id];
    ++row.trials;
    row.ecl += r.ecl_iterations;
    row.fdc += r.fdc_iterations;
    ++row.outcomes[std::string(to_string(r.outcome))];
    ++k_hist[r.ecl_iterations];
    ++l_hist[r.fdc_iterations];
  }

  std::size_t id_width = 8;
  for (const auto& [id, row] : rows) id_width = std::max(id_width, id.size() + 2);
  std::ostringstream t;
  t << "ablation: " << metrics.ablation << "\n"
    << "problems: " << metrics.problems << "  runs: " << metrics.runs << "\n\n"
    << pad("problem", id_width) << pad("trials", 8) << pad("exec", 8) << pad("success", 9) << pad("ecl k", 8)
    << pad("fdc l", 8) << "outcomes\n";
  json table = json::array();
  for (const auto& [id, row] : rows) {
    const ProblemRates& pr = metrics.per_problem.at(id);
    std::string outcomes;
    json oc = json::object();
    for (const auto& [name, count] : row.outcomes) {
      if (!outcomes.empty()) outcomes += ", ";
      outcomes += name + " x" + std::to_string(count);
      oc[name] = count;
    }
    const double mean_k = static_cast<double>(row.ecl) / row.trials;
    const double mean_l = static_cast<double>(row.fdc) / row.trials;
    t << pad(id, id_width) << pad(std::to_string(row.trials), 8) << pad(fixed(pr.execution_rate), 8)
      << pad(fixed(pr.success_rate), 9) << pad(fixed(mean_k, 2), 8) << pad(fixed(mean_l, 2), 8) << outcomes
      << "\n";
    table.push_back({{"id", id},
                     {"trials", row.trials},
                     {"execution_rate", pr.execution_rate},
                     {"success_rate", pr.success_rate},
                     {"mean_ecl_iterations", mean_k},
                     {"mean_fdc_iterations", mean_l},
                     {"outcomes", oc}});
  }
  t << "\nExecutionRate " << fixed(metrics.execution_rate, 4) << "\n"
    << "SuccessRate   " << fixed(metrics.success_rate, 4) << "\n";

  auto histogram = [&](const char* title, const std::map<int, int>& h, json& out) {
    t << "\n" << title << "\n";
    out = json::object();
    for (const auto& [k, n] : h) {
      t << "  " << pad(std::to_string(k), 4) << std::string(static_cast<std::size_t>(n), '#') << " " << n << "\n";
      out[std::to_string(k)] = n;
    }
  };
  json kj;
  json lj;
  histogram("ECL iterations used (k)", k_hist, kj);
  histogram("FDC iterations used (l)", l_hist, lj);

  Report rep;
  rep.text = t.str();
  rep.json = {{"metrics", to_json(metrics)},
              {"problems", table},
              {"histograms", {{"ecl_k", kj}, {"fdc_l", lj}}}};
  return rep;
}

}  // namespace optira
