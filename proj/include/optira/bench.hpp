#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "optira/llm.hpp"
#include "optira/pipeline.hpp"

namespace optira {

inline constexpr std::string_view kMetricsSchema = "optira-metrics/1";

struct CorpusProblem {
  std::string id;
  std::string text;
  std::optional<StandardForm> reference_model;
  std::optional<double> known_optimum;
  std::vector<std::string> tags;
};

/// JSON array of {id, text, reference_model?, known_optimum?, tags}.
/// Throws InputError naming the line or field at fault, an empty corpus, or a
/// duplicate id.
std::vector<CorpusProblem> parse_corpus(const std::string& text, const std::string& origin = "corpus");
std::vector<CorpusProblem> load_corpus(const std::string& path);

struct ProblemRates {
  int trials = 0;
  double success_rate = 0.0;
  double execution_rate = 0.0;
};

struct Metrics {
  std::string ablation = "full";
  std::size_t problems = 0;
  std::size_t runs = 0;
  double success_rate = 0.0;    // mean over problems of the mean V over trials
  double execution_rate = 0.0;  // likewise over Q
  std::map<std::string, ProblemRates> per_problem;
};

nlohmann::json to_json(const Metrics& m);

/// Means of means over the records. Throws InputError for no records or
/// records from more than one ablation configuration.
Metrics compute_metrics(const std::vector<RunRecord>& records);

struct BenchOptions {
  int N = 10;
  int jobs = 1;
  /// Where runs.jsonl goes; empty keeps the records in memory only.
  std::string out_dir;
  PipelineConfig pipeline;

  void validate() const;
};

struct BenchResult {
  std::vector<RunRecord> records;  // problem order, then trial order
  Metrics metrics;
  std::string records_path;
};

/// N runs per problem on a worker pool. Each run gets its own backend
/// session. Records are written to <out_dir>/runs.jsonl before the metrics
/// are computed. A null backend runs every problem from its reference model.
BenchResult run_benchmark(const std::vector<CorpusProblem>& corpus, LlmBackend* backend,
                          const BenchOptions& options);
/// Builds the backend first so configuration errors abort before any run.
BenchResult run_benchmark(const std::vector<CorpusProblem>& corpus, const BackendConfig& backend,
                          const BenchOptions& options);

void write_records(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records(const std::string& path);

struct Report {
  std::string text;
  nlohmann::json json;
};

/// Per-problem table, aggregate rates and K/L usage histograms.
/// Throws InputError for no records or mixed ablation configurations.
Report emit_report(const std::vector<RunRecord>& records, const Metrics& metrics);

}  // namespace optira
