#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "faasflow/config.hpp"
#include "faasflow/faas_executor.hpp"
#include "faasflow/object_store.hpp"
#include "faasflow/shuffle_reduce.hpp"

namespace faasflow {

struct StageResources {
  std::uint32_t memory_mb = 1769;
  std::uint32_t vcpus = 0; // 0 = derived from memory
};

// Every knob the pipeline leaves open, with the defaults used when the
// config file does not mention the key.
struct PipelineConfig {
  std::string store_root = "store";
  std::string bucket = "genomics";
  std::string fasta_key = "inputs/reference.fa";
  std::string fastq_key = "inputs/reads.fq";
  std::string output_key = "out/variants.tsv";

  std::uint64_t fasta_chunk_bases = 1000000;
  std::uint64_t fastq_chunk_bytes = 1000000;
  // -1 resolves to max read length - 1, so every alignment fits wholly
  // inside at least one genome chunk.
  std::int64_t overlap_bases = -1;

  std::uint32_t max_mismatches = 2;
  double theta = 0.2;
  std::uint32_t min_depth = 2;

  std::size_t limit = 1000;
  SubmitMode mode = SubmitMode::wave;
  std::uint32_t retries = 2;
  std::size_t workers = 4;

  double usd_per_gbsec = 0.0000166667;
  double usd_per_select_gb = 0.002;

  double alpha = 0.5; // reduce budget = alpha x reduce memory
  std::size_t n_samples = 64;
  bool use_select = true;
  bool keep_intermediates = true;

  std::uint64_t bandwidth_mbps = 0; // simulated store bandwidth, 0 = off

  StageResources res_align{8192, 0};
  StageResources res_reduce{1769, 0};
  StageResources res_default{1769, 0};

  // Synthetic-workload knobs for the parallelism sweep.
  std::uint64_t sweep_total_mb = 32;
  std::size_t sweep_base_invocations = 8;
  double sweep_cpu_s_per_mb = 0.05;

  static PipelineConfig from_config(const Config& config);
  void validate() const;
  std::uint64_t reduce_budget_bytes() const;
  CallerConfig caller() const { return CallerConfig{theta, min_depth}; }
};

// Object keys the pipeline writes between stages.
namespace keys {
std::string fai(const std::string& fasta_key);
std::string fasta_plan();
std::string fastq_plan();
std::string map_object(std::size_t fasta_chunk, std::size_t fastq_chunk);
std::string corrected_object(std::size_t fasta_chunk, std::size_t fastq_chunk);
std::string mpileup_object(std::size_t fasta_chunk, std::size_t fastq_chunk);
std::string shuffle_table(std::size_t fasta_chunk);
std::string calls_partial(std::size_t fasta_chunk, std::size_t partition);
} // namespace keys

struct StageReport {
  std::string stage;
  std::size_t task_count = 0;
  double started_at = 0; // seconds since run start
  double wall_s = 0;
  double fetch_s_total = 0;
  double compute_s_total = 0;
  double store_s_total = 0;
  double gbsec = 0;
  std::uint64_t bytes_fetched = 0;
  std::uint64_t bytes_stored = 0;
  std::uint64_t scan_bytes = 0;
  FlightLog flights;
  std::vector<TaskResult> tasks;
};

struct RunReport {
  std::vector<StageReport> stages;
  double wall_s = 0;
  double total_gbsec = 0;
  double gbsec_usd = 0;
  std::uint64_t scan_bytes_total = 0;
  double select_usd = 0;
  ObjectRef output;

  std::string to_json() const;
  static RunReport from_json(const std::string& text);
};

// Registers the pipeline stage handlers plus the "noop" and "synthetic"
// stages used by experiments and tests.
TaskRegistry make_stage_registry();

// The three-phase run: index + partition planning, the align/correct/
// mpileup map stages over the FASTA x FASTQ cartesian product, then
// shuffle planning, reduce and concatenation. Every stage is one
// independent executor batch; any task failure aborts with the stage
// named, leaving intermediates in the store for diagnosis.
RunReport run_pipeline(ObjectStore& store, const PipelineConfig& config);

// Single-pass single-node run of the same computation: no partitioning,
// no executor, no scans. Writes <output_key>.oracle and returns its ref.
ObjectRef oracle_run(ObjectStore& store, const PipelineConfig& config);

struct SweepRow {
  std::uint32_t vcpus = 0;
  std::size_t invocations = 0;
  double mean_fetch_s = 0;
  double mean_compute_s = 0;
  double gbsec = 0;
  double usd = 0;
};

// Fixed data volume redistributed across function counts that scale
// inversely with vcpus per function; measures per-invocation fetch and
// compute means for each setting.
std::vector<SweepRow> parallelism_sweep(ObjectStore& store, const PipelineConfig& config,
                                        const std::vector<std::uint32_t>& vcpu_settings);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Writes concurrency.csv, stage_summary.tsv, tasks.csv and
// cost_summary.txt into out_dir.
void report_stats(const RunReport& report, const std::filesystem::path& out_dir);

} // namespace faasflow
