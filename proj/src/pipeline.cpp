#include "faasflow/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "faasflow/errors.hpp"
#include "faasflow/genome_io.hpp"
#include "faasflow/map_stages.hpp"
#include "faasflow/text.hpp"

namespace faasflow {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

PipelineConfig PipelineConfig::from_config(const Config& c) {
  PipelineConfig p;
  p.store_root = c.get_string("store.root", p.store_root);
  p.bucket = c.get_string("store.bucket", p.bucket);
  p.fasta_key = c.get_string("fasta.key", p.fasta_key);
  p.fastq_key = c.get_string("fastq.key", p.fastq_key);
  p.output_key = c.get_string("output.key", p.output_key);

  p.fasta_chunk_bases = c.get_u64("partition.fasta_chunk_bases", p.fasta_chunk_bases);
  p.fastq_chunk_bytes = c.get_u64("partition.fastq_chunk_bytes", p.fastq_chunk_bytes);
  std::string overlap = c.get_string("partition.overlap_bases", "auto");
  p.overlap_bases = overlap == "auto" ? -1 : parse_i64(overlap, "partition.overlap_bases");

  p.max_mismatches = static_cast<std::uint32_t>(c.get_u64("align.max_mismatches", p.max_mismatches));
  p.theta = c.get_double("caller.theta", p.theta);
  p.min_depth = static_cast<std::uint32_t>(c.get_u64("caller.min_depth", p.min_depth));

  p.limit = c.get_u64("executor.limit", p.limit);
  p.mode = parse_submit_mode(c.get_string("executor.mode", "wave"));
  p.retries = static_cast<std::uint32_t>(c.get_u64("executor.retries", p.retries));
  p.workers = c.get_u64("executor.workers", p.workers);

  p.usd_per_gbsec = c.get_double("cost.usd_per_gbsec", p.usd_per_gbsec);
  p.usd_per_select_gb = c.get_double("cost.usd_per_select_gb", p.usd_per_select_gb);

  p.alpha = c.get_double("shuffle.alpha", p.alpha);
  p.n_samples = c.get_u64("shuffle.n_samples", p.n_samples);
  p.use_select = c.get_bool("shuffle.use_select", p.use_select);
  p.keep_intermediates = c.get_bool("keep_intermediates", p.keep_intermediates);
  p.bandwidth_mbps = c.get_u64("store.bandwidth_mbps", p.bandwidth_mbps);

  auto resources = [&](const std::string& stage, StageResources fallback) {
    StageResources r;
    r.memory_mb = static_cast<std::uint32_t>(
        c.get_u64("resources." + stage + ".memory_mb", fallback.memory_mb));
    r.vcpus = static_cast<std::uint32_t>(
        c.get_u64("resources." + stage + ".vcpus", fallback.vcpus));
    return r;
  };
  p.res_align = resources("align", p.res_align);
  p.res_reduce = resources("reduce", p.res_reduce);
  p.res_default = resources("default", p.res_default);

  p.sweep_total_mb = c.get_u64("sweep.total_mb", p.sweep_total_mb);
  p.sweep_base_invocations = c.get_u64("sweep.base_invocations", p.sweep_base_invocations);
  p.sweep_cpu_s_per_mb = c.get_double("sweep.cpu_s_per_mb", p.sweep_cpu_s_per_mb);

  p.validate();
  return p;
}

void PipelineConfig::validate() const {
  if (fasta_chunk_bases == 0 || fastq_chunk_bytes == 0) {
    throw ConfigError("partition sizes must be positive");
  }
  if (theta <= 0 || theta > 1) {
    throw ConfigError("caller.theta must lie in (0, 1]");
  }
  if (alpha <= 0 || alpha > 1) {
    throw ConfigError("shuffle.alpha must lie in (0, 1]");
  }
  if (limit == 0 || workers == 0 || n_samples == 0) {
    throw ConfigError("executor.limit, executor.workers and shuffle.n_samples must be positive");
  }
  if (usd_per_gbsec < 0 || usd_per_select_gb < 0) {
    throw ConfigError("cost rates must be non-negative");
  }
  if (res_align.memory_mb == 0 || res_reduce.memory_mb == 0 || res_default.memory_mb == 0) {
    throw ConfigError("stage memory must be positive");
  }
}

std::uint64_t PipelineConfig::reduce_budget_bytes() const {
  return static_cast<std::uint64_t>(alpha * static_cast<double>(res_reduce.memory_mb) *
                                    (std::uint64_t{1} << 20));
}

namespace keys {

std::string fai(const std::string& fasta_key) { return fasta_key + ".fai"; }
std::string fasta_plan() { return "plan/fasta_partitions.tsv"; }
std::string fastq_plan() { return "plan/fastq_chunks.tsv"; }

std::string map_object(std::size_t f, std::size_t q) {
  return "map/f" + pad4(f) + "_q" + pad4(q) + ".map";
}
std::string corrected_object(std::size_t f, std::size_t q) {
  return "corrected/f" + pad4(f) + "_q" + pad4(q) + ".map";
}
std::string mpileup_object(std::size_t f, std::size_t q) {
  return "mpileup/f" + pad4(f) + "_q" + pad4(q) + ".tsv";
}
std::string shuffle_table(std::size_t f) { return "plan/shuffle_f" + pad4(f) + ".tsv"; }
std::string calls_partial(std::size_t f, std::size_t p) {
  return "calls/f" + pad4(f) + "_p" + pad4(p) + ".tsv";
}

} // namespace keys

// ---------------------------------------------------------------------------
// Stage handlers

namespace {

// Whole-file fallback used when SELECT is disabled: download the object
// and filter locally. Nothing is billed as scanned.
ScanResult fetch_and_filter(TaskContext& ctx, const ObjectRef& ref, const ScanQuery& query) {
  std::string text = ctx.get(ref);
  ScanResult result = select_rows_text(text, query, ref.id());
  result.second.bytes_scanned = 0;
  return result;
}

SelectFn make_select_fn(TaskContext& ctx, bool use_select) {
  if (use_select) {
    return [&ctx](const ObjectRef& ref, const ScanQuery& q) { return ctx.select(ref, q); };
  }
  return [&ctx](const ObjectRef& ref, const ScanQuery& q) { return fetch_and_filter(ctx, ref, q); };
}

ChromOrder fetch_order(TaskContext& ctx, const std::string& bucket, const std::string& fai_key) {
  return ChromOrder(parse_faidx(ctx.get(bucket, fai_key)));
}

void handle_fasta_index(TaskContext& ctx) {
  const std::string& bucket = ctx.param("bucket");
  const std::string& fasta_key = ctx.param("fasta_key");
  std::string fasta = ctx.get(bucket, fasta_key);
  std::vector<FaidxEntry> entries = build_fasta_index(fasta);
  ctx.put(bucket, keys::fai(fasta_key), serialize_faidx(entries));
}

void handle_align(TaskContext& ctx) {
  const std::string& bucket = ctx.param("bucket");
  std::size_t f = ctx.param_u64("fasta_chunk");
  std::size_t q = ctx.param_u64("fastq_chunk");

  std::vector<FastaPartition> plan =
      parse_fasta_plan(ctx.get(bucket, keys::fasta_plan()));
  std::vector<FastqChunk> chunks = parse_fastq_plan(ctx.get(bucket, keys::fastq_plan()));
  if (f >= plan.size() || q >= chunks.size()) {
    throw PipelineError("align task addresses chunk outside the plan");
  }

  ObjectRef fasta = ctx.head(bucket, ctx.param("fasta_key"));
  std::vector<SpanText> reference = fetch_fasta_partition(
      [&ctx](const ObjectRef& ref, std::uint64_t lo, std::uint64_t hi) {
        return ctx.get_range(ref, lo, hi);
      },
      fasta, plan[f]);

  ObjectRef fastq = ctx.head(bucket, ctx.param("fastq_key"));
  const FastqChunk& chunk = chunks[q];
  std::string chunk_text = ctx.get_range(fastq, chunk.byte_lo, chunk.byte_hi);
  std::uint64_t first_ordinal = 0;
  for (std::size_t i = 0; i < q; ++i) {
    first_ordinal += chunks[i].record_count;
  }
  std::vector<FastqRecord> reads = parse_fastq_records(chunk_text, first_ordinal);

  auto m = static_cast<std::uint32_t>(ctx.param_u64("max_mismatches"));
  std::vector<AlignmentRecord> records =
      align_chunk(reference, reads, m, ctx.vcpus(), f, nullptr);
  ctx.put(bucket, keys::map_object(f, q), serialize_map_records(records));
}

void handle_correct(TaskContext& ctx) {
  const std::string& bucket = ctx.param("bucket");
  std::size_t q = ctx.param_u64("fastq_chunk");
  std::size_t nfasta = ctx.param_u64("nfasta");

  ChromOrder order = fetch_order(ctx, bucket, ctx.param("fai_key"));
  std::vector<FastaPartition> plan = parse_fasta_plan(ctx.get(bucket, keys::fasta_plan()));

  std::vector<AlignmentRecord> candidates;
  for (std::size_t f = 0; f < nfasta; ++f) {
    std::string text = ctx.get(bucket, keys::map_object(f, q));
    std::vector<AlignmentRecord> part = parse_map_records(text, f);
    candidates.insert(candidates.end(), part.begin(), part.end());
  }

  std::vector<AlignmentRecord> kept = correct_index(candidates, order);
  std::vector<std::vector<AlignmentRecord>> routed = route_by_primary_range(kept, plan, order);
  for (std::size_t f = 0; f < routed.size(); ++f) {
    if (!routed[f].empty()) {
      ctx.put(bucket, keys::corrected_object(f, q), serialize_map_records(routed[f]));
    }
  }
}

void handle_mpileup(TaskContext& ctx) {
  const std::string& bucket = ctx.param("bucket");
  std::size_t f = ctx.param_u64("fasta_chunk");
  std::size_t q = ctx.param_u64("fastq_chunk");

  ChromOrder order = fetch_order(ctx, bucket, ctx.param("fai_key"));
  std::vector<FastaPartition> plan = parse_fasta_plan(ctx.get(bucket, keys::fasta_plan()));
  const FastaPartition& partition = plan.at(f);

  std::vector<AlignmentRecord> records =
      parse_map_records(ctx.get(bucket, keys::corrected_object(f, q)), f);

  ObjectRef fasta = ctx.head(bucket, ctx.param("fasta_key"));
  std::vector<SpanText> reference = fetch_fasta_partition(
      [&ctx](const ObjectRef& ref, std::uint64_t lo, std::uint64_t hi) {
        return ctx.get_range(ref, lo, hi);
      },
      fasta, partition);

  std::vector<MpileupRow> rows = make_mpileup(records, reference, partition, order);
  ctx.put(bucket, keys::mpileup_object(f, q),
          serialize_mpileup(rows, order, mpileup_is_keyed(partition)));
}

void handle_shuffle_plan(TaskContext& ctx) {
  const std::string& bucket = ctx.param("bucket");
  std::size_t f = ctx.param_u64("fasta_chunk");
  bool keyed = ctx.param_u64("keyed") != 0;
  bool use_select = ctx.param_u64("use_select") != 0;
  auto chrom_ordinal = static_cast<std::uint32_t>(ctx.param_u64("chrom_ordinal"));
  std::uint64_t budget = ctx.param_u64("budget_bytes");
  std::size_t n_samples = ctx.param_u64("n_samples");

  const std::vector<ObjectRef>& refs = ctx.spec().inputs;
  if (refs.empty()) {
    ctx.put(bucket, keys::shuffle_table(f), "");
    return;
  }

  RowSizeSample sample = sample_row_sizes(
      [&ctx](const ObjectRef& ref) { return ctx.get(ref); }, refs, n_samples);
  IndexColumns columns =
      extract_index_columns(make_select_fn(ctx, use_select), refs, keyed, chrom_ordinal);
  std::vector<ReducePartition> partitions =
      plan_ranges(columns.per_file, sample.max_bytes, budget, f);
  ctx.put(bucket, keys::shuffle_table(f), serialize_partition_table(refs, partitions));
}

void handle_reduce(TaskContext& ctx) {
  const std::string& bucket = ctx.param("bucket");
  std::size_t f = ctx.param_u64("fasta_chunk");
  std::size_t partition_id = ctx.param_u64("partition_id");
  bool keyed = ctx.param_u64("keyed") != 0;
  bool use_select = ctx.param_u64("use_select") != 0;
  CallerConfig caller{ctx.param_double("theta"),
                      static_cast<std::uint32_t>(ctx.param_u64("min_depth"))};

  ChromOrder order = fetch_order(ctx, bucket, ctx.param("fai_key"));
  auto [refs, partitions] =
      parse_partition_table(ctx.get(bucket, keys::shuffle_table(f)), f);
  auto it = std::find_if(partitions.begin(), partitions.end(), [&](const ReducePartition& p) {
    return p.partition_id == partition_id;
  });
  if (it == partitions.end()) {
    throw PipelineError("reduce partition " + std::to_string(partition_id) +
                        " missing from shuffle table of chunk " + std::to_string(f));
  }

  std::vector<VariantCall> calls =
      reduce_partition(make_select_fn(ctx, use_select), *it, keyed, order, caller);
  ctx.put(bucket, keys::calls_partial(f, partition_id), serialize_calls(calls));
}

void handle_concat(TaskContext& ctx) {
  const std::string& bucket = ctx.param("bucket");
  ChromOrder order = fetch_order(ctx, bucket, ctx.param("fai_key"));

  std::vector<std::string> partials;
  for (const ObjectRef& ref : ctx.spec().inputs) {
    try {
      partials.push_back(ctx.get(ref));
    } catch (const NotFoundError&) {
      throw PipelineError("incomplete run: missing partition output " + ref.key);
    }
  }
  ctx.put(bucket, ctx.param("out_key"), concat_call_objects(partials, order));
}

void handle_noop(TaskContext&) {}

// Synthetic workload for experiments: fetch an optional byte range, then
// spin for spin_s wall seconds of "compute" split evenly across the
// task's vcpus, then store an optional marker object.
void handle_synthetic(TaskContext& ctx) {
  if (ctx.spec().params.count("data_key")) {
    ObjectRef data = ctx.head(ctx.param("bucket"), ctx.param("data_key"));
    ctx.get_range(data, ctx.param_u64("byte_lo"), ctx.param_u64("byte_hi"));
  }
  double spin_s = ctx.spec().params.count("spin_s") ? ctx.param_double("spin_s") : 0;
  if (spin_s > 0) {
    std::uint32_t v = ctx.vcpus();
    double share = spin_s / static_cast<double>(v);
    auto spin = [share] {
      Clock::time_point until = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                                   std::chrono::duration<double>(share));
      while (Clock::now() < until) {
      }
    };
    if (v == 1) {
      spin();
    } else {
      std::vector<std::thread> threads;
      for (std::uint32_t i = 0; i < v; ++i) {
        threads.emplace_back(spin);
      }
      for (std::thread& t : threads) {
        t.join();
      }
    }
  }
  if (ctx.spec().params.count("out_key")) {
    ctx.put(ctx.param("bucket"), ctx.param("out_key"),
            std::string(ctx.param_u64("out_bytes"), 'x'));
  }
}

} // namespace

TaskRegistry make_stage_registry() {
  TaskRegistry reg;
  reg.register_stage("fasta_index", handle_fasta_index);
  reg.register_stage("align", handle_align);
  reg.register_stage("correct", handle_correct);
  reg.register_stage("mpileup", handle_mpileup);
  reg.register_stage("shuffle_plan", handle_shuffle_plan);
  reg.register_stage("reduce", handle_reduce);
  reg.register_stage("concat", handle_concat);
  reg.register_stage("noop", handle_noop);
  reg.register_stage("synthetic", handle_synthetic);
  return reg;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

double seconds_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

// Parses "<prefix>fNNNN_xNNNN<suffix>" chunk ids out of an object key.
std::pair<std::size_t, std::size_t> parse_pair_key(const std::string& key) {
  std::size_t f_at = key.find("/f");
  std::size_t sep = key.find('_', f_at);
  std::size_t dot = key.find('.', sep);
  if (f_at == std::string::npos || sep == std::string::npos || dot == std::string::npos) {
    throw PipelineError("unexpected intermediate key layout: " + key);
  }
  std::size_t f = parse_u64(std::string_view(key).substr(f_at + 2, sep - f_at - 2), "key chunk id");
  std::size_t q = parse_u64(std::string_view(key).substr(sep + 2, dot - sep - 2), "key chunk id");
  return {f, q};
}

class StageDriver {
public:
  StageDriver(FaasExecutor& exec, const PipelineConfig& cfg, RunReport& report,
              Clock::time_point run_start)
      : exec_(exec), cfg_(cfg), report_(report), run_start_(run_start) {}

  TaskSpec task(const std::string& stage, std::vector<ObjectRef> inputs,
                std::map<std::string, std::string> params, const StageResources& res) {
    TaskSpec spec;
    spec.task_id = next_task_id_++;
    spec.stage = stage;
    spec.inputs = std::move(inputs);
    spec.params = std::move(params);
    spec.params["bucket"] = cfg_.bucket;
    spec.resources = ResourceConfig{res.memory_mb, res.vcpus};
    return spec;
  }

  const StageReport& run(const std::string& stage, const std::vector<TaskSpec>& tasks) {
    Clock::time_point begin = Clock::now();
    auto [results, flights] = exec_.submit(tasks, cfg_.limit, cfg_.mode);
    Clock::time_point end = Clock::now();

    StageReport sr;
    sr.stage = stage;
    sr.task_count = tasks.size();
    sr.started_at = seconds_between(run_start_, begin);
    sr.wall_s = seconds_between(begin, end);
    for (const TaskResult& r : results) {
      sr.fetch_s_total += r.fetch_s;
      sr.compute_s_total += r.compute_s;
      sr.store_s_total += r.store_s;
      sr.bytes_fetched += r.bytes_fetched;
      sr.bytes_stored += r.bytes_stored;
      sr.scan_bytes += r.scan_bytes;
    }
    sr.gbsec = gbsec_total(results);
    sr.flights = std::move(flights);
    sr.tasks = std::move(results);
    report_.stages.push_back(std::move(sr));

    const StageReport& stored = report_.stages.back();
    for (const TaskResult& r : stored.tasks) {
      if (!r.ok) {
        throw PipelineError("stage " + stage + ": " + r.error);
      }
    }
    if (stored.flights.dependency_violations != 0) {
      throw PipelineError("stage " + stage + ": tasks depend on in-flight results");
    }
    return stored;
  }

private:
  FaasExecutor& exec_;
  const PipelineConfig& cfg_;
  RunReport& report_;
  Clock::time_point run_start_;
  std::uint64_t next_task_id_ = 0;
};

} // namespace

RunReport run_pipeline(ObjectStore& store, const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.bandwidth_mbps > 0) {
    store.set_bandwidth_bytes_per_sec(cfg.bandwidth_mbps << 20);
  }

  ObjectRef fasta;
  ObjectRef fastq;
  try {
    fasta = store.head(cfg.bucket, cfg.fasta_key);
    fastq = store.head(cfg.bucket, cfg.fastq_key);
  } catch (const NotFoundError& e) {
    throw PipelineError(std::string("stage pre-processing: ") + e.what());
  }

  FaasExecutor exec(store, make_stage_registry(),
                    ExecutorOptions{cfg.workers, cfg.retries});
  RunReport report;
  Clock::time_point run_start = Clock::now();
  StageDriver driver(exec, cfg, report, run_start);

  // Pre-processing: index the FASTA, then plan both partitionings.
  driver.run("fasta_index", {driver.task("fasta_index", {fasta},
                                         {{"fasta_key", cfg.fasta_key}}, cfg.res_default)});

  const std::string fai_key = keys::fai(cfg.fasta_key);
  std::vector<FaidxEntry> entries = parse_faidx(store.get(cfg.bucket, fai_key));
  ChromOrder order(entries);

  std::string fastq_text = store.get(cfg.bucket, cfg.fastq_key);
  FastqStats fq_stats;
  std::vector<FastqChunk> fq_chunks =
      plan_fastq_partitions(fastq_text, cfg.fastq_chunk_bytes, &fq_stats);
  fastq_text.clear();

  std::uint64_t overlap;
  if (cfg.overlap_bases >= 0) {
    overlap = static_cast<std::uint64_t>(cfg.overlap_bases);
  } else {
    overlap = fq_stats.max_read_length > 0 ? fq_stats.max_read_length - 1 : 0;
    overlap = std::min<std::uint64_t>(overlap, cfg.fasta_chunk_bases - 1);
  }
  std::vector<FastaPartition> fasta_plan =
      plan_fasta_partitions(entries, cfg.fasta_chunk_bases, overlap);

  ObjectRef fai_ref = store.head(cfg.bucket, fai_key);
  ObjectRef fasta_plan_ref =
      store.put(cfg.bucket, keys::fasta_plan(), serialize_fasta_plan(fasta_plan));
  ObjectRef fastq_plan_ref =
      store.put(cfg.bucket, keys::fastq_plan(), serialize_fastq_plan(fq_chunks));

  // Map phase: the full FASTA x FASTQ cartesian product.
  std::vector<TaskSpec> align_tasks;
  for (std::size_t f = 0; f < fasta_plan.size(); ++f) {
    for (std::size_t q = 0; q < fq_chunks.size(); ++q) {
      align_tasks.push_back(driver.task(
          "align", {fasta, fastq, fasta_plan_ref, fastq_plan_ref},
          {{"fasta_key", cfg.fasta_key},
           {"fastq_key", cfg.fastq_key},
           {"fasta_chunk", std::to_string(f)},
           {"fastq_chunk", std::to_string(q)},
           {"max_mismatches", std::to_string(cfg.max_mismatches)}},
          cfg.res_align));
    }
  }
  driver.run("align", align_tasks);

  // Index correction, one task per FASTQ chunk. Later stages consume the
  // completed stage's task outputs rather than listing the store, so
  // leftovers from earlier runs against the same root cannot leak in.
  std::vector<TaskSpec> correct_tasks;
  for (std::size_t q = 0; q < fq_chunks.size(); ++q) {
    std::vector<ObjectRef> inputs{fai_ref, fasta_plan_ref};
    for (std::size_t f = 0; f < fasta_plan.size(); ++f) {
      inputs.push_back(store.head(cfg.bucket, keys::map_object(f, q)));
    }
    correct_tasks.push_back(driver.task("correct", std::move(inputs),
                                        {{"fai_key", fai_key},
                                         {"fastq_chunk", std::to_string(q)},
                                         {"nfasta", std::to_string(fasta_plan.size())}},
                                        cfg.res_default));
  }
  const StageReport& correct_report = driver.run("correct", correct_tasks);

  // mpileup only for chunk pairs with surviving alignments.
  std::vector<ObjectRef> corrected_refs;
  for (const TaskResult& r : correct_report.tasks) {
    corrected_refs.insert(corrected_refs.end(), r.outputs.begin(), r.outputs.end());
  }
  std::sort(corrected_refs.begin(), corrected_refs.end(),
            [](const ObjectRef& a, const ObjectRef& b) { return a.key < b.key; });

  std::vector<TaskSpec> mpileup_tasks;
  for (const ObjectRef& ref : corrected_refs) {
    auto [f, q] = parse_pair_key(ref.key);
    mpileup_tasks.push_back(driver.task(
        "mpileup", {ref, fasta, fai_ref, fasta_plan_ref},
        {{"fasta_key", cfg.fasta_key},
         {"fai_key", fai_key},
         {"fasta_chunk", std::to_string(f)},
         {"fastq_chunk", std::to_string(q)}},
        cfg.res_default));
  }
  const StageReport& mpileup_report = driver.run("mpileup", mpileup_tasks);

  // Shuffle planning per FASTA chunk that produced pileups.
  std::vector<std::vector<ObjectRef>> mpileups_by_chunk(fasta_plan.size());
  std::vector<ObjectRef> mpileup_refs;
  for (const TaskResult& r : mpileup_report.tasks) {
    mpileup_refs.insert(mpileup_refs.end(), r.outputs.begin(), r.outputs.end());
  }
  std::sort(mpileup_refs.begin(), mpileup_refs.end(),
            [](const ObjectRef& a, const ObjectRef& b) { return a.key < b.key; });
  for (const ObjectRef& ref : mpileup_refs) {
    auto [f, q] = parse_pair_key(ref.key);
    mpileups_by_chunk.at(f).push_back(ref);
  }

  std::vector<std::size_t> planned_chunks;
  std::vector<TaskSpec> plan_tasks;
  for (std::size_t f = 0; f < fasta_plan.size(); ++f) {
    if (mpileups_by_chunk[f].empty()) {
      continue;
    }
    planned_chunks.push_back(f);
    bool keyed = mpileup_is_keyed(fasta_plan[f]);
    std::uint32_t chrom_ordinal = keyed ? 0 : order.ordinal(fasta_plan[f].spans[0].name);
    plan_tasks.push_back(driver.task(
        "shuffle_plan", mpileups_by_chunk[f],
        {{"fasta_chunk", std::to_string(f)},
         {"keyed", keyed ? "1" : "0"},
         {"chrom_ordinal", std::to_string(chrom_ordinal)},
         {"budget_bytes", std::to_string(cfg.reduce_budget_bytes())},
         {"n_samples", std::to_string(cfg.n_samples)},
         {"use_select", cfg.use_select ? "1" : "0"}},
        cfg.res_default));
  }
  driver.run("shuffle_plan", plan_tasks);

  // Reduce: one task per planned partition.
  std::vector<TaskSpec> reduce_tasks;
  std::vector<std::pair<std::size_t, std::size_t>> expected_partials;
  for (std::size_t f : planned_chunks) {
    ObjectRef table_ref = store.head(cfg.bucket, keys::shuffle_table(f));
    auto [refs, partitions] =
        parse_partition_table(store.get(table_ref), f);
    bool keyed = mpileup_is_keyed(fasta_plan[f]);
    for (const ReducePartition& p : partitions) {
      expected_partials.emplace_back(f, p.partition_id);
      std::vector<ObjectRef> inputs = refs;
      inputs.push_back(table_ref);
      inputs.push_back(fai_ref);
      reduce_tasks.push_back(driver.task(
          "reduce", std::move(inputs),
          {{"fai_key", fai_key},
           {"fasta_chunk", std::to_string(f)},
           {"partition_id", std::to_string(p.partition_id)},
           {"keyed", keyed ? "1" : "0"},
           {"use_select", cfg.use_select ? "1" : "0"},
           {"theta", std::to_string(cfg.theta)},
           {"min_depth", std::to_string(cfg.min_depth)}},
          cfg.res_reduce));
    }
  }
  driver.run("reduce", reduce_tasks);

  // Concatenation of the partial call objects, in (chunk, partition) order.
  std::vector<ObjectRef> partial_refs;
  for (const auto& [f, p] : expected_partials) {
    partial_refs.push_back(store.head(cfg.bucket, keys::calls_partial(f, p)));
  }
  driver.run("concat", {driver.task("concat", partial_refs,
                                    {{"fai_key", fai_key}, {"out_key", cfg.output_key}},
                                    cfg.res_default)});

  report.output = store.head(cfg.bucket, cfg.output_key);
  report.wall_s = seconds_between(run_start, Clock::now());
  for (const StageReport& sr : report.stages) {
    report.total_gbsec += sr.gbsec;
    report.scan_bytes_total += sr.scan_bytes;
  }
  report.gbsec_usd = report.total_gbsec * cfg.usd_per_gbsec;
  report.select_usd = (static_cast<double>(report.scan_bytes_total) /
                       static_cast<double>(std::uint64_t{1} << 30)) *
                      cfg.usd_per_select_gb;

  if (!cfg.keep_intermediates) {
    for (const char* prefix : {"map/", "corrected/", "mpileup/", "calls/", "plan/"}) {
      for (const std::string& key : store.list(cfg.bucket, prefix)) {
        store.remove(cfg.bucket, key);
      }
    }
  }
  return report;
}

ObjectRef oracle_run(ObjectStore& store, const PipelineConfig& cfg) {
  cfg.validate();

  std::string fasta_text = store.get(cfg.bucket, cfg.fasta_key);
  std::vector<FaidxEntry> entries = build_fasta_index(fasta_text);
  ChromOrder order(entries);

  FastaPartition whole;
  std::vector<SpanText> reference;
  for (const FaidxEntry& e : entries) {
    std::uint64_t lo = base_byte_offset(e, 0);
    std::uint64_t hi = base_byte_offset(e, e.length - 1) + 1;
    std::string bases;
    bases.reserve(e.length);
    for (std::uint64_t i = lo; i < hi; ++i) {
      if (fasta_text[i] != '\n') {
        bases += fasta_text[i];
      }
    }
    FastaSpan span{e.name, 0, e.length};
    whole.spans.push_back(span);
    whole.byte_ranges.push_back(ByteRange{lo, hi});
    reference.push_back(SpanText{span, std::move(bases)});
  }

  std::vector<FastqRecord> reads;
  std::string fastq_text = store.get(cfg.bucket, cfg.fastq_key);
  if (!fastq_text.empty()) {
    reads = parse_fastq_records(fastq_text);
  }

  std::vector<AlignmentRecord> records =
      align_chunk(reference, reads, cfg.max_mismatches, 1, 0, nullptr);
  std::vector<MpileupRow> rows = make_mpileup(records, reference, whole, order);

  std::vector<VariantCall> calls;
  for (const MpileupRow& row : rows) {
    auto call = call_row(row.chrom, row.pos, row.ref_base, row.depth, row.bases, cfg.caller());
    if (call) {
      calls.push_back(std::move(*call));
    }
  }
  return store.put(cfg.bucket, cfg.output_key + ".oracle", serialize_calls(calls));
}

std::vector<SweepRow> parallelism_sweep(ObjectStore& store, const PipelineConfig& cfg,
                                        const std::vector<std::uint32_t>& vcpu_settings) {
  cfg.validate();
  if (vcpu_settings.empty()) {
    throw ConfigError("parallelism sweep needs at least one vcpu setting");
  }
  if (cfg.bandwidth_mbps > 0) {
    store.set_bandwidth_bytes_per_sec(cfg.bandwidth_mbps << 20);
  }

  const std::uint64_t total_bytes = cfg.sweep_total_mb << 20;
  const std::string data_key = "sweep/data";
  store.put(cfg.bucket, data_key, std::string(total_bytes, 'G'));

  // One worker keeps per-task timings free of local timesharing noise.
  FaasExecutor exec(store, make_stage_registry(), ExecutorOptions{1, cfg.retries});

  std::vector<SweepRow> rows;
  std::uint64_t task_id = 0;
  for (std::uint32_t v : vcpu_settings) {
    if (v == 0) {
      throw ConfigError("vcpu settings must be positive");
    }
    std::size_t n = std::max<std::size_t>(1, cfg.sweep_base_invocations / v);
    std::uint64_t per = total_bytes / n;

    std::vector<TaskSpec> tasks;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t lo = i * per;
      std::uint64_t hi = i + 1 == n ? total_bytes : lo + per;
      double spin_s =
          (static_cast<double>(hi - lo) / static_cast<double>(1 << 20)) * cfg.sweep_cpu_s_per_mb;
      TaskSpec spec;
      spec.task_id = task_id++;
      spec.stage = "synthetic";
      spec.params = {{"bucket", cfg.bucket},
                     {"data_key", data_key},
                     {"byte_lo", std::to_string(lo)},
                     {"byte_hi", std::to_string(hi)},
                     {"spin_s", std::to_string(spin_s)}};
      spec.resources = ResourceConfig{1769 * v, v};
      tasks.push_back(std::move(spec));
    }

    auto [results, flights] = exec.submit(tasks, cfg.limit, SubmitMode::wave);
    SweepRow row;
    row.vcpus = v;
    row.invocations = n;
    for (const TaskResult& r : results) {
      if (!r.ok) {
        throw PipelineError("sweep: " + r.error);
      }
      row.mean_fetch_s += r.fetch_s;
      row.mean_compute_s += r.compute_s;
    }
    row.mean_fetch_s /= static_cast<double>(n);
    row.mean_compute_s /= static_cast<double>(n);
    row.gbsec = gbsec_total(results);
    row.usd = row.gbsec * cfg.usd_per_gbsec;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "vcpus,invocations,mean_fetch_s,mean_compute_s,gb_seconds,usd\n";
  for (const SweepRow& r : rows) {
    out += std::to_string(r.vcpus) + ',' + std::to_string(r.invocations) + ',' +
           format_fixed6(r.mean_fetch_s) + ',' + format_fixed6(r.mean_compute_s) + ',' +
           format_fixed6(r.gbsec) + ',' + format_fixed6(r.usd) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run report serialization and stats files

namespace {

json flight_log_to_json(const FlightLog& log) {
  json j;
  j["flight_sizes"] = log.flight_sizes;
  j["max_in_flight"] = log.max_in_flight;
  j["dependency_violations"] = log.dependency_violations;
  json conc = json::array();
  for (const auto& [t, n] : log.concurrency) {
    conc.push_back(json::array({t, n}));
  }
  j["concurrency"] = std::move(conc);
  return j;
}

FlightLog flight_log_from_json(const json& j) {
  FlightLog log;
  log.flight_sizes = j.at("flight_sizes").get<std::vector<std::size_t>>();
  log.max_in_flight = j.at("max_in_flight").get<int>();
  log.dependency_violations = j.at("dependency_violations").get<std::size_t>();
  for (const auto& pair : j.at("concurrency")) {
    log.concurrency.emplace_back(pair.at(0).get<double>(), pair.at(1).get<int>());
  }
  return log;
}

json task_to_json(const TaskResult& r) {
  json j;
  j["task_id"] = r.task_id;
  j["ok"] = r.ok;
  j["error"] = r.error;
  j["fetch_s"] = r.fetch_s;
  j["compute_s"] = r.compute_s;
  j["store_s"] = r.store_s;
  j["billed_s"] = r.billed_s;
  j["started_at"] = r.started_at;
  j["ended_at"] = r.ended_at;
  j["peak_est_bytes"] = r.peak_est_bytes;
  j["bytes_fetched"] = r.bytes_fetched;
  j["bytes_stored"] = r.bytes_stored;
  j["scan_bytes"] = r.scan_bytes;
  j["attempts"] = r.attempts;
  j["memory_mb"] = r.resources.memory_mb;
  j["vcpus"] = r.resources.vcpus;
  json outputs = json::array();
  for (const ObjectRef& ref : r.outputs) {
    outputs.push_back({{"bucket", ref.bucket}, {"key", ref.key}, {"size", ref.size}});
  }
  j["outputs"] = std::move(outputs);
  return j;
}

TaskResult task_from_json(const json& j) {
  TaskResult r;
  r.task_id = j.at("task_id").get<std::uint64_t>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.fetch_s = j.at("fetch_s").get<double>();
  r.compute_s = j.at("compute_s").get<double>();
  r.store_s = j.at("store_s").get<double>();
  r.billed_s = j.at("billed_s").get<double>();
  r.started_at = j.at("started_at").get<double>();
  r.ended_at = j.at("ended_at").get<double>();
  r.peak_est_bytes = j.at("peak_est_bytes").get<std::uint64_t>();
  r.bytes_fetched = j.at("bytes_fetched").get<std::uint64_t>();
  r.bytes_stored = j.at("bytes_stored").get<std::uint64_t>();
  r.scan_bytes = j.at("scan_bytes").get<std::uint64_t>();
  r.attempts = j.at("attempts").get<std::uint32_t>();
  r.resources.memory_mb = j.at("memory_mb").get<std::uint32_t>();
  r.resources.vcpus = j.at("vcpus").get<std::uint32_t>();
  for (const auto& o : j.at("outputs")) {
    r.outputs.push_back(ObjectRef{o.at("bucket").get<std::string>(),
                                  o.at("key").get<std::string>(),
                                  o.at("size").get<std::uint64_t>()});
  }
  return r;
}

} // namespace

std::string RunReport::to_json() const {
  json j;
  j["wall_s"] = wall_s;
  j["total_gbsec"] = total_gbsec;
  j["gbsec_usd"] = gbsec_usd;
  j["scan_bytes_total"] = scan_bytes_total;
  j["select_usd"] = select_usd;
  j["output"] = {{"bucket", output.bucket}, {"key", output.key}, {"size", output.size}};
  json stages_json = json::array();
  for (const StageReport& s : stages) {
    json sj;
    sj["stage"] = s.stage;
    sj["task_count"] = s.task_count;
    sj["started_at"] = s.started_at;
    sj["wall_s"] = s.wall_s;
    sj["fetch_s_total"] = s.fetch_s_total;
    sj["compute_s_total"] = s.compute_s_total;
    sj["store_s_total"] = s.store_s_total;
    sj["gbsec"] = s.gbsec;
    sj["bytes_fetched"] = s.bytes_fetched;
    sj["bytes_stored"] = s.bytes_stored;
    sj["scan_bytes"] = s.scan_bytes;
    sj["flights"] = flight_log_to_json(s.flights);
    json tasks_json = json::array();
    for (const TaskResult& r : s.tasks) {
      tasks_json.push_back(task_to_json(r));
    }
    sj["tasks"] = std::move(tasks_json);
    stages_json.push_back(std::move(sj));
  }
  j["stages"] = std::move(stages_json);
  return j.dump(2);
}

RunReport RunReport::from_json(const std::string& text) {
  json j = json::parse(text);
  RunReport report;
  report.wall_s = j.at("wall_s").get<double>();
  report.total_gbsec = j.at("total_gbsec").get<double>();
  report.gbsec_usd = j.at("gbsec_usd").get<double>();
  report.scan_bytes_total = j.at("scan_bytes_total").get<std::uint64_t>();
  report.select_usd = j.at("select_usd").get<double>();
  const json& out = j.at("output");
  report.output = ObjectRef{out.at("bucket").get<std::string>(), out.at("key").get<std::string>(),
                            out.at("size").get<std::uint64_t>()};
  for (const auto& sj : j.at("stages")) {
    StageReport s;
    s.stage = sj.at("stage").get<std::string>();
    s.task_count = sj.at("task_count").get<std::size_t>();
    s.started_at = sj.at("started_at").get<double>();
    s.wall_s = sj.at("wall_s").get<double>();
    s.fetch_s_total = sj.at("fetch_s_total").get<double>();
    s.compute_s_total = sj.at("compute_s_total").get<double>();
    s.store_s_total = sj.at("store_s_total").get<double>();
    s.gbsec = sj.at("gbsec").get<double>();
    s.bytes_fetched = sj.at("bytes_fetched").get<std::uint64_t>();
    s.bytes_stored = sj.at("bytes_stored").get<std::uint64_t>();
    s.scan_bytes = sj.at("scan_bytes").get<std::uint64_t>();
    s.flights = flight_log_from_json(sj.at("flights"));
    for (const auto& tj : sj.at("tasks")) {
      s.tasks.push_back(task_from_json(tj));
    }
    report.stages.push_back(std::move(s));
  }
  return report;
}

void report_stats(const RunReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw PipelineError("unwritable output directory: " + (out_dir / name).string());
    }
    out << content;
  };

  std::string concurrency = "time,in_flight\n";
  for (const StageReport& s : report.stages) {
    for (const auto& [t, n] : s.flights.concurrency) {
      concurrency += format_fixed6(s.started_at + t) + ',' + std::to_string(n) + '\n';
    }
  }
  write_file("concurrency.csv", concurrency);

  std::string summary =
      "stage\ttasks\twall_s\tmean_fetch_s\tmean_compute_s\tmean_store_s\tgb_seconds\tscan_bytes\n";
  for (const StageReport& s : report.stages) {
    double n = s.task_count > 0 ? static_cast<double>(s.task_count) : 1.0;
    summary += s.stage + '\t' + std::to_string(s.task_count) + '\t' + format_fixed6(s.wall_s) +
               '\t' + format_fixed6(s.fetch_s_total / n) + '\t' +
               format_fixed6(s.compute_s_total / n) + '\t' + format_fixed6(s.store_s_total / n) +
               '\t' + format_fixed6(s.gbsec) + '\t' + std::to_string(s.scan_bytes) + '\n';
  }
  write_file("stage_summary.tsv", summary);

  std::string tasks =
      "stage,task_id,ok,attempts,started_at,ended_at,billed_s,fetch_s,compute_s,store_s,"
      "bytes_fetched,bytes_stored,scan_bytes,memory_mb\n";
  for (const StageReport& s : report.stages) {
    for (const TaskResult& r : s.tasks) {
      tasks += s.stage + ',' + std::to_string(r.task_id) + ',' + (r.ok ? "1" : "0") + ',' +
               std::to_string(r.attempts) + ',' + format_fixed6(r.started_at) + ',' +
               format_fixed6(r.ended_at) + ',' + format_fixed6(r.billed_s) + ',' +
               format_fixed6(r.fetch_s) + ',' + format_fixed6(r.compute_s) + ',' +
               format_fixed6(r.store_s) + ',' + std::to_string(r.bytes_fetched) + ',' +
               std::to_string(r.bytes_stored) + ',' + std::to_string(r.scan_bytes) + ',' +
               std::to_string(r.resources.memory_mb) + '\n';
    }
  }
  write_file("tasks.csv", tasks);

  char cost[512];
  std::snprintf(cost, sizeof(cost),
                "gb_seconds\t%.6f\ngbsec_usd\t%.6f\nselect_scan_bytes\t%llu\nselect_usd\t%.6f\n"
                "total_usd\t%.6f\n",
                report.total_gbsec, report.gbsec_usd,
                static_cast<unsigned long long>(report.scan_bytes_total), report.select_usd,
                report.gbsec_usd + report.select_usd);
  write_file("cost_summary.txt", cost);
}

} // namespace faasflow
