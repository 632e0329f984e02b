#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "faasflow/errors.hpp"
#include "faasflow/pipeline.hpp"
#include "support/helpers.hpp"

using namespace faasflow;
using testsupport::TempDir;

namespace {

PipelineConfig small_config(const std::filesystem::path& root) {
  PipelineConfig cfg;
  cfg.store_root = root.string();
  cfg.bucket = "vc";
  cfg.fasta_key = "in/ref.fa";
  cfg.fastq_key = "in/reads.fq";
  cfg.fasta_chunk_bases = 1 << 20;
  cfg.fastq_chunk_bytes = 1 << 20;
  cfg.max_mismatches = 2;
  cfg.workers = 2;
  cfg.limit = 64;
  cfg.res_align = StageResources{1769, 1};
  return cfg;
}

void load_dataset(ObjectStore& store, const PipelineConfig& cfg,
                  const testsupport::SyntheticDataset& data) {
  store.put(cfg.bucket, cfg.fasta_key, data.fasta_text);
  store.put(cfg.bucket, cfg.fastq_key, data.fastq_text);
}

const StageReport& stage(const RunReport& report, const std::string& name) {
  for (const StageReport& s : report.stages) {
    if (s.stage == name) {
      return s;
    }
  }
  throw std::runtime_error("no stage named " + name);
}

} // namespace

TEST_CASE("an unpartitioned run reproduces the oracle byte for byte") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  std::mt19937 rng(101);
  load_dataset(store, cfg, testsupport::make_dataset(rng, {400, 250}, 60, 20, 0.02));

  RunReport report = run_pipeline(store, cfg);
  ObjectRef oracle = oracle_run(store, cfg);
  CHECK(report.output.size > 0);
  CHECK(store.get(report.output) == store.get(oracle));
}

TEST_CASE("partitioned runs match the oracle for every chunking") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig base = small_config(dir.path() / "store");
  std::mt19937 rng(202);
  load_dataset(store, base, testsupport::make_dataset(rng, {500, 300}, 80, 25, 0.03));

  std::string expected = store.get(oracle_run(store, base));
  for (std::uint64_t chunk_bases : {800UL, 333UL, 170UL}) {
    for (std::uint64_t fastq_bytes : {1UL << 20, 1200UL}) {
      PipelineConfig cfg = base;
      cfg.fasta_chunk_bases = chunk_bases;
      cfg.fastq_chunk_bytes = fastq_bytes;
      RunReport report = run_pipeline(store, cfg);
      CHECK(store.get(report.output) == expected);
    }
  }
}

TEST_CASE("task counts follow the cartesian structure") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  std::mt19937 rng(303);
  load_dataset(store, cfg, testsupport::make_dataset(rng, {600}, 90, 20, 0.02));
  cfg.fasta_chunk_bases = 300; // 2 fasta chunks
  cfg.fastq_chunk_bytes = 1600; // several fastq chunks

  RunReport report = run_pipeline(store, cfg);
  auto fasta_plan = parse_fasta_plan(store.get(cfg.bucket, keys::fasta_plan()));
  auto fastq_plan = parse_fastq_plan(store.get(cfg.bucket, keys::fastq_plan()));
  REQUIRE(fasta_plan.size() == 2);
  REQUIRE(fastq_plan.size() >= 2);

  CHECK(stage(report, "fasta_index").task_count == 1);
  CHECK(stage(report, "align").task_count == fasta_plan.size() * fastq_plan.size());
  CHECK(stage(report, "correct").task_count == fastq_plan.size());
  CHECK(stage(report, "mpileup").task_count <= fasta_plan.size() * fastq_plan.size());
  CHECK(stage(report, "mpileup").task_count >= 1);
  CHECK(stage(report, "concat").task_count == 1);
}

TEST_CASE("an empty FASTQ runs to an empty output") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  store.put(cfg.bucket, cfg.fasta_key, ">chr1\nACGTACGT\n");
  store.put(cfg.bucket, cfg.fastq_key, "");

  RunReport report = run_pipeline(store, cfg);
  CHECK(stage(report, "align").task_count == 0);
  CHECK(stage(report, "reduce").task_count == 0);
  CHECK(report.output.size == 0);
  CHECK(store.get(report.output).empty());
}

TEST_CASE("missing inputs abort in pre-processing") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  try {
    run_pipeline(store, cfg);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("pre-processing") != std::string::npos);
  }
}

TEST_CASE("a failing stage aborts with its name and leaves intermediates") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  store.put(cfg.bucket, cfg.fasta_key, "not fasta at all");
  store.put(cfg.bucket, cfg.fastq_key, "@r1\nACGT\n+\nIIII\n");
  cfg.retries = 0;
  try {
    run_pipeline(store, cfg);
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(std::string(e.what()).find("stage fasta_index") != std::string::npos);
  }
}

TEST_CASE("cost accounting is additive over tasks and stages") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  std::mt19937 rng(404);
  load_dataset(store, cfg, testsupport::make_dataset(rng, {400}, 50, 20, 0.02));
  cfg.fasta_chunk_bases = 200;

  RunReport report = run_pipeline(store, cfg);
  double gbsec = 0;
  std::uint64_t scan = 0;
  for (const StageReport& s : report.stages) {
    for (const TaskResult& r : s.tasks) {
      gbsec += (static_cast<double>(r.resources.memory_mb) / 1024.0) * r.billed_s;
      scan += r.scan_bytes;
    }
  }
  CHECK(report.total_gbsec == doctest::Approx(gbsec).epsilon(1e-9));
  CHECK(report.scan_bytes_total == scan);
  CHECK(report.scan_bytes_total > 0);
  CHECK(report.select_usd ==
        doctest::Approx((static_cast<double>(scan) / (1ULL << 30)) * cfg.usd_per_select_gb));
  CHECK(report.gbsec_usd == doctest::Approx(report.total_gbsec * cfg.usd_per_gbsec));
}

TEST_CASE("disabling the scan engine zeroes scan cost but not the output") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  std::mt19937 rng(505);
  load_dataset(store, cfg, testsupport::make_dataset(rng, {350}, 40, 18, 0.03));
  cfg.fasta_chunk_bases = 180;

  std::string expected = store.get(oracle_run(store, cfg));
  cfg.use_select = false;
  RunReport report = run_pipeline(store, cfg);
  CHECK(report.scan_bytes_total == 0);
  CHECK(report.select_usd == 0.0);
  CHECK(store.get(report.output) == expected);
}

TEST_CASE("keep_intermediates=false clears the scratch prefixes") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  std::mt19937 rng(606);
  load_dataset(store, cfg, testsupport::make_dataset(rng, {300}, 30, 15, 0.02));
  cfg.keep_intermediates = false;

  RunReport report = run_pipeline(store, cfg);
  CHECK(store.list(cfg.bucket, "map/").empty());
  CHECK(store.list(cfg.bucket, "corrected/").empty());
  CHECK(store.list(cfg.bucket, "mpileup/").empty());
  CHECK(store.list(cfg.bucket, "calls/").empty());
  CHECK(store.list(cfg.bucket, "plan/").empty());
  CHECK(store.head(cfg.bucket, cfg.output_key).size == report.output.size);
  CHECK(store.head(cfg.bucket, keys::fai(cfg.fasta_key)).size > 0); // index stays reusable
}

TEST_CASE("indexing writes only the index object") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  store.put(cfg.bucket, cfg.fasta_key, ">chr1\nACGTACGT\n");
  store.put(cfg.bucket, cfg.fastq_key, "@r00000\nGTAC\n+\nIIII\n");

  std::size_t writes_before = store.write_log().size();
  run_pipeline(store, cfg);
  for (std::size_t i = writes_before; i < store.write_log().size(); ++i) {
    CHECK(store.write_log()[i] != cfg.bucket + "/" + cfg.fasta_key);
    CHECK(store.write_log()[i] != cfg.bucket + "/" + cfg.fastq_key);
  }
}

TEST_CASE("oracle on hand-checked pileups") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  store.put(cfg.bucket, cfg.fasta_key, ">chr1\nACGTACGT\n");

  SUBCASE("all reads match the reference: no calls") {
    store.put(cfg.bucket, cfg.fastq_key,
              "@r1\nGTAC\n+\nIIII\n@r2\nGTAC\n+\nIIII\n@r3\nGTAC\n+\nIIII\n");
    ObjectRef out = oracle_run(store, cfg);
    CHECK(store.get(out).empty());
  }
  SUBCASE("one mutated read above both gates: exactly one call") {
    store.put(cfg.bucket, cfg.fastq_key,
              "@r1\nGTAC\n+\nIIII\n@r2\nGTAC\n+\nIIII\n@r3\nGTAT\n+\nIIII\n");
    ObjectRef out = oracle_run(store, cfg);
    CHECK(store.get(out) == "chr1\t6\tC\tT\t3\t1\t0.333333\n");
  }
}

TEST_CASE("run reports serialize to JSON and back") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  std::mt19937 rng(707);
  load_dataset(store, cfg, testsupport::make_dataset(rng, {250}, 25, 15, 0.02));

  RunReport report = run_pipeline(store, cfg);
  RunReport parsed = RunReport::from_json(report.to_json());
  CHECK(parsed.stages.size() == report.stages.size());
  CHECK(parsed.total_gbsec == doctest::Approx(report.total_gbsec));
  CHECK(parsed.scan_bytes_total == report.scan_bytes_total);
  CHECK(parsed.output == report.output);
  CHECK(parsed.stages.back().tasks.size() == report.stages.back().tasks.size());

  report_stats(parsed, dir.path() / "report");
  for (const char* name : {"concurrency.csv", "stage_summary.tsv", "tasks.csv",
                           "cost_summary.txt"}) {
    CHECK(std::filesystem::exists(dir.path() / "report" / name));
  }
}

TEST_CASE("parallelism sweep emits one row per setting") {
  TempDir dir("pipe");
  ObjectStore store(dir.path() / "store");
  PipelineConfig cfg = small_config(dir.path() / "store");
  cfg.sweep_total_mb = 2;
  cfg.sweep_base_invocations = 4;
  cfg.sweep_cpu_s_per_mb = 0.002;

  auto rows = parallelism_sweep(store, cfg, {1, 2});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].vcpus == 1);
  CHECK(rows[0].invocations == 4);
  CHECK(rows[1].vcpus == 2);
  CHECK(rows[1].invocations == 2);
  std::string csv = sweep_csv(rows);
  CHECK(csv.find("vcpus,invocations") == 0);
  CHECK_THROWS_AS(parallelism_sweep(store, cfg, {}), ConfigError);
}

TEST_CASE("pipeline config reads flat key = value text") {
  Config raw = Config::from_text(
      "# comment\n"
      "store.root = /tmp/x\n"
      "partition.fasta_chunk_bases = 1234\n"
      "executor.mode = streaming\n"
      "caller.theta = 0.35\n"
      "shuffle.use_select = false\n"
      "resources.align.memory_mb = 4096\n");
  PipelineConfig cfg = PipelineConfig::from_config(raw);
  CHECK(cfg.store_root == "/tmp/x");
  CHECK(cfg.fasta_chunk_bases == 1234);
  CHECK(cfg.mode == SubmitMode::streaming);
  CHECK(cfg.theta == doctest::Approx(0.35));
  CHECK_FALSE(cfg.use_select);
  CHECK(cfg.res_align.memory_mb == 4096);
  CHECK(cfg.reduce_budget_bytes() ==
        static_cast<std::uint64_t>(0.5 * 1769 * (1 << 20)));

  CHECK_THROWS_AS(Config::from_text("novalue\n"), ConfigError);
  Config bad = Config::from_text("caller.theta = 1.5\n");
  CHECK_THROWS_AS(PipelineConfig::from_config(bad), ConfigError);
}
