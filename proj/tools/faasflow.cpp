// faasflow: local serverless-style variant-calling pipeline driver.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faasflow/config.hpp"
#include "faasflow/errors.hpp"
#include "faasflow/genome_io.hpp"
#include "faasflow/object_store.hpp"
#include "faasflow/pipeline.hpp"
#include "faasflow/select_engine.hpp"
#include "faasflow/text.hpp"

namespace ff = faasflow;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string store_root;
  std::vector<std::string> extras;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key = value config file");
  cmd->add_option("--store", args.store_root, "object store root directory");
  cmd->allow_extras();
}

// Precedence: defaults < config file < FAASFLOW_STORE_ROOT < --key value.
ff::Config load_config(CLI::App* cmd, CommonArgs& args) {
  ff::Config config;
  if (!args.config_path.empty()) {
    config = ff::Config::from_file(args.config_path);
  }
  if (const char* env = std::getenv("FAASFLOW_STORE_ROOT")) {
    config.set("store.root", env);
  }
  if (!args.store_root.empty()) {
    config.set("store.root", args.store_root);
  }
  std::vector<std::string> extras = cmd->remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& token = extras[i];
    if (token.rfind("--", 0) != 0 || i + 1 >= extras.size()) {
      throw ff::ConfigError("expected --key value override, got '" + token + "'");
    }
    config.set(token.substr(2), extras[++i]);
  }
  return config;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ff::ConfigError("cannot open file: " + path);
  }
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::vector<std::uint32_t> parse_vcpu_list(const std::string& text) {
  std::vector<std::uint32_t> settings;
  for (std::string_view part : ff::split(text, ',')) {
    settings.push_back(static_cast<std::uint32_t>(ff::parse_u64(part, "--vcpus")));
  }
  return settings;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"faasflow: simulated serverless map-reduce variant calling"};
  app.require_subcommand(1);

  CommonArgs index_args, plan_args, run_args, oracle_args, sweep_args, stats_args, select_args,
      put_args, get_args;

  auto* cmd_index = app.add_subcommand("index-fasta", "build and store the .fai index");
  std::string index_key;
  cmd_index->add_option("--key", index_key, "FASTA object key")->required();
  add_common(cmd_index, index_args);

  auto* cmd_plan = app.add_subcommand("plan", "print partition plans as TSV");
  std::uint64_t plan_fasta_bases = 0, plan_fastq_bytes = 0;
  std::int64_t plan_overlap = -1;
  cmd_plan->add_option("--fasta-chunk-bases", plan_fasta_bases, "bases per FASTA chunk");
  cmd_plan->add_option("--fastq-chunk-bytes", plan_fastq_bytes, "target bytes per FASTQ chunk");
  cmd_plan->add_option("--overlap", plan_overlap, "FASTA chunk overlap bases (-1 = auto)");
  add_common(cmd_plan, plan_args);

  auto* cmd_run = app.add_subcommand("run", "run the full pipeline");
  std::string run_report_dir = "report";
  cmd_run->add_option("--report-dir", run_report_dir, "where run report files land");
  add_common(cmd_run, run_args);

  auto* cmd_oracle = app.add_subcommand("oracle", "single-node single-pass reference run");
  add_common(cmd_oracle, oracle_args);

  auto* cmd_sweep = app.add_subcommand("sweep", "intra-function parallelism sweep");
  std::string sweep_vcpus = "1,2,4";
  std::string sweep_out;
  cmd_sweep->add_option("--vcpus", sweep_vcpus, "comma-separated vcpu settings");
  cmd_sweep->add_option("--out", sweep_out, "also write the CSV here");
  add_common(cmd_sweep, sweep_args);

  auto* cmd_stats = app.add_subcommand("stats", "render report files from a saved run report");
  std::string stats_report, stats_out = "report";
  cmd_stats->add_option("--report", stats_report, "runreport.json path")->required();
  cmd_stats->add_option("--out", stats_out, "output directory");
  add_common(cmd_stats, stats_args);

  auto* cmd_select = app.add_subcommand("select", "debug scan over a stored TSV object");
  std::string select_key, select_cols = "0", select_between;
  cmd_select->add_option("--key", select_key, "object key")->required();
  cmd_select->add_option("--cols", select_cols, "comma-separated projected columns");
  cmd_select->add_option("--between", select_between, "COL,LO,HI closed integer range");
  add_common(cmd_select, select_args);

  auto* cmd_put = app.add_subcommand("put", "store a local file as an object");
  std::string put_key, put_file;
  cmd_put->add_option("--key", put_key, "object key")->required();
  cmd_put->add_option("--file", put_file, "local file path")->required();
  add_common(cmd_put, put_args);

  auto* cmd_get = app.add_subcommand("get", "print an object to stdout");
  std::string get_key;
  cmd_get->add_option("--key", get_key, "object key")->required();
  add_common(cmd_get, get_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_index->parsed()) {
      ff::Config config = load_config(cmd_index, index_args);
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);
      std::vector<ff::FaidxEntry> entries =
          ff::build_fasta_index(store.get(cfg.bucket, index_key));
      ff::ObjectRef ref =
          store.put(cfg.bucket, ff::keys::fai(index_key), ff::serialize_faidx(entries));
      std::cout << ref.id() << ": " << entries.size() << " sequences\n";
      return 0;
    }

    if (cmd_plan->parsed()) {
      ff::Config config = load_config(cmd_plan, plan_args);
      if (plan_fasta_bases > 0) {
        config.set("partition.fasta_chunk_bases", std::to_string(plan_fasta_bases));
      }
      if (plan_fastq_bytes > 0) {
        config.set("partition.fastq_chunk_bytes", std::to_string(plan_fastq_bytes));
      }
      config.set("partition.overlap_bases",
                 plan_overlap < 0 ? "auto" : std::to_string(plan_overlap));
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);

      std::vector<ff::FaidxEntry> entries;
      try {
        entries = ff::parse_faidx(store.get(cfg.bucket, ff::keys::fai(cfg.fasta_key)));
      } catch (const ff::NotFoundError&) {
        entries = ff::build_fasta_index(store.get(cfg.bucket, cfg.fasta_key));
      }
      ff::FastqStats stats;
      std::vector<ff::FastqChunk> chunks = ff::plan_fastq_partitions(
          store.get(cfg.bucket, cfg.fastq_key), cfg.fastq_chunk_bytes, &stats);
      std::uint64_t overlap =
          cfg.overlap_bases >= 0
              ? static_cast<std::uint64_t>(cfg.overlap_bases)
              : (stats.max_read_length > 0 ? stats.max_read_length - 1 : 0);
      std::vector<ff::FastaPartition> plan =
          ff::plan_fasta_partitions(entries, cfg.fasta_chunk_bases, overlap);

      std::cout << "# fasta partitions: chunk\toverlap\tname\tstart\tend\tbyte_lo\tbyte_hi\n"
                << ff::serialize_fasta_plan(plan)
                << "# fastq chunks: chunk\tbyte_lo\tbyte_hi\trecords\n"
                << ff::serialize_fastq_plan(chunks);
      return 0;
    }

    if (cmd_run->parsed()) {
      ff::Config config = load_config(cmd_run, run_args);
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);
      ff::RunReport report = ff::run_pipeline(store, cfg);
      ff::report_stats(report, run_report_dir);
      std::ofstream json_out(std::filesystem::path(run_report_dir) / "runreport.json");
      json_out << report.to_json();
      std::cout << "output: " << report.output.id() << " (" << report.output.size << " bytes)\n"
                << "wall: " << ff::format_fixed6(report.wall_s) << " s\n"
                << "gbsec_usd: " << ff::format_fixed6(report.gbsec_usd)
                << "  select_usd: " << ff::format_fixed6(report.select_usd) << "\n"
                << "report files: " << run_report_dir << "\n";
      return 0;
    }

    if (cmd_oracle->parsed()) {
      ff::Config config = load_config(cmd_oracle, oracle_args);
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);
      ff::ObjectRef ref = ff::oracle_run(store, cfg);
      std::cout << "oracle output: " << ref.id() << " (" << ref.size << " bytes)\n";
      return 0;
    }

    if (cmd_sweep->parsed()) {
      ff::Config config = load_config(cmd_sweep, sweep_args);
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);
      std::vector<ff::SweepRow> rows =
          ff::parallelism_sweep(store, cfg, parse_vcpu_list(sweep_vcpus));
      std::string csv = ff::sweep_csv(rows);
      if (!sweep_out.empty()) {
        std::ofstream out(sweep_out);
        out << csv;
      }
      std::cout << csv;
      return 0;
    }

    if (cmd_stats->parsed()) {
      ff::RunReport report = ff::RunReport::from_json(read_file(stats_report));
      ff::report_stats(report, stats_out);
      std::cout << "report files: " << stats_out << "\n";
      return 0;
    }

    if (cmd_select->parsed()) {
      ff::Config config = load_config(cmd_select, select_args);
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);
      ff::ScanQuery query;
      for (std::string_view part : ff::split(select_cols, ',')) {
        query.projection.push_back(ff::parse_u64(part, "--cols"));
      }
      if (!select_between.empty()) {
        std::vector<std::string_view> parts = ff::split(select_between, ',');
        if (parts.size() != 3) {
          throw ff::ConfigError("--between expects COL,LO,HI");
        }
        query.predicate = ff::ScanQuery::Between{ff::parse_u64(parts[0], "--between col"),
                                                 ff::parse_i64(parts[1], "--between lo"),
                                                 ff::parse_i64(parts[2], "--between hi")};
      }
      auto [rows, scan] = ff::select_object(store, store.head(cfg.bucket, select_key), query);
      for (const ff::ScanRow& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
          std::cout << (i ? "\t" : "") << row[i];
        }
        std::cout << '\n';
      }
      std::cerr << "rows: " << scan.rows_returned << "  bytes_scanned: " << scan.bytes_scanned
                << "\n";
      return 0;
    }

    if (cmd_put->parsed()) {
      ff::Config config = load_config(cmd_put, put_args);
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);
      ff::ObjectRef ref = store.put(cfg.bucket, put_key, read_file(put_file));
      std::cout << ref.id() << " (" << ref.size << " bytes)\n";
      return 0;
    }

    if (cmd_get->parsed()) {
      ff::Config config = load_config(cmd_get, get_args);
      ff::PipelineConfig cfg = ff::PipelineConfig::from_config(config);
      ff::ObjectStore store(cfg.store_root);
      std::cout << store.get(cfg.bucket, get_key);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
