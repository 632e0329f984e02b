#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faasflow/genome_io.hpp"
#include "faasflow/object_store.hpp"
#include "faasflow/select_engine.hpp"

namespace faasflow {

// Closed span of linearized (chrom, pos) keys assigned to one reduce
// fetch, with a conservative byte estimate (exact row count times the
// sampled maximum row size).
struct IndexRange {
  std::size_t fasta_chunk_id = 0;
  std::int64_t lo_key = 0;
  std::int64_t hi_key = 0;
  std::uint64_t rows = 0;
  std::uint64_t est_bytes = 0;
  // A single position whose rows alone exceed the budget: emitted as a
  // flagged singleton rather than dropped.
  bool oversized = false;

  bool operator==(const IndexRange&) const = default;
};

// Ranges grouped into one reduce invocation. Estimates sum within the
// budget unless the partition is a flagged oversized singleton.
struct ReducePartition {
  std::size_t partition_id = 0;
  std::size_t fasta_chunk_id = 0;
  std::vector<IndexRange> ranges;
  std::vector<ObjectRef> mpileup_refs;
  std::uint64_t budget_bytes = 0;
  bool oversized = false;

  std::uint64_t est_bytes() const;
};

struct VariantCall {
  std::string chrom;
  std::uint64_t pos = 0;
  char ref_base = 'N';
  char alt_base = 'N';
  std::uint32_t depth = 0;
  std::uint32_t alt_count = 0;
  double alt_freq = 0;

  bool operator==(const VariantCall&) const = default;
};

struct CallerConfig {
  double theta = 0.2;        // minimum alternate allele frequency
  std::uint32_t min_depth = 2;
};

struct RowSizeSample {
  std::uint64_t min_bytes = 0;
  std::uint64_t max_bytes = 0;
};

using ObjectReader = std::function<std::string(const ObjectRef&)>;
using SelectFn = std::function<ScanResult(const ObjectRef&, const ScanQuery&)>;

// Deterministic sample: rows at indices floor(k*rows/n_samples) of every
// file; returns the global min and max sampled row byte lengths,
// terminator included. All-empty input raises FormatError.
RowSizeSample sample_row_sizes(const ObjectReader& read, std::span<const ObjectRef> refs,
                               std::size_t n_samples);

struct IndexColumns {
  std::vector<std::vector<std::int64_t>> per_file;
  std::uint64_t scan_bytes = 0;
};

// One projection-only scan per file pulling the index column (the
// linearized key for keyed objects, the position for plain single-chrom
// objects, converted to keys via chrom_ordinal).
IndexColumns extract_index_columns(const SelectFn& select, std::span<const ObjectRef> refs,
                                   bool keyed, std::uint32_t chrom_ordinal);

// Walks the sorted key union, extending each range while
// rows-in-range x max_row_bytes fits the budget, then packs consecutive
// ranges into partitions under the same budget so small ranges share one
// invocation. Every key lands in exactly one range.
std::vector<ReducePartition> plan_ranges(const std::vector<std::vector<std::int64_t>>& per_file_keys,
                                         std::uint64_t max_row_bytes,
                                         std::uint64_t budget_bytes,
                                         std::size_t fasta_chunk_id);

// Frequency-threshold caller for one merged row: the most frequent
// non-reference base among {A,C,G,T} (lexicographic tie-break), called
// when depth >= min_depth and count/depth >= theta.
std::optional<VariantCall> call_row(std::string_view chrom, std::uint64_t pos, char ref_base,
                                    std::uint32_t depth, std::string_view bases,
                                    const CallerConfig& caller);

// Fetches every range from every mpileup object of the partition, merges
// rows sharing a position (depth summed, bases concatenated in ascending
// object-key order) and applies the caller. Output sorted by position.
std::vector<VariantCall> reduce_partition(const SelectFn& select, const ReducePartition& partition,
                                          bool keyed, const ChromOrder& order,
                                          const CallerConfig& caller);

// chrom<TAB>pos<TAB>ref<TAB>alt<TAB>depth<TAB>alt_count<TAB>freq<LF>,
// freq with 6 decimal places.
std::string serialize_calls(const std::vector<VariantCall>& calls);
std::vector<VariantCall> parse_calls(std::string_view text);

// Byte concatenation of partial call objects, validating that the result
// is globally sorted by (chrom order, pos); unsorted input raises
// PipelineError.
std::string concat_call_objects(const std::vector<std::string>& partial_texts,
                                const ChromOrder& order);

// Partition table stored between the planning and reduce stages.
std::string serialize_partition_table(const std::vector<ObjectRef>& mpileup_refs,
                                      const std::vector<ReducePartition>& partitions);
std::pair<std::vector<ObjectRef>, std::vector<ReducePartition>>
parse_partition_table(std::string_view text, std::size_t fasta_chunk_id);

} // namespace faasflow
