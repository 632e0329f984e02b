#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faasflow/genome_io.hpp"

namespace faasflow {

// Best alignment of one read inside one genome chunk. gpos is 1-based
// within chrom; mismatches never exceeds the configured bound.
struct AlignmentRecord {
  std::string read_id;
  std::string chrom;
  std::uint64_t gpos = 0;
  std::uint32_t mismatches = 0;
  std::string read_bases;
  std::size_t fasta_chunk_id = 0;

  bool operator==(const AlignmentRecord&) const = default;
};

struct AlignStats {
  std::uint64_t reads_total = 0;
  std::uint64_t reads_aligned = 0;
  std::uint64_t reads_too_long = 0; // longer than every span, skipped
};

// Mismatch-bounded scan of every read against every span of the chunk.
// Emits the minimum-mismatch alignment per read (ties broken by span
// order, then lowest position), or nothing when no placement stays within
// max_mismatches. 'N' never matches, on either side. Reads are split
// across vcpus workers by index; output is identical for any vcpus.
std::vector<AlignmentRecord> align_chunk(const std::vector<SpanText>& reference,
                                         const std::vector<FastqRecord>& reads,
                                         std::uint32_t max_mismatches,
                                         std::uint32_t vcpus,
                                         std::size_t fasta_chunk_id,
                                         AlignStats* stats = nullptr);

// Cross-chunk selection: keeps exactly one record per read — minimum
// mismatches, ties by (chrom order, gpos), duplicates from chunk overlap
// collapsing to the lowest chunk id. Output sorted by read_id.
std::vector<AlignmentRecord> correct_index(const std::vector<AlignmentRecord>& candidates,
                                           const ChromOrder& order);

// Pileup ownership: every corrected record goes to each chunk whose
// primary (non-overlap) region its alignment touches, so that chunks own
// disjoint position sets while boundary-spanning reads still count
// everywhere they cover. result[chunk_id] holds that chunk's records.
std::vector<std::vector<AlignmentRecord>>
route_by_primary_range(const std::vector<AlignmentRecord>& records,
                       const std::vector<FastaPartition>& plan,
                       const ChromOrder& order);

struct MpileupRow {
  std::string chrom;
  std::uint64_t pos = 0; // 1-based
  char ref_base = 'N';
  std::uint32_t depth = 0;
  std::string bases;

  bool operator==(const MpileupRow&) const = default;
};

// Expands the records into per-position rows over the partition's primary
// region. Contributions are appended in ascending read_id order; rows come
// back sorted by (chrom order, pos). Positions outside the partition's
// spans indicate a correction bug and raise PipelineError.
std::vector<MpileupRow> make_mpileup(const std::vector<AlignmentRecord>& records,
                                     const std::vector<SpanText>& reference,
                                     const FastaPartition& partition,
                                     const ChromOrder& order);

// .map stand-in: read_id<TAB>chrom<TAB>gpos<TAB>mismatches<TAB>bases<LF>.
std::string serialize_map_records(const std::vector<AlignmentRecord>& records);
std::vector<AlignmentRecord> parse_map_records(std::string_view text,
                                               std::size_t fasta_chunk_id);

// Chunks spanning several sequences carry a leading linearized-key column
// so one integer BETWEEN can address their rows.
bool mpileup_is_keyed(const FastaPartition& partition);

// keyed:  key<TAB>chrom<TAB>pos<TAB>ref<TAB>depth<TAB>bases<LF>
// plain:  chrom<TAB>pos<TAB>ref<TAB>depth<TAB>bases<LF>
std::string serialize_mpileup(const std::vector<MpileupRow>& rows, const ChromOrder& order,
                              bool keyed);

} // namespace faasflow
