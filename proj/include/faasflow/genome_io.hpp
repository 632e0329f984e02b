#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "faasflow/object_store.hpp"

namespace faasflow {

// One random-access index record per FASTA sequence, faidx-compatible:
// byte offset of the first base plus the line geometry needed to map any
// base coordinate to a byte coordinate.
struct FaidxEntry {
  std::string name;
  std::uint64_t length = 0;     // bases
  std::uint64_t offset = 0;     // byte offset of the first base
  std::uint32_t line_bases = 0; // bases per full line
  std::uint32_t line_width = 0; // bytes per full line, terminator included

  bool operator==(const FaidxEntry&) const = default;
};

// Scans the FASTA text and returns one entry per sequence, in file order.
// Interior sequence lines must share one width; the last line of a
// sequence may be shorter. Read-only: callers write only the index.
std::vector<FaidxEntry> build_fasta_index(std::string_view fasta_text);

// .fai wire format: name<TAB>length<TAB>offset<TAB>linebases<TAB>linewidth<LF>.
std::string serialize_faidx(const std::vector<FaidxEntry>& entries);
std::vector<FaidxEntry> parse_faidx(std::string_view text);

// Byte offset of 0-based base `b` of a sequence.
std::uint64_t base_byte_offset(const FaidxEntry& entry, std::uint64_t b);

// FASTA-order ordinals for sequence names; defines "chrom order" everywhere.
class ChromOrder {
public:
  ChromOrder() = default;
  explicit ChromOrder(const std::vector<FaidxEntry>& entries);

  std::uint32_t ordinal(std::string_view name) const; // FormatError if unknown
  const std::string& name(std::uint32_t ordinal) const;
  std::size_t count() const { return names_.size(); }

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ordinals_;
};

// (chrom, pos) linearized into one integer so a single BETWEEN predicate
// can address multi-sequence ranges.
std::int64_t linear_key(std::uint32_t chrom_ordinal, std::uint64_t pos);
std::uint32_t key_chrom(std::int64_t key);
std::uint64_t key_pos(std::int64_t key);

// Contiguous base run of one sequence, 0-based half-open.
struct FastaSpan {
  std::string name;
  std::uint64_t start_base = 0;
  std::uint64_t end_base = 0;

  std::uint64_t length() const { return end_base - start_base; }
  bool operator==(const FastaSpan&) const = default;
};

struct ByteRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  bool operator==(const ByteRange&) const = default;
};

// One genome chunk: spans in FASTA order (possibly crossing sequence
// boundaries) plus the byte ranges that fetch them. The first
// overlap_bases bases repeat the tail of the previous chunk so that read
// alignments never fall between chunks; the rest is the chunk's own tile.
struct FastaPartition {
  std::size_t chunk_id = 0;
  std::vector<FastaSpan> spans;
  std::vector<ByteRange> byte_ranges;
  std::uint64_t overlap_bases = 0;

  std::uint64_t total_bases() const;
  // Spans minus the leading overlap: the disjoint region this chunk owns.
  std::vector<FastaSpan> primary_spans() const;

  bool operator==(const FastaPartition&) const = default;
};

// Tiles the concatenated sequences into chunks of at most chunk_bases own
// bases, then extends every chunk that starts mid-sequence back by
// overlap_bases (clamped at the sequence start). chunk_bases must exceed
// overlap_bases.
std::vector<FastaPartition> plan_fasta_partitions(const std::vector<FaidxEntry>& index,
                                                  std::uint64_t chunk_bases,
                                                  std::uint64_t overlap_bases);

struct SpanText {
  FastaSpan span;
  std::string bases; // terminators stripped; size() == span.length()
};

using RangeReader = std::function<std::string(const ObjectRef&, std::uint64_t, std::uint64_t)>;

// Byte-range fetch of every span of the partition; never touches bytes
// outside the spans' line ranges.
std::vector<SpanText> fetch_fasta_partition(const RangeReader& read_range,
                                            const ObjectRef& fasta,
                                            const FastaPartition& partition);

// Record-aligned FASTQ byte chunk.
struct FastqChunk {
  std::size_t chunk_id = 0;
  std::uint64_t byte_lo = 0;
  std::uint64_t byte_hi = 0;
  std::uint64_t record_count = 0;

  bool operator==(const FastqChunk&) const = default;
};

struct FastqStats {
  std::uint64_t record_count = 0;
  std::uint32_t max_read_length = 0;
};

// Chunk boundaries start at multiples of target_bytes and advance to the
// next record start, witnessed by '@' on line L, '+' on line L+2 and equal
// lengths of lines L+1 and L+3 ('@' alone is ambiguous because quality
// strings may begin with '@'). Chunks tile the file exactly; a boundary
// that lands at or past the last record start merges into the final chunk.
std::vector<FastqChunk> plan_fastq_partitions(std::string_view fastq_text,
                                              std::uint64_t target_bytes,
                                              FastqStats* stats = nullptr);

struct FastqRecord {
  std::string id;    // header token up to the first whitespace, '@' stripped
  std::string bases;
};

// Strict 4-line record parse; first_record_ordinal offsets the record
// numbers used in error messages when parsing a mid-file chunk.
std::vector<FastqRecord> parse_fastq_records(std::string_view text,
                                             std::uint64_t first_record_ordinal = 0);

// Plan tables as stored between pipeline stages (TSV, one row per span /
// per chunk).
std::string serialize_fasta_plan(const std::vector<FastaPartition>& plan);
std::vector<FastaPartition> parse_fasta_plan(std::string_view text);
std::string serialize_fastq_plan(const std::vector<FastqChunk>& chunks);
std::vector<FastqChunk> parse_fastq_plan(std::string_view text);

} // namespace faasflow
