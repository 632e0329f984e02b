#include "faasflow/genome_io.hpp"

#include <algorithm>
#include <cassert>

#include "faasflow/errors.hpp"
#include "faasflow/text.hpp"

namespace faasflow {

namespace {

// Line with its byte placement in the source text.
struct Line {
  std::string_view content;
  std::uint64_t start = 0;
  bool terminated = false; // had a trailing LF
};

std::vector<Line> scan_lines(std::string_view text) {
  std::vector<Line> lines;
  std::uint64_t start = 0;
  while (start < text.size()) {
    std::size_t at = text.find('\n', start);
    if (at == std::string_view::npos) {
      lines.push_back({text.substr(start), start, false});
      break;
    }
    lines.push_back({text.substr(start, at - start), start, true});
    start = at + 1;
  }
  return lines;
}

std::string_view first_token(std::string_view line) {
  std::size_t end = line.find_first_of(" \t");
  return end == std::string_view::npos ? line : line.substr(0, end);
}

bool valid_bases(std::string_view s) {
  for (char c : s) {
    if (c != 'A' && c != 'C' && c != 'G' && c != 'T' && c != 'N') {
      return false;
    }
  }
  return true;
}

} // namespace

std::vector<FaidxEntry> build_fasta_index(std::string_view fasta_text) {
  if (fasta_text.empty()) {
    throw FormatError("empty FASTA");
  }

  std::vector<FaidxEntry> entries;
  FaidxEntry current;
  bool in_sequence = false;
  bool saw_short_line = false;

  auto close_sequence = [&]() {
    if (!in_sequence) {
      return;
    }
    if (current.length == 0) {
      throw FormatError("FASTA sequence '" + current.name + "' has an empty body");
    }
    entries.push_back(current);
    in_sequence = false;
  };

  for (const Line& line : scan_lines(fasta_text)) {
    if (!line.content.empty() && line.content.front() == '>') {
      close_sequence();
      current = FaidxEntry{};
      current.name = std::string(first_token(line.content.substr(1)));
      if (current.name.empty()) {
        throw FormatError("FASTA header with empty sequence name at byte " +
                          std::to_string(line.start));
      }
      current.offset = line.start + line.content.size() + (line.terminated ? 1 : 0);
      in_sequence = true;
      saw_short_line = false;
      continue;
    }
    if (!in_sequence) {
      throw FormatError("FASTA must start with a '>' header line");
    }
    auto width = static_cast<std::uint32_t>(line.content.size());
    if (current.line_bases == 0) {
      if (width == 0) {
        throw FormatError("FASTA sequence '" + current.name + "' has an empty body line");
      }
      current.line_bases = width;
      current.line_width = width + 1;
    } else if (saw_short_line || width > current.line_bases) {
      throw FormatError("FASTA sequence '" + current.name +
                        "' has non-uniform interior line widths");
    } else if (width < current.line_bases) {
      if (width == 0) {
        throw FormatError("FASTA sequence '" + current.name + "' has an empty body line");
      }
      saw_short_line = true;
    }
    current.length += width;
  }
  close_sequence();

  if (entries.empty()) {
    throw FormatError("FASTA contains no sequences");
  }
  return entries;
}

std::string serialize_faidx(const std::vector<FaidxEntry>& entries) {
  std::string out;
  for (const FaidxEntry& e : entries) {
    out += e.name;
    out += '\t';
    out += std::to_string(e.length);
    out += '\t';
    out += std::to_string(e.offset);
    out += '\t';
    out += std::to_string(e.line_bases);
    out += '\t';
    out += std::to_string(e.line_width);
    out += '\n';
  }
  return out;
}

std::vector<FaidxEntry> parse_faidx(std::string_view text) {
  std::vector<FaidxEntry> entries;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 5) {
      throw FormatError(".fai line " + std::to_string(line_no) + ": expected 5 fields, got " +
                        std::to_string(f.size()));
    }
    FaidxEntry e;
    e.name = std::string(f[0]);
    e.length = parse_u64(f[1], ".fai length");
    e.offset = parse_u64(f[2], ".fai offset");
    e.line_bases = static_cast<std::uint32_t>(parse_u64(f[3], ".fai linebases"));
    e.line_width = static_cast<std::uint32_t>(parse_u64(f[4], ".fai linewidth"));
    entries.push_back(std::move(e));
  }
  return entries;
}

std::uint64_t base_byte_offset(const FaidxEntry& entry, std::uint64_t b) {
  return entry.offset + (b / entry.line_bases) * entry.line_width + (b % entry.line_bases);
}

ChromOrder::ChromOrder(const std::vector<FaidxEntry>& entries) {
  names_.reserve(entries.size());
  for (const FaidxEntry& e : entries) {
    ordinals_.emplace(e.name, static_cast<std::uint32_t>(names_.size()));
    names_.push_back(e.name);
  }
}

std::uint32_t ChromOrder::ordinal(std::string_view name) const {
  auto it = ordinals_.find(std::string(name));
  if (it == ordinals_.end()) {
    throw FormatError("unknown sequence name: '" + std::string(name) + "'");
  }
  return it->second;
}

const std::string& ChromOrder::name(std::uint32_t ordinal) const {
  if (ordinal >= names_.size()) {
    throw FormatError("sequence ordinal out of range: " + std::to_string(ordinal));
  }
  return names_[ordinal];
}

std::int64_t linear_key(std::uint32_t chrom_ordinal, std::uint64_t pos) {
  if (pos >= (std::uint64_t{1} << 32)) {
    throw FormatError("genome position too large for linear key: " + std::to_string(pos));
  }
  return (static_cast<std::int64_t>(chrom_ordinal) << 32) | static_cast<std::int64_t>(pos);
}

std::uint32_t key_chrom(std::int64_t key) {
  return static_cast<std::uint32_t>(key >> 32);
}

std::uint64_t key_pos(std::int64_t key) {
  return static_cast<std::uint64_t>(key & 0xffffffff);
}

std::uint64_t FastaPartition::total_bases() const {
  std::uint64_t total = 0;
  for (const FastaSpan& s : spans) {
    total += s.length();
  }
  return total;
}

std::vector<FastaSpan> FastaPartition::primary_spans() const {
  std::vector<FastaSpan> out;
  std::uint64_t skip = overlap_bases;
  for (const FastaSpan& s : spans) {
    if (skip >= s.length()) {
      skip -= s.length();
      continue;
    }
    out.push_back(FastaSpan{s.name, s.start_base + skip, s.end_base});
    skip = 0;
  }
  return out;
}

std::vector<FastaPartition> plan_fasta_partitions(const std::vector<FaidxEntry>& index,
                                                  std::uint64_t chunk_bases,
                                                  std::uint64_t overlap_bases) {
  if (chunk_bases == 0) {
    throw ConfigError("chunk_bases must be positive");
  }
  if (overlap_bases >= chunk_bases) {
    throw ConfigError("overlap_bases (" + std::to_string(overlap_bases) +
                      ") must be smaller than chunk_bases (" + std::to_string(chunk_bases) + ")");
  }

  for (const FaidxEntry& e : index) {
    if (e.length == 0 || e.line_bases == 0) {
      throw FormatError("degenerate .fai entry for sequence '" + e.name + "'");
    }
  }

  std::vector<FastaPartition> plan;
  std::size_t seq = 0;
  std::uint64_t base = 0; // 0-based position inside index[seq]

  while (seq < index.size()) {
    FastaPartition p;
    p.chunk_id = plan.size();

    std::uint64_t span_start = base;
    if (base > 0) {
      span_start = base >= overlap_bases ? base - overlap_bases : 0;
      p.overlap_bases = base - span_start;
    }

    std::uint64_t remaining = chunk_bases;
    std::size_t span_seq = seq;
    while (remaining > 0 && seq < index.size()) {
      std::uint64_t take = std::min<std::uint64_t>(remaining, index[seq].length - base);
      base += take;
      remaining -= take;
      if (base == index[seq].length || remaining == 0) {
        p.spans.push_back(FastaSpan{index[span_seq].name, span_start, base});
        p.byte_ranges.push_back(ByteRange{base_byte_offset(index[span_seq], span_start),
                                          base_byte_offset(index[span_seq], base - 1) + 1});
        if (base == index[seq].length) {
          ++seq;
          base = 0;
          span_seq = seq;
          span_start = 0;
        }
      }
    }

    plan.push_back(std::move(p));
  }
  return plan;
}

namespace {

struct FastqScan {
  std::vector<std::uint64_t> record_starts;
  std::vector<FastqRecord> records;
  std::uint32_t max_read_length = 0;
};

FastqScan parse_fastq_impl(std::string_view text, std::uint64_t first_ordinal,
                           bool keep_records) {
  FastqScan scan;
  std::vector<Line> lines = scan_lines(text);
  if (lines.size() % 4 != 0) {
    throw FormatError("FASTQ record " +
                      std::to_string(first_ordinal + lines.size() / 4 + 1) +
                      " is truncated (file has " + std::to_string(lines.size()) +
                      " lines)");
  }
  for (std::size_t i = 0; i < lines.size(); i += 4) {
    std::uint64_t ordinal = first_ordinal + i / 4 + 1;
    const Line& header = lines[i];
    const Line& bases = lines[i + 1];
    const Line& sep = lines[i + 2];
    const Line& qual = lines[i + 3];
    if (header.content.empty() || header.content.front() != '@') {
      throw FormatError("FASTQ record " + std::to_string(ordinal) +
                        ": header does not start with '@'");
    }
    if (sep.content.empty() || sep.content.front() != '+') {
      throw FormatError("FASTQ record " + std::to_string(ordinal) +
                        ": separator does not start with '+'");
    }
    if (bases.content.empty() || !valid_bases(bases.content)) {
      throw FormatError("FASTQ record " + std::to_string(ordinal) +
                        ": bases must be nonempty over {A,C,G,T,N}");
    }
    if (qual.content.size() != bases.content.size()) {
      throw FormatError("FASTQ record " + std::to_string(ordinal) +
                        ": quality length " + std::to_string(qual.content.size()) +
                        " != read length " + std::to_string(bases.content.size()));
    }
    scan.record_starts.push_back(header.start);
    scan.max_read_length =
        std::max(scan.max_read_length, static_cast<std::uint32_t>(bases.content.size()));
    if (keep_records) {
      std::string id(first_token(header.content.substr(1)));
      if (id.empty()) {
        throw FormatError("FASTQ record " + std::to_string(ordinal) + ": empty read id");
      }
      scan.records.push_back(FastqRecord{std::move(id), std::string(bases.content)});
    }
  }
  return scan;
}

// Offset of the next record start at or after `from`, found by the
// '@' / '+' / equal-length witness over whole lines. Returns text.size()
// when no start remains.
std::uint64_t sync_to_record_start(std::string_view text, std::uint64_t from) {
  std::uint64_t at = from;
  if (at > 0 && at <= text.size() && text[at - 1] != '\n') {
    std::size_t nl = text.find('\n', at);
    if (nl == std::string_view::npos) {
      return text.size();
    }
    at = nl + 1;
  }
  while (at < text.size()) {
    // Bounds of this line and the following three.
    std::uint64_t starts[4];
    std::uint64_t lens[4];
    std::uint64_t cursor = at;
    bool have_four = true;
    for (int k = 0; k < 4; ++k) {
      if (cursor >= text.size()) {
        have_four = false;
        break;
      }
      starts[k] = cursor;
      std::size_t nl = text.find('\n', cursor);
      std::uint64_t end = nl == std::string_view::npos ? text.size() : nl;
      lens[k] = end - cursor;
      cursor = nl == std::string_view::npos ? text.size() : nl + 1;
    }
    if (!have_four) {
      return text.size();
    }
    if (text[starts[0]] == '@' && lens[2] > 0 && text[starts[2]] == '+' &&
        lens[1] == lens[3]) {
      return starts[0];
    }
    std::size_t nl = text.find('\n', at);
    if (nl == std::string_view::npos) {
      return text.size();
    }
    at = nl + 1;
  }
  return text.size();
}

} // namespace

std::vector<FastqChunk> plan_fastq_partitions(std::string_view fastq_text,
                                              std::uint64_t target_bytes,
                                              FastqStats* stats) {
  if (target_bytes == 0) {
    throw ConfigError("fastq target_bytes must be positive");
  }
  FastqScan scan = parse_fastq_impl(fastq_text, 0, /*keep_records=*/false);
  if (stats) {
    stats->record_count = scan.record_starts.size();
    stats->max_read_length = scan.max_read_length;
  }
  if (scan.record_starts.empty()) {
    return {};
  }

  std::vector<std::uint64_t> edges{0};
  for (std::uint64_t k = 1; k * target_bytes < fastq_text.size(); ++k) {
    std::uint64_t boundary = sync_to_record_start(fastq_text, k * target_bytes);
    if (boundary >= fastq_text.size()) {
      break;
    }
    if (!std::binary_search(scan.record_starts.begin(), scan.record_starts.end(), boundary)) {
      throw FormatError("FASTQ boundary sync landed off-record at byte " +
                        std::to_string(boundary));
    }
    if (boundary > edges.back()) {
      edges.push_back(boundary);
    }
  }
  edges.push_back(fastq_text.size());

  std::vector<FastqChunk> chunks;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    FastqChunk c;
    c.chunk_id = chunks.size();
    c.byte_lo = edges[i];
    c.byte_hi = edges[i + 1];
    auto lo = std::lower_bound(scan.record_starts.begin(), scan.record_starts.end(), c.byte_lo);
    auto hi = std::lower_bound(scan.record_starts.begin(), scan.record_starts.end(), c.byte_hi);
    c.record_count = static_cast<std::uint64_t>(hi - lo);
    chunks.push_back(c);
  }
  return chunks;
}

std::vector<FastqRecord> parse_fastq_records(std::string_view text,
                                             std::uint64_t first_record_ordinal) {
  return parse_fastq_impl(text, first_record_ordinal, /*keep_records=*/true).records;
}

std::string serialize_fasta_plan(const std::vector<FastaPartition>& plan) {
  std::string out;
  for (const FastaPartition& p : plan) {
    for (std::size_t i = 0; i < p.spans.size(); ++i) {
      out += std::to_string(p.chunk_id);
      out += '\t';
      out += std::to_string(p.overlap_bases);
      out += '\t';
      out += p.spans[i].name;
      out += '\t';
      out += std::to_string(p.spans[i].start_base);
      out += '\t';
      out += std::to_string(p.spans[i].end_base);
      out += '\t';
      out += std::to_string(p.byte_ranges[i].lo);
      out += '\t';
      out += std::to_string(p.byte_ranges[i].hi);
      out += '\n';
    }
  }
  return out;
}

std::vector<FastaPartition> parse_fasta_plan(std::string_view text) {
  std::vector<FastaPartition> plan;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 7) {
      throw FormatError("fasta plan line " + std::to_string(line_no) +
                        ": expected 7 fields, got " + std::to_string(f.size()));
    }
    std::size_t chunk_id = parse_u64(f[0], "plan chunk_id");
    if (plan.empty() || plan.back().chunk_id != chunk_id) {
      if (chunk_id != plan.size()) {
        throw FormatError("fasta plan line " + std::to_string(line_no) +
                          ": chunk ids must be dense and in order");
      }
      FastaPartition p;
      p.chunk_id = chunk_id;
      p.overlap_bases = parse_u64(f[1], "plan overlap");
      plan.push_back(std::move(p));
    }
    FastaPartition& p = plan.back();
    p.spans.push_back(FastaSpan{std::string(f[2]), parse_u64(f[3], "plan span start"),
                                parse_u64(f[4], "plan span end")});
    p.byte_ranges.push_back(
        ByteRange{parse_u64(f[5], "plan byte lo"), parse_u64(f[6], "plan byte hi")});
  }
  return plan;
}

std::string serialize_fastq_plan(const std::vector<FastqChunk>& chunks) {
  std::string out;
  for (const FastqChunk& c : chunks) {
    out += std::to_string(c.chunk_id);
    out += '\t';
    out += std::to_string(c.byte_lo);
    out += '\t';
    out += std::to_string(c.byte_hi);
    out += '\t';
    out += std::to_string(c.record_count);
    out += '\n';
  }
  return out;
}

std::vector<FastqChunk> parse_fastq_plan(std::string_view text) {
  std::vector<FastqChunk> chunks;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 4) {
      throw FormatError("fastq plan line " + std::to_string(line_no) +
                        ": expected 4 fields, got " + std::to_string(f.size()));
    }
    FastqChunk c;
    c.chunk_id = parse_u64(f[0], "plan chunk_id");
    c.byte_lo = parse_u64(f[1], "plan byte lo");
    c.byte_hi = parse_u64(f[2], "plan byte hi");
    c.record_count = parse_u64(f[3], "plan record count");
    chunks.push_back(c);
  }
  return chunks;
}

std::vector<SpanText> fetch_fasta_partition(const RangeReader& read_range,
                                            const ObjectRef& fasta,
                                            const FastaPartition& partition) {
  if (partition.spans.size() != partition.byte_ranges.size()) {
    throw PipelineError("partition spans and byte ranges out of step");
  }
  std::vector<SpanText> out;
  out.reserve(partition.spans.size());
  for (std::size_t i = 0; i < partition.spans.size(); ++i) {
    const FastaSpan& span = partition.spans[i];
    const ByteRange& range = partition.byte_ranges[i];
    std::string raw = read_range(fasta, range.lo, range.hi);
    std::string bases;
    bases.reserve(raw.size());
    for (char c : raw) {
      if (c != '\n') {
        bases += c;
      }
    }
    if (bases.size() != span.length()) {
      throw FormatError("partition span " + span.name + "[" + std::to_string(span.start_base) +
                        "," + std::to_string(span.end_base) + ") fetched " +
                        std::to_string(bases.size()) + " bases from " + fasta.id());
    }
    out.push_back(SpanText{span, std::move(bases)});
  }
  return out;
}

} // namespace faasflow
