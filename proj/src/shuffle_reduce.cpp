#include "faasflow/shuffle_reduce.hpp"

#include <algorithm>
#include <map>

#include "faasflow/errors.hpp"
#include "faasflow/text.hpp"

namespace faasflow {

std::uint64_t ReducePartition::est_bytes() const {
  std::uint64_t total = 0;
  for (const IndexRange& r : ranges) {
    total += r.est_bytes;
  }
  return total;
}

RowSizeSample sample_row_sizes(const ObjectReader& read, std::span<const ObjectRef> refs,
                               std::size_t n_samples) {
  if (n_samples == 0) {
    throw ConfigError("n_samples must be at least 1");
  }
  RowSizeSample sample;
  bool any = false;
  for (const ObjectRef& ref : refs) {
    std::string text = read(ref);
    std::vector<std::string_view> lines = split_lines(text);
    if (lines.empty()) {
      continue;
    }
    bool final_terminated = !text.empty() && text.back() == '\n';
    for (std::size_t k = 0; k < n_samples; ++k) {
      std::size_t i = k * lines.size() / n_samples;
      std::uint64_t bytes = lines[i].size();
      if (i + 1 < lines.size() || final_terminated) {
        bytes += 1;
      }
      if (!any) {
        sample.min_bytes = sample.max_bytes = bytes;
        any = true;
      } else {
        sample.min_bytes = std::min(sample.min_bytes, bytes);
        sample.max_bytes = std::max(sample.max_bytes, bytes);
      }
    }
  }
  if (!any) {
    throw FormatError("row size sampling over empty input: every object is empty");
  }
  return sample;
}

IndexColumns extract_index_columns(const SelectFn& select, std::span<const ObjectRef> refs,
                                   bool keyed, std::uint32_t chrom_ordinal) {
  IndexColumns out;
  out.per_file.reserve(refs.size());
  ScanQuery query;
  query.projection = {keyed ? std::size_t{0} : std::size_t{1}};
  for (const ObjectRef& ref : refs) {
    auto [rows, report] = select(ref, query);
    out.scan_bytes += report.bytes_scanned;
    std::vector<std::int64_t> keys;
    keys.reserve(rows.size());
    for (const ScanRow& row : rows) {
      std::int64_t v = parse_i64(row[0], ref.id() + " index column");
      keys.push_back(keyed ? v : linear_key(chrom_ordinal, static_cast<std::uint64_t>(v)));
    }
    out.per_file.push_back(std::move(keys));
  }
  return out;
}

std::vector<ReducePartition> plan_ranges(const std::vector<std::vector<std::int64_t>>& per_file_keys,
                                         std::uint64_t max_row_bytes,
                                         std::uint64_t budget_bytes,
                                         std::size_t fasta_chunk_id) {
  if (max_row_bytes == 0) {
    throw ConfigError("max_row_bytes must be positive");
  }
  if (budget_bytes < max_row_bytes) {
    throw ConfigError("budget_bytes (" + std::to_string(budget_bytes) +
                      ") must be at least max_row_bytes (" + std::to_string(max_row_bytes) + ")");
  }

  // Exact per-key row counts across the file set. Each file holds at most
  // one row per position.
  std::map<std::int64_t, std::uint64_t> rows_at;
  for (const auto& keys : per_file_keys) {
    for (std::int64_t k : keys) {
      ++rows_at[k];
    }
  }

  std::vector<IndexRange> ranges;
  IndexRange current;
  bool open = false;
  auto close = [&]() {
    if (open) {
      current.est_bytes = current.rows * max_row_bytes;
      ranges.push_back(current);
      open = false;
    }
  };
  for (const auto& [key, rows] : rows_at) {
    if (rows * max_row_bytes > budget_bytes) {
      close();
      ranges.push_back(IndexRange{fasta_chunk_id, key, key, rows, rows * max_row_bytes, true});
      continue;
    }
    if (open && (current.rows + rows) * max_row_bytes <= budget_bytes) {
      current.hi_key = key;
      current.rows += rows;
      continue;
    }
    close();
    current = IndexRange{fasta_chunk_id, key, key, rows, 0, false};
    open = true;
  }
  close();

  std::vector<ReducePartition> partitions;
  for (const IndexRange& range : ranges) {
    bool fits = !partitions.empty() && !partitions.back().oversized && !range.oversized &&
                partitions.back().est_bytes() + range.est_bytes <= budget_bytes;
    if (!fits) {
      ReducePartition p;
      p.partition_id = partitions.size();
      p.fasta_chunk_id = fasta_chunk_id;
      p.budget_bytes = budget_bytes;
      p.oversized = range.oversized;
      partitions.push_back(std::move(p));
    }
    partitions.back().ranges.push_back(range);
  }
  return partitions;
}

std::optional<VariantCall> call_row(std::string_view chrom, std::uint64_t pos, char ref_base,
                                    std::uint32_t depth, std::string_view bases,
                                    const CallerConfig& caller) {
  static constexpr char kAlleles[4] = {'A', 'C', 'G', 'T'};
  std::uint32_t counts[4] = {0, 0, 0, 0};
  for (char b : bases) {
    for (int i = 0; i < 4; ++i) {
      if (b == kAlleles[i]) {
        ++counts[i];
        break;
      }
    }
  }
  char alt = 0;
  std::uint32_t alt_count = 0;
  for (int i = 0; i < 4; ++i) {
    if (kAlleles[i] != ref_base && counts[i] > alt_count) {
      alt = kAlleles[i];
      alt_count = counts[i];
    }
  }
  if (alt_count == 0 || depth < caller.min_depth) {
    return std::nullopt;
  }
  double freq = static_cast<double>(alt_count) / static_cast<double>(depth);
  if (freq < caller.theta) {
    return std::nullopt;
  }
  VariantCall call;
  call.chrom = std::string(chrom);
  call.pos = pos;
  call.ref_base = ref_base;
  call.alt_base = alt;
  call.depth = depth;
  call.alt_count = alt_count;
  call.alt_freq = freq;
  return call;
}

std::vector<VariantCall> reduce_partition(const SelectFn& select, const ReducePartition& partition,
                                          bool keyed, const ChromOrder& order,
                                          const CallerConfig& caller) {
  for (std::size_t i = 0; i + 1 < partition.ranges.size(); ++i) {
    if (partition.ranges[i].hi_key >= partition.ranges[i + 1].lo_key) {
      throw PipelineError("reduce partition " + std::to_string(partition.partition_id) +
                          ": overlapping or unsorted ranges (planner bug)");
    }
  }

  std::vector<ObjectRef> refs = partition.mpileup_refs;
  std::sort(refs.begin(), refs.end(), [](const ObjectRef& a, const ObjectRef& b) {
    return a.id() < b.id();
  });

  struct Cell {
    char ref = 'N';
    std::uint64_t depth = 0;
    std::string bases;
  };
  std::map<std::int64_t, Cell> merged;

  for (const IndexRange& range : partition.ranges) {
    ScanQuery query;
    if (keyed) {
      query.projection = {0, 1, 2, 3, 4, 5};
      query.predicate = ScanQuery::Between{0, range.lo_key, range.hi_key};
    } else {
      if (key_chrom(range.lo_key) != key_chrom(range.hi_key)) {
        throw PipelineError("plain mpileup range spans several sequences (planner bug)");
      }
      query.projection = {0, 1, 2, 3, 4};
      query.predicate = ScanQuery::Between{1, static_cast<std::int64_t>(key_pos(range.lo_key)),
                                           static_cast<std::int64_t>(key_pos(range.hi_key))};
    }

    for (const ObjectRef& ref : refs) {
      auto [rows, report] = select(ref, query);
      for (const ScanRow& row : rows) {
        std::size_t base = keyed ? 1 : 0;
        std::string_view chrom = row[base];
        std::uint64_t pos = parse_u64(row[base + 1], ref.id() + " mpileup pos");
        char ref_base = row[base + 2].size() == 1 ? row[base + 2][0] : '\0';
        if (ref_base == '\0') {
          throw FormatError(ref.id() + ": mpileup ref field must be one base");
        }
        std::uint64_t depth = parse_u64(row[base + 3], ref.id() + " mpileup depth");
        const std::string& bases = row[base + 4];
        if (depth != bases.size()) {
          throw FormatError(ref.id() + ": mpileup depth " + std::to_string(depth) +
                            " != bases length " + std::to_string(bases.size()));
        }
        std::int64_t key = linear_key(order.ordinal(chrom), pos);
        Cell& cell = merged[key];
        if (cell.depth == 0) {
          cell.ref = ref_base;
        } else if (cell.ref != ref_base) {
          throw PipelineError(ref.id() + ": reference base disagrees at " + std::string(chrom) +
                              ":" + std::to_string(pos));
        }
        cell.depth += depth;
        cell.bases += bases;
      }
    }
  }

  std::vector<VariantCall> calls;
  for (const auto& [key, cell] : merged) {
    auto call = call_row(order.name(key_chrom(key)), key_pos(key), cell.ref,
                         static_cast<std::uint32_t>(cell.depth), cell.bases, caller);
    if (call) {
      calls.push_back(std::move(*call));
    }
  }
  return calls;
}

std::string serialize_calls(const std::vector<VariantCall>& calls) {
  std::string out;
  for (const VariantCall& c : calls) {
    out += c.chrom;
    out += '\t';
    out += std::to_string(c.pos);
    out += '\t';
    out += c.ref_base;
    out += '\t';
    out += c.alt_base;
    out += '\t';
    out += std::to_string(c.depth);
    out += '\t';
    out += std::to_string(c.alt_count);
    out += '\t';
    out += format_fixed6(c.alt_freq);
    out += '\n';
  }
  return out;
}

std::vector<VariantCall> parse_calls(std::string_view text) {
  std::vector<VariantCall> calls;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 7) {
      throw FormatError("variant call line " + std::to_string(line_no) +
                        ": expected 7 fields, got " + std::to_string(f.size()));
    }
    if (f[2].size() != 1 || f[3].size() != 1) {
      throw FormatError("variant call line " + std::to_string(line_no) +
                        ": ref and alt must be single bases");
    }
    VariantCall c;
    c.chrom = std::string(f[0]);
    c.pos = parse_u64(f[1], "call pos");
    c.ref_base = f[2][0];
    c.alt_base = f[3][0];
    c.depth = static_cast<std::uint32_t>(parse_u64(f[4], "call depth"));
    c.alt_count = static_cast<std::uint32_t>(parse_u64(f[5], "call alt_count"));
    c.alt_freq = std::stod(std::string(f[6]));
    calls.push_back(std::move(c));
  }
  return calls;
}

std::string concat_call_objects(const std::vector<std::string>& partial_texts,
                                const ChromOrder& order) {
  std::string out;
  for (const std::string& t : partial_texts) {
    out += t;
  }
  std::int64_t last_key = -1;
  for (const VariantCall& c : parse_calls(out)) {
    std::int64_t key = linear_key(order.ordinal(c.chrom), c.pos);
    if (key <= last_key) {
      throw PipelineError("concatenated calls not globally sorted at " + c.chrom + ":" +
                          std::to_string(c.pos));
    }
    last_key = key;
  }
  return out;
}

std::string serialize_partition_table(const std::vector<ObjectRef>& mpileup_refs,
                                      const std::vector<ReducePartition>& partitions) {
  std::string out;
  for (const ObjectRef& ref : mpileup_refs) {
    out += "F\t" + ref.bucket + '\t' + ref.key + '\t' + std::to_string(ref.size) + '\n';
  }
  for (const ReducePartition& p : partitions) {
    out += "P\t" + std::to_string(p.partition_id) + '\t' + std::to_string(p.budget_bytes) +
           '\t' + (p.oversized ? "1" : "0") + '\n';
    for (const IndexRange& r : p.ranges) {
      out += "R\t" + std::to_string(p.partition_id) + '\t' + std::to_string(r.lo_key) + '\t' +
             std::to_string(r.hi_key) + '\t' + std::to_string(r.rows) + '\t' +
             std::to_string(r.est_bytes) + '\t' + (r.oversized ? "1" : "0") + '\n';
    }
  }
  return out;
}

std::pair<std::vector<ObjectRef>, std::vector<ReducePartition>>
parse_partition_table(std::string_view text, std::size_t fasta_chunk_id) {
  std::vector<ObjectRef> refs;
  std::vector<ReducePartition> partitions;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    std::vector<std::string_view> f = split(line, '\t');
    auto expect = [&](std::size_t n) {
      if (f.size() != n) {
        throw FormatError("partition table line " + std::to_string(line_no) + ": expected " +
                          std::to_string(n) + " fields, got " + std::to_string(f.size()));
      }
    };
    if (f.empty()) {
      continue;
    }
    if (f[0] == "F") {
      expect(4);
      refs.push_back(ObjectRef{std::string(f[1]), std::string(f[2]),
                               parse_u64(f[3], "table object size")});
    } else if (f[0] == "P") {
      expect(4);
      ReducePartition p;
      p.partition_id = parse_u64(f[1], "table partition id");
      p.fasta_chunk_id = fasta_chunk_id;
      p.budget_bytes = parse_u64(f[2], "table budget");
      p.oversized = f[3] == "1";
      partitions.push_back(std::move(p));
    } else if (f[0] == "R") {
      expect(7);
      if (partitions.empty() ||
          partitions.back().partition_id != parse_u64(f[1], "table partition id")) {
        throw FormatError("partition table line " + std::to_string(line_no) +
                          ": range row outside its partition");
      }
      IndexRange r;
      r.fasta_chunk_id = fasta_chunk_id;
      r.lo_key = parse_i64(f[2], "table lo key");
      r.hi_key = parse_i64(f[3], "table hi key");
      r.rows = parse_u64(f[4], "table rows");
      r.est_bytes = parse_u64(f[5], "table est bytes");
      r.oversized = f[6] == "1";
      partitions.back().ranges.push_back(r);
    } else {
      throw FormatError("partition table line " + std::to_string(line_no) +
                        ": unknown row tag '" + std::string(f[0]) + "'");
    }
  }
  for (ReducePartition& p : partitions) {
    p.mpileup_refs = refs;
  }
  return {std::move(refs), std::move(partitions)};
}

} // namespace faasflow
