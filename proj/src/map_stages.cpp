#include "faasflow/map_stages.hpp"

#include <algorithm>
#include <map>
#include <thread>

#include "faasflow/errors.hpp"
#include "faasflow/text.hpp"

namespace faasflow {

namespace {

bool base_match(char a, char b) {
  return a == b && a != 'N' && b != 'N';
}

std::optional<AlignmentRecord> align_read(const std::vector<SpanText>& reference,
                                          const FastqRecord& read,
                                          std::uint32_t max_mismatches,
                                          std::size_t fasta_chunk_id,
                                          bool* fits_somewhere) {
  const std::size_t len = read.bases.size();
  bool found = false;
  std::uint32_t best_mm = 0;
  std::size_t best_span = 0;
  std::uint64_t best_offset = 0;

  for (std::size_t si = 0; si < reference.size(); ++si) {
    const std::string& ref = reference[si].bases;
    if (len > ref.size()) {
      continue;
    }
    *fits_somewhere = true;
    // Ties never replace an earlier hit, so anything reaching the current
    // best cannot help and the inner loop aborts early.
    for (std::uint64_t off = 0; off + len <= ref.size(); ++off) {
      std::uint32_t budget = found ? std::min(max_mismatches, best_mm) : max_mismatches;
      std::uint32_t mm = 0;
      bool over = false;
      for (std::size_t k = 0; k < len; ++k) {
        if (!base_match(read.bases[k], ref[off + k])) {
          if (++mm > budget) {
            over = true;
            break;
          }
        }
      }
      if (over || (found && mm >= best_mm)) {
        continue;
      }
      found = true;
      best_mm = mm;
      best_span = si;
      best_offset = off;
      if (best_mm == 0) {
        break; // nothing in later offsets of this span can beat an exact hit
      }
    }
    if (found && best_mm == 0) {
      break;
    }
  }

  if (!found) {
    return std::nullopt;
  }
  const FastaSpan& span = reference[best_span].span;
  AlignmentRecord rec;
  rec.read_id = read.id;
  rec.chrom = span.name;
  rec.gpos = span.start_base + best_offset + 1;
  rec.mismatches = best_mm;
  rec.read_bases = read.bases;
  rec.fasta_chunk_id = fasta_chunk_id;
  return rec;
}

} // namespace

std::vector<AlignmentRecord> align_chunk(const std::vector<SpanText>& reference,
                                         const std::vector<FastqRecord>& reads,
                                         std::uint32_t max_mismatches,
                                         std::uint32_t vcpus,
                                         std::size_t fasta_chunk_id,
                                         AlignStats* stats) {
  std::vector<std::optional<AlignmentRecord>> slots(reads.size());
  std::vector<std::uint8_t> fits(reads.size(), 0);

  auto run_block = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      bool fit = false;
      slots[i] = align_read(reference, reads[i], max_mismatches, fasta_chunk_id, &fit);
      fits[i] = fit ? 1 : 0;
    }
  };

  std::uint32_t workers = std::max<std::uint32_t>(1, vcpus);
  if (workers == 1 || reads.size() < 2) {
    run_block(0, reads.size());
  } else {
    std::vector<std::thread> pool;
    std::size_t per = (reads.size() + workers - 1) / workers;
    for (std::uint32_t w = 0; w < workers; ++w) {
      std::size_t begin = std::min(reads.size(), static_cast<std::size_t>(w) * per);
      std::size_t end = std::min(reads.size(), begin + per);
      if (begin < end) {
        pool.emplace_back(run_block, begin, end);
      }
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }

  std::vector<AlignmentRecord> out;
  for (std::size_t i = 0; i < reads.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    }
    if (stats) {
      ++stats->reads_total;
      if (slots[i]) {
        ++stats->reads_aligned;
      }
      if (!fits[i]) {
        ++stats->reads_too_long;
      }
    }
  }
  return out;
}

std::vector<AlignmentRecord> correct_index(const std::vector<AlignmentRecord>& candidates,
                                           const ChromOrder& order) {
  // Per read: minimum (mismatches, chrom order, gpos, chunk id). Keeping a
  // single minimum also collapses overlap duplicates (same chrom+gpos seen
  // from two chunks) to the lowest chunk id.
  std::map<std::string_view, const AlignmentRecord*> best;
  for (const AlignmentRecord& c : candidates) {
    auto rank = [&](const AlignmentRecord& r) {
      return std::make_tuple(r.mismatches, order.ordinal(r.chrom), r.gpos, r.fasta_chunk_id);
    };
    auto [it, inserted] = best.emplace(c.read_id, &c);
    if (!inserted && rank(c) < rank(*it->second)) {
      it->second = &c;
    }
  }
  std::vector<AlignmentRecord> out;
  out.reserve(best.size());
  for (const auto& [id, rec] : best) {
    out.push_back(*rec);
  }
  return out;
}

std::vector<std::vector<AlignmentRecord>>
route_by_primary_range(const std::vector<AlignmentRecord>& records,
                       const std::vector<FastaPartition>& plan,
                       const ChromOrder& order) {
  struct Tile {
    std::uint64_t lo = 0; // 1-based inclusive
    std::uint64_t hi = 0; // 1-based inclusive
    std::size_t chunk_id = 0;
  };
  std::vector<std::vector<Tile>> tiles(order.count());
  for (const FastaPartition& p : plan) {
    for (const FastaSpan& s : p.primary_spans()) {
      tiles[order.ordinal(s.name)].push_back(Tile{s.start_base + 1, s.end_base, p.chunk_id});
    }
  }
  for (auto& per_chrom : tiles) {
    std::sort(per_chrom.begin(), per_chrom.end(),
              [](const Tile& a, const Tile& b) { return a.lo < b.lo; });
  }

  std::vector<std::vector<AlignmentRecord>> routed(plan.size());
  for (const AlignmentRecord& rec : records) {
    std::uint64_t lo = rec.gpos;
    std::uint64_t hi = rec.gpos + rec.read_bases.size() - 1;
    for (const Tile& t : tiles[order.ordinal(rec.chrom)]) {
      if (t.lo > hi) {
        break;
      }
      if (t.hi >= lo) {
        routed[t.chunk_id].push_back(rec);
      }
    }
  }
  return routed;
}

std::vector<MpileupRow> make_mpileup(const std::vector<AlignmentRecord>& records,
                                     const std::vector<SpanText>& reference,
                                     const FastaPartition& partition,
                                     const ChromOrder& order) {
  std::vector<const AlignmentRecord*> ordered;
  ordered.reserve(records.size());
  for (const AlignmentRecord& r : records) {
    ordered.push_back(&r);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const AlignmentRecord* a, const AlignmentRecord* b) {
                     return a->read_id < b->read_id;
                   });

  // Owned 1-based closed position intervals, linearized.
  struct Interval {
    std::int64_t lo, hi;
  };
  std::vector<Interval> owned;
  for (const FastaSpan& s : partition.primary_spans()) {
    std::uint32_t ord = order.ordinal(s.name);
    owned.push_back(Interval{linear_key(ord, s.start_base + 1), linear_key(ord, s.end_base)});
  }

  auto is_owned = [&](std::int64_t key) {
    for (const Interval& iv : owned) {
      if (key >= iv.lo && key <= iv.hi) {
        return true;
      }
    }
    return false;
  };

  auto ref_base_at = [&](std::string_view chrom, std::uint64_t pos) -> char {
    for (const SpanText& st : reference) {
      if (st.span.name == chrom && pos > st.span.start_base && pos <= st.span.end_base) {
        return st.bases[pos - st.span.start_base - 1];
      }
    }
    throw PipelineError("alignment position " + std::string(chrom) + ":" + std::to_string(pos) +
                        " outside partition " + std::to_string(partition.chunk_id) +
                        " spans (correction bug)");
  };

  struct Cell {
    char ref = 'N';
    std::string bases;
  };
  std::map<std::int64_t, Cell> cells;
  for (const AlignmentRecord* rec : ordered) {
    std::uint32_t ord = order.ordinal(rec->chrom);
    for (std::size_t k = 0; k < rec->read_bases.size(); ++k) {
      std::uint64_t pos = rec->gpos + k;
      std::int64_t key = linear_key(ord, pos);
      if (!is_owned(key)) {
        continue;
      }
      Cell& cell = cells[key];
      if (cell.bases.empty()) {
        cell.ref = ref_base_at(rec->chrom, pos);
      }
      cell.bases += rec->read_bases[k];
    }
  }

  std::vector<MpileupRow> rows;
  rows.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    MpileupRow row;
    row.chrom = order.name(key_chrom(key));
    row.pos = key_pos(key);
    row.ref_base = cell.ref;
    row.depth = static_cast<std::uint32_t>(cell.bases.size());
    row.bases = cell.bases;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string serialize_map_records(const std::vector<AlignmentRecord>& records) {
  std::string out;
  for (const AlignmentRecord& r : records) {
    out += r.read_id;
    out += '\t';
    out += r.chrom;
    out += '\t';
    out += std::to_string(r.gpos);
    out += '\t';
    out += std::to_string(r.mismatches);
    out += '\t';
    out += r.read_bases;
    out += '\n';
  }
  return out;
}

std::vector<AlignmentRecord> parse_map_records(std::string_view text,
                                               std::size_t fasta_chunk_id) {
  std::vector<AlignmentRecord> records;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 5) {
      throw FormatError(".map line " + std::to_string(line_no) + ": expected 5 fields, got " +
                        std::to_string(f.size()));
    }
    AlignmentRecord r;
    r.read_id = std::string(f[0]);
    r.chrom = std::string(f[1]);
    r.gpos = parse_u64(f[2], ".map gpos");
    r.mismatches = static_cast<std::uint32_t>(parse_u64(f[3], ".map mismatches"));
    r.read_bases = std::string(f[4]);
    r.fasta_chunk_id = fasta_chunk_id;
    records.push_back(std::move(r));
  }
  return records;
}

bool mpileup_is_keyed(const FastaPartition& partition) {
  for (std::size_t i = 1; i < partition.spans.size(); ++i) {
    if (partition.spans[i].name != partition.spans[0].name) {
      return true;
    }
  }
  return false;
}

std::string serialize_mpileup(const std::vector<MpileupRow>& rows, const ChromOrder& order,
                              bool keyed) {
  std::string out;
  for (const MpileupRow& row : rows) {
    if (keyed) {
      out += std::to_string(linear_key(order.ordinal(row.chrom), row.pos));
      out += '\t';
    }
    out += row.chrom;
    out += '\t';
    out += std::to_string(row.pos);
    out += '\t';
    out += row.ref_base;
    out += '\t';
    out += std::to_string(row.depth);
    out += '\t';
    out += row.bases;
    out += '\n';
  }
  return out;
}

} // namespace faasflow
