#pragma once

// Shared test scaffolding: a scratch store rooted in a fresh temp
// directory, seeded RNG helpers, and the independent oracles the unit
// tests check the library against. The oracles deliberately avoid the
// library's own parsing/scanning code paths.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <utility>
#include <vector>

#include "faasflow/genome_io.hpp"
#include "faasflow/object_store.hpp"
#include "faasflow/select_engine.hpp"

namespace testsupport {

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> seq{0};
    path_ = std::filesystem::temp_directory_path() /
            ("faasflow-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(seq.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline char random_base(std::mt19937& rng) {
  static constexpr char bases[4] = {'A', 'C', 'G', 'T'};
  return bases[rng() % 4];
}

inline std::string random_sequence(std::mt19937& rng, std::size_t length) {
  std::string s;
  s.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    s += random_base(rng);
  }
  return s;
}

// FASTA text with the given per-sequence bodies and line width.
inline std::string fasta_text(const std::vector<std::pair<std::string, std::string>>& seqs,
                              std::size_t line_width) {
  std::string out;
  for (const auto& [name, bases] : seqs) {
    out += ">" + name + "\n";
    for (std::size_t i = 0; i < bases.size(); i += line_width) {
      out += bases.substr(i, line_width);
      out += '\n';
    }
  }
  return out;
}

struct OracleFaidxEntry {
  std::string name;
  std::uint64_t length;
  std::uint64_t offset;
  std::uint32_t line_bases;
  std::uint32_t line_width;
};

// Sequential character-walk faidx oracle, independent of the library's
// line scanner.
inline std::vector<OracleFaidxEntry> oracle_faidx(const std::string& text) {
  std::vector<OracleFaidxEntry> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '>') {
      throw std::runtime_error("oracle: expected header");
    }
    std::size_t name_start = i + 1;
    while (i < text.size() && text[i] != '\n') {
      ++i;
    }
    std::string header = text.substr(name_start, i - name_start);
    std::string name = header.substr(0, header.find_first_of(" \t"));
    ++i; // past LF
    OracleFaidxEntry e{name, 0, i, 0, 0};
    bool first_line = true;
    while (i < text.size() && text[i] != '>') {
      std::size_t line_start = i;
      while (i < text.size() && text[i] != '\n') {
        ++i;
      }
      std::size_t bases = i - line_start;
      bool terminated = i < text.size();
      if (terminated) {
        ++i;
      }
      if (first_line) {
        e.line_bases = static_cast<std::uint32_t>(bases);
        e.line_width = static_cast<std::uint32_t>(bases + 1);
        first_line = false;
      }
      e.length += bases;
    }
    out.push_back(e);
  }
  return out;
}

// Brute-force filter/projection over tab-separated text, reimplemented
// with its own field walker.
inline std::vector<std::vector<std::string>> oracle_select(const std::string& text,
                                                           const faasflow::ScanQuery& query) {
  std::vector<std::vector<std::string>> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) {
      eol = text.size();
    }
    std::vector<std::string> fields;
    std::string cur;
    for (std::size_t i = pos; i < eol; ++i) {
      if (text[i] == '\t') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += text[i];
      }
    }
    fields.push_back(cur);

    bool keep = true;
    if (query.predicate) {
      long long v = std::stoll(fields.at(query.predicate->column));
      keep = v >= query.predicate->lo && v <= query.predicate->hi;
    }
    if (keep) {
      std::vector<std::string> projected;
      for (std::size_t col : query.projection) {
        projected.push_back(fields.at(col));
      }
      out.push_back(std::move(projected));
    }
    pos = eol + 1;
  }
  return out;
}

// Naive full-scan alignment oracle: every offset of every sequence,
// minimum mismatches, ties to the earliest (sequence, offset).
struct OracleHit {
  std::string chrom;
  std::uint64_t gpos; // 1-based
  std::uint32_t mismatches;
};

inline bool oracle_match(char a, char b) { return a == b && a != 'N' && b != 'N'; }

inline std::optional<OracleHit>
oracle_align(const std::vector<std::pair<std::string, std::string>>& genome,
             const std::string& read, std::uint32_t max_mm) {
  std::optional<OracleHit> best;
  for (const auto& [name, seq] : genome) {
    if (read.size() > seq.size()) {
      continue;
    }
    for (std::size_t off = 0; off + read.size() <= seq.size(); ++off) {
      std::uint32_t mm = 0;
      for (std::size_t k = 0; k < read.size(); ++k) {
        if (!oracle_match(read[k], seq[off + k])) {
          ++mm;
        }
      }
      if (mm <= max_mm && (!best || mm < best->mismatches)) {
        best = OracleHit{name, off + 1, mm};
      }
    }
  }
  return best;
}

struct SyntheticDataset {
  std::string fasta_text;
  std::string fastq_text;
};

// Genome of the given sequence lengths plus reads sampled from it with
// per-base mutations. Read ids are zero-padded so FASTQ order equals id
// order.
inline SyntheticDataset make_dataset(std::mt19937& rng,
                                     const std::vector<std::size_t>& seq_lengths,
                                     std::size_t n_reads, std::size_t read_len,
                                     double mutation_rate, std::size_t fasta_line_width = 60) {
  std::vector<std::pair<std::string, std::string>> seqs;
  for (std::size_t s = 0; s < seq_lengths.size(); ++s) {
    seqs.emplace_back("seq" + std::to_string(s), random_sequence(rng, seq_lengths[s]));
  }

  std::string fastq;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n_reads; ++i) {
    const auto& [name, seq] = seqs[rng() % seqs.size()];
    std::size_t off = rng() % (seq.size() - read_len + 1);
    std::string bases = seq.substr(off, read_len);
    for (char& c : bases) {
      if (unit(rng) < mutation_rate) {
        char replacement = random_base(rng);
        while (replacement == c) {
          replacement = random_base(rng);
        }
        c = replacement;
      }
    }
    char id[32];
    std::snprintf(id, sizeof(id), "r%05zu", i);
    fastq += "@" + std::string(id) + "\n" + bases + "\n+\n" + std::string(read_len, 'I') + "\n";
  }
  return SyntheticDataset{fasta_text(seqs, fasta_line_width), fastq};
}

} // namespace testsupport
