#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "faasflow/errors.hpp"
#include "faasflow/shuffle_reduce.hpp"
#include "support/helpers.hpp"

using namespace faasflow;
using testsupport::TempDir;

namespace {

ChromOrder single_chrom_order() {
  return ChromOrder(build_fasta_index(">chr1\nACGT\n"));
}

// Keys equal positions on ordinal 0.
std::vector<std::int64_t> keys_of(std::initializer_list<std::uint64_t> positions) {
  std::vector<std::int64_t> keys;
  for (std::uint64_t p : positions) {
    keys.push_back(linear_key(0, p));
  }
  return keys;
}

} // namespace

TEST_CASE("row size sampling finds the extremes") {
  TempDir dir("shuffle");
  ObjectStore store(dir.path());
  ObjectReader read = [&](const ObjectRef& ref) { return store.get(ref); };

  SUBCASE("three rows of 10, 12 and 14 bytes") {
    std::vector<ObjectRef> refs{
        store.put("b", "a", std::string(9, 'x') + "\n" + std::string(11, 'x') + "\n" +
                                std::string(13, 'x') + "\n")};
    RowSizeSample s = sample_row_sizes(read, refs, 3);
    CHECK(s.min_bytes == 10);
    CHECK(s.max_bytes == 14);
  }
  SUBCASE("uniform rows") {
    std::vector<ObjectRef> refs{store.put("b", "a", std::string(19, 'x') + "\n" +
                                                        std::string(19, 'x') + "\n")};
    RowSizeSample s = sample_row_sizes(read, refs, 5);
    CHECK(s.min_bytes == 20);
    CHECK(s.max_bytes == 20);
  }
  SUBCASE("extremes across files with one sample each") {
    std::vector<ObjectRef> refs{store.put("b", "a", std::string(7, 'x') + "\n"),
                                store.put("b", "c", std::string(29, 'x') + "\n")};
    RowSizeSample s = sample_row_sizes(read, refs, 1);
    CHECK(s.min_bytes == 8);
    CHECK(s.max_bytes == 30);
  }
  SUBCASE("all-empty input is an error") {
    std::vector<ObjectRef> refs{store.put("b", "a", ""), store.put("b", "c", "")};
    CHECK_THROWS_AS(sample_row_sizes(read, refs, 1), FormatError);
    CHECK_THROWS_AS(sample_row_sizes(read, refs, 0), ConfigError);
  }
}

TEST_CASE("index column extraction") {
  TempDir dir("shuffle");
  ObjectStore store(dir.path());
  SelectFn select = [&](const ObjectRef& ref, const ScanQuery& q) {
    return select_object(store, ref, q);
  };

  SUBCASE("plain layout: positions from column 1") {
    std::vector<ObjectRef> refs{store.put("b", "m0", "chr1\t3\tA\t1\tA\n"
                                                     "chr1\t4\tC\t1\tC\n"
                                                     "chr1\t5\tG\t1\tG\n")};
    IndexColumns cols = extract_index_columns(select, refs, false, 0);
    REQUIRE(cols.per_file.size() == 1);
    CHECK(cols.per_file[0] == keys_of({3, 4, 5}));
    CHECK(cols.scan_bytes == refs[0].size);
  }
  SUBCASE("empty file yields an empty list") {
    std::vector<ObjectRef> refs{store.put("b", "m0", "")};
    IndexColumns cols = extract_index_columns(select, refs, false, 0);
    CHECK(cols.per_file[0].empty());
  }
  SUBCASE("two files with overlapping positions") {
    std::vector<ObjectRef> refs{
        store.put("b", "m0", "chr1\t1\tA\t1\tA\nchr1\t2\tA\t1\tA\nchr1\t9\tA\t1\tA\n"),
        store.put("b", "m1", "chr1\t2\tA\t1\tA\nchr1\t9\tA\t1\tA\nchr1\t14\tA\t1\tA\n")};
    IndexColumns cols = extract_index_columns(select, refs, false, 0);
    std::set<std::int64_t> unioned(cols.per_file[0].begin(), cols.per_file[0].end());
    unioned.insert(cols.per_file[1].begin(), cols.per_file[1].end());
    CHECK(unioned == std::set<std::int64_t>{linear_key(0, 1), linear_key(0, 2), linear_key(0, 9),
                                            linear_key(0, 14)});
  }
  SUBCASE("keyed layout: keys from column 0") {
    std::vector<ObjectRef> refs{
        store.put("b", "m0", std::to_string(linear_key(1, 7)) + "\tchr2\t7\tA\t1\tA\n")};
    IndexColumns cols = extract_index_columns(select, refs, true, 0);
    CHECK(cols.per_file[0] == std::vector<std::int64_t>{linear_key(1, 7)});
  }
}

TEST_CASE("range planning walks the union under the byte budget") {
  // Files A: positions 1..10, B: positions 5..14; per-position row counts
  // are 1,1,1,1,2,2,2,2,2,2,1,1,1,1.
  std::vector<std::int64_t> a, b;
  for (std::uint64_t p = 1; p <= 10; ++p) {
    a.push_back(linear_key(0, p));
  }
  for (std::uint64_t p = 5; p <= 14; ++p) {
    b.push_back(linear_key(0, p));
  }
  auto partitions = plan_ranges({a, b}, 100, 600, 0);

  std::vector<IndexRange> ranges;
  for (const auto& p : partitions) {
    CHECK(p.est_bytes() <= 600);
    for (const auto& r : p.ranges) {
      ranges.push_back(r);
    }
  }
  REQUIRE(ranges.size() == 4);
  CHECK(key_pos(ranges[0].lo_key) == 1);
  CHECK(key_pos(ranges[0].hi_key) == 5);
  CHECK(key_pos(ranges[1].lo_key) == 6);
  CHECK(key_pos(ranges[1].hi_key) == 8);
  CHECK(key_pos(ranges[2].lo_key) == 9);
  CHECK(key_pos(ranges[2].hi_key) == 12);
  CHECK(key_pos(ranges[3].lo_key) == 13);
  CHECK(key_pos(ranges[3].hi_key) == 14);
  CHECK(ranges[0].rows == 6);
  CHECK(ranges[0].est_bytes == 600);
  CHECK(ranges[3].rows == 2);
}

TEST_CASE("a small set fits one range") {
  auto partitions = plan_ranges({keys_of({3, 4, 5})}, 100, 600, 2);
  REQUIRE(partitions.size() == 1);
  REQUIRE(partitions[0].ranges.size() == 1);
  CHECK(partitions[0].ranges[0].lo_key == linear_key(0, 3));
  CHECK(partitions[0].ranges[0].hi_key == linear_key(0, 5));
  CHECK(partitions[0].fasta_chunk_id == 2);
  CHECK_FALSE(partitions[0].oversized);
}

TEST_CASE("a position heavier than the budget becomes a flagged singleton") {
  std::vector<std::vector<std::int64_t>> files(10, keys_of({7}));
  files.push_back(keys_of({6}));
  auto partitions = plan_ranges(files, 100, 500, 0);
  REQUIRE(partitions.size() == 2);
  CHECK_FALSE(partitions[0].oversized);
  CHECK(partitions[0].ranges[0].lo_key == linear_key(0, 6));
  CHECK(partitions[1].oversized);
  REQUIRE(partitions[1].ranges.size() == 1);
  CHECK(partitions[1].ranges[0].lo_key == linear_key(0, 7));
  CHECK(partitions[1].ranges[0].hi_key == linear_key(0, 7));
  CHECK(partitions[1].ranges[0].est_bytes == 1000);
  CHECK(partitions[1].ranges[0].oversized);
}

TEST_CASE("range granularity follows the budget, growing it cuts invocations") {
  std::vector<std::int64_t> f1 = keys_of({1, 100, 200});
  std::vector<std::int64_t> f2 = keys_of({1, 100, 200});
  auto tight = plan_ranges({f1, f2}, 100, 200, 0);
  // each position carries two rows costing exactly the budget
  REQUIRE(tight.size() == 3);
  for (const auto& p : tight) {
    CHECK(p.ranges.size() == 1);
    CHECK(p.est_bytes() == 200);
  }
  auto roomy = plan_ranges({f1, f2}, 100, 600, 0);
  REQUIRE(roomy.size() == 1);
  CHECK(roomy[0].ranges[0].rows == 6);
}

TEST_CASE("every key lands in exactly one range") {
  std::mt19937 rng(55);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t nfiles = 1 + rng() % 8;
    std::vector<std::vector<std::int64_t>> files(nfiles);
    std::map<std::int64_t, std::uint64_t> expected_rows;
    for (auto& f : files) {
      std::set<std::uint64_t> positions;
      std::size_t n = rng() % 300;
      for (std::size_t i = 0; i < n; ++i) {
        positions.insert(1 + rng() % 500); // heavy overlap between files
      }
      for (std::uint64_t p : positions) {
        f.push_back(linear_key(0, p));
        ++expected_rows[linear_key(0, p)];
      }
    }
    if (expected_rows.empty()) {
      continue;
    }
    std::uint64_t max_row = 20 + rng() % 40;
    std::uint64_t budget = max_row * (1 + rng() % 12);
    auto partitions = plan_ranges(files, max_row, budget, 0);

    std::uint64_t rows_total = 0;
    std::int64_t last_hi = -1;
    for (const auto& p : partitions) {
      if (!p.oversized) {
        CHECK(p.est_bytes() <= budget);
      }
      for (const auto& r : p.ranges) {
        CHECK(r.lo_key > last_hi);
        last_hi = r.hi_key;
        rows_total += r.rows;
        CHECK(r.est_bytes == r.rows * max_row);
      }
    }
    std::uint64_t expected_total = 0;
    for (const auto& [k, n] : expected_rows) {
      expected_total += n;
    }
    CHECK(rows_total == expected_total);
  }
}

TEST_CASE("frequency caller") {
  CallerConfig caller{0.2, 2};

  SUBCASE("clear alternate allele") {
    auto call = call_row("chr1", 7, 'A', 10, "AAAAAAGGGG", caller);
    REQUIRE(call);
    CHECK(call->alt_base == 'G');
    CHECK(call->alt_count == 4);
    CHECK(call->depth == 10);
    CHECK(call->alt_freq == doctest::Approx(0.4));
  }
  SUBCASE("all-reference row stays silent") {
    CHECK_FALSE(call_row("chr1", 7, 'A', 4, "AAAA", caller));
  }
  SUBCASE("depth below the gate stays silent") {
    CHECK_FALSE(call_row("chr1", 7, 'A', 1, "G", caller));
  }
  SUBCASE("frequency below theta stays silent") {
    CHECK_FALSE(call_row("chr1", 7, 'A', 10, "AAAAAAAAAG", caller));
  }
  SUBCASE("lexicographic tie-break") {
    auto call = call_row("chr1", 7, 'A', 4, "CCGG", caller);
    REQUIRE(call);
    CHECK(call->alt_base == 'C');
    CHECK(call->alt_count == 2);
  }
  SUBCASE("N contributes depth but never an allele") {
    CHECK_FALSE(call_row("chr1", 7, 'A', 4, "NNNN", caller));
    auto call = call_row("chr1", 7, 'A', 4, "NNGG", caller);
    REQUIRE(call);
    CHECK(call->alt_base == 'G');
    CHECK(call->alt_freq == doctest::Approx(0.5));
  }
}

namespace {

struct ReduceFixture {
  TempDir dir{"reduce"};
  ObjectStore store{dir.path()};
  ChromOrder order = single_chrom_order();
  std::vector<ObjectRef> refs;

  SelectFn select() {
    return [this](const ObjectRef& ref, const ScanQuery& q) {
      return select_object(store, ref, q);
    };
  }

  ReducePartition partition(std::initializer_list<std::pair<std::uint64_t, std::uint64_t>> bounds) {
    ReducePartition p;
    p.partition_id = 0;
    p.budget_bytes = 1 << 20;
    for (auto [lo, hi] : bounds) {
      p.ranges.push_back(IndexRange{0, linear_key(0, lo), linear_key(0, hi), 0, 0, false});
    }
    p.mpileup_refs = refs;
    return p;
  }
};

} // namespace

TEST_CASE("reduce merges rows across files in key order") {
  ReduceFixture fx;
  fx.refs.push_back(fx.store.put("b", "m0", "chr1\t7\tA\t3\tAAG\nchr1\t8\tC\t1\tC\n"));
  fx.refs.push_back(fx.store.put("b", "m1", "chr1\t7\tA\t2\tGG\nchr1\t9\tG\t4\tGGGG\n"));

  auto calls = reduce_partition(fx.select(), fx.partition({{1, 100}}), false, fx.order,
                                CallerConfig{0.2, 2});
  REQUIRE(calls.size() == 1);
  CHECK(calls[0].chrom == "chr1");
  CHECK(calls[0].pos == 7);
  CHECK(calls[0].ref_base == 'A');
  CHECK(calls[0].alt_base == 'G');
  CHECK(calls[0].depth == 5);      // 3 + 2 merged
  CHECK(calls[0].alt_count == 3);  // AAG ++ GG
  CHECK(calls[0].alt_freq == doctest::Approx(0.6));
}

TEST_CASE("permuting the mpileup file order changes nothing") {
  ReduceFixture fx;
  auto r0 = fx.store.put("b", "m0", "chr1\t7\tA\t3\tAAG\n");
  auto r1 = fx.store.put("b", "m1", "chr1\t7\tA\t2\tGG\n");

  fx.refs = {r0, r1};
  auto a = reduce_partition(fx.select(), fx.partition({{1, 100}}), false, fx.order,
                            CallerConfig{0.2, 2});
  fx.refs = {r1, r0};
  auto b = reduce_partition(fx.select(), fx.partition({{1, 100}}), false, fx.order,
                            CallerConfig{0.2, 2});
  CHECK(a == b);
}

TEST_CASE("only rows inside the ranges are touched") {
  ReduceFixture fx;
  fx.refs.push_back(fx.store.put(
      "b", "m0", "chr1\t1\tA\t2\tGG\nchr1\t5\tA\t2\tGG\nchr1\t9\tA\t2\tGG\n"));
  auto calls = reduce_partition(fx.select(), fx.partition({{4, 6}}), false, fx.order,
                                CallerConfig{0.2, 2});
  REQUIRE(calls.size() == 1);
  CHECK(calls[0].pos == 5);
}

TEST_CASE("overlapping ranges are a planner bug") {
  ReduceFixture fx;
  fx.refs.push_back(fx.store.put("b", "m0", "chr1\t5\tA\t2\tGG\n"));
  CHECK_THROWS_AS(reduce_partition(fx.select(), fx.partition({{1, 5}, {5, 9}}), false, fx.order,
                                   CallerConfig{0.2, 2}),
                  PipelineError);
}

TEST_CASE("keyed objects reduce through the key column") {
  ReduceFixture fx;
  ChromOrder order(build_fasta_index(">a\nAC\n>b\nAC\n"));
  std::string row1 = std::to_string(linear_key(0, 2)) + "\ta\t2\tC\t2\tGG\n";
  std::string row2 = std::to_string(linear_key(1, 1)) + "\tb\t1\tA\t2\tTT\n";
  fx.refs.push_back(fx.store.put("b", "m0", row1 + row2));

  ReducePartition p;
  p.budget_bytes = 1 << 20;
  p.ranges.push_back(IndexRange{0, linear_key(0, 1), linear_key(1, 2), 0, 0, false});
  p.mpileup_refs = fx.refs;

  auto calls = reduce_partition(fx.select(), p, true, order, CallerConfig{0.2, 2});
  REQUIRE(calls.size() == 2);
  CHECK(calls[0].chrom == "a");
  CHECK(calls[0].alt_base == 'G');
  CHECK(calls[1].chrom == "b");
  CHECK(calls[1].alt_base == 'T');
}

TEST_CASE("call serialization uses six decimal places and round trips") {
  std::vector<VariantCall> calls{{"chr1", 7, 'A', 'G', 10, 4, 0.4}};
  std::string text = serialize_calls(calls);
  CHECK(text == "chr1\t7\tA\tG\t10\t4\t0.400000\n");
  auto parsed = parse_calls(text);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].pos == 7);
  CHECK(parsed[0].alt_freq == doctest::Approx(0.4));
}

TEST_CASE("concatenation validates global order") {
  ChromOrder order(build_fasta_index(">a\nAC\n>b\nAC\n"));
  std::string p1 = serialize_calls({{"a", 1, 'A', 'G', 4, 2, 0.5}, {"a", 5, 'C', 'T', 4, 2, 0.5}});
  std::string p2 = serialize_calls({{"b", 2, 'A', 'C', 4, 2, 0.5}, {"b", 7, 'A', 'C', 4, 2, 0.5}});

  SUBCASE("ordered inputs concatenate byte-for-byte") {
    CHECK(concat_call_objects({p1, p2}, order) == p1 + p2);
  }
  SUBCASE("an empty partial is the identity element") {
    CHECK(concat_call_objects({"", p2}, order) == p2);
    CHECK(concat_call_objects({p1, ""}, order) == p1);
  }
  SUBCASE("unordered inputs violate the postcondition") {
    CHECK_THROWS_AS(concat_call_objects({p2, p1}, order), PipelineError);
  }
}

TEST_CASE("partition tables round trip") {
  std::vector<ObjectRef> refs{{"b", "mpileup/f0000_q0000.tsv", 120},
                              {"b", "mpileup/f0000_q0001.tsv", 48}};
  std::vector<ReducePartition> partitions = plan_ranges(
      {keys_of({1, 2, 3}), keys_of({2, 3, 9})}, 30, 90, 0);
  for (auto& p : partitions) {
    p.mpileup_refs = refs;
  }
  std::string table = serialize_partition_table(refs, partitions);
  auto [refs2, partitions2] = parse_partition_table(table, 0);
  CHECK(refs2 == std::vector<ObjectRef>{refs[0], refs[1]});
  REQUIRE(partitions2.size() == partitions.size());
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    CHECK(partitions2[i].partition_id == partitions[i].partition_id);
    CHECK(partitions2[i].ranges == partitions[i].ranges);
    CHECK(partitions2[i].budget_bytes == partitions[i].budget_bytes);
    CHECK(partitions2[i].mpileup_refs == refs);
  }
  CHECK_THROWS_AS(parse_partition_table("X\tbad\n", 0), FormatError);
}
