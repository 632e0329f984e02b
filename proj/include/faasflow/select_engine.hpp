#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "faasflow/object_store.hpp"

namespace faasflow {

// Projection plus one optional closed integer range on a single column.
// That is the whole SQL subset the shuffle needs: pulling an index column
// and pulling the rows whose index falls inside a partition range.
struct ScanQuery {
  std::vector<std::size_t> projection; // 0-based column indices, nonempty

  struct Between {
    std::size_t column = 0;
    std::int64_t lo = 0;
    std::int64_t hi = 0; // closed: lo <= v <= hi
  };
  std::optional<Between> predicate;
};

struct ScanReport {
  std::size_t rows_returned = 0;
  // Always the full object size: the engine scans everything, like
  // scan-priced SELECT, regardless of how much the predicate prunes.
  std::uint64_t bytes_scanned = 0;
};

using ScanRow = std::vector<std::string>;
using ScanResult = std::pair<std::vector<ScanRow>, ScanReport>;

// Scans `text` as TAB-separated, LF-terminated rows (final LF optional;
// a trailing partial line is a row). Returns the projected fields of every
// row matching the predicate, in input order. `source` names the object in
// error messages. Row-format errors carry a 1-based line number.
ScanResult select_rows_text(std::string_view text, const ScanQuery& query,
                            std::string_view source);

// Same, over a stored object; bytes_scanned equals the object size.
ScanResult select_object(const ObjectStore& store, const ObjectRef& ref,
                         const ScanQuery& query);

} // namespace faasflow
