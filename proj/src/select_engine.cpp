#include "faasflow/select_engine.hpp"

#include "faasflow/errors.hpp"
#include "faasflow/text.hpp"

namespace faasflow {

ScanResult select_rows_text(std::string_view text, const ScanQuery& query,
                            std::string_view source) {
  if (query.projection.empty()) {
    throw ConfigError("scan query needs a nonempty projection");
  }

  std::vector<ScanRow> rows;
  ScanReport report;
  report.bytes_scanned = text.size();

  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    std::vector<std::string_view> fields = split(line, '\t');

    for (std::size_t col : query.projection) {
      if (col >= fields.size()) {
        throw FormatError(std::string(source) + ": line " + std::to_string(line_no) +
                          " has " + std::to_string(fields.size()) +
                          " fields, projection needs column " + std::to_string(col));
      }
    }

    if (query.predicate) {
      const auto& p = *query.predicate;
      if (p.column >= fields.size()) {
        throw FormatError(std::string(source) + ": line " + std::to_string(line_no) +
                          " has " + std::to_string(fields.size()) +
                          " fields, predicate needs column " + std::to_string(p.column));
      }
      std::int64_t v = parse_i64(fields[p.column],
                                 std::string(source) + ": line " + std::to_string(line_no) +
                                 ", predicate column " + std::to_string(p.column));
      if (v < p.lo || v > p.hi) {
        continue;
      }
    }

    ScanRow out;
    out.reserve(query.projection.size());
    for (std::size_t col : query.projection) {
      out.emplace_back(fields[col]);
    }
    rows.push_back(std::move(out));
  }

  report.rows_returned = rows.size();
  return {std::move(rows), report};
}

ScanResult select_object(const ObjectStore& store, const ObjectRef& ref,
                         const ScanQuery& query) {
  std::string text = store.read_for_scan(ref);
  return select_rows_text(text, query, ref.id());
}

} // namespace faasflow
