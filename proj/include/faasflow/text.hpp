#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace faasflow {

// Splits on every occurrence of sep; "a\tb\t" yields {"a","b",""}.
std::vector<std::string_view> split(std::string_view text, char sep);

// Splits into LF-terminated rows. A trailing partial line (no final LF)
// counts as a row; a final LF does not open an empty row.
std::vector<std::string_view> split_lines(std::string_view text);

// Base-10 signed integer, whole field must parse. `what` names the field
// in the FormatError message.
std::int64_t parse_i64(std::string_view field, std::string_view what);
std::uint64_t parse_u64(std::string_view field, std::string_view what);

// Fixed 6-decimal formatting used by the variant-call output.
std::string format_fixed6(double value);

// Zero-padded decimal, 4 digits wide, for stable lexicographic object keys.
std::string pad4(std::size_t value);

bool starts_with(std::string_view text, std::string_view prefix);

} // namespace faasflow
