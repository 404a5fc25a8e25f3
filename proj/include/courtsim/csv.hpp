#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace courtsim {

/// RFC 4180 style reader: quoted fields, doubled quotes, CRLF or LF endings.
/// Blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Quotes a field only when it contains a separator, quote or newline.
std::string csv_field(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

/// Fixed six-decimal rendering used by every numeric report column.
std::string csv_number(double value);

}  // namespace courtsim
