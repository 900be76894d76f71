#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evomem {

// Report table with preformatted cells. CSV uses ',' separators, '.' decimal
// points and no locale: byte counts are exact integers, error magnitudes use
// scientific notation with six significant digits, so reports from a fixed
// seed are byte-identical across runs.
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

std::string format_int(std::int64_t v);
std::string format_bytes(double v);   // rounded to whole bytes
std::string format_sci(double v);     // six significant digits, e notation

std::string to_csv(const ReportTable& table);
std::string to_json(const std::string& command, std::uint64_t seed, const ReportTable& table);

}  // namespace evomem
