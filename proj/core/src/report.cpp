#include "evomem/report.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "evomem/errors.hpp"

namespace evomem {

std::string format_int(std::int64_t v) { return std::to_string(v); }

std::string format_bytes(double v) {
  if (!std::isfinite(v)) throw NumericError("byte count is not finite");
  return std::to_string(std::llround(v));
}

std::string format_sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.5e", v);
  return buf;
}

std::string to_csv(const ReportTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c != 0) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c != 0) out += ',';
      out += row[c];
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const std::string& command, std::uint64_t seed, const ReportTable& table) {
  nlohmann::ordered_json doc;
  doc["command"] = command;
  doc["seed"] = seed;
  doc["columns"] = table.columns;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t c = 0; c < row.size() && c < table.columns.size(); ++c) {
      obj[table.columns[c]] = row[c];
    }
    rows.push_back(std::move(obj));
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

}  // namespace evomem
