#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace evomem {

enum class ReportFormat { Csv, Json };

// One command line invocation. A fixed seed makes the written report
// byte-identical across runs.
struct RunSpec {
  std::string command;      // attn-bench | gradcheck | precision-demo |
                            // plan-max-seq | plan-breakdown | sweep
  std::string config_path;  // optional; empty selects the built-in default suite
  std::string output_path;
  ReportFormat format = ReportFormat::Csv;
  std::uint64_t seed = 0;
  bool parallel = false;    // evaluate independent rows concurrently
};

// Executes the command and writes the report. Returns the process exit code:
//   0  success, report written
//   1  configuration or validation error (diagnostic names the offending
//      key); no report is written
//   2  a correctness check failed; the report is still written with the
//      failing rows marked
int run(const RunSpec& spec, std::ostream& diagnostics);

}  // namespace evomem
