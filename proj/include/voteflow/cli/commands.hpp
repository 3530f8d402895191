#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace voteflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBandMiss = 1;  // a Monte Carlo estimate left its band
inline constexpr int kExitValidation = 2;
inline constexpr int kExitExecution = 3;
inline constexpr int kExitStorage = 4;
inline constexpr int kExitHalted = 5;  // --halt-after stopped the run

enum class Format { table, csv, jsonl };

using Record = nlohmann::ordered_json;

/// Prints records as an aligned table, CSV (header from the first record's
/// keys, full precision) or one JSON object per line.
void render(const std::vector<Record>& records, Format format, std::ostream& out);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace voteflow::cli
