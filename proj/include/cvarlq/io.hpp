#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvarlq/mc.hpp"

namespace cvarlq {

using Json = nlohmann::json;

Json matrix_to_json(const Mat& M);                // row-major nested arrays
Mat matrix_from_json(const Json& j, const char* field);

Json problem_to_json(const LqProblem& problem);
LqProblem problem_from_json(const Json& j);       // throws Error(ParseError)

Json schedule_to_json(const AcvarSchedule& schedule);
Json schedule_to_json(const LeqrSchedule& schedule);
Json schedule_to_json(const LqGameSchedule& schedule);
Json schedule_to_json(const LqrSchedule& schedule);

Json certificate_to_json(const LmiCertificate& cert, const Vec& x, double s);

/// One CSV line per (sweep row, alpha); the flat record round-trips
/// losslessly through emit/parse.
struct CsvRecord {
    std::string family;
    double parameter = 0.0;
    long trials = 0;
    double mean = 0.0;
    double std = 0.0;
    double stderr_ = 0.0;
    double cvar_alpha = 0.0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
};

std::vector<CsvRecord> sweep_to_records(const std::vector<SweepRow>& rows,
                                        std::uint64_t seed);
std::string records_to_csv(const std::vector<CsvRecord>& records);
std::vector<CsvRecord> records_from_csv(const std::string& csv);  // throws Error(ParseError)

/// Writes content to path via a temp file + rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

} // namespace cvarlq
