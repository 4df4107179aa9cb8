#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pmflow/fbp_solver.hpp"
#include "pmflow/verify.hpp"

namespace pmflow::io {

using json = nlohmann::json;

// Shortest decimal text that reads back to the same double.
std::string fmt(double x);
double parse_double(std::string_view text);

// Comma-separated numeric table with one header line. Lines starting with
// '#' before the header are kept as comments.
struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

std::string to_csv(const CsvTable& t);
CsvTable read_csv(const std::filesystem::path& path);

// Sorted keys, two-space indent, trailing newline; non-finite numbers become null.
std::string dump(const json& j);
json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

json config_to_json(const SolverConfig& c);
SolverConfig config_from_json(const json& j);
json report_to_json(const SolutionField& f, const SolveReport& r, const SolverConfig& c);
json admissibility_to_json(const AdmissibilityReport& a);

CsvTable solution_table(const SolutionField& f);
CsvTable shock_table(const SolutionField& f);

// solution.csv, shock.csv and report.json in dir (created if missing).
void write_solution(const std::filesystem::path& dir, const SolutionField& f, const SolveReport& r,
                    const SolverConfig& c);

// Rebuilds the field written by write_solution. Throws ConfigError on a
// missing or malformed directory.
SolutionField read_solution(const std::filesystem::path& dir);

}  // namespace pmflow::io
