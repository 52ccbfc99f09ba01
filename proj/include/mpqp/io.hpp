#pragma once

#include "mpqp/problem.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mpqp {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Matrices serialize as {"rows": r, "cols": c, "data": [row-major values]}.
json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const json& j, const std::string& field);
json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const json& j, const std::string& field);

json problem_to_json(const QpProblem& problem);
QpProblem problem_from_json(const json& j);

json solution_to_json(const FullSolution& s);
FullSolution solution_from_json(const json& j);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string fingerprint(const QpProblem& problem);
std::string fnv1a_hex(const std::string& bytes);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);

/// Minimal CSV table: one header row, numeric-or-text cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Index column(const std::string& name) const;  // -1 when absent
    std::vector<Index> columns_with_prefix(const std::string& prefix) const;
};

CsvTable parse_csv(const std::string& text);
std::string write_csv(const CsvTable& table);

/// Reads a plain numeric CSV (header row required) into a matrix.
MatrixXd read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);
void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m, const std::vector<std::string>& header);

}  // namespace mpqp
