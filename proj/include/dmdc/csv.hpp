#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dmdc {

// Row-major, comma separated, no header. Values are written with 17
// significant digits so a read after write reproduces every double exactly.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Same grammar, applied to an in-memory buffer; `source` only labels errors.
Eigen::MatrixXd parse_matrix_csv(const std::string& text, const std::string& source = "<buffer>");
std::string format_matrix_csv(const Eigen::MatrixXd& matrix);

std::string format_double(double value);

/// key,value rows with string keys, used for constant dumps.
void write_key_value_csv(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::string>>& rows);

}  // namespace dmdc
