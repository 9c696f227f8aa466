#include "dmdc/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dmdc/error.hpp"

namespace dmdc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::AssumptionViolated: return "assumption-violated";
    case ErrorKind::IllConditioned: return "ill-conditioned-eigenbasis";
    case ErrorKind::ParseError: return "parse-error";
    case ErrorKind::Io: return "io-error";
  }
  return "unknown";
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  if (ec != std::errc{}) throw InvalidArgument("cannot format value");
  return std::string(buf.data(), end);
}

std::string format_matrix_csv(const Eigen::MatrixXd& matrix) {
  std::string out;
  out.reserve(static_cast<std::size_t>(matrix.size()) * 24);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      const double v = matrix(i, j);
      if (!std::isfinite(v)) {
        throw InvalidArgument("non-finite entry at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      }
      if (j > 0) out.push_back(',');
      out += format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
  const std::string text = format_matrix_csv(matrix);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Eigen::MatrixXd parse_matrix_csv(const std::string& text, const std::string& source) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;

  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    ++rows;

    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = row.find(',', pos);
      std::string_view cell = trim(row.substr(pos, comma == std::string_view::npos
                                                        ? std::string_view::npos
                                                        : comma - pos));
      ++count;
      double v = 0.0;
      // from_chars rejects a leading '+', which other writers sometimes emit.
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw ParseError(source + ": non-numeric cell at line " + std::to_string(line_no) +
                             ", column " + std::to_string(count),
                         line_no, count);
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }

    if (rows == 1) {
      cols = count;
    } else if (count != cols) {
      throw ParseError(source + ": line " + std::to_string(line_no) + " has " +
                           std::to_string(count) + " columns, expected " +
                           std::to_string(cols),
                       line_no, 0);
    }
  }

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
  return m;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_matrix_csv(ss.str(), path.string());
}

void write_key_value_csv(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "key,value\n";
  for (const auto& [k, v] : rows) os << k << ',' << v << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace dmdc
