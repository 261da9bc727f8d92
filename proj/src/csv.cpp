#include "bopdmd/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace bopdmd {

namespace {

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') {
    text.remove_prefix(1);
    if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
      return false;
    }
  }
  if (text.empty()) {
    return false;
  }
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

cdouble parse_complex(std::string_view text) {
  auto fail = [&] { return Error(ErrorCode::ParseError, "invalid number '" + std::string(text) + "'"); };
  if (text.empty()) {
    throw fail();
  }
  if (text.back() != 'i') {
    double re = 0.0;
    if (!parse_double(text, re)) {
      throw fail();
    }
    return {re, 0.0};
  }
  const std::string_view body = text.substr(0, text.size() - 1);
  // The real/imaginary split is the last sign that is not an exponent sign.
  std::size_t split = std::string_view::npos;
  for (std::size_t p = body.size(); p-- > 1;) {
    if ((body[p] == '+' || body[p] == '-') && body[p - 1] != 'e' && body[p - 1] != 'E') {
      split = p;
      break;
    }
  }
  double re = 0.0;
  std::string_view imag_part = body;
  if (split != std::string_view::npos) {
    if (!parse_double(body.substr(0, split), re)) {
      throw fail();
    }
    imag_part = body.substr(split);
  }
  double im = 0.0;
  if (imag_part.empty() || imag_part == "+") {
    im = 1.0;
  } else if (imag_part == "-") {
    im = -1.0;
  } else if (!parse_double(imag_part, im)) {
    throw fail();
  }
  return {re, im};
}

std::string format_complex(const cdouble& value, bool real_only) {
  std::string out = format_double(value.real());
  if (real_only) {
    return out;
  }
  out += std::signbit(value.imag()) ? '-' : '+';
  out += format_double(std::abs(value.imag()));
  out += 'i';
  return out;
}

SnapshotMatrix load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::vector<double> times;
  std::vector<std::vector<cdouble>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string_view> cells = split_cells(line);
    auto where = [&](std::size_t col) {
      return path.string() + ":" + std::to_string(line_no) + ":" + std::to_string(col + 1);
    };
    if (line_no == 1) {
      if (cells.front() != "t") {
        throw Error(ErrorCode::ParseError, where(0) + ": header must start with 't'");
      }
      for (std::size_t c = 1; c < cells.size(); ++c) {
        double t = 0.0;
        if (!parse_double(cells[c], t)) {
          throw Error(ErrorCode::ParseError,
                      where(c) + ": invalid time '" + std::string(cells[c]) + "'");
        }
        times.push_back(t);
      }
      continue;
    }
    if (cells.size() != times.size() + 1) {
      throw Error(ErrorCode::RaggedRows, path.string() + ":" + std::to_string(line_no) + ": row '" +
                                             std::string(cells.front()) + "' has " +
                                             std::to_string(cells.size() - 1) + " values, expected " +
                                             std::to_string(times.size()));
    }
    std::vector<cdouble> row;
    row.reserve(times.size());
    for (std::size_t c = 1; c < cells.size(); ++c) {
      try {
        row.push_back(parse_complex(cells[c]));
      } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, where(c) + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  if (times.empty()) {
    throw Error(ErrorCode::ParseError, path.string() + ": missing time header");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw Error(ErrorCode::NonIncreasingTimes,
                  path.string() + ": time column " + std::to_string(k + 1) + " does not increase");
    }
  }
  Eigen::MatrixXcd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(times.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < times.size(); ++k) {
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return SnapshotMatrix(std::move(values),
                        Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size())));
}

void save_csv(const Eigen::MatrixXcd& values, const Eigen::VectorXd& times,
              const std::filesystem::path& path) {
  if (values.cols() != times.size()) {
    throw Error(ErrorCode::ShapeMismatch, "value columns and times differ");
  }
  std::ostringstream out;
  out << 't';
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    out << ',' << format_double(times(k));
  }
  out << '\n';
  const bool real_only = (values.imag().array() == 0.0).all() &&
                         !(values.imag().array().unaryExpr([](double v) { return std::signbit(v); })).any();
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << 'x' << i;
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      out << ',' << format_complex(values(i, k), real_only);
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  file << out.str();
  if (!file) {
    throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }
}

}  // namespace bopdmd
