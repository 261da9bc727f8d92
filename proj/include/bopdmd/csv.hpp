#pragma once

// Snapshot CSV format:
//
//   t,<t_1>,<t_2>,...,<t_m>
//   x0,<v_1>,...,<v_m>
//   x1,...
//
// Values are plain reals or complex literals `a+bi` / `a-bi` / `bi`, written
// with 17 significant digits so a save/load cycle is value-exact.

#include <filesystem>
#include <string>
#include <string_view>

#include "bopdmd/core.hpp"

namespace bopdmd {

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`). Throws ParseError.
cdouble parse_complex(std::string_view text);

/// Inverse of parse_complex; omits the imaginary part when `real_only`.
std::string format_complex(const cdouble& value, bool real_only);

SnapshotMatrix load_csv(const std::filesystem::path& path);

/// Times need not be increasing here; this writer is shared by forecast
/// outputs. Complex literals are used only if some entry is non-real.
void save_csv(const Eigen::MatrixXcd& values, const Eigen::VectorXd& times,
              const std::filesystem::path& path);

inline void save_csv(const SnapshotMatrix& data, const std::filesystem::path& path) {
  save_csv(data.values(), data.times(), path);
}

}  // namespace bopdmd
