#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "qatlaw/errors.hpp"

namespace qatlaw {

// Dense row-major matrix of doubles. Values are expected to stay finite;
// operations that require finiteness check it explicitly.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw InvalidValue("matrix dimensions must be nonnegative");
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws) {
    Matrix m;
    m.rows = static_cast<int>(rws.size());
    m.cols = m.rows > 0 ? static_cast<int>(rws.begin()->size()) : 0;
    m.data.reserve(static_cast<std::size_t>(m.rows) * m.cols);
    for (const auto& r : rws) {
      if (static_cast<int>(r.size()) != m.cols)
        throw InvalidValue("ragged initializer for Matrix");
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::span<double> row(int r) {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace qatlaw
