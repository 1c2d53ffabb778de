#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ppot {

using Vec = std::vector<double>;

// Dense row-major matrix. Small enough on desk-scale problems that plain
// contiguous storage beats anything fancier.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  Vec row_sums() const {
    Vec out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[i] += data[i * cols + j];
    return out;
  }

  Vec col_sums() const {
    Vec out(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[j] += data[i * cols + j];
    return out;
  }

  double sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
  }
};

// compensated (Kahan) accumulation keeps objectives reproducible to ~1 ulp
inline double dot(const Mat& a, const Mat& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("dot: shape mismatch");
  double s = 0.0, comp = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    const double term = a.data[k] * b.data[k] - comp;
    const double t = s + term;
    comp = (t - s) - term;
    s = t;
  }
  return s;
}

}  // namespace ppot
