#include "ppot/measure.hpp"

#include <cmath>
#include <utility>

namespace ppot {

void DiscreteMeasure::validate() const {
  if (support.size() != mass.size())
    throw std::invalid_argument("measure: support/mass size mismatch");
  if (support.empty()) throw std::invalid_argument("measure: empty support");
  const std::size_t dim = support.front().size();
  if (dim == 0) throw std::invalid_argument("measure: zero-dimensional points");
  for (const Point& p : support)
    if (p.size() != dim)
      throw std::invalid_argument("measure: ragged support dimensions");
  for (double m : mass) {
    if (!(m >= 0.0) || std::isnan(m) || std::isinf(m))
      throw std::invalid_argument("measure: mass must be finite and >= 0");
  }
}

DiscreteMeasure uniform_measure(std::vector<Point> support) {
  DiscreteMeasure mu;
  const double w = support.empty() ? 0.0 : 1.0 / static_cast<double>(support.size());
  mu.mass.assign(support.size(), w);
  mu.support = std::move(support);
  mu.validate();
  return mu;
}

DiscreteMeasure weighted_measure(std::vector<Point> support, Vec mass) {
  DiscreteMeasure mu;
  mu.support = std::move(support);
  mu.mass = std::move(mass);
  mu.validate();
  return mu;
}

double euclidean_distance(const Point& a, const Point& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("euclidean_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

CostMatrix build_cost_matrix(const std::vector<Point>& source_points,
                             const std::vector<Point>& target_points) {
  if (source_points.empty() || target_points.empty())
    throw std::invalid_argument("build_cost_matrix: empty point set");
  CostMatrix c;
  c.entries = Mat(source_points.size(), target_points.size());
  for (std::size_t i = 0; i < source_points.size(); ++i)
    for (std::size_t j = 0; j < target_points.size(); ++j)
      c.entries(i, j) = euclidean_distance(source_points[i], target_points[j]);
  return c;
}

MarginalReport partial_feasibility(const TransportPlan& plan, const Vec& mu,
                                   const Vec& nu, double s) {
  const Mat& pi = plan.entries;
  if (pi.rows != mu.size() || pi.cols != nu.size())
    throw std::invalid_argument("partial_feasibility: shape mismatch");
  MarginalReport rep;
  for (double v : pi.data)
    if (-v > rep.negative_entry) rep.negative_entry = -v;
  const Vec rs = pi.row_sums();
  for (std::size_t i = 0; i < rs.size(); ++i)
    if (rs[i] - mu[i] > rep.row_violation) rep.row_violation = rs[i] - mu[i];
  const Vec cs = pi.col_sums();
  for (std::size_t j = 0; j < cs.size(); ++j)
    if (cs[j] - nu[j] > rep.col_violation) rep.col_violation = cs[j] - nu[j];
  rep.total_violation = std::abs(pi.sum() - s);
  return rep;
}

}  // namespace ppot
