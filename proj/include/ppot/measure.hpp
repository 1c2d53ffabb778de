#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppot/mat.hpp"

namespace ppot {

using Point = std::vector<double>;

// Finitely supported nonnegative measure: mass[i] sits at support[i].
// Mass vectors are not required to sum to one; partial transport works with
// arbitrary nonnegative totals.
struct DiscreteMeasure {
  std::vector<Point> support;
  Vec mass;

  std::size_t size() const { return support.size(); }

  double total_mass() const {
    double s = 0.0;
    for (double m : mass) s += m;
    return s;
  }

  // throws std::invalid_argument on negative mass, size mismatch, or ragged
  // support dimensions
  void validate() const;
};

DiscreteMeasure uniform_measure(std::vector<Point> support);
DiscreteMeasure weighted_measure(std::vector<Point> support, Vec mass);

double euclidean_distance(const Point& a, const Point& b);

// entries(i, j) = Euclidean distance between source point i and target point j
struct CostMatrix {
  Mat entries;
};

CostMatrix build_cost_matrix(const std::vector<Point>& source_points,
                             const std::vector<Point>& target_points);

// Coupling between two discrete measures. `objective` is <plan, cost> for the
// cost matrix it was solved against; `total_mass` caches entries.sum().
struct TransportPlan {
  Mat entries;
  double total_mass = 0.0;
  double objective = 0.0;

  Vec row_sums() const { return entries.row_sums(); }
  Vec col_sums() const { return entries.col_sums(); }
};

struct SolverConfig {
  double epsilon = 1e-2;            // entropic regularization strength
  int max_iterations = 10000;       // scaling cycles before giving up
  double marginal_tolerance = 1e-9; // max allowed marginal violation
  // when positive, a feasible iterate is accepted only once the per-cycle
  // movement of the log scalings drops below this, i.e. the iteration has
  // reached its fixed point; 0 keeps the fast stop-at-first-feasible rule
  double stationarity_tolerance = 0.0;
};

// worst constraint violations of a plan against row caps mu, column caps nu
// and required total mass s (caps are one-sided, total is two-sided)
struct MarginalReport {
  double row_violation = 0.0;
  double col_violation = 0.0;
  double total_violation = 0.0;
  double negative_entry = 0.0;

  double worst() const {
    double w = row_violation;
    if (col_violation > w) w = col_violation;
    if (total_violation > w) w = total_violation;
    if (negative_entry > w) w = negative_entry;
    return w;
  }
};

MarginalReport partial_feasibility(const TransportPlan& plan, const Vec& mu,
                                   const Vec& nu, double s);

// thrown when an iterative solver exhausts its iteration budget
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double violation)
      : std::runtime_error(what), final_violation(violation) {}
  double final_violation;
};

}  // namespace ppot
