#include "ppot/exact_ot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ppot {

namespace {

constexpr std::size_t kNoEdge = static_cast<std::size_t>(-1);

// Transportation simplex on a balanced problem. Basis is a spanning tree over
// supply nodes 0..p-1 and demand nodes p..p+q-1, initialized by the
// north-west corner rule. Entering variable: most negative reduced cost
// (Dantzig), with Bland's smallest-index rule as an anti-cycling fallback
// after a long run of degenerate pivots.
class TransportSimplex {
 public:
  TransportSimplex(const Vec& supply, const Vec& demand, const Mat& cost)
      : p_(supply.size()),
        q_(demand.size()),
        cost_(cost),
        edge_row_(p_ + q_ - 1),
        edge_col_(p_ + q_ - 1),
        edge_flow_(p_ + q_ - 1),
        adjacency_(p_ + q_),
        basic_(p_ * q_, 0),
        potential_(p_ + q_),
        parent_edge_(p_ + q_) {
    double max_abs = 0.0;
    for (double c : cost_.data) max_abs = std::max(max_abs, std::abs(c));
    opt_tol_ = 1e-12 * (1.0 + max_abs);
    northwest_corner(supply, demand);
  }

  Mat solve() {
    const std::size_t degenerate_limit = p_ + q_;
    const std::size_t pivot_cap = 1000000;
    std::size_t degenerate_streak = 0;
    bool bland = false;
    for (std::size_t pivot = 0; pivot < pivot_cap; ++pivot) {
      compute_potentials();
      std::size_t er = 0, ec = 0;
      if (!pick_entering(bland, &er, &ec)) {
        return extract_flow();
      }
      const double theta = pivot_on(er, ec);
      if (theta > 0.0) {
        degenerate_streak = 0;
        bland = false;
      } else if (++degenerate_streak > degenerate_limit) {
        bland = true;  // guarantees finite termination on degenerate runs
      }
    }
    throw SolverError("transport simplex: pivot limit exceeded", 0.0);
  }

 private:
  void northwest_corner(const Vec& supply, const Vec& demand) {
    std::size_t i = 0, j = 0, e = 0;
    double ra = supply[0], rb = demand[0];
    while (true) {
      const double x = std::min(ra, rb);
      set_edge(e++, i, j, x);
      ra -= x;
      rb -= x;
      if (i == p_ - 1 && j == q_ - 1) break;
      bool advance_row;
      if (i == p_ - 1)
        advance_row = false;
      else if (j == q_ - 1)
        advance_row = true;
      else
        advance_row = (ra <= rb);
      if (advance_row) {
        ++i;
        ra = supply[i];
      } else {
        ++j;
        rb = demand[j];
      }
    }
    // exactly p + q - 1 cells are basic; round-off imbalance between the
    // totals (at most the caller's validation tolerance) is simply dropped
  }

  void set_edge(std::size_t e, std::size_t row, std::size_t col, double flow) {
    edge_row_[e] = row;
    edge_col_[e] = col;
    edge_flow_[e] = flow;
    adjacency_[row].push_back(e);
    adjacency_[p_ + col].push_back(e);
    basic_[row * q_ + col] = 1;
  }

  void replace_edge(std::size_t e, std::size_t row, std::size_t col, double flow) {
    drop_from(adjacency_[edge_row_[e]], e);
    drop_from(adjacency_[p_ + edge_col_[e]], e);
    basic_[edge_row_[e] * q_ + edge_col_[e]] = 0;
    set_edge(e, row, col, flow);
  }

  static void drop_from(std::vector<std::size_t>& list, std::size_t e) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (list[k] == e) {
        list[k] = list.back();
        list.pop_back();
        return;
      }
    }
  }

  // dual potentials along the basis tree, rooted at supply node 0
  void compute_potentials() {
    visited_.assign(p_ + q_, 0);
    stack_.clear();
    potential_[0] = 0.0;
    visited_[0] = 1;
    stack_.push_back(0);
    while (!stack_.empty()) {
      const std::size_t node = stack_.back();
      stack_.pop_back();
      for (std::size_t e : adjacency_[node]) {
        const std::size_t other =
            (node < p_) ? p_ + edge_col_[e] : edge_row_[e];
        if (visited_[other]) continue;
        const double c = cost_(edge_row_[e], edge_col_[e]);
        potential_[other] = c - potential_[node];
        visited_[other] = 1;
        stack_.push_back(other);
      }
    }
  }

  bool pick_entering(bool bland, std::size_t* er, std::size_t* ec) const {
    double best = -opt_tol_;
    std::size_t best_idx = kNoEdge;
    for (std::size_t i = 0; i < p_; ++i) {
      const double ui = potential_[i];
      for (std::size_t j = 0; j < q_; ++j) {
        if (basic_[i * q_ + j]) continue;
        const double rc = cost_(i, j) - ui - potential_[p_ + j];
        if (rc < best) {
          best = rc;
          best_idx = i * q_ + j;
          if (bland) {
            *er = i;
            *ec = j;
            return true;  // smallest index wins under Bland's rule
          }
        }
      }
    }
    if (best_idx == kNoEdge) return false;
    *er = best_idx / q_;
    *ec = best_idx % q_;
    return true;
  }

  // walk the unique tree path from the entering cell's row node to its column
  // node; cells along the path alternate -,+,-,... while the entering cell
  // itself takes +
  double pivot_on(std::size_t er, std::size_t ec) {
    std::fill(parent_edge_.begin(), parent_edge_.end(), kNoEdge);
    parent_node_.assign(p_ + q_, kNoEdge);
    const std::size_t start = er;
    const std::size_t goal = p_ + ec;
    stack_.clear();
    stack_.push_back(start);
    parent_node_[start] = start;
    while (!stack_.empty()) {
      const std::size_t node = stack_.back();
      stack_.pop_back();
      if (node == goal) break;
      for (std::size_t e : adjacency_[node]) {
        const std::size_t other =
            (node < p_) ? p_ + edge_col_[e] : edge_row_[e];
        if (parent_node_[other] != kNoEdge) continue;
        parent_node_[other] = node;
        parent_edge_[other] = e;
        stack_.push_back(other);
      }
    }
    path_.clear();
    for (std::size_t node = goal; node != start; node = parent_node_[node])
      path_.push_back(parent_edge_[node]);
    // path_ runs from the goal back to the start; with the entering edge it
    // closes an even cycle, minus-edges are those adjacent to the entering
    // cell's endpoints, i.e. every second edge starting from the last
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = kNoEdge;
    std::size_t leaving_cell = kNoEdge;
    for (std::size_t k = path_.size(); k-- > 0;) {
      const bool minus = ((path_.size() - 1 - k) % 2 == 0);
      if (!minus) continue;
      const std::size_t e = path_[k];
      const std::size_t cell = edge_row_[e] * q_ + edge_col_[e];
      // ties broken by smallest cell index, which together with the Bland
      // entering rule rules out cycling
      if (edge_flow_[e] < theta ||
          (edge_flow_[e] == theta && cell < leaving_cell)) {
        theta = edge_flow_[e];
        leaving = e;
        leaving_cell = cell;
      }
    }
    for (std::size_t k = path_.size(); k-- > 0;) {
      const bool minus = ((path_.size() - 1 - k) % 2 == 0);
      edge_flow_[path_[k]] += minus ? -theta : theta;
    }
    replace_edge(leaving, er, ec, theta);
    return theta;
  }

  Mat extract_flow() const {
    Mat flow(p_, q_);
    for (std::size_t e = 0; e < edge_row_.size(); ++e)
      flow(edge_row_[e], edge_col_[e]) = std::max(edge_flow_[e], 0.0);
    return flow;
  }

  std::size_t p_, q_;
  const Mat& cost_;
  double opt_tol_;
  std::vector<std::size_t> edge_row_, edge_col_;
  Vec edge_flow_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<char> basic_;
  Vec potential_;
  std::vector<std::size_t> parent_edge_, parent_node_;
  std::vector<char> visited_;
  std::vector<std::size_t> stack_;
  std::vector<std::size_t> path_;
};

Mat transport_simplex(const Vec& supply, const Vec& demand, const Mat& cost) {
  TransportSimplex solver(supply, demand, cost);
  return solver.solve();
}

void validate_pair(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                   const CostMatrix& cost) {
  mu.validate();
  nu.validate();
  if (cost.entries.rows != mu.size() || cost.entries.cols != nu.size())
    throw std::invalid_argument("transport: cost matrix shape mismatch");
  if (mu.support.front().size() != nu.support.front().size())
    throw std::invalid_argument("transport: point dimension mismatch");
  for (double c : cost.entries.data)
    if (std::isnan(c) || std::isinf(c))
      throw std::invalid_argument("transport: cost must be finite");
}

TransportPlan finish_plan(Mat flow, const Mat& cost) {
  TransportPlan plan;
  plan.objective = dot(flow, cost);
  plan.entries = std::move(flow);
  plan.total_mass = plan.entries.sum();
  return plan;
}

}  // namespace

TransportPlan solve_exact_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const CostMatrix& cost) {
  validate_pair(mu, nu, cost);
  const double ma = mu.total_mass(), mb = nu.total_mass();
  if (std::abs(ma - mb) > 1e-9)
    throw std::invalid_argument("solve_exact_ot: total mass mismatch");
  if (ma <= 0.0)  // two zero measures couple trivially
    return finish_plan(Mat(mu.size(), nu.size()), cost.entries);
  return finish_plan(transport_simplex(mu.mass, nu.mass, cost.entries),
                     cost.entries);
}

TransportPlan solve_exact_pot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const CostMatrix& cost, double s) {
  validate_pair(mu, nu, cost);
  const double ma = mu.total_mass(), mb = nu.total_mass();
  const double cap = std::min(ma, mb);
  if (std::isnan(s) || s < -1e-12 || s > cap + 1e-9)
    throw std::invalid_argument(
        "solve_exact_pot: mass s outside [0, min(|mu|, |nu|)]");
  s = std::clamp(s, 0.0, cap);
  if (s == 0.0) return finish_plan(Mat(mu.size(), nu.size()), cost.entries);

  const std::size_t p = mu.size(), q = nu.size();
  double max_c = 0.0, min_pos = std::numeric_limits<double>::infinity();
  for (double c : cost.entries.data) max_c = std::max(max_c, c);
  for (double m : mu.mass)
    if (m > 0.0) min_pos = std::min(min_pos, m);
  for (double m : nu.mass)
    if (m > 0.0) min_pos = std::min(min_pos, m);

  // dummy row absorbs untransported column mass and vice versa; the corner
  // cell is priced so that routing any mass through it is never optimal (the
  // +1 keeps the penalty positive even for an all-zero cost matrix)
  const double penalty = (2.0 * max_c + 1.0) * (ma + mb) / min_pos;
  Mat ext_cost(p + 1, q + 1, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) ext_cost(i, j) = cost.entries(i, j);
  ext_cost(p, q) = penalty;

  Vec supply(p + 1), demand(q + 1);
  for (std::size_t i = 0; i < p; ++i) supply[i] = mu.mass[i];
  for (std::size_t j = 0; j < q; ++j) demand[j] = nu.mass[j];
  supply[p] = std::max(mb - s, 0.0);
  demand[q] = std::max(ma - s, 0.0);

  const Mat ext_flow = transport_simplex(supply, demand, ext_cost);
  Mat flow(p, q);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) flow(i, j) = ext_flow(i, j);
  return finish_plan(std::move(flow), cost.entries);
}

double minibatch_ot(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const std::vector<std::vector<std::size_t>>& source_batches,
                    const std::vector<std::vector<std::size_t>>& target_batches) {
  mu.validate();
  nu.validate();
  if (source_batches.size() != target_batches.size() || source_batches.empty())
    throw std::invalid_argument("minibatch_ot: batch lists must pair up");
  double acc = 0.0;
  for (std::size_t k = 0; k < source_batches.size(); ++k) {
    DiscreteMeasure a, b;
    for (std::size_t idx : source_batches[k]) {
      if (idx >= mu.size())
        throw std::invalid_argument("minibatch_ot: source index out of range");
      a.support.push_back(mu.support[idx]);
      a.mass.push_back(mu.mass[idx]);
    }
    for (std::size_t idx : target_batches[k]) {
      if (idx >= nu.size())
        throw std::invalid_argument("minibatch_ot: target index out of range");
      b.support.push_back(nu.support[idx]);
      b.mass.push_back(nu.mass[idx]);
    }
    const double ta = a.total_mass(), tb = b.total_mass();
    if (ta <= 0.0 || tb <= 0.0)
      throw std::invalid_argument("minibatch_ot: batch with zero mass");
    for (double& m : a.mass) m /= ta;
    for (double& m : b.mass) m /= tb;
    const CostMatrix c = build_cost_matrix(a.support, b.support);
    acc += solve_exact_ot(a, b, c).objective;
  }
  return acc / static_cast<double>(source_batches.size());
}

}  // namespace ppot
