#pragma once

// Shared helpers for the test suite. The transport oracles here are written
// independently of the library solvers: they enumerate basic feasible
// solutions of the transportation polytope directly (every vertex is the flow
// of a spanning tree of the bipartite supply/demand graph), so agreement with
// the simplex is a genuine cross-check rather than a tautology.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "ppot/mat.hpp"
#include "ppot/rng.hpp"

namespace testsupport {

constexpr std::size_t kNoCell = static_cast<std::size_t>(-1);

namespace detail {

struct UndoableUnionFind {
  std::vector<std::size_t> parent, size;
  explicit UndoableUnionFind(std::size_t n) : parent(n), size(n, 1) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  }
  std::size_t find(std::size_t x) const {
    while (parent[x] != x) x = parent[x];
    return x;
  }
  // returns false (and records nothing) if a and b are already connected
  bool unite(std::size_t a, std::size_t b, std::vector<std::size_t>& undo) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
    undo.push_back(b);
    return true;
  }
  void undo_one(std::vector<std::size_t>& undo) {
    const std::size_t b = undo.back();
    undo.pop_back();
    size[parent[b]] -= size[b];
    parent[b] = b;
  }
};

// flow induced by a spanning tree, via leaf elimination; returns NaN if any
// edge would need negative flow beyond round-off
inline double tree_flow_cost(const std::vector<std::size_t>& tree_edges,
                             const ppot::Vec& supply, const ppot::Vec& demand,
                             const ppot::Mat& cost) {
  const std::size_t p = supply.size(), q = demand.size(), n = p + q;
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t t = 0; t < tree_edges.size(); ++t) {
    const std::size_t r = tree_edges[t] / q, c = tree_edges[t] % q;
    adj[r].push_back(t);
    adj[p + c].push_back(t);
  }
  std::vector<double> res(n);
  for (std::size_t i = 0; i < p; ++i) res[i] = supply[i];
  for (std::size_t j = 0; j < q; ++j) res[p + j] = -demand[j];
  std::vector<std::size_t> degree(n), leaves;
  for (std::size_t v = 0; v < n; ++v) {
    degree[v] = adj[v].size();
    if (degree[v] == 1) leaves.push_back(v);
  }
  std::vector<char> edge_done(tree_edges.size(), 0), node_done(n, 0);
  double total = 0.0;
  while (!leaves.empty()) {
    const std::size_t v = leaves.back();
    leaves.pop_back();
    if (node_done[v]) continue;
    std::size_t live = kNoCell;
    for (std::size_t t : adj[v])
      if (!edge_done[t]) live = t;
    if (live == kNoCell) break;  // last node of the tree
    const std::size_t r = tree_edges[live] / q, c = tree_edges[live] % q;
    const double flow = (v < p) ? res[v] : -res[v];
    if (flow < -1e-12) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t other = (v < p) ? p + c : r;
    res[v] = 0.0;
    res[other] += (v < p) ? flow : -flow;
    total += std::max(flow, 0.0) * cost(r, c);
    edge_done[live] = 1;
    node_done[v] = 1;
    if (--degree[other] == 1 && !node_done[other]) leaves.push_back(other);
  }
  return total;
}

struct TreeEnumerator {
  const ppot::Vec& supply;
  const ppot::Vec& demand;
  const ppot::Mat& cost;
  std::size_t skip_cell;
  std::size_t p, q, needed;
  std::vector<std::size_t> edges, chosen, undo;
  UndoableUnionFind uf;
  double best = std::numeric_limits<double>::infinity();

  TreeEnumerator(const ppot::Vec& a, const ppot::Vec& b, const ppot::Mat& c,
                 std::size_t skip)
      : supply(a), demand(b), cost(c), skip_cell(skip), p(a.size()),
        q(b.size()), needed(p + q - 1), uf(p + q) {
    for (std::size_t e = 0; e < p * q; ++e)
      if (e != skip_cell) edges.push_back(e);
  }

  void run(std::size_t from) {
    if (chosen.size() == needed) {
      const double c = tree_flow_cost(chosen, supply, demand, cost);
      if (!std::isnan(c) && c < best) best = c;
      return;
    }
    if (edges.size() - from < needed - chosen.size()) return;
    for (std::size_t k = from; k < edges.size(); ++k) {
      const std::size_t e = edges[k];
      if (!uf.unite(e / q, p + e % q, undo)) continue;
      chosen.push_back(e);
      run(k + 1);
      chosen.pop_back();
      uf.undo_one(undo);
    }
  }
};

}  // namespace detail

// minimum transport cost over all vertices of the balanced transportation
// polytope; `skip_cell` (row * q + col) removes one arc from the graph
inline double oracle_balanced_cost(const ppot::Vec& supply,
                                   const ppot::Vec& demand,
                                   const ppot::Mat& cost,
                                   std::size_t skip_cell = kNoCell) {
  detail::TreeEnumerator en(supply, demand, cost, skip_cell);
  en.run(0);
  return en.best;
}

// partial transport oracle: append a zero-cost dummy row/column pair holding
// the untransported mass and forbid the dummy/dummy arc, then enumerate
inline double oracle_pot_cost(const ppot::Vec& mu, const ppot::Vec& nu,
                              const ppot::Mat& cost, double s) {
  const std::size_t p = mu.size(), q = nu.size();
  double ma = 0.0, mb = 0.0;
  for (double m : mu) ma += m;
  for (double m : nu) mb += m;
  ppot::Vec supply(mu), demand(nu);
  supply.push_back(std::max(mb - s, 0.0));
  demand.push_back(std::max(ma - s, 0.0));
  ppot::Mat ext(p + 1, q + 1, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) ext(i, j) = cost(i, j);
  return oracle_balanced_cost(supply, demand, ext, p * (q + 1) + q);
}

inline std::vector<ppot::Point> random_points(ppot::Rng& rng, std::size_t n,
                                              std::size_t dim, double scale) {
  std::vector<ppot::Point> pts(n, ppot::Point(dim));
  for (auto& pt : pts)
    for (double& x : pt) x = rng.normal(0.0, scale);
  return pts;
}

inline ppot::Vec random_masses(ppot::Rng& rng, std::size_t n, double total) {
  ppot::Vec m(n);
  double s = 0.0;
  for (double& v : m) {
    v = rng.uniform(0.1, 1.0);
    s += v;
  }
  for (double& v : m) v *= total / s;
  return m;
}

}  // namespace testsupport
