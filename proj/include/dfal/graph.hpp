#pragma once
/*
 * Undirected communication graphs and their Laplacian.
 *
 * Nodes are indexed 0..N-1 in code; files and messages use 1-based ids.
 * The Laplacian Omega (Omega_ii = d_i, Omega_ij = -1 on edges) is only ever
 * applied through adjacency lists; its Kronecker lift Psi = Omega (x) I_n acts
 * on a BlockMatrix column-by-column. dense_laplacian() exists for tests and
 * for the small-N eigensolve.
 */

#include "dfal/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dfal {

struct Edge {
  int u;  // u < v
  int v;
  friend bool operator==(const Edge&, const Edge&) = default;
};

class Graph {
 public:
  Graph() = default;

  /// Validates and builds a simple connected graph. Edges may be given in
  /// any orientation; they are stored with u < v, sorted.
  static Graph from_edges(int num_nodes, std::vector<Edge> edges) {
    require(num_nodes >= 1, "graph needs at least one node");
    Graph g;
    g.n_ = num_nodes;
    std::set<std::pair<int, int>> seen;
    for (auto& e : edges) {
      if (e.u < 0 || e.v < 0 || e.u >= num_nodes || e.v >= num_nodes) {
        throw std::invalid_argument("edge (" + std::to_string(e.u + 1) + "," +
                                    std::to_string(e.v + 1) + ") references a node outside 1.." +
                                    std::to_string(num_nodes));
      }
      if (e.u == e.v) {
        throw std::invalid_argument("self-loop at node " + std::to_string(e.u + 1));
      }
      if (e.u > e.v) std::swap(e.u, e.v);
      if (!seen.insert({e.u, e.v}).second) {
        throw std::invalid_argument("duplicate edge (" + std::to_string(e.u + 1) + "," +
                                    std::to_string(e.v + 1) + ")");
      }
    }
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return std::pair(a.u, a.v) < std::pair(b.u, b.v); });
    g.edges_ = std::move(edges);
    g.adj_.assign(num_nodes, {});
    for (const auto& e : g.edges_) {
      g.adj_[e.u].push_back(e.v);
      g.adj_[e.v].push_back(e.u);
    }
    for (auto& a : g.adj_) std::sort(a.begin(), a.end());

    // connectivity from node 0
    std::vector<char> reached(num_nodes, 0);
    std::vector<int> stack{0};
    reached[0] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j : g.adj_[i]) {
        if (!reached[j]) {
          reached[j] = 1;
          stack.push_back(j);
        }
      }
    }
    std::string missing;
    for (int i = 0; i < num_nodes; ++i) {
      if (!reached[i]) missing += (missing.empty() ? "" : ",") + std::to_string(i + 1);
    }
    if (!missing.empty()) {
      throw std::invalid_argument("graph is disconnected: nodes {" + missing +
                                  "} are unreachable from node 1");
    }
    return g;
  }

  int num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const int> neighbors(int i) const { return adj_[i]; }
  int degree(int i) const { return static_cast<int>(adj_[i].size()); }

  bool adjacent(int i, int j) const {
    return std::binary_search(adj_[i].begin(), adj_[i].end(), j);
  }

  /// Position of j in neighbors(i), if adjacent.
  std::optional<std::size_t> neighbor_slot(int i, int j) const {
    auto it = std::lower_bound(adj_[i].begin(), adj_[i].end(), j);
    if (it == adj_[i].end() || *it != j) return std::nullopt;
    return static_cast<std::size_t>(it - adj_[i].begin());
  }

  int min_degree() const {
    int d = n_ > 0 ? degree(0) : 0;
    for (int i = 1; i < n_; ++i) d = std::min(d, degree(i));
    return d;
  }
  int max_degree() const {
    int d = 0;
    for (int i = 0; i < n_; ++i) d = std::max(d, degree(i));
    return d;
  }

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
};

enum class Topology { star, clique, path };

inline std::string to_string(Topology t) {
  switch (t) {
    case Topology::star: return "star";
    case Topology::clique: return "clique";
    case Topology::path: return "path";
  }
  return "?";
}

inline Topology parse_topology(const std::string& s) {
  if (s == "star") return Topology::star;
  if (s == "clique") return Topology::clique;
  if (s == "path") return Topology::path;
  throw std::invalid_argument("unknown topology '" + s + "'");
}

/// Star (node 1 at the center), clique, or path on N >= 2 nodes.
inline Graph build_topology(Topology kind, int num_nodes) {
  require(num_nodes >= 2, "topology needs N >= 2");
  std::vector<Edge> edges;
  switch (kind) {
    case Topology::star:
      for (int j = 1; j < num_nodes; ++j) edges.push_back({0, j});
      break;
    case Topology::clique:
      for (int i = 0; i < num_nodes; ++i)
        for (int j = i + 1; j < num_nodes; ++j) edges.push_back({i, j});
      break;
    case Topology::path:
      for (int j = 1; j < num_nodes; ++j) edges.push_back({j - 1, j});
      break;
  }
  return Graph::from_edges(num_nodes, std::move(edges));
}

/// Edge-list text: first line N, then "i j" per line (1-based, i < j).
/// Text after '#' is ignored.
inline Graph parse_edge_list(std::istream& in) {
  std::string line;
  std::optional<int> num_nodes;
  std::vector<Edge> edges;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<long long> tokens;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        long long v = std::stoll(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        tokens.push_back(v);
      } catch (const std::exception&) {
        throw std::invalid_argument("edge file line " + std::to_string(lineno) +
                                    ": not an integer '" + tok + "'");
      }
    }
    if (tokens.empty()) continue;
    if (!num_nodes) {
      if (tokens.size() != 1 || tokens[0] < 1) {
        throw std::invalid_argument("edge file line " + std::to_string(lineno) +
                                    ": expected a positive node count");
      }
      num_nodes = static_cast<int>(tokens[0]);
      continue;
    }
    if (tokens.size() != 2) {
      throw std::invalid_argument("edge file line " + std::to_string(lineno) +
                                  ": expected 'i j'");
    }
    const long long i = tokens[0], j = tokens[1];
    if (i >= j) {
      throw std::invalid_argument("edge file line " + std::to_string(lineno) + ": edge (" +
                                  std::to_string(i) + "," + std::to_string(j) +
                                  ") must satisfy i < j");
    }
    edges.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1)});
  }
  if (!num_nodes) throw std::invalid_argument("edge file is empty");
  return Graph::from_edges(*num_nodes, std::move(edges));
}

inline Graph load_edge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open edge file " + path);
  return parse_edge_list(in);
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
  out << g.num_nodes() << '\n';
  for (const auto& e : g.edges()) out << e.u + 1 << ' ' << e.v + 1 << '\n';
}

/// Block i of (Omega (x) I_n) x, i.e. d_i x_i - sum_{j in O_i} x_j.
inline BlockMatrix laplacian_apply(const Graph& g, const BlockMatrix& x) {
  if (x.cols() != g.num_nodes()) {
    throw std::invalid_argument("stacked vector has " + std::to_string(x.cols()) +
                                " blocks, graph has " + std::to_string(g.num_nodes()) + " nodes");
  }
  BlockMatrix out(x.rows(), x.cols());
  for (int i = 0; i < g.num_nodes(); ++i) {
    out.col(i) = static_cast<double>(g.degree(i)) * x.col(i);
    for (int j : g.neighbors(i)) out.col(i) -= x.col(j);
  }
  return out;
}

/// x^T Psi x = sum over edges of ||x_i - x_j||^2 (= ||A x||^2 for the
/// implicit constraint matrix A with A^T A = Psi).
inline double laplacian_quadratic(const Graph& g, const BlockMatrix& x) {
  if (x.cols() != g.num_nodes()) {
    throw std::invalid_argument("stacked vector block count does not match graph");
  }
  double s = 0.0;
  for (const auto& e : g.edges()) s += (x.col(e.u) - x.col(e.v)).squaredNorm();
  return s;
}

/// max over edges of ||x_i - x_j||_2 (0 for a single node).
inline double max_edge_disagreement(const Graph& g, const BlockMatrix& x) {
  double m = 0.0;
  for (const auto& e : g.edges()) m = std::max(m, (x.col(e.u) - x.col(e.v)).norm());
  return m;
}

/// Dense N x N Laplacian. Solver paths never call this.
inline Matrix dense_laplacian(const Graph& g) {
  const int n = g.num_nodes();
  Matrix omega = Matrix::Zero(n, n);
  for (const auto& e : g.edges()) {
    omega(e.u, e.v) = omega(e.v, e.u) = -1.0;
    omega(e.u, e.u) += 1.0;
    omega(e.v, e.v) += 1.0;
  }
  return omega;
}

struct SpectralBounds {
  double psi_max = 0.0;              // largest Laplacian eigenvalue
  double psi_second_smallest = 0.0;  // algebraic connectivity psi_{N-1}
};

namespace detail {

// Power iteration for the top eigenvalue of a PSD operator, optionally
// deflating the all-ones direction.
template <class Apply>
double power_top_eigenvalue(int n, Apply&& apply, bool deflate_ones, double tol,
                            int max_iters) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = 1.0 + 0.37 * std::sin(1.0 + 2.3 * i);
  auto project = [&](Vector& w) {
    if (deflate_ones) w.array() -= w.mean();
  };
  project(v);
  v.normalize();
  double value = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = apply(v);
    project(w);
    const double next = v.dot(w);
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    v = w / nrm;
    if (it > 0 && std::abs(next - value) <= tol * std::abs(next)) return next;
    value = next;
  }
  return value;
}

}  // namespace detail

/// Largest and second-smallest Laplacian eigenvalues. Dense symmetric
/// eigensolve up to dense_limit nodes, power iteration (tol 1e-10, 1e4
/// iterations) beyond.
inline SpectralBounds spectral_bounds(const Graph& g, int dense_limit = 512) {
  const int n = g.num_nodes();
  if (n == 1) return {0.0, 0.0};
  if (n <= dense_limit) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense_laplacian(g), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();  // ascending
    return {ev(n - 1), ev(1)};
  }
  auto apply = [&](const Vector& v) {
    Eigen::Map<const Matrix> x(v.data(), 1, n);
    BlockMatrix y = laplacian_apply(g, x);
    return Vector(Eigen::Map<const Vector>(y.data(), n));
  };
  const double top = detail::power_top_eigenvalue(n, apply, false, 1e-10, 10000);
  // psi_{N-1} is the top eigenvalue of (s I - Omega) on 1^perp, subtracted from s.
  const double shift = 2.0 * g.max_degree();
  auto shifted = [&](const Vector& v) { return Vector(shift * v - apply(v)); };
  const double top_shifted = detail::power_top_eigenvalue(n, shifted, true, 1e-10, 10000);
  return {top, shift - top_shifted};
}

}  // namespace dfal
