#include "dfal/baselines.hpp"
#include "dfal/bench.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace dfal;

namespace {

std::vector<NodeProblem> random_nodes(oracle::Gen& gen, int N, Index n, Index m) {
  const auto part = gen.partition(n, std::max<Index>(1, n / 2));
  const Vector x_gen = gen.gaussian_vector(n);
  std::vector<NodeProblem> nodes;
  for (int i = 0; i < N; ++i) {
    Matrix A = gen.gaussian_matrix(m, n);
    Vector b = A * x_gen + 0.1 * gen.gaussian_vector(m);
    nodes.push_back({SparseGroupReg{0.5 / N, 0.5 / N, part}, HuberLoss{std::move(A), std::move(b), 1.0}});
  }
  return nodes;
}

// (Omega x)_i / (d_i + 1) for all i, from the dense Laplacian
Matrix dense_neighborhood_average(const Graph& g, const Matrix& x) {
  const Matrix omega = dense_laplacian(g);
  Matrix s = x * omega;  // columns: sum_j Omega_ij x_j (Omega symmetric)
  for (int i = 0; i < g.num_nodes(); ++i) s.col(i) /= g.degree(i) + 1.0;
  return s;
}

Graph ring(int N) {
  std::vector<Edge> e;
  for (int i = 0; i < N; ++i) e.push_back({std::min(i, (i + 1) % N), std::max(i, (i + 1) % N)});
  return Graph::from_edges(N, std::move(e));
}

}  // namespace

TEST(SmoothProx, QuadraticClosedForm) {
  oracle::Gen gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = gen.integer(1, 6);
    const Vector b = gen.gaussian_vector(n), center = gen.gaussian_vector(n);
    const double w = gen.uniform(0.01, 5.0);
    const SmoothLoss loss = QuadraticLoss{Matrix::Identity(n, n), b};
    const auto r = smooth_prox(loss, 1.0, w, center, Vector::Zero(n));
    const Vector expect = (center + w * b) / (1.0 + w);
    EXPECT_LE((r.x - expect).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE(r.residual, 1e-9);
  }
}

TEST(SmoothProx, HuberStationarity) {
  oracle::Gen gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = gen.integer(2, 6), m = gen.integer(1, 8);
    const Matrix A = gen.gaussian_matrix(m, n);
    const Vector b = 3.0 * gen.gaussian_vector(m);
    const SmoothLoss loss = HuberLoss{A, b, 1.0};
    const Vector center = gen.gaussian_vector(n);
    const double w = gen.uniform(0.1, 3.0);
    const auto r = smooth_prox(loss, smooth_lipschitz(loss), w, center, center);
    // gradient of w h(Ax-b) + |x-c|^2/2 by central differences of the oracle Huber sum
    Vector fd(n);
    for (Index j = 0; j < n; ++j) {
      Vector e = Vector::Zero(n);
      e(j) = 1e-6;
      auto f = [&](const Vector& x) { return w * oracle::huber_sum(A, b, 1.0, x) + 0.5 * (x - center).squaredNorm(); };
      fd(j) = (f(r.x + e) - f(r.x - e)) / 2e-6;
    }
    EXPECT_LE(fd.norm(), 1e-6) << "trial " << trial;
  }
}

TEST(SmoothProx, FailureIsReported) {
  const SmoothLoss loss = QuadraticLoss{Matrix::Identity(2, 2), Vector::Ones(2)};
  EXPECT_THROW(smooth_prox(loss, 1.0, 100.0, Vector::Zero(2), Vector::Zero(2), 1e-12, 1), NestedSolverError);
}

TEST(CompositeProx, ResidualCertifiedByOracle) {
  oracle::Gen gen(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = gen.integer(2, 8), m = gen.integer(1, 8);
    NodeProblem node{SparseGroupReg{gen.uniform(0.0, 1.0), gen.uniform(0.0, 1.0), gen.partition(n, gen.integer(1, static_cast<int>(n)))},
                     HuberLoss{gen.gaussian_matrix(m, n), 2.0 * gen.gaussian_vector(m), 1.0}};
    const Vector center = gen.gaussian_vector(n);
    const double w = gen.uniform(0.1, 3.0);
    const auto r = composite_prox(node, smooth_lipschitz(node.loss), w, center, Vector::Zero(n));
    const Vector g = w * loss_gradient(node.loss, r.x) + (r.x - center);
    EXPECT_LE(oracle::min_norm_subgradient(node.reg, w, g, r.x), 1e-8) << "trial " << trial;
  }
}

TEST(Sadmm, FirstSumsOnTwoNodePath) {
  const Graph g = build_topology(Topology::path, 2);
  const auto part = GroupPartition::singletons(1);
  std::vector<NodeProblem> nodes(2, {SparseGroupReg{0.1, 0.0, part}, QuadraticLoss{Matrix::Identity(1, 1), Vector::Zero(1)}});
  AdmmOptions o;
  o.max_iters = 0;
  o.x0 = BlockMatrix(1, 2);
  o.x0 << 1, 0;
  SadmmState st;
  sadmm_solve(nodes, g, o, &st);
  EXPECT_DOUBLE_EQ(st.s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(st.s(0, 1), -0.5);
}

TEST(Sadmm, ZeroDataIsAFixedPoint) {
  const Graph g = build_topology(Topology::star, 4);
  const auto part = GroupPartition::single_group(3);
  oracle::Gen gen(4);
  std::vector<NodeProblem> nodes;
  for (int i = 0; i < 4; ++i)
    nodes.push_back({SparseGroupReg{0.2, 0.2, part}, HuberLoss{gen.gaussian_matrix(5, 3), Vector::Zero(5), 1.0}});
  AdmmOptions o;
  o.max_iters = 10;
  SadmmState st;
  const auto trace = sadmm_solve(nodes, g, o, &st);
  for (const BlockMatrix* m : {&st.x, &st.y, &st.p, &st.p_tilde, &st.r}) EXPECT_EQ(m->cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(trace.rows.back().F_sum, 0.0);
}

TEST(Sadmm, RunningSumsMatchHistory) {
  oracle::Gen gen(5);
  for (int trial = 0; trial < 4; ++trial) {
    const int N = gen.integer(2, 6);
    const auto nodes = random_nodes(gen, N, 4, 5);
    const Graph g = gen.connected_graph(N);
    AdmmOptions o;
    o.max_iters = 30;
    std::vector<BlockMatrix> xs, ys;
    o.on_iteration = [&](long, const BlockMatrix& x, const BlockMatrix& y) {
      xs.push_back(x);
      ys.push_back(y);
    };
    SadmmState st;
    sadmm_solve(nodes, g, o, &st);
    Matrix p = Matrix::Zero(4, N), pt = Matrix::Zero(4, N), r = Matrix::Zero(4, N);
    for (std::size_t k = 0; k < xs.size(); ++k) {
      p += dense_neighborhood_average(g, xs[k]);
      pt += dense_neighborhood_average(g, ys[k]);
      r += 0.5 * (xs[k] - ys[k]);
    }
    EXPECT_LE((p - st.p).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((pt - st.p_tilde).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((r - st.r).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Sadmm, StepOneProxIsOptimal) {
  // rebuild the x prox center from the state after k iterations and check
  // the next x against the prox optimality condition
  oracle::Gen gen(6);
  const int N = 4;
  const auto nodes = random_nodes(gen, N, 6, 6);
  const Graph g = build_topology(Topology::star, N);
  const double c = 1.0;
  for (long k = 0; k < 6; ++k) {
    AdmmOptions o;
    o.c = c;
    o.max_iters = k;
    SadmmState st;
    sadmm_solve(nodes, g, o, &st);
    o.max_iters = k + 1;
    SadmmState next;
    sadmm_solve(nodes, g, o, &next);
    const Matrix omega = dense_laplacian(g);
    const Matrix sp = st.s + st.p;
    for (int i = 0; i < N; ++i) {
      const double d = g.degree(i), D = d * d + d + 1.0, w = 1.0 / (c * D);
      Vector lap = Vector::Zero(6);
      for (int j = 0; j < N; ++j) lap += omega(i, j) * sp.col(j);
      const Vector mix = st.r.col(i) + 0.5 * (st.x.col(i) - st.y.col(i));
      const Vector center = st.x.col(i) - (lap + mix) / D;
      const Vector x = next.x.col(i);
      EXPECT_LE(oracle::min_norm_subgradient(nodes[i].reg, w, x - center, x), 1e-8) << "k=" << k << " i=" << i;
    }
  }
}

TEST(Sadmm, IdenticalDataOnRegularGraphsStaysInConsensus) {
  oracle::Gen gen(7);
  const auto one = random_nodes(gen, 1, 5, 6);
  for (const Graph& g : {build_topology(Topology::clique, 4), ring(5)}) {
    std::vector<NodeProblem> nodes(g.num_nodes(), one.front());
    AdmmOptions o;
    o.max_iters = 40;
    double worst = 0.0;
    o.on_iteration = [&](long, const BlockMatrix& x, const BlockMatrix&) {
      worst = std::max(worst, max_edge_disagreement(g, x));
    };
    sadmm_solve(nodes, g, o);
    EXPECT_LE(worst, 1e-12);
  }
}

TEST(Sadmm, CommunicationAndCvAccounting) {
  oracle::Gen gen(8);
  const auto nodes = random_nodes(gen, 5, 4, 3);
  const Graph g = build_topology(Topology::star, 5);
  AdmmOptions o;
  o.max_iters = 7;
  SadmmState st;
  const auto trace = sadmm_solve(nodes, g, o, &st);
  EXPECT_EQ(trace.rows.back().comm_per_node_max, 4L * 4 * 7);  // center, 4 vectors per neighbor
  double cv = max_edge_disagreement(g, st.x);
  for (int i = 0; i < 5; ++i) cv = std::max(cv, (st.x.col(i) - st.y.col(i)).norm());
  EXPECT_DOUBLE_EQ(trace.rows.back().CV, cv / 2.0);
  EXPECT_DOUBLE_EQ(trace.rows.back().F_sum, network_objective(nodes, 0.5 * (st.x + st.y)));
  AdmmOptions bad;
  bad.c = 0.0;
  EXPECT_THROW(sadmm_solve(nodes, g, bad), std::invalid_argument);
}

TEST(Admm, SingleNodeIsCentralSolve) {
  oracle::Gen gen(9);
  const auto nodes = random_nodes(gen, 1, 5, 7);
  const Graph g = Graph::from_edges(1, {});
  const auto trace = admm_solve(nodes, g, AdmmOptions{});
  ASSERT_EQ(trace.rows.size(), 1u);
  const Vector x = trace.x.col(0);
  const Vector grad = loss_gradient(nodes[0].loss, x);
  EXPECT_LE(oracle::min_norm_subgradient(nodes[0].reg, 1.0, grad, x), 1e-8);
}

TEST(Admm, ChargesThreeUnitsPerNeighbor) {
  oracle::Gen gen(10);
  const auto nodes = random_nodes(gen, 4, 4, 3);
  const Graph g = build_topology(Topology::path, 4);
  Simulator sim(g, 4, 2);
  AdmmOptions o;
  o.max_iters = 5;
  admm_solve(nodes, g, sim, o);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(sim.ledger().nodes[i].vectors_sent, 3L * g.degree(i) * 5);
}

TEST(Baselines, ConvergeToReference) {
  const auto inst = generate_instance(1, Topology::star, 4, 4, 4, 21);
  const auto ref = reference_solve(inst);
  ASSERT_FALSE(ref.flagged);
  AdmmOptions o;
  o.F_star = ref.F_star;
  o.max_iters = 5000;
  const auto s = sadmm_solve(inst.nodes, inst.graph, o);
  EXPECT_TRUE(s.converged) << s.stop_reason;
  EXPECT_LE(s.rows.back().rel_subopt, 1e-3);
  const auto a = admm_solve(inst.nodes, inst.graph, o);
  EXPECT_TRUE(a.converged) << a.stop_reason;
  EXPECT_LE(a.rows.back().rel_subopt, 1e-3);
}

TEST(Baselines, AdmmIterationsCostMoreGradientsThanDfal) {
  // deterministic proxy for per-iteration work: gradient evaluations per node
  const auto inst = generate_instance(1, Topology::star, 5, 10, 10, 3);
  AdmmOptions o;
  o.max_iters = 10;
  const auto a = admm_solve(inst.nodes, inst.graph, o);
  DfalParams p = default_params(inst.nodes, inst.graph);
  p.max_outer = 5;
  const auto d = dfal_solve(inst.nodes, inst.graph, p);
  long inner = 0;
  for (const auto& r : d.rows) inner += r.inner_iters;
  const double admm_per_iter = static_cast<double>(a.rows.back().grad_count) / 10.0;
  const double dfal_per_iter = static_cast<double>(d.rows.back().grad_count) / static_cast<double>(inner);
  EXPECT_GT(admm_per_iter, 5.0 * dfal_per_iter);
}
