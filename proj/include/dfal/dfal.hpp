#pragma once
/*
 * Decentralized first-order augmented Lagrangian method.
 *
 * Outer iteration k approximately minimizes
 *
 *   P_k(x) = lambda_k sum_i F_i(x_i) + 1/2 (x + xbar_k)^T Psi (x + xbar_k)
 *
 * with MS-APG (block constants L_i = lambda_k L_gamma_i + psi_max), then
 *
 *   xbar_{k+1} = (lambda_{k+1} / lambda_k) (xbar_k + x_k),  lambda_{k+1} = c lambda_k.
 *
 * The multiplier theta_k = -A xbar_k / lambda_k is never formed; only its norm
 * sqrt(xbar^T Psi xbar) / lambda is tracked. Node i computes its gradient
 * block from its own data and blocks received from neighbors.
 */

#include "dfal/common.hpp"
#include "dfal/funcs.hpp"
#include "dfal/graph.hpp"
#include "dfal/netsim.hpp"
#include "dfal/solver_core.hpp"
#include "dfal/trace.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dfal {

struct DfalParams {
  double lambda1 = 1.0;
  double alpha1 = 1.0;
  double xi1 = 1.0;
  double c = 0.7;
  double bx = 1.0;
  double psi_max = 0.0;
  double tau_bar = 0.0;
  long max_outer = 200;
  double eps_opt = 1e-3;
  double eps_feas = 1e-4;
  double budget_secs = std::numeric_limits<double>::infinity();

  void validate() const {
    require(lambda1 > 0.0 && alpha1 > 0.0 && xi1 > 0.0, "lambda1, alpha1 and xi1 must be positive");
    require(c > 0.0 && c < 1.0, "shrink factor c must lie in (0,1)");
    require(bx > 0.0, "B_x must be positive");
    require(psi_max >= 0.0, "psi_max must be nonnegative");
    require(max_outer >= 1, "outer cap must be at least 1");
    if (tau_bar > 0.0) require(xi1 / lambda1 < tau_bar, "xi1 / lambda1 must stay below tau_bar");
  }

  nlohmann::json to_json() const {
    return {{"lambda1", lambda1}, {"alpha1", alpha1}, {"xi1", xi1},         {"c", c},
            {"bx", bx},           {"psi_max", psi_max}, {"tau_bar", tau_bar}, {"max_outer", max_outer},
            {"eps_opt", eps_opt}, {"eps_feas", eps_feas}};
  }
};

/// Schedule values at outer iteration k (1-based), by repeated multiplication.
struct Schedule {
  double lambda, alpha, xi;
};
inline Schedule schedule_at(const DfalParams& p, long k) {
  Schedule s{p.lambda1, p.alpha1, p.xi1};
  const double c2 = p.c * p.c;
  for (long t = 1; t < k; ++t) {
    s.lambda *= p.c;
    s.alpha *= c2;
    s.xi *= c2;
  }
  return s;
}

/// Problem constants shared by every solver on one network.
struct NetworkConstants {
  std::vector<double> L_gamma;  // per-node Lipschitz constants of grad gamma_i
  double L_bar = 0.0;           // max L_gamma
  double psi_max = 0.0;
  double psi_min_positive = 0.0;  // second-smallest Laplacian eigenvalue
  double tau_bar = 0.0;         // min_i (beta1_i + beta2_i)
};

inline NetworkConstants network_constants(const std::vector<NodeProblem>& nodes, const Graph& graph) {
  require(static_cast<int>(nodes.size()) == graph.num_nodes(), "node count does not match graph");
  NetworkConstants nc;
  nc.tau_bar = std::numeric_limits<double>::infinity();
  for (const auto& p : nodes) {
    nc.L_gamma.push_back(smooth_lipschitz(p.loss));
    nc.L_bar = std::max(nc.L_bar, nc.L_gamma.back());
    nc.tau_bar = std::min(nc.tau_bar, p.reg.tau());
  }
  const auto sb = spectral_bounds(graph);
  nc.psi_max = sb.psi_max;
  nc.psi_min_positive = sb.psi_second_smallest;
  return nc;
}

/// 10 (1 + ||x0|| + sum_i ||b_i|| / sqrt(m_i)).
inline double default_bx(const std::vector<NodeProblem>& nodes, const BlockMatrix& x0) {
  double s = 0.0;
  for (const auto& p : nodes) {
    const auto& b = loss_offsets(p.loss);
    if (b.size() > 0) s += b.norm() / std::sqrt(static_cast<double>(b.size()));
  }
  return 10.0 * (1.0 + x0.norm() + s);
}

inline DfalParams default_params(const NetworkConstants& nc, int num_nodes, double bx) {
  if (!(nc.tau_bar > 0.0)) {
    throw std::invalid_argument(
        "every node needs beta1 + beta2 > 0: with a zero regularizer weight the penalty schedule has "
        "no valid starting point");
  }
  DfalParams p;
  if (nc.psi_max > 0.0 && nc.L_bar > 0.0) {
    p.lambda1 = std::min(1.0, nc.psi_max / nc.L_bar);
  } else {
    p.lambda1 = 1.0;
  }
  p.alpha1 = (p.lambda1 * nc.tau_bar) * (p.lambda1 * nc.tau_bar) / (4.0 * num_nodes);
  p.xi1 = 0.5 * p.lambda1 * nc.tau_bar;
  p.psi_max = nc.psi_max;
  p.tau_bar = nc.tau_bar;
  p.bx = bx;
  return p;
}

inline DfalParams default_params(const std::vector<NodeProblem>& nodes, const Graph& graph,
                                 const BlockMatrix& x0) {
  return default_params(network_constants(nodes, graph), graph.num_nodes(), default_bx(nodes, x0));
}

inline DfalParams default_params(const std::vector<NodeProblem>& nodes, const Graph& graph) {
  const Index n = nodes.empty() ? 0 : nodes.front().dim();
  return default_params(nodes, graph, BlockMatrix::Zero(n, graph.num_nodes()));
}

/// Inner cap B_x sqrt(2 sum_i L_i / alpha), rounded up.
inline long inner_cap(double bx, double sum_L, double alpha) {
  const double v = std::ceil(bx * std::sqrt(2.0 * sum_L / alpha));
  return v < 1e15 ? static_cast<long>(v) : 1000000000000000L;
}

/// q_i = lambda grad gamma_i(y_i) + d_i (y_i + xbar_i) - sum_{j in O_i} (y_j + xbar_j).
/// y_of(j) / xbar_of(j) are only called for neighbors j of i.
template <class YOf, class XbarOf>
void local_gradient(const Graph& graph, int i, double lambda, const SmoothLoss& loss,
                    const Eigen::Ref<const Vector>& y_i, const Eigen::Ref<const Vector>& xbar_i, YOf&& y_of,
                    XbarOf&& xbar_of, Eigen::Ref<Vector> out) {
  loss_gradient(loss, y_i, out);
  out *= lambda;
  out += static_cast<double>(graph.degree(i)) * (y_i + xbar_i);
  for (int j : graph.neighbors(i)) out -= y_of(j) + xbar_of(j);
}

struct DfalState {
  long k = 0;
  double lambda = 0.0;
  BlockMatrix x;     // x^(k), column i owned by node i
  BlockMatrix xbar;  // xbar^(k), column i owned by node i
  /// Node i's copies of its neighbors' accumulators, one column per neighbor
  /// in graph.neighbors(i) order.
  std::vector<Matrix> xbar_copies;

  /// ||theta^(k)|| = sqrt(xbar^T Psi xbar) / lambda.
  double theta_norm(const Graph& graph) const {
    return lambda > 0.0 ? std::sqrt(laplacian_quadratic(graph, xbar)) / lambda : 0.0;
  }
};

/// ||A x||_2 and ||theta||_2 for a state (theta from the accumulator).
struct FeasibilityDiagnostics {
  double ax_norm = 0.0;
  double theta_norm = 0.0;
};

inline FeasibilityDiagnostics feasibility_diagnostics(const Graph& graph, const DfalState& s) {
  FeasibilityDiagnostics d;
  d.ax_norm = std::sqrt(laplacian_quadratic(graph, s.x));
  d.theta_norm = s.theta_norm(graph);
  return d;
}

struct DfalHooks {
  /// Every inner gradient assembly: (k, l, lambda, ybar, q, xbar).
  std::function<void(long, long, double, const BlockMatrix&, const BlockMatrix&, const BlockMatrix&)> on_inner;
  /// After each outer iteration, with the state holding x^(k) and xbar^(k).
  std::function<void(const DfalState&, const TraceRow&)> on_outer;
};

struct DfalOptions {
  double F_star = std::numeric_limits<double>::quiet_NaN();  // NaN: run to the outer cap
  BlockMatrix x0;                                           // empty: zeros
  DfalHooks hooks;
  std::uint64_t seed = 0;
  /// Without F_star: stop once CV <= eps_feas instead of running to the cap.
  bool stop_on_feasibility = false;
};

namespace detail {

struct TimeoutSignal {};

class Deadline {
 public:
  explicit Deadline(double secs) : start_(std::chrono::steady_clock::now()), secs_(secs) {}
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  bool passed() const { return std::isfinite(secs_) && elapsed() > secs_; }
  void check() const {
    if (passed()) throw TimeoutSignal{};
  }

 private:
  std::chrono::steady_clock::time_point start_;
  double secs_;
};

// Smooth part of P_k assembled over the simulator: each gradient call is one
// synchronous round in which nodes publish their ybar blocks (if changed) and
// build q_i from their own data and their neighbors' blocks.
struct SyncSubproblem {
  const Graph* graph;
  const std::vector<NodeProblem>* nodes;
  Simulator* sim;
  const DfalState* state;
  double lambda;
  int channel = 0;

  double value(const BlockMatrix& y) const {
    double s = 0.0;
    for (int i = 0; i < graph->num_nodes(); ++i) s += loss_value((*nodes)[i].loss, y.col(i));
    return lambda * s + 0.5 * laplacian_quadratic(*graph, y + state->xbar);
  }

  void gradient(const BlockMatrix& ybar, BlockMatrix& q) const {
    const int N = graph->num_nodes();
    for (int i = 0; i < N; ++i) sim->publish_if_changed(channel, i, ybar.col(i));
    q.resize(ybar.rows(), N);
    for (int i = 0; i < N; ++i) {
      const NodeView view = sim->view(channel, i);
      const auto& copies = state->xbar_copies[i];
      const auto nbrs = graph->neighbors(i);
      auto xbar_of = [&](int j) -> Eigen::Ref<const Vector> {
        const auto slot = static_cast<Index>(std::lower_bound(nbrs.begin(), nbrs.end(), j) - nbrs.begin());
        return copies.col(slot);
      };
      auto y_of = [&](int j) -> Eigen::Ref<const Vector> { return view.at(j); };
      local_gradient(*graph, i, lambda, (*nodes)[i].loss, view.own(), state->xbar.col(i), y_of, xbar_of,
                     q.col(i));
      sim->charge_grad(i);
    }
    sim->end_round();
  }

  void block_gradient(Index i, const BlockMatrix& y, Vector& g) const {
    g.resize(y.rows());
    auto y_of = [&](int j) -> Eigen::Ref<const Vector> { return y.col(j); };
    auto xbar_of = [&](int j) -> Eigen::Ref<const Vector> { return state->xbar.col(j); };
    local_gradient(*graph, static_cast<int>(i), lambda, (*nodes)[i].loss, y.col(i), state->xbar.col(i), y_of,
                   xbar_of, g);
  }
};

// Same function for the randomized oracles: a block update reads the
// neighbor blocks last broadcast by their owners (the current columns of y)
// and the neighbors' accumulators. Traffic is charged by the caller per event.
struct AsyncSubproblem {
  const Graph* graph;
  const std::vector<NodeProblem>* nodes;
  const DfalState* state;
  double lambda;

  double value(const BlockMatrix& y) const {
    double s = 0.0;
    for (int i = 0; i < graph->num_nodes(); ++i) s += loss_value((*nodes)[i].loss, y.col(i));
    return lambda * s + 0.5 * laplacian_quadratic(*graph, y + state->xbar);
  }

  void block_gradient(Index i, const BlockMatrix& y, Vector& g) const {
    g.resize(y.rows());
    auto y_of = [&](int j) -> Eigen::Ref<const Vector> { return y.col(j); };
    auto xbar_of = [&](int j) -> Eigen::Ref<const Vector> { return state->xbar.col(j); };
    local_gradient(*graph, static_cast<int>(i), lambda, (*nodes)[i].loss, y.col(i), state->xbar.col(i), y_of,
                   xbar_of, g);
  }

  void gradient(const BlockMatrix& y, BlockMatrix& q) const {
    q.resize(y.rows(), y.cols());
    Vector g(y.rows());
    for (Index i = 0; i < y.cols(); ++i) {
      block_gradient(i, y, g);
      q.col(i) = g;
    }
  }
};

inline std::vector<SparseGroupReg> node_regs(const std::vector<NodeProblem>& nodes) {
  std::vector<SparseGroupReg> regs;
  for (const auto& p : nodes) regs.push_back(p.reg);
  return regs;
}

inline DfalState initial_state(const Graph& graph, const BlockMatrix& x0, double lambda1) {
  DfalState s;
  s.k = 1;
  s.lambda = lambda1;
  s.x = x0;
  s.xbar = BlockMatrix::Zero(x0.rows(), x0.cols());
  for (int i = 0; i < graph.num_nodes(); ++i) s.xbar_copies.push_back(Matrix::Zero(x0.rows(), graph.degree(i)));
  return s;
}

inline double normalized_cv(const Graph& graph, const BlockMatrix& x) {
  return max_edge_disagreement(graph, x) / std::sqrt(static_cast<double>(x.rows()));
}

}  // namespace detail

inline BlockMatrix resolve_x0(const std::vector<NodeProblem>& nodes, const BlockMatrix& x0) {
  require(!nodes.empty(), "no nodes");
  const Index n = nodes.front().dim();
  const Index N = static_cast<Index>(nodes.size());
  if (x0.size() == 0) return BlockMatrix::Zero(n, N);
  require(x0.rows() == n && x0.cols() == N, "x0 shape does not match the instance");
  return x0;
}

/// Synchronous DFAL over the simulator.
inline RunTrace dfal_solve(const std::vector<NodeProblem>& nodes, const Graph& graph, const DfalParams& params,
                           Simulator& sim, const DfalOptions& options = {}) {
  params.validate();
  const int N = graph.num_nodes();
  require(static_cast<int>(nodes.size()) == N, "node count does not match graph");
  const BlockMatrix x0 = resolve_x0(nodes, options.x0);
  require(sim.dim() == x0.rows(), "simulator dimension does not match the instance");
  const Index n = x0.rows();

  std::vector<double> L_gamma;
  for (const auto& p : nodes) L_gamma.push_back(smooth_lipschitz(p.loss));
  const auto regs = detail::node_regs(nodes);

  RunTrace trace;
  trace.algorithm = "dfal";
  trace.seed = options.seed;
  trace.F_star = options.F_star;
  trace.config = params.to_json();
  const bool benchmark_mode = !std::isnan(options.F_star);
  const detail::Deadline deadline(params.budget_secs);

  DfalState st = detail::initial_state(graph, x0, params.lambda1);
  sim.seed_channel(0, x0);
  Schedule sch{params.lambda1, params.alpha1, params.xi1};
  const double resid_tol_scale = 1.0 / std::sqrt(static_cast<double>(N));

  trace.stop_reason = to_string(StopReason::outer_cap);
  try {
    for (long k = 1; k <= params.max_outer; ++k) {
      if (k > 1) {
        // exchange x^(k-1) and roll the accumulators forward
        for (int i = 0; i < N; ++i) sim.publish_if_changed(0, i, st.x.col(i));
        for (int i = 0; i < N; ++i) {
          const NodeView view = sim.view(0, i);
          const auto nbrs = graph.neighbors(i);
          for (std::size_t s = 0; s < nbrs.size(); ++s) {
            auto col = st.xbar_copies[i].col(static_cast<Index>(s));
            col = params.c * (col + view.at(nbrs[s]));
          }
        }
        st.xbar = params.c * (st.xbar + st.x);
        sim.end_round();
        sch.lambda *= params.c;
        sch.alpha *= params.c * params.c;
        sch.xi *= params.c * params.c;
      }
      st.k = k;
      st.lambda = sch.lambda;

      std::vector<double> L(N);
      double sum_L = 0.0;
      for (int i = 0; i < N; ++i) {
        L[i] = sch.lambda * L_gamma[i] + params.psi_max;
        if (!(L[i] > 0.0)) L[i] = 1.0;
        sum_L += L[i];
      }
      const long ell_max = inner_cap(params.bx, sum_L, sch.alpha);

      BlockObjective<detail::SyncSubproblem> obj{
          detail::SyncSubproblem{&graph, &nodes, &sim, &st, sch.lambda, 0}, regs,
          std::vector<double>(N, sch.lambda), L};

      MsApgHooks hooks;
      hooks.on_gradient = [&](long ell, const BlockMatrix& ybar, const BlockMatrix& q) {
        for (int i = 0; i < N; ++i) sim.control(i);  // residual vote
        if (options.hooks.on_inner) options.hooks.on_inner(k, ell, sch.lambda, ybar, q, st.xbar);
        deadline.check();
      };
      hooks.on_step = [&](long, const BlockMatrix&) {
        for (int i = 0; i < N; ++i) sim.charge_prox(i);
      };
      MsApgOptions mo;
      mo.max_iters = ell_max;
      mo.residual_tol = sch.xi * resid_tol_scale;

      MsApgResult inner;
      try {
        inner = ms_apg(obj, st.x, mo, hooks);
      } catch (const NumericalError&) {
        trace.stop_reason = to_string(StopReason::numerical);
        break;
      }
      if (!inner.y.allFinite()) {
        trace.stop_reason = to_string(StopReason::numerical);
        break;
      }
      st.x = std::move(inner.y);

      TraceRow row;
      row.k = k;
      row.lambda = sch.lambda;
      row.F_sum = network_objective(nodes, st.x);
      row.rel_subopt = relative_gap(row.F_sum, options.F_star);
      row.cv_raw = max_edge_disagreement(graph, st.x);
      row.CV = row.cv_raw / std::sqrt(static_cast<double>(n));
      const auto& led = sim.ledger();
      row.comm_per_node_max = led.max_sent();
      row.prox_count = led.max_prox();
      row.grad_count = led.max_grad();
      const double lambda_next = sch.lambda * params.c;
      const BlockMatrix xbar_next = params.c * (st.xbar + st.x);
      row.dual_norm = std::sqrt(laplacian_quadratic(graph, xbar_next)) / lambda_next;
      row.ax_norm = std::sqrt(laplacian_quadratic(graph, st.x));
      row.dual_step =
          sch.lambda * std::sqrt(laplacian_quadratic(graph, xbar_next / lambda_next - st.xbar / sch.lambda));
      row.ell_max = static_cast<double>(ell_max);
      row.inner_iters = inner.iterations;
      row.stop_reason = to_string(inner.reason);
      trace.rows.push_back(row);
      if (options.hooks.on_outer) options.hooks.on_outer(st, trace.rows.back());

      if (!std::isfinite(row.F_sum)) {
        trace.stop_reason = to_string(StopReason::numerical);
        break;
      }
      if (benchmark_mode && row.rel_subopt <= params.eps_opt && row.CV <= params.eps_feas) {
        trace.converged = true;
        trace.stop_reason = to_string(StopReason::target);
        break;
      }
      if (!benchmark_mode && options.stop_on_feasibility && row.CV <= params.eps_feas) {
        trace.converged = true;
        trace.stop_reason = to_string(StopReason::target);
        break;
      }
      if (deadline.passed()) {
        trace.stop_reason = to_string(StopReason::timeout);
        break;
      }
    }
  } catch (const detail::TimeoutSignal&) {
    trace.stop_reason = to_string(StopReason::timeout);
  }
  if (!benchmark_mode && trace.stop_reason == to_string(StopReason::outer_cap) && !trace.rows.empty()) {
    trace.converged = trace.rows.back().CV <= params.eps_feas;
  }
  if (!trace.rows.empty()) trace.rows.back().stop_reason = trace.stop_reason;
  trace.x = st.x;
  trace.seconds = deadline.elapsed();
  return trace;
}

inline RunTrace dfal_solve(const std::vector<NodeProblem>& nodes, const Graph& graph, const DfalParams& params,
                           const DfalOptions& options = {}) {
  Simulator sim(graph, nodes.front().dim());
  return dfal_solve(nodes, graph, params, sim, options);
}

// ---------------------------------------------------------------------------
// asynchronous variant

enum class AsyncOracle { rbcd, arbcd };

inline std::string to_string(AsyncOracle o) { return o == AsyncOracle::rbcd ? "rbcd" : "arbcd"; }

inline AsyncOracle parse_oracle(const std::string& s) {
  if (s == "rbcd") return AsyncOracle::rbcd;
  if (s == "arbcd") return AsyncOracle::arbcd;
  throw std::invalid_argument("unknown oracle '" + s + "' (expected rbcd or arbcd)");
}

/// Per-subproblem failure probability 1 - (1-p)^(1/N_eps).
inline double subproblem_confidence(double p, long outer_cap) {
  require(p > 0.0 && p < 1.0, "p must lie in (0,1)");
  return -std::expm1(std::log1p(-p) / static_cast<double>(outer_cap));
}

struct AsyncOptions {
  AsyncOracle oracle = AsyncOracle::rbcd;
  double p = 0.1;
  std::uint64_t seed = 1;
  double F_star = std::numeric_limits<double>::quiet_NaN();
  BlockMatrix x0;
  long max_steps_per_subproblem = 2000000000L;
  /// Per outer iteration: (k, prescribed budget, steps taken).
  std::function<void(long, long, long)> on_subproblem;
};

/// Asynchronous DFAL: each subproblem is solved by a randomized block method
/// whose blocks are activated by equal-rate node clocks.
inline RunTrace async_dfal_solve(const std::vector<NodeProblem>& nodes, const Graph& graph,
                                 const DfalParams& params, Simulator& sim, const AsyncOptions& options) {
  params.validate();
  const int N = graph.num_nodes();
  require(static_cast<int>(nodes.size()) == N, "node count does not match graph");
  const BlockMatrix x0 = resolve_x0(nodes, options.x0);
  const Index n = x0.rows();
  const double p_k = subproblem_confidence(options.p, params.max_outer);

  std::vector<double> L_gamma;
  for (const auto& p : nodes) L_gamma.push_back(smooth_lipschitz(p.loss));
  const auto regs = detail::node_regs(nodes);

  RunTrace trace;
  trace.algorithm = "afal-" + to_string(options.oracle);
  trace.seed = options.seed;
  trace.F_star = options.F_star;
  trace.config = params.to_json();
  trace.config["p"] = options.p;
  trace.config["oracle"] = to_string(options.oracle);
  const bool benchmark_mode = !std::isnan(options.F_star);
  const detail::Deadline deadline(params.budget_secs);

  DfalState st = detail::initial_state(graph, x0, params.lambda1);
  sim.seed_channel(0, x0);
  Schedule sch{params.lambda1, params.alpha1, params.xi1};
  const long units = options.oracle == AsyncOracle::arbcd ? 2 : 1;  // (u_i, z_i) vs y_i

  trace.stop_reason = to_string(StopReason::outer_cap);
  try {
    for (long k = 1; k <= params.max_outer; ++k) {
      if (k > 1) {
        for (int i = 0; i < N; ++i) sim.publish_if_changed(0, i, st.x.col(i));
        st.xbar = params.c * (st.xbar + st.x);
        sim.end_round();
        sch.lambda *= params.c;
        sch.alpha *= params.c * params.c;
        sch.xi *= params.c * params.c;
      }
      st.k = k;
      st.lambda = sch.lambda;

      std::vector<double> L(N);
      for (int i = 0; i < N; ++i) {
        // separable bound for the block Hessian: lambda L_gamma_i + d_i
        L[i] = sch.lambda * L_gamma[i] + graph.degree(i);
        if (!(L[i] > 0.0)) L[i] = 1.0;
      }
      BlockObjective<detail::AsyncSubproblem> obj{detail::AsyncSubproblem{&graph, &nodes, &st, sch.lambda}, regs,
                                                  std::vector<double>(N, sch.lambda), L};

      RandomizedOptions ro;
      ro.alpha = sch.alpha;
      ro.p = p_k;
      ro.residual_tol = sch.xi / std::sqrt(static_cast<double>(N));
      ro.seed = mix_seed(options.seed, static_cast<std::uint64_t>(k));
      ro.max_iters = options.max_steps_per_subproblem;
      RandomizedHooks rh;
      rh.on_step = [&](long step, Index i, const BlockMatrix&) {
        const int node = static_cast<int>(i);
        sim.charge_grad(node);
        sim.charge_prox(node);
        sim.charge_broadcast(node, units);
        sim.end_event();
        if ((step & 1023) == 0) deadline.check();
      };
      rh.on_epoch = [&](long) {
        for (int i = 0; i < N; ++i) {
          sim.charge_grad(i);
          sim.control(i);
        }
      };
      AsyncClock clock(mix_seed(options.seed, 0x100000ULL + static_cast<std::uint64_t>(k)), N);

      RandomizedResult inner;
      try {
        inner = options.oracle == AsyncOracle::rbcd ? rbcd_run(obj, st.x, ro, rh, &clock)
                                                    : arbcd_run(obj, st.x, ro, rh, &clock);
      } catch (const NumericalError&) {
        trace.stop_reason = to_string(StopReason::numerical);
        break;
      }
      if (options.on_subproblem) options.on_subproblem(k, inner.budget, inner.iterations);
      st.x = std::move(inner.y);

      TraceRow row;
      row.k = k;
      row.lambda = sch.lambda;
      row.F_sum = network_objective(nodes, st.x);
      row.rel_subopt = relative_gap(row.F_sum, options.F_star);
      row.cv_raw = max_edge_disagreement(graph, st.x);
      row.CV = row.cv_raw / std::sqrt(static_cast<double>(n));
      const auto& led = sim.ledger();
      row.comm_per_node_max = led.max_sent();
      row.prox_count = led.max_prox();
      row.grad_count = led.max_grad();
      const double lambda_next = sch.lambda * params.c;
      const BlockMatrix xbar_next = params.c * (st.xbar + st.x);
      row.dual_norm = std::sqrt(laplacian_quadratic(graph, xbar_next)) / lambda_next;
      row.ax_norm = std::sqrt(laplacian_quadratic(graph, st.x));
      row.inner_iters = inner.iterations;
      row.ell_max = static_cast<double>(inner.budget);
      row.stop_reason = to_string(inner.reason);
      trace.rows.push_back(row);

      if (!std::isfinite(row.F_sum)) {
        trace.stop_reason = to_string(StopReason::numerical);
        break;
      }
      if (benchmark_mode && row.rel_subopt <= params.eps_opt && row.CV <= params.eps_feas) {
        trace.converged = true;
        trace.stop_reason = to_string(StopReason::target);
        // termination notice to neighbors
        for (int i = 0; i < N; ++i) sim.control(i);
        break;
      }
      if (deadline.passed()) {
        trace.stop_reason = to_string(StopReason::timeout);
        break;
      }
    }
  } catch (const detail::TimeoutSignal&) {
    trace.stop_reason = to_string(StopReason::timeout);
  }
  if (!benchmark_mode && trace.stop_reason == to_string(StopReason::outer_cap) && !trace.rows.empty()) {
    trace.converged = trace.rows.back().CV <= params.eps_feas;
  }
  if (!trace.rows.empty()) trace.rows.back().stop_reason = trace.stop_reason;
  trace.x = st.x;
  trace.seconds = deadline.elapsed();
  return trace;
}

}  // namespace dfal
