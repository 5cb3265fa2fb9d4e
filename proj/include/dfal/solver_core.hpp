#pragma once
/*
 * Block-structured first-order solvers for
 *
 *     Phi(y) = f(y) + sum_i w_i rho_i(y_i),    y = [y_1 ... y_N] (n x N)
 *
 * with f block-smooth (constants L_i) and each rho_i a sparse-group
 * regularizer.
 *
 *   ms_apg           accelerated prox-gradient, step 1/L_i on block i
 *   apg_centralized  the same loop on one block, optional gradient restart
 *   rbcd_run         randomized block coordinate descent
 *   arbcd_run        accelerated randomized BCD with independent restarts
 */

#include "dfal/common.hpp"
#include "dfal/funcs.hpp"
#include "dfal/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dfal {

/// Smooth part of a block objective.
template <class F>
concept BlockSmooth = requires(const F& f, const BlockMatrix& y, BlockMatrix& g, Index i, Vector& gi) {
  { f.value(y) } -> std::convertible_to<double>;
  f.gradient(y, g);
  f.block_gradient(i, y, gi);
};

template <BlockSmooth F>
struct BlockObjective {
  F smooth;
  std::vector<SparseGroupReg> regs;  // rho_i
  std::vector<double> weights;       // w_i
  std::vector<double> lipschitz;     // L_i

  Index num_blocks() const { return static_cast<Index>(regs.size()); }

  void validate(const BlockMatrix& y) const {
    require(!regs.empty(), "block objective has no blocks");
    require(weights.size() == regs.size() && lipschitz.size() == regs.size(),
            "block objective: regs, weights and lipschitz sizes differ");
    require(y.cols() == num_blocks(), "iterate block count does not match objective");
    for (std::size_t i = 0; i < regs.size(); ++i) {
      require(lipschitz[i] > 0.0 && std::isfinite(lipschitz[i]),
              "block " + std::to_string(i + 1) + " needs L_i > 0");
      require(regs[i].partition.dim() == y.rows(),
              "block " + std::to_string(i + 1) + " regularizer dimension mismatch");
    }
  }

  double reg_sum(const BlockMatrix& y) const {
    double s = 0.0;
    for (Index i = 0; i < num_blocks(); ++i) s += weights[i] * reg_value(regs[i], y.col(i));
    return s;
  }

  double value(const BlockMatrix& y) const { return smooth.value(y) + reg_sum(y); }

  /// prox_{scale * w_i rho_i / L_i}(center)
  Vector block_prox(Index i, const Eigen::Ref<const Vector>& center, double scale = 1.0) const {
    if (weights[i] == 0.0) return center;
    return sparse_group_prox(regs[i], center, scale * weights[i] / lipschitz[i]);
  }

  /// Residual of block i given the smooth gradient block at y.
  double block_residual(Index i, const Eigen::Ref<const Vector>& grad_i,
                        const Eigen::Ref<const Vector>& y_i) const {
    return subgrad_residual(regs[i], weights[i], grad_i, y_i);
  }

  double max_residual(const BlockMatrix& grad, const BlockMatrix& y) const {
    double r = 0.0;
    for (Index i = 0; i < num_blocks(); ++i) r = std::max(r, block_residual(i, grad.col(i), y.col(i)));
    return r;
  }
};

enum class StopReason { residual, cap, budget, target, outer_cap, timeout, numerical };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::residual: return "residual";
    case StopReason::cap: return "cap";
    case StopReason::budget: return "budget";
    case StopReason::target: return "target";
    case StopReason::outer_cap: return "outer_cap";
    case StopReason::timeout: return "timeout";
    case StopReason::numerical: return "numerical";
  }
  return "?";
}

/// Optional per-iteration log with a CSV spill.
struct IterateTrace {
  struct Row {
    long iteration;
    double phi;
    double residual;
    double seconds;
  };
  std::vector<Row> rows;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "iteration,phi,residual,wall_time\n";
    out.precision(17);
    for (const auto& r : rows) out << r.iteration << ',' << r.phi << ',' << r.residual << ',' << r.seconds << '\n';
  }
};

struct MsApgOptions {
  long max_iters = 1000;         // prox steps (l_max)
  double residual_tol = -1.0;    // per-block test at ybar; disabled if negative
  bool gradient_restart = false; // reference solves only
};

struct MsApgHooks {
  /// Called after every gradient evaluation at ybar (iteration l is 1-based).
  std::function<void(long, const BlockMatrix& ybar, const BlockMatrix& grad)> on_gradient;
  /// Called with y^(l) after prox step l.
  std::function<void(long, const BlockMatrix& y)> on_step;
};

struct MsApgResult {
  BlockMatrix y;
  long iterations = 0;  // prox steps taken
  StopReason reason = StopReason::cap;
  double residual = std::numeric_limits<double>::quiet_NaN();  // last tested max residual
};

inline double momentum_next(double t) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t)); }

/// Multi-step accelerated prox-gradient. Stops with ybar when every block's
/// residual at ybar is within options.residual_tol, or with y after
/// options.max_iters steps.
template <BlockSmooth F>
MsApgResult ms_apg(const BlockObjective<F>& obj, const BlockMatrix& y0, const MsApgOptions& options,
                   const MsApgHooks& hooks = {}) {
  obj.validate(y0);
  const Index nb = obj.num_blocks();
  BlockMatrix y = y0;
  BlockMatrix ybar = y0;
  BlockMatrix y_new(y0.rows(), nb);
  BlockMatrix grad(y0.rows(), nb);
  double t = 1.0;
  MsApgResult res;
  for (long step = 0;; ++step) {
    if (step >= options.max_iters) {
      res.y = std::move(y);
      res.iterations = step;
      res.reason = StopReason::cap;
      return res;
    }
    obj.smooth.gradient(ybar, grad);
    if (!grad.allFinite()) {
      throw NumericalError("non-finite gradient at MS-APG iteration " + std::to_string(step + 1));
    }
    if (hooks.on_gradient) hooks.on_gradient(step + 1, ybar, grad);
    if (options.residual_tol >= 0.0) {
      bool pass = true;
      double worst = 0.0;
      for (Index i = 0; i < nb; ++i) {
        const double r = obj.block_residual(i, grad.col(i), ybar.col(i));
        worst = std::max(worst, r);
        if (r > options.residual_tol) pass = false;
      }
      res.residual = worst;
      if (pass) {
        res.y = std::move(ybar);
        res.iterations = step;
        res.reason = StopReason::residual;
        return res;
      }
    }
    for (Index i = 0; i < nb; ++i) {
      y_new.col(i) = obj.block_prox(i, ybar.col(i) - grad.col(i) / obj.lipschitz[i]);
    }
    const double t_new = momentum_next(t);
    if (options.gradient_restart && ((ybar - y_new).cwiseProduct(y_new - y)).sum() > 0.0) {
      t = 1.0;
      ybar = y_new;
    } else {
      ybar = y_new + ((t - 1.0) / t_new) * (y_new - y);
      t = t_new;
    }
    y.swap(y_new);
    if (hooks.on_step) hooks.on_step(step + 1, y);
  }
}

/// Sum of the node losses at a single point (a one-column block).
struct CentralSmooth {
  const std::vector<NodeProblem>* nodes = nullptr;

  double value(const BlockMatrix& y) const {
    double s = 0.0;
    for (const auto& p : *nodes) s += loss_value(p.loss, y.col(0));
    return s;
  }
  void gradient(const BlockMatrix& y, BlockMatrix& g) const {
    g.resize(y.rows(), 1);
    g.setZero();
    Vector gi(y.rows());
    for (const auto& p : *nodes) {
      loss_gradient(p.loss, y.col(0), gi);
      g.col(0) += gi;
    }
  }
  void block_gradient(Index, const BlockMatrix& y, Vector& gi) const {
    BlockMatrix g;
    gradient(y, g);
    gi = g.col(0);
  }
};

/// Combined regularizer sum_i rho_i, available only when every node uses
/// the same partition (Case 1).
inline SparseGroupReg combined_regularizer(const std::vector<NodeProblem>& nodes) {
  require(!nodes.empty(), "no nodes");
  SparseGroupReg out = nodes.front().reg;
  out.l1 = 0.0;
  out.group = 0.0;
  for (const auto& p : nodes) {
    if (!(p.reg.partition == nodes.front().reg.partition)) {
      throw std::invalid_argument(
          "centralized APG: node partitions differ, the summed regularizer has no closed-form "
          "prox (N/A for this instance)");
    }
    out.l1 += p.reg.l1;
    out.group += p.reg.group;
  }
  return out;
}

/// sigma_max^2 of the vertically stacked node data matrices.
inline double stacked_lipschitz(const std::vector<NodeProblem>& nodes) {
  Index rows = 0;
  const Index cols = loss_matrix(nodes.front().loss).cols();
  for (const auto& p : nodes) rows += loss_matrix(p.loss).rows();
  Matrix stacked(rows, cols);
  Index r = 0;
  for (const auto& p : nodes) {
    const auto& A = loss_matrix(p.loss);
    stacked.middleRows(r, A.rows()) = A;
    r += A.rows();
  }
  return max_singular_value_squared(stacked);
}

struct ApgResult {
  Vector x;
  long iterations = 0;
  StopReason reason = StopReason::cap;
  double residual = std::numeric_limits<double>::quiet_NaN();
};

/// Centralized APG on sum_i F_i(x). Throws on instances whose partitions
/// differ across nodes.
inline ApgResult apg_centralized(const std::vector<NodeProblem>& nodes, const Vector& x0,
                                 const MsApgOptions& options, const MsApgHooks& hooks = {}) {
  BlockObjective<CentralSmooth> obj{CentralSmooth{&nodes}, {combined_regularizer(nodes)}, {1.0},
                                    {stacked_lipschitz(nodes)}};
  if (!(obj.lipschitz[0] > 0.0)) obj.lipschitz[0] = 1.0;  // all-zero data
  BlockMatrix y0 = x0;
  auto r = ms_apg(obj, y0, options, hooks);
  return {Vector(r.y.col(0)), r.iterations, r.reason, r.residual};
}

// ---------------------------------------------------------------------------
// randomized block methods

/// Uniform block sampler; the default for the randomized solvers.
class UniformSampler {
 public:
  UniformSampler(std::uint64_t seed, Index blocks) : rng_(seed), blocks_(blocks) {}
  Index operator()() { return static_cast<Index>(rng_.index(static_cast<std::size_t>(blocks_))); }

 private:
  Rng rng_;
  Index blocks_;
};

/// Step count ceil(2 N C / alpha * (1 + log(1/p))) for RBCD.
inline long rbcd_budget(Index num_blocks, double C, double alpha, double p) {
  require(alpha > 0.0 && p > 0.0 && p < 1.0, "rbcd_budget needs alpha > 0, p in (0,1)");
  const double v = 2.0 * static_cast<double>(num_blocks) * C / alpha * (1.0 + std::log(1.0 / p));
  if (!(v < 9e18)) return std::numeric_limits<long>::max();
  return static_cast<long>(std::ceil(v));
}

/// Iterations per ARBCD call, ceil(2 N sqrt(2 C / alpha)).
inline long arbcd_call_length(Index num_blocks, double C, double alpha) {
  require(alpha > 0.0, "arbcd needs alpha > 0");
  const double v = 2.0 * static_cast<double>(num_blocks) * std::sqrt(2.0 * std::max(C, 0.0) / alpha);
  if (!(v < 9e18)) return std::numeric_limits<long>::max();
  return static_cast<long>(std::ceil(v));
}

/// Number of independent ARBCD calls, ceil(log2(1/p)).
inline long arbcd_restarts(double p) {
  require(p > 0.0 && p < 1.0, "p must lie in (0,1)");
  return std::max(1L, static_cast<long>(std::ceil(std::log2(1.0 / p))));
}

inline double arbcd_momentum_next(double t, Index num_blocks) {
  const double nt2 = 2.0 * static_cast<double>(num_blocks) * t;
  return (1.0 + std::sqrt(1.0 + nt2 * nt2)) / (2.0 * static_cast<double>(num_blocks));
}

struct RandomizedOptions {
  double alpha = 1e-6;        // target gap
  double p = 0.1;             // failure probability
  long fixed_iters = -1;      // RBCD: exact step count; ARBCD: exact call length. <0 = estimated budget
  double residual_tol = -1.0; // checked once per epoch of N steps; disabled if negative
  long max_iters = std::numeric_limits<long>::max();  // hard ceiling on total steps
  std::uint64_t seed = 1;
};

struct RandomizedHooks {
  /// Called after every single-block step with the block that moved.
  std::function<void(long, Index, const BlockMatrix& y)> on_step;
  /// Called at every epoch boundary with (full gradient evaluations, block gradient evaluations).
  std::function<void(long steps)> on_epoch;
};

struct RandomizedResult {
  BlockMatrix y;
  long iterations = 0;        // block steps
  long epochs_checked = 0;    // full residual / objective evaluations
  long budget = 0;            // final prescribed step count
  StopReason reason = StopReason::budget;
  double phi = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

template <BlockSmooth F>
double l_weighted_sqdist(const BlockObjective<F>& obj, const BlockMatrix& a, const BlockMatrix& b) {
  double s = 0.0;
  for (Index i = 0; i < obj.num_blocks(); ++i) s += obj.lipschitz[i] * (a.col(i) - b.col(i)).squaredNorm();
  return s;
}

}  // namespace detail

/// Randomized block coordinate descent. With fixed_iters < 0 the step budget
/// is re-estimated each epoch from C ~ 2 max{sum L_i |y0_i - y_i|^2, Phi(y0) - Phi(y)}.
template <BlockSmooth F, class Sampler = UniformSampler>
RandomizedResult rbcd_run(const BlockObjective<F>& obj, const BlockMatrix& y0, const RandomizedOptions& opt,
                          const RandomizedHooks& hooks = {}, Sampler* sampler_in = nullptr) {
  obj.validate(y0);
  const Index nb = obj.num_blocks();
  UniformSampler own(opt.seed, nb);
  auto draw = [&]() -> Index {
    if constexpr (std::is_same_v<Sampler, UniformSampler>) {
      return sampler_in ? (*sampler_in)() : own();
    } else {
      return (*sampler_in)();
    }
  };
  const bool adaptive = opt.fixed_iters < 0;
  const bool need_epochs = adaptive || opt.residual_tol >= 0.0;
  RandomizedResult res;
  res.y = y0;
  BlockMatrix& y = res.y;
  const double phi0 = need_epochs ? obj.value(y0) : 0.0;
  long budget = adaptive ? nb : opt.fixed_iters;  // at least one epoch before estimating
  Vector gi(y0.rows());
  BlockMatrix grad(y0.rows(), nb);
  long step = 0;
  for (;;) {
    if (need_epochs && step > 0 && step % nb == 0) {
      ++res.epochs_checked;
      if (hooks.on_epoch) hooks.on_epoch(step);
      if (opt.residual_tol >= 0.0) {
        obj.smooth.gradient(y, grad);
        res.residual = obj.max_residual(grad, y);
        if (res.residual <= opt.residual_tol) {
          res.reason = StopReason::residual;
          break;
        }
      }
      if (adaptive) {
        res.phi = obj.value(y);
        const double C = 2.0 * std::max(detail::l_weighted_sqdist(obj, y0, y), phi0 - res.phi);
        budget = std::max<long>(nb, rbcd_budget(nb, C, opt.alpha, opt.p));
      }
    }
    if (step >= budget || step >= opt.max_iters) {
      res.reason = step >= budget ? StopReason::budget : StopReason::cap;
      break;
    }
    const Index i = draw();
    obj.smooth.block_gradient(i, y, gi);
    if (!gi.allFinite()) throw NumericalError("non-finite block gradient in RBCD step " + std::to_string(step + 1));
    y.col(i) = obj.block_prox(i, y.col(i) - gi / obj.lipschitz[i]);
    ++step;
    if (hooks.on_step) hooks.on_step(step, i, y);
  }
  res.iterations = step;
  res.budget = budget;
  return res;
}

/// Accelerated randomized BCD: K = ceil(log2(1/p)) independent calls from z0,
/// each of T = ceil(2N sqrt(2C/alpha)) steps; returns the candidate with the
/// smallest Phi. C is estimated from the best candidate seen so far unless
/// fixed_iters gives T directly. Each epoch, one block prox-gradient step is
/// taken from the candidate; if that point passes the residual test it is
/// returned and the whole scheme ends.
template <BlockSmooth F, class Sampler = UniformSampler>
RandomizedResult arbcd_run(const BlockObjective<F>& obj, const BlockMatrix& z0, const RandomizedOptions& opt,
                           const RandomizedHooks& hooks = {}, Sampler* sampler_in = nullptr) {
  obj.validate(z0);
  const Index nb = obj.num_blocks();
  const double N = static_cast<double>(nb);
  UniformSampler own(opt.seed, nb);
  auto draw = [&]() -> Index {
    if constexpr (std::is_same_v<Sampler, UniformSampler>) {
      return sampler_in ? (*sampler_in)() : own();
    } else {
      return (*sampler_in)();
    }
  };
  const bool adaptive = opt.fixed_iters < 0;
  const long calls = arbcd_restarts(opt.p);
  const double phi0 = obj.value(z0);

  RandomizedResult best;
  best.y = z0;
  best.phi = phi0;
  BlockMatrix best_any = z0;  // min-Phi point for the C estimate
  double best_any_phi = phi0;

  long T = adaptive ? nb : opt.fixed_iters;
  long total = 0;
  BlockMatrix z(z0.rows(), nb), u(z0.rows(), nb), w(z0.rows(), nb), cand(z0.rows(), nb);
  BlockMatrix grad(z0.rows(), nb);
  Vector gi(z0.rows());

  auto estimate_T = [&]() {
    const double C = 2.0 * ((1.0 - 1.0 / N) * (phi0 - best_any_phi) +
                            0.5 * detail::l_weighted_sqdist(obj, z0, best_any));
    T = std::max<long>(nb, arbcd_call_length(nb, C, opt.alpha));
  };

  for (long call = 0; call < calls; ++call) {
    z = z0;
    u.setZero();
    double t = 1.0;
    double cand_phi = phi0;
    cand = z0;
    long step = 0;
    bool converged = false;
    for (;;) {
      if (step > 0 && step % nb == 0) {
        ++best.epochs_checked;
        if (hooks.on_epoch) hooks.on_epoch(total);
        cand_phi = obj.value(cand);
        if (cand_phi < best_any_phi) {
          best_any_phi = cand_phi;
          best_any = cand;
        }
        if (opt.residual_tol >= 0.0) {
          // the candidate mixes two sequences and is not sparse; test one
          // block prox-gradient step from it instead
          obj.smooth.gradient(cand, grad);
          for (Index b = 0; b < nb; ++b) w.col(b) = obj.block_prox(b, cand.col(b) - grad.col(b) / obj.lipschitz[b]);
          obj.smooth.gradient(w, grad);
          best.residual = obj.max_residual(grad, w);
          if (best.residual <= opt.residual_tol) {
            cand = w;
            cand_phi = obj.value(cand);
            converged = true;
            break;
          }
        }
        if (adaptive) estimate_T();
      }
      if (step >= T || total >= opt.max_iters) break;
      const Index i = draw();
      const double s = 1.0 / (N * t);
      w = (s * s) * u + z;
      obj.smooth.block_gradient(i, w, gi);
      if (!gi.allFinite()) throw NumericalError("non-finite block gradient in ARBCD step " + std::to_string(total + 1));
      const Vector z_old = z.col(i);
      z.col(i) = obj.block_prox(i, z_old - (t / obj.lipschitz[i]) * gi, t);
      u.col(i) += (N * N * t * (1.0 - t)) * (z.col(i) - z_old);
      cand = (s * s) * u + z;
      t = arbcd_momentum_next(t, nb);
      ++step;
      ++total;
      if (hooks.on_step) hooks.on_step(total, i, cand);
    }
    if (!converged) {
      cand_phi = obj.value(cand);
      if (cand_phi < best_any_phi) {
        best_any_phi = cand_phi;
        best_any = cand;
      }
    }
    if (converged || cand_phi < best.phi || call == 0) {
      best.y = cand;
      best.phi = cand_phi;
    }
    if (converged) {
      best.reason = StopReason::residual;
      break;
    }
    best.reason = total >= opt.max_iters ? StopReason::cap : StopReason::budget;
    if (total >= opt.max_iters) break;
  }
  best.iterations = total;
  best.budget = T * calls;
  return best;
}

}  // namespace dfal
