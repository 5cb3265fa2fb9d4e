#pragma once
/*
 * Composite node functions F_i = rho_i + gamma_i.
 *
 *   rho_i(x)   = beta1 ||x||_1 + beta2 sum_k ||x_{g(k)}||_2    (sparse group)
 *   gamma_i(x) = sum_j h_delta(a_j^T x - b_j)                  (Huber)
 *              or 1/2 ||A x - b||^2                            (quadratic)
 *
 * The sparse-group prox has a closed form (soft-threshold, then group
 * shrink), and the minimum-norm element of lambda*d(rho)(x) + grad f(x) can be
 * written down group by group; subgrad_residual() returns its norm.
 */

#include "dfal/common.hpp"
#include "dfal/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace dfal {

/// Disjoint cover of [0, n) by sorted index groups.
class GroupPartition {
 public:
  GroupPartition() = default;

  GroupPartition(Index dim, std::vector<std::vector<Index>> groups)
      : dim_(dim), groups_(std::move(groups)) {
    std::vector<int> hits(static_cast<std::size_t>(dim), 0);
    for (std::size_t k = 0; k < groups_.size(); ++k) {
      auto& g = groups_[k];
      if (g.empty()) throw std::invalid_argument("group " + std::to_string(k + 1) + " is empty");
      std::sort(g.begin(), g.end());
      for (Index j : g) {
        if (j < 0 || j >= dim) {
          throw std::invalid_argument("group " + std::to_string(k + 1) + " has index " +
                                      std::to_string(j + 1) + " outside 1.." + std::to_string(dim));
        }
        if (hits[j]++ > 0) {
          throw std::invalid_argument("index " + std::to_string(j + 1) +
                                      " appears in more than one group");
        }
      }
    }
    for (Index j = 0; j < dim; ++j) {
      if (hits[j] == 0) {
        throw std::invalid_argument("index " + std::to_string(j + 1) + " is not covered");
      }
    }
  }

  static GroupPartition single_group(Index dim) {
    std::vector<Index> all(static_cast<std::size_t>(dim));
    for (Index j = 0; j < dim; ++j) all[j] = j;
    return GroupPartition(dim, {std::move(all)});
  }

  static GroupPartition singletons(Index dim) {
    std::vector<std::vector<Index>> gs;
    for (Index j = 0; j < dim; ++j) gs.push_back({j});
    return GroupPartition(dim, std::move(gs));
  }

  /// K groups of size group_size over a uniformly random permutation.
  static GroupPartition random_equal(Index num_groups, Index group_size, Rng& rng) {
    const Index dim = num_groups * group_size;
    std::vector<Index> perm(static_cast<std::size_t>(dim));
    for (Index j = 0; j < dim; ++j) perm[j] = j;
    rng.shuffle(perm.begin(), perm.end());
    std::vector<std::vector<Index>> gs(static_cast<std::size_t>(num_groups));
    for (Index k = 0; k < num_groups; ++k) {
      gs[k].assign(perm.begin() + k * group_size, perm.begin() + (k + 1) * group_size);
    }
    return GroupPartition(dim, std::move(gs));
  }

  /// JSON array of arrays of 1-based indices; the dimension is inferred
  /// from the largest index unless given.
  static GroupPartition from_json(const nlohmann::json& j, Index dim = -1) {
    if (!j.is_array()) throw std::invalid_argument("partition must be a JSON array of arrays");
    std::vector<std::vector<Index>> gs;
    Index largest = 0;
    for (const auto& grp : j) {
      if (!grp.is_array()) throw std::invalid_argument("partition group must be an array");
      std::vector<Index> g;
      for (const auto& v : grp) {
        if (!v.is_number_integer()) throw std::invalid_argument("partition index must be an integer");
        const auto idx = v.get<long long>();
        if (idx < 1) throw std::invalid_argument("partition indices are 1-based");
        largest = std::max<Index>(largest, static_cast<Index>(idx));
        g.push_back(static_cast<Index>(idx - 1));
      }
      gs.push_back(std::move(g));
    }
    return GroupPartition(dim < 0 ? largest : dim, std::move(gs));
  }

  nlohmann::json to_json() const {
    auto out = nlohmann::json::array();
    for (const auto& g : groups_) {
      auto arr = nlohmann::json::array();
      for (Index j : g) arr.push_back(j + 1);
      out.push_back(std::move(arr));
    }
    return out;
  }

  Index dim() const { return dim_; }
  std::size_t size() const { return groups_.size(); }
  const std::vector<Index>& operator[](std::size_t k) const { return groups_[k]; }
  const std::vector<std::vector<Index>>& groups() const { return groups_; }

  friend bool operator==(const GroupPartition& a, const GroupPartition& b) {
    return a.dim_ == b.dim_ && a.groups_ == b.groups_;
  }

 private:
  Index dim_ = 0;
  std::vector<std::vector<Index>> groups_;
};

/// beta1 ||x||_1 + beta2 ||x||_G.
struct SparseGroupReg {
  double l1 = 0.0;
  double group = 0.0;
  GroupPartition partition;

  /// tau with tau ||x||_2 <= rho(x).
  double tau() const { return l1 + group; }

  /// Uniform bound on subgradient norms: beta1 sqrt(n) + beta2 sqrt(K).
  double subgrad_bound() const {
    return l1 * std::sqrt(static_cast<double>(partition.dim())) +
           group * std::sqrt(static_cast<double>(partition.size()));
  }
};

inline double reg_value(const SparseGroupReg& reg, const Eigen::Ref<const Vector>& x) {
  double v = reg.l1 * x.lpNorm<1>();
  if (reg.group != 0.0) {
    double gsum = 0.0;
    for (const auto& g : reg.partition.groups()) {
      double s = 0.0;
      for (Index j : g) s += x(j) * x(j);
      gsum += std::sqrt(s);
    }
    v += reg.group * gsum;
  }
  return v;
}

/// argmin_y t rho(y) + 1/2 ||y - center||^2.
inline Vector sparse_group_prox(const SparseGroupReg& reg, const Eigen::Ref<const Vector>& center,
                                double t) {
  if (!(t > 0.0)) throw std::invalid_argument("prox step must be positive");
  const double thr1 = t * reg.l1;
  const double thr2 = t * reg.group;
  Vector out(center.size());
  for (const auto& g : reg.partition.groups()) {
    double nrm2 = 0.0;
    for (Index j : g) {
      const double c = center(j);
      const double s = std::max(std::abs(c) - thr1, 0.0);
      out(j) = sgn(c) * s;
      nrm2 += s * s;
    }
    const double nrm = std::sqrt(nrm2);
    const double shrink = nrm > 0.0 ? std::max(1.0 - thr2 / nrm, 0.0) : 0.0;
    for (Index j : g) out(j) *= shrink;
  }
  return out;
}

/// Norm of the minimum-norm element of lambda*d(rho)(point) + grad_f.
///
/// A group with any nonzero entry has a fixed group-norm subgradient and only
/// its zero coordinates carry freedom (clamped by lambda*beta1); an all-zero
/// group first absorbs what the l1 ball allows, then shrinks the rest by the
/// lambda*beta2 ball. Zeros are exact zeros.
inline double subgrad_residual(const SparseGroupReg& reg, double lambda,
                               const Eigen::Ref<const Vector>& grad_f,
                               const Eigen::Ref<const Vector>& point) {
  const double w1 = lambda * reg.l1;
  const double w2 = lambda * reg.group;
  double total = 0.0;
  for (const auto& g : reg.partition.groups()) {
    double xnorm2 = 0.0;
    for (Index j : g) xnorm2 += point(j) * point(j);
    if (xnorm2 > 0.0) {
      const double xnorm = std::sqrt(xnorm2);
      for (Index j : g) {
        const double x = point(j);
        const double gj = grad_f(j);
        const double pi = x != 0.0 ? w1 * sgn(x) : -sgn(gj) * std::min(std::abs(gj), w1);
        const double r = pi + w2 * x / xnorm + gj;
        total += r * r;
      }
    } else {
      double vnorm2 = 0.0;
      for (Index j : g) {
        const double gj = grad_f(j);
        const double v = gj - sgn(gj) * std::min(std::abs(gj), w1);
        vnorm2 += v * v;
      }
      const double vnorm = std::sqrt(vnorm2);
      if (vnorm > w2) {
        const double keep = 1.0 - w2 / vnorm;
        total += keep * keep * vnorm2;
      }
    }
  }
  return std::sqrt(total);
}

/// sum_j h_delta(a_j^T x - b_j).
struct HuberLoss {
  Matrix A;
  Vector b;
  double delta = 1.0;
};

/// 1/2 ||A x - b||^2.
struct QuadraticLoss {
  Matrix A;
  Vector b;
};

/// Smooth loss family. Other members of the class (logistic, fair) slot in
/// as further alternatives.
using SmoothLoss = std::variant<HuberLoss, QuadraticLoss>;

struct ValueGrad {
  double value = 0.0;
  Vector grad;
};

inline double huber_scalar(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * a - 0.5 * delta * delta;
}

namespace detail {

inline void check_dims(const Matrix& A, const Vector& b, Index n) {
  if (A.rows() != b.size() || A.cols() != n) {
    throw std::invalid_argument("loss data is " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + " with " + std::to_string(b.size()) +
                                " offsets, point has dimension " + std::to_string(n));
  }
}

}  // namespace detail

inline ValueGrad huber_value_grad(const HuberLoss& loss, const Eigen::Ref<const Vector>& x) {
  detail::check_dims(loss.A, loss.b, x.size());
  Vector r = loss.A * x - loss.b;
  double value = 0.0;
  for (Index j = 0; j < r.size(); ++j) {
    value += huber_scalar(r(j), loss.delta);
    r(j) = std::clamp(r(j), -loss.delta, loss.delta);
  }
  return {value, loss.A.transpose() * r};
}

inline double loss_value(const SmoothLoss& loss, const Eigen::Ref<const Vector>& x) {
  return std::visit(
      [&](const auto& l) -> double {
        using T = std::decay_t<decltype(l)>;
        detail::check_dims(l.A, l.b, x.size());
        const Vector r = l.A * x - l.b;
        if constexpr (std::is_same_v<T, HuberLoss>) {
          double v = 0.0;
          for (Index j = 0; j < r.size(); ++j) v += huber_scalar(r(j), l.delta);
          return v;
        } else {
          return 0.5 * r.squaredNorm();
        }
      },
      loss);
}

/// out = grad gamma(x).
inline void loss_gradient(const SmoothLoss& loss, const Eigen::Ref<const Vector>& x,
                          Eigen::Ref<Vector> out) {
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        detail::check_dims(l.A, l.b, x.size());
        if (l.A.rows() == 0) {
          out.setZero();
          return;
        }
        Vector r = l.A * x - l.b;
        if constexpr (std::is_same_v<T, HuberLoss>) {
          r = r.cwiseMax(-l.delta).cwiseMin(l.delta);
        }
        out.noalias() = l.A.transpose() * r;
      },
      loss);
}

inline Vector loss_gradient(const SmoothLoss& loss, const Eigen::Ref<const Vector>& x) {
  Vector g(x.size());
  loss_gradient(loss, x, g);
  return g;
}

inline const Matrix& loss_matrix(const SmoothLoss& loss) {
  return std::visit([](const auto& l) -> const Matrix& { return l.A; }, loss);
}
inline const Vector& loss_offsets(const SmoothLoss& loss) {
  return std::visit([](const auto& l) -> const Vector& { return l.b; }, loss);
}

/// sigma_max(A)^2 by power iteration on the smaller Gram matrix, run until the
/// Rayleigh quotient changes by less than rtol (relative).
inline double max_singular_value_squared(const Matrix& A, double rtol = 1e-12,
                                         int max_iters = 100000) {
  if (A.size() == 0) return 0.0;
  const bool wide = A.rows() < A.cols();
  const Index k = wide ? A.rows() : A.cols();
  Vector v(k);
  for (Index i = 0; i < k; ++i) v(i) = 1.0 + 0.5 * std::sin(0.7 + 1.3 * static_cast<double>(i));
  v.normalize();
  double value = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = wide ? Vector(A * (A.transpose() * v)) : Vector(A.transpose() * (A * v));
    const double next = v.dot(w);
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    v = w / nrm;
    if (it > 0 && std::abs(next - value) <= rtol * std::abs(next)) return std::max(next, nrm);
    value = next;
  }
  return value;
}

/// Lipschitz constant of grad gamma: sigma_max(A)^2 (h_delta'' <= 1).
inline double smooth_lipschitz(const SmoothLoss& loss) {
  return max_singular_value_squared(loss_matrix(loss));
}

/// Uniform bound on ||grad gamma||: delta sigma_max(A) sqrt(m) for Huber,
/// +inf for the quadratic loss.
inline double gradient_bound(const SmoothLoss& loss) {
  if (const auto* h = std::get_if<HuberLoss>(&loss)) {
    return h->delta * std::sqrt(max_singular_value_squared(h->A)) *
           std::sqrt(static_cast<double>(h->A.rows()));
  }
  return std::numeric_limits<double>::infinity();
}

/// One node's private data.
struct NodeProblem {
  SparseGroupReg reg;
  SmoothLoss loss;

  Index dim() const { return reg.partition.dim(); }
};

inline double composite_value(const NodeProblem& p, const Eigen::Ref<const Vector>& x) {
  return reg_value(p.reg, x) + loss_value(p.loss, x);
}

/// sum_i F_i(x_i) over the columns of a stacked iterate.
inline double network_objective(const std::vector<NodeProblem>& nodes, const BlockMatrix& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += composite_value(nodes[i], x.col(static_cast<Index>(i)));
  return s;
}

/// sum_i F_i(x) at a single consensus point.
inline double centralized_objective(const std::vector<NodeProblem>& nodes,
                                    const Eigen::Ref<const Vector>& x) {
  double s = 0.0;
  for (const auto& p : nodes) s += composite_value(p, x);
  return s;
}

}  // namespace dfal
