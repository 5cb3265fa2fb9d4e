#pragma once
/*
 * Per-outer-iteration run records, serialized as CSV plus a JSON summary.
 * Numbers are written in shortest round-trip form so equal runs give equal
 * bytes; wall time goes to the summary only.
 */

#include "dfal/common.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace dfal {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

struct TraceRow {
  long k = 0;
  double lambda = 0.0;
  double F_sum = 0.0;
  double rel_subopt = std::numeric_limits<double>::quiet_NaN();
  double CV = 0.0;
  long comm_per_node_max = 0;
  long prox_count = 0;
  long grad_count = 0;
  double dual_norm = std::numeric_limits<double>::quiet_NaN();
  long inner_iters = 0;
  std::string stop_reason;

  // diagnostics, not serialized
  double ax_norm = 0.0;    // ||A x^(k)||
  double dual_step = 0.0;  // lambda^(k) ||theta^(k+1) - theta^(k)||
  double ell_max = 0.0;    // inner cap
  double cv_raw = 0.0;     // max edge disagreement, unnormalized
};

struct RunTrace {
  std::string algorithm;
  std::vector<TraceRow> rows;
  bool converged = false;
  std::string stop_reason;
  BlockMatrix x;              // final per-node iterates (SADMM: midpoints)
  double F_star = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();

  static constexpr const char* kHeader =
      "k,lambda,F_sum,rel_subopt,CV,comm_per_node_max,prox_count,grad_count,dual_norm,inner_iters,stop_reason";

  void write_csv(std::ostream& out) const {
    out << kHeader << '\n';
    for (const auto& r : rows) {
      out << r.k << ',' << format_number(r.lambda) << ',' << format_number(r.F_sum) << ','
          << format_number(r.rel_subopt) << ',' << format_number(r.CV) << ',' << r.comm_per_node_max << ','
          << r.prox_count << ',' << r.grad_count << ',' << format_number(r.dual_norm) << ',' << r.inner_iters
          << ',' << r.stop_reason << '\n';
    }
  }

  std::string csv() const {
    std::ostringstream s;
    write_csv(s);
    return s.str();
  }

  void save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_csv(out);
  }

  nlohmann::json summary() const {
    nlohmann::json j;
    j["algorithm"] = algorithm;
    j["converged"] = converged;
    j["stop_reason"] = stop_reason;
    j["outer_iterations"] = rows.empty() ? 0 : rows.back().k;
    j["seed"] = seed;
    j["wall_seconds"] = seconds;
    j["config"] = config;
    if (!rows.empty()) {
      const auto& r = rows.back();
      auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
      };
      j["final"] = {{"F_sum", num(r.F_sum)},
                    {"rel_subopt", num(r.rel_subopt)},
                    {"CV", num(r.CV)},
                    {"comm_per_node_max", r.comm_per_node_max},
                    {"prox_count", r.prox_count},
                    {"grad_count", r.grad_count},
                    {"dual_norm", num(r.dual_norm)},
                    {"lambda", num(r.lambda)}};
    }
    j["F_star"] = std::isfinite(F_star) ? nlohmann::json(F_star) : nlohmann::json(nullptr);
    return j;
  }

  void save_summary(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << summary().dump(2) << '\n';
  }
};

/// |F - F*| / |F*|, or the absolute gap when F* = 0.
inline double relative_gap(double F, double F_star) {
  if (std::isnan(F_star)) return std::numeric_limits<double>::quiet_NaN();
  const double gap = std::abs(F - F_star);
  return F_star == 0.0 ? gap : gap / std::abs(F_star);
}

}  // namespace dfal
