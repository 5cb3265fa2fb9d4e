#pragma once
/*
 * Sparse-group Huber regression benchmark: instance generation, reference
 * optima, metrics, and the algorithm x topology x case matrix.
 *
 * Instance: n = K n_g, m_i = n / (2N) rows per node, A_i i.i.d. N(0,1),
 * b_i = A_i x_gen with x_gen_j = (-1)^j exp(-(j-1)/n_g) (j 1-based),
 * beta1 = beta2 = 1/N, delta = 1. Case 1 shares one random equal-size group
 * partition across nodes; Case 2 draws one per node. Data and partitions come
 * from separate seeded streams, so both cases see the same A_i, b_i.
 */

#include "dfal/baselines.hpp"
#include "dfal/common.hpp"
#include "dfal/dfal.hpp"
#include "dfal/funcs.hpp"
#include "dfal/graph.hpp"
#include "dfal/instance.hpp"
#include "dfal/random.hpp"
#include "dfal/solver_core.hpp"
#include "dfal/trace.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace dfal {

inline constexpr std::uint64_t kDataStream = 0;
inline constexpr std::uint64_t kPartitionStream = 1;

inline Vector generator_vector(Index n, Index group_size) {
  Vector x(n);
  for (Index j = 1; j <= n; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    x(j - 1) = sign * std::exp(-static_cast<double>(j - 1) / static_cast<double>(group_size));
  }
  return x;
}

inline ProblemInstance generate_instance(int case_tag, const Graph& graph, const std::string& topology,
                                         Index group_size, Index num_groups, std::uint64_t seed) {
  require(case_tag == 1 || case_tag == 2, "case must be 1 or 2");
  require(group_size >= 1 && num_groups >= 1, "group size and group count must be positive");
  const int N = graph.num_nodes();
  const Index n = group_size * num_groups;
  if (n % (2 * N) != 0) {
    throw std::invalid_argument("n = K * n_g = " + std::to_string(n) + " is not divisible by 2N = " +
                                std::to_string(2 * N) + ", so the per-node row count m_i = n/(2N) is not an integer");
  }
  ProblemInstance inst;
  inst.case_tag = case_tag;
  inst.topology = topology;
  inst.graph = graph;
  inst.num_nodes = N;
  inst.group_size = group_size;
  inst.num_groups = num_groups;
  inst.dim = n;
  inst.rows_per_node = n / (2 * N);
  inst.delta = 1.0;
  inst.seed = seed;
  inst.x_gen = generator_vector(n, group_size);

  Rng data(mix_seed(seed, kDataStream));
  Rng parts(mix_seed(seed, kPartitionStream));
  const GroupPartition shared = GroupPartition::random_equal(num_groups, group_size, parts);
  const double beta = 1.0 / N;
  for (int i = 0; i < N; ++i) {
    Matrix A(inst.rows_per_node, n);
    for (Index r = 0; r < A.rows(); ++r)
      for (Index c = 0; c < n; ++c) A(r, c) = data.gaussian();
    Vector b = A * inst.x_gen;
    NodeProblem p;
    p.reg.l1 = beta;
    p.reg.group = beta;
    p.reg.partition = (case_tag == 1 || i == 0) ? shared : GroupPartition::random_equal(num_groups, group_size, parts);
    p.loss = HuberLoss{std::move(A), std::move(b), inst.delta};
    inst.nodes.push_back(std::move(p));
  }
  return inst;
}

inline ProblemInstance generate_instance(int case_tag, Topology topology, int num_nodes, Index group_size,
                                         Index num_groups, std::uint64_t seed) {
  return generate_instance(case_tag, build_topology(topology, num_nodes), to_string(topology), group_size,
                           num_groups, seed);
}

/// Loads an instance file: explicit matrices, or generation parameters.
inline ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open instance file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("instance file " + path + " is not valid JSON: " + e.what());
  }
  if (j.value("format", std::string("generated")) == "explicit") return instance_from_explicit_json(j);
  const int N = j.at("nodes").get<int>();
  Graph g;
  std::string topo = j.value("topology", std::string("star"));
  if (j.contains("edges")) {
    std::vector<Edge> edges;
    for (const auto& e : j["edges"]) edges.push_back({e.at(0).get<int>() - 1, e.at(1).get<int>() - 1});
    g = Graph::from_edges(N, std::move(edges));
    topo = "file";
  } else {
    g = build_topology(parse_topology(topo), N);
  }
  return generate_instance(j.at("case").get<int>(), g, topo, j.at("ng").get<Index>(), j.at("groups").get<Index>(),
                           j.at("seed").get<std::uint64_t>());
}

inline nlohmann::json generated_instance_json(const ProblemInstance& inst) {
  nlohmann::json j;
  j["format"] = "generated";
  j["generator"] = Rng::kAlgorithm;
  j["case"] = inst.case_tag;
  j["topology"] = inst.topology;
  j["nodes"] = inst.num_nodes;
  j["ng"] = inst.group_size;
  j["groups"] = inst.num_groups;
  j["seed"] = inst.seed;
  auto edges = nlohmann::json::array();
  for (const auto& e : inst.graph.edges()) edges.push_back({e.u + 1, e.v + 1});
  j["edges"] = edges;
  return j;
}

inline bool shared_partition(const std::vector<NodeProblem>& nodes) {
  for (const auto& p : nodes)
    if (!(p.reg.partition == nodes.front().reg.partition)) return false;
  return true;
}

struct Reference {
  double F_star = std::numeric_limits<double>::quiet_NaN();
  Vector x;
  std::string method;
  bool flagged = false;  // tolerance not reached; downstream checks should skip
  double residual = std::numeric_limits<double>::quiet_NaN();  // shared-partition case
  double consensus = std::numeric_limits<double>::quiet_NaN();  // long-horizon runs

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["F_star"] = F_star;
    j["method"] = method;
    j["flagged"] = flagged;
    j["x"] = std::vector<double>(x.data(), x.data() + x.size());
    if (std::isfinite(residual)) j["residual"] = residual;
    if (std::isfinite(consensus)) j["consensus"] = consensus;
    return j;
  }
};

struct ReferenceOptions {
  double tolerance = 1e-9;
  long apg_max_iters = 2000000;
  double consensus_target = 1e-8;  // long-horizon DFAL, unnormalized
  long dfal_max_outer = 80;
  long sadmm_iters = 20000;
  bool run_sadmm = true;
};

/// Centralized optimum of sum_i F_i. Shared partitions: restarted APG on the
/// combined prox, to the residual tolerance. Otherwise: the better consensus
/// average of a long-horizon DFAL run on the complete graph and a long SADMM run.
inline Reference reference_solve(const std::vector<NodeProblem>& nodes, const ReferenceOptions& opt = {}) {
  require(opt.tolerance >= 1e-9, "reference tolerance must be at least 1e-9");
  require(!nodes.empty(), "no nodes");
  const Index n = nodes.front().dim();
  const int N = static_cast<int>(nodes.size());
  Reference ref;
  if (shared_partition(nodes)) {
    MsApgOptions mo;
    mo.max_iters = opt.apg_max_iters;
    mo.residual_tol = opt.tolerance;
    mo.gradient_restart = true;
    auto r = apg_centralized(nodes, Vector::Zero(n), mo);
    ref.x = r.x;
    ref.F_star = centralized_objective(nodes, ref.x);
    ref.method = "apg";
    ref.residual = r.residual;
    ref.flagged = r.reason != StopReason::residual;
    return ref;
  }

  const Graph clique = build_topology(Topology::clique, N);
  DfalParams params = default_params(nodes, clique);
  params.max_outer = opt.dfal_max_outer;
  params.eps_feas = opt.consensus_target / std::sqrt(static_cast<double>(n));
  DfalOptions dopt;
  dopt.stop_on_feasibility = true;
  auto run = dfal_solve(nodes, clique, params, dopt);
  const Vector avg_dfal = run.x.rowwise().mean();
  const double F_dfal = centralized_objective(nodes, avg_dfal);
  const double cv_dfal = max_edge_disagreement(clique, run.x);
  ref.x = avg_dfal;
  ref.F_star = F_dfal;
  ref.method = "dfal-clique";
  ref.consensus = cv_dfal;
  ref.flagged = !(cv_dfal <= opt.consensus_target);

  if (opt.run_sadmm) {
    AdmmOptions ao;
    ao.c = 1.0;
    ao.max_iters = opt.sadmm_iters;
    auto s = sadmm_solve(nodes, clique, ao);
    const Vector avg_s = s.x.rowwise().mean();
    const double F_s = centralized_objective(nodes, avg_s);
    if (F_s < ref.F_star) {
      ref.x = avg_s;
      ref.F_star = F_s;
      ref.method = "sadmm-clique";
      ref.consensus = s.rows.back().cv_raw;
    }
  }
  return ref;
}

inline Reference reference_solve(const ProblemInstance& inst, const ReferenceOptions& opt = {}) {
  return reference_solve(inst.nodes, opt);
}

/// max_edge ||x_i - x_j|| / sqrt(n).
inline double consensus_violation(const Graph& graph, const BlockMatrix& x) {
  return max_edge_disagreement(graph, x) / std::sqrt(static_cast<double>(x.rows()));
}

/// Split form: also includes max_i ||x_i - y_i||.
inline double consensus_violation(const Graph& graph, const BlockMatrix& x, const BlockMatrix& y) {
  double m = max_edge_disagreement(graph, x);
  for (Index i = 0; i < x.cols(); ++i) m = std::max(m, (x.col(i) - y.col(i)).norm());
  return m / std::sqrt(static_cast<double>(x.rows()));
}

struct Evaluation {
  std::vector<double> rel_subopt;
  std::vector<double> cv;
  bool absolute = false;  // F* = 0: gaps are absolute
};

inline Evaluation evaluate(const RunTrace& trace, double F_star) {
  Evaluation e;
  e.absolute = F_star == 0.0;
  for (const auto& r : trace.rows) {
    e.rel_subopt.push_back(relative_gap(r.F_sum, F_star));
    e.cv.push_back(r.CV);
  }
  return e;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

struct BenchRow {
  std::string algorithm;
  std::string topology;
  int case_tag = 1;
  double penalty = std::numeric_limits<double>::quiet_NaN();
  int runs = 0;
  int converged = 0;
  int failures = 0;  // exceptions or flagged references
  int skipped = 0;   // not applicable (centralized APG on case 2)
  double rel_subopt = std::numeric_limits<double>::quiet_NaN();
  double cv = std::numeric_limits<double>::quiet_NaN();
  double wall = std::numeric_limits<double>::quiet_NaN();
  double iterations = std::numeric_limits<double>::quiet_NaN();
  double comm = std::numeric_limits<double>::quiet_NaN();
  std::string seeds;
  std::string note;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::string config_hash;
  nlohmann::json config;

  /// CSV; wall time can be left out for digest purposes.
  std::string csv(bool with_wall = true) const {
    std::ostringstream s;
    s << "# protocol-level reproduction at desk scale; iteration and time figures are not comparable to "
         "full-scale runs\n";
    s << "algorithm,topology,case,penalty,runs,converged,failures,skipped,rel_subopt,CV,"
      << (with_wall ? "wall_secs," : "") << "iterations,comm_per_node,config_hash,seeds,note\n";
    for (const auto& r : rows) {
      s << r.algorithm << ',' << r.topology << ',' << r.case_tag << ',' << format_number(r.penalty) << ','
        << r.runs << ',' << r.converged << ',' << r.failures << ',' << r.skipped << ','
        << format_number(r.rel_subopt) << ',' << format_number(r.cv) << ',';
      if (with_wall) s << format_number(r.wall) << ',';
      s << format_number(r.iterations) << ',' << format_number(r.comm) << ',' << config_hash << ',' << r.seeds
        << ',' << r.note << '\n';
    }
    return s.str();
  }

  std::string digest() const { return hex64(fnv1a(csv(false))); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["digest"] = digest();
    j["config"] = config;
    auto rs = nlohmann::json::array();
    auto num = [](double v) -> nlohmann::json {
      if (std::isfinite(v)) return v;
      return nullptr;
    };
    for (const auto& r : rows) {
      rs.push_back({{"algorithm", r.algorithm},
                    {"topology", r.topology},
                    {"case", r.case_tag},
                    {"penalty", num(r.penalty)},
                    {"runs", r.runs},
                    {"converged", r.converged},
                    {"failures", r.failures},
                    {"skipped", r.skipped},
                    {"rel_subopt", num(r.rel_subopt)},
                    {"CV", num(r.cv)},
                    {"wall_secs", num(r.wall)},
                    {"iterations", num(r.iterations)},
                    {"comm_per_node", num(r.comm)},
                    {"seeds", r.seeds},
                    {"note", r.note}});
    }
    j["rows"] = rs;
    return j;
  }
};

struct BenchConfig {
  std::vector<std::string> algorithms{"dfal"};
  std::vector<std::string> topologies{"star"};
  std::vector<int> cases{1};
  int nodes = 5;
  Index ng = 10;
  Index groups = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double budget_secs = 60.0;
  double eps_opt = 1e-3;
  double eps_feas = 1e-4;
  double c = 0.7;
  long max_outer = 200;
  std::vector<double> admm_penalties{0.1, 1.0, 10.0};
  long admm_max_iters = 100000;
  std::string oracle = "rbcd";
  double p = 0.1;
  double ref_tol = 1e-9;
  std::string output_dir;  // empty: no per-run files

  static BenchConfig from_json(const nlohmann::json& j) {
    BenchConfig c;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("algorithms", c.algorithms);
    get("topologies", c.topologies);
    get("cases", c.cases);
    get("nodes", c.nodes);
    get("ng", c.ng);
    get("groups", c.groups);
    get("seeds", c.seeds);
    get("budget_secs", c.budget_secs);
    get("eps_opt", c.eps_opt);
    get("eps_feas", c.eps_feas);
    get("c", c.c);
    get("max_outer", c.max_outer);
    get("admm_penalties", c.admm_penalties);
    get("admm_max_iters", c.admm_max_iters);
    get("oracle", c.oracle);
    get("p", c.p);
    get("ref_tol", c.ref_tol);
    get("output_dir", c.output_dir);
    for (const auto& a : c.algorithms) {
      if (a != "dfal" && a != "afal" && a != "admm" && a != "sadmm" && a != "apg") {
        throw std::invalid_argument("unknown algorithm '" + a + "' in config");
      }
    }
    for (int cs : c.cases) require(cs == 1 || cs == 2, "config cases must be 1 or 2");
    for (const auto& t : c.topologies) (void)parse_topology(t);
    require(!c.seeds.empty(), "config needs at least one seed");
    return c;
  }

  nlohmann::json to_json() const {
    return {{"algorithms", algorithms}, {"topologies", topologies}, {"cases", cases},
            {"nodes", nodes},           {"ng", ng},                 {"groups", groups},
            {"seeds", seeds},           {"budget_secs", budget_secs}, {"eps_opt", eps_opt},
            {"eps_feas", eps_feas},     {"c", c},                   {"max_outer", max_outer},
            {"admm_penalties", admm_penalties}, {"admm_max_iters", admm_max_iters},
            {"oracle", oracle},         {"p", p},                   {"ref_tol", ref_tol},
            {"generator", Rng::kAlgorithm}};
  }
};

struct SolveRequest {
  std::string algorithm = "dfal";
  double c = 0.7;  // DFAL shrink factor or ADMM penalty
  double lambda1 = std::numeric_limits<double>::quiet_NaN();
  double bx = std::numeric_limits<double>::quiet_NaN();
  double eps_opt = 1e-3;
  double eps_feas = 1e-4;
  double budget_secs = 60.0;
  long max_outer = 200;
  long max_iters = 100000;
  std::string oracle = "rbcd";
  double p = 0.1;
  std::uint64_t seed = 0;
};

/// One algorithm on one instance, in benchmark mode when F_star is finite.
inline RunTrace run_algorithm(const ProblemInstance& inst, const SolveRequest& req, double F_star) {
  const auto& nodes = inst.nodes;
  const Graph& graph = inst.graph;
  if (req.algorithm == "dfal" || req.algorithm == "afal") {
    DfalParams params = default_params(nodes, graph);
    params.c = req.c;
    if (std::isfinite(req.lambda1)) {
      params.lambda1 = req.lambda1;
      params.alpha1 = (req.lambda1 * params.tau_bar) * (req.lambda1 * params.tau_bar) / (4.0 * graph.num_nodes());
      params.xi1 = 0.5 * req.lambda1 * params.tau_bar;
    }
    if (std::isfinite(req.bx)) params.bx = req.bx;
    params.eps_opt = req.eps_opt;
    params.eps_feas = req.eps_feas;
    params.budget_secs = req.budget_secs;
    params.max_outer = req.max_outer;
    Simulator sim(graph, inst.dim);
    if (req.algorithm == "dfal") {
      DfalOptions o;
      o.F_star = F_star;
      o.seed = req.seed;
      auto t = dfal_solve(nodes, graph, params, sim, o);
      t.config["topology"] = inst.topology;
      t.config["case"] = inst.case_tag;
      return t;
    }
    AsyncOptions o;
    o.F_star = F_star;
    o.seed = req.seed;
    o.oracle = parse_oracle(req.oracle);
    o.p = req.p;
    auto t = async_dfal_solve(nodes, graph, params, sim, o);
    t.config["topology"] = inst.topology;
    t.config["case"] = inst.case_tag;
    return t;
  }
  if (req.algorithm == "admm" || req.algorithm == "sadmm") {
    AdmmOptions o;
    o.c = req.c;
    o.max_iters = req.max_iters;
    o.eps_opt = req.eps_opt;
    o.eps_feas = req.eps_feas;
    o.budget_secs = req.budget_secs;
    o.F_star = F_star;
    o.seed = req.seed;
    auto t = req.algorithm == "admm" ? admm_solve(nodes, graph, o) : sadmm_solve(nodes, graph, o);
    t.config["topology"] = inst.topology;
    t.config["case"] = inst.case_tag;
    return t;
  }
  if (req.algorithm == "apg") {
    // centralized: CV is 0 by construction; rows record the objective
    // every 10 iterations
    RunTrace t;
    t.algorithm = "apg";
    t.seed = req.seed;
    t.F_star = F_star;
    const detail::Deadline deadline(req.budget_secs);
    MsApgOptions mo;
    mo.max_iters = req.max_iters;
    bool hit = false;
    long last = 0;
    MsApgHooks hooks;
    hooks.on_step = [&](long ell, const BlockMatrix& y) {
      if (hit) return;
      const double F = centralized_objective(nodes, y.col(0));
      const double rel = relative_gap(F, F_star);
      if (ell % 10 == 0 || rel <= req.eps_opt) {
        TraceRow row;
        row.k = ell;
        row.F_sum = F;
        row.rel_subopt = rel;
        row.CV = 0.0;
        row.prox_count = ell;
        row.grad_count = ell;
        row.inner_iters = ell - last;
        row.stop_reason = "iter";
        last = ell;
        t.rows.push_back(row);
      }
      if (!std::isnan(F_star) && rel <= req.eps_opt) {
        hit = true;
        throw detail::TimeoutSignal{};  // early exit, distinguished below
      }
      deadline.check();
    };
    Vector x;
    try {
      auto r = apg_centralized(nodes, Vector::Zero(inst.dim), mo, hooks);
      x = r.x;
      t.stop_reason = to_string(StopReason::cap);
    } catch (const detail::TimeoutSignal&) {
      t.stop_reason = to_string(hit ? StopReason::target : StopReason::timeout);
    }
    t.converged = hit;
    if (!t.rows.empty()) t.rows.back().stop_reason = t.stop_reason;
    t.seconds = deadline.elapsed();
    t.config = {{"topology", "centralized"}, {"case", inst.case_tag}};
    return t;
  }
  throw std::invalid_argument("unknown algorithm '" + req.algorithm + "'");
}

/// Runs the full matrix; failed runs are recorded per row.
inline BenchReport run_benchmark(const BenchConfig& cfg) {
  BenchReport report;
  report.config = cfg.to_json();
  report.config_hash = hex64(fnv1a(report.config.dump()));
  if (!cfg.output_dir.empty()) std::filesystem::create_directories(cfg.output_dir);

  for (int cs : cfg.cases) {
    // references per seed (independent of topology)
    std::vector<Reference> refs;
    std::vector<ProblemInstance> base;
    for (auto seed : cfg.seeds) {
      base.push_back(generate_instance(cs, Topology::star, cfg.nodes, cfg.ng, cfg.groups, seed));
      ReferenceOptions ro;
      ro.tolerance = cfg.ref_tol;
      refs.push_back(reference_solve(base.back(), ro));
    }
    for (const auto& topo : cfg.topologies) {
      for (const auto& alg : cfg.algorithms) {
        std::vector<double> penalties{std::numeric_limits<double>::quiet_NaN()};
        if (alg == "admm" || alg == "sadmm") penalties = cfg.admm_penalties;
        for (double pen : penalties) {
          BenchRow row;
          row.algorithm = alg;
          row.topology = alg == "apg" ? "centralized" : topo;
          row.case_tag = cs;
          row.penalty = pen;
          double s_rel = 0, s_cv = 0, s_wall = 0, s_it = 0, s_comm = 0;
          int counted = 0;
          std::string seeds, notes;
          for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            const auto seed = cfg.seeds[si];
            seeds += (seeds.empty() ? "" : " ") + std::to_string(seed);
            ++row.runs;
            if (refs[si].flagged) {
              ++row.failures;
              notes += "seed " + std::to_string(seed) + ": reference flagged; ";
              continue;
            }
            if (alg == "apg" && cs == 2) {
              ++row.skipped;
              continue;
            }
            ProblemInstance inst = base[si];
            inst.graph = build_topology(parse_topology(topo), cfg.nodes);
            inst.topology = topo;
            SolveRequest req;
            req.algorithm = alg;
            req.c = std::isnan(pen) ? cfg.c : pen;
            req.eps_opt = cfg.eps_opt;
            req.eps_feas = cfg.eps_feas;
            req.budget_secs = cfg.budget_secs;
            req.max_outer = cfg.max_outer;
            req.max_iters = cfg.admm_max_iters;
            req.oracle = cfg.oracle;
            req.p = cfg.p;
            req.seed = seed;
            try {
              RunTrace t = run_algorithm(inst, req, refs[si].F_star);
              if (t.converged) ++row.converged;
              if (!t.rows.empty()) {
                s_rel += t.rows.back().rel_subopt;
                s_cv += t.rows.back().CV;
                s_it += static_cast<double>(t.rows.back().k);
                s_comm += static_cast<double>(t.rows.back().comm_per_node_max);
              }
              s_wall += t.seconds;
              ++counted;
              if (!cfg.output_dir.empty()) {
                std::string stem = cfg.output_dir + "/" + alg + "_" + row.topology + "_case" + std::to_string(cs) +
                                   (std::isnan(pen) ? "" : "_c" + format_number(pen)) + "_seed" +
                                   std::to_string(seed);
                t.save_csv(stem + ".csv");
                t.save_summary(stem + ".json");
              }
              if (t.stop_reason == "timeout") notes += "seed " + std::to_string(seed) + ": budget exhausted; ";
            } catch (const std::exception& e) {
              ++row.failures;
              notes += "seed " + std::to_string(seed) + ": " + e.what() + "; ";
            }
          }
          if (counted > 0) {
            row.rel_subopt = s_rel / counted;
            row.cv = s_cv / counted;
            row.wall = s_wall / counted;
            row.iterations = s_it / counted;
            row.comm = s_comm / counted;
          }
          for (auto& ch : notes)
            if (ch == ',') ch = ';';
          row.seeds = seeds;
          row.note = notes;
          report.rows.push_back(std::move(row));
        }
      }
    }
  }
  return report;
}

}  // namespace dfal
