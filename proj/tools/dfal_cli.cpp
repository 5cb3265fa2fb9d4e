// Command-line front end: gen, ref, solve, bench.

#include "dfal/bench.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

namespace {

struct InstanceArgs {
  std::string instance;
  int case_tag = 1;
  std::string topology = "star";
  std::string edge_file;
  int nodes = 5;
  long ng = 10;
  long groups = 10;
  std::uint64_t seed = 1;

  void attach(CLI::App* app) {
    app->add_option("--instance", instance, "instance JSON (explicit or generated form)");
    app->add_option("--case", case_tag, "1: shared partition, 2: per-node partitions")
        ->check(CLI::IsMember({1, 2}));
    app->add_option("--topology", topology, "star, clique, path or file")
        ->check(CLI::IsMember({"star", "clique", "path", "file"}));
    app->add_option("--edge-file", edge_file, "edge list for --topology file");
    app->add_option("--nodes", nodes, "number of nodes N")->check(CLI::PositiveNumber);
    app->add_option("--ng", ng, "group size")->check(CLI::PositiveNumber);
    app->add_option("--groups", groups, "number of groups K")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "instance seed");
  }

  dfal::ProblemInstance build() const {
    if (!instance.empty()) return dfal::load_instance(instance);
    if (topology == "file") {
      if (edge_file.empty()) throw std::invalid_argument("--topology file needs --edge-file");
      return dfal::generate_instance(case_tag, dfal::load_edge_file(edge_file), "file", ng, groups, seed);
    }
    return dfal::generate_instance(case_tag, dfal::parse_topology(topology), nodes, ng, groups, seed);
  }
};

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string strip_ext(const std::string& path) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) return path.substr(0, dot);
  return path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized composite optimization: instance generation, reference solves, runs, benchmarks"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "write an instance file");
  InstanceArgs gen_args;
  gen_args.attach(gen);
  bool gen_explicit = false;
  std::string gen_out;
  gen->add_flag("--explicit", gen_explicit, "write matrices instead of generation parameters");
  gen->add_option("--out", gen_out, "output path (default stdout)");

  // ref
  auto* ref = app.add_subcommand("ref", "compute and write the reference optimum");
  InstanceArgs ref_args;
  ref_args.attach(ref);
  double ref_tol = 1e-9;
  std::string ref_out;
  ref->add_option("--tol", ref_tol, "residual / consensus tolerance (>= 1e-9)");
  ref->add_option("--out", ref_out, "output path (default stdout)");

  // solve
  auto* solve = app.add_subcommand("solve", "run one algorithm and write its trace");
  InstanceArgs solve_args;
  solve_args.attach(solve);
  dfal::SolveRequest req;
  std::string solve_out = "trace.csv";
  double f_star = std::numeric_limits<double>::quiet_NaN();
  bool no_ref = false;
  solve->add_option("--alg", req.algorithm, "algorithm")
      ->check(CLI::IsMember({"dfal", "afal", "admm", "sadmm", "apg"}));
  solve->add_option("--c", req.c, "DFAL shrink factor, or ADMM/SADMM penalty");
  solve->add_option("--lambda1", req.lambda1, "initial penalty parameter (DFAL)");
  solve->add_option("--bx", req.bx, "iterate bound B_x (DFAL)");
  solve->add_option("--eps-opt", req.eps_opt, "relative suboptimality target");
  solve->add_option("--eps-feas", req.eps_feas, "consensus violation target");
  solve->add_option("--budget-secs", req.budget_secs, "wall-clock budget");
  solve->add_option("--max-outer", req.max_outer, "outer iteration cap (DFAL)");
  solve->add_option("--max-iters", req.max_iters, "iteration cap (ADMM, SADMM, APG)");
  solve->add_option("--oracle", req.oracle, "async inner oracle")->check(CLI::IsMember({"rbcd", "arbcd"}));
  solve->add_option("--p", req.p, "async failure probability");
  solve->add_option("--run-seed", req.seed, "algorithm seed (async clocks)");
  solve->add_option("--f-star", f_star, "reference optimum; computed if omitted");
  solve->add_flag("--no-ref", no_ref, "skip the reference solve (algorithm mode)");
  solve->add_option("--out", solve_out, "trace CSV path; the summary goes next to it as .json");

  // bench
  auto* bench = app.add_subcommand("bench", "run a benchmark matrix");
  std::string bench_config, bench_out;
  bench->add_option("--config", bench_config, "benchmark config JSON")->required();
  bench->add_option("--out", bench_out, "report CSV path (default stdout); a .json report is written beside it");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto inst = gen_args.build();
      write_json(gen_out, gen_explicit ? dfal::instance_to_json(inst) : dfal::generated_instance_json(inst));
    } else if (*ref) {
      const auto inst = ref_args.build();
      dfal::ReferenceOptions ro;
      ro.tolerance = ref_tol;
      const auto r = dfal::reference_solve(inst, ro);
      write_json(ref_out, r.to_json());
      if (r.flagged) {
        std::cerr << "warning: reference did not reach the requested tolerance\n";
        return 3;
      }
    } else if (*solve) {
      const auto inst = solve_args.build();
      if (!no_ref && std::isnan(f_star)) {
        const auto r = dfal::reference_solve(inst);
        if (r.flagged) std::cerr << "warning: reference flagged (" << r.method << ")\n";
        f_star = r.F_star;
      }
      auto trace = dfal::run_algorithm(inst, req, f_star);
      trace.save_csv(solve_out);
      trace.save_summary(strip_ext(solve_out) + ".json");
      std::cerr << trace.algorithm << ": " << trace.stop_reason << " after " << trace.rows.size() << " rows, "
                << trace.seconds << " s\n";
      return trace.converged || no_ref ? 0 : 2;
    } else if (*bench) {
      std::ifstream in(bench_config);
      if (!in) throw std::invalid_argument("cannot open config " + bench_config);
      nlohmann::json j;
      in >> j;
      const auto cfg = dfal::BenchConfig::from_json(j);
      const auto report = dfal::run_benchmark(cfg);
      if (bench_out.empty()) {
        std::cout << report.csv();
      } else {
        std::ofstream out(bench_out);
        if (!out) throw std::runtime_error("cannot write " + bench_out);
        out << report.csv();
        write_json(strip_ext(bench_out) + ".json", report.to_json());
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
