#pragma once
/*
 * A decentralized problem instance: graph, per-node data, generator
 * metadata. JSON form: either generation parameters (regenerated on load) or
 * explicit per-node matrices.
 */

#include "dfal/common.hpp"
#include "dfal/funcs.hpp"
#include "dfal/graph.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace dfal {

struct ProblemInstance {
  int case_tag = 1;  // 1: shared partition, 2: per-node partitions
  std::string topology = "star";
  Graph graph;
  int num_nodes = 0;
  Index group_size = 0;  // n_g
  Index num_groups = 0;  // K
  Index dim = 0;         // n = K n_g
  Index rows_per_node = 0;
  double delta = 1.0;
  std::uint64_t seed = 0;
  Vector x_gen;
  std::vector<NodeProblem> nodes;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Index cols) {
  if (!j.is_array()) throw std::invalid_argument("matrix must be an array of rows");
  Matrix m(static_cast<Index>(j.size()), cols);
  for (Index r = 0; r < m.rows(); ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw std::invalid_argument("matrix row " + std::to_string(r + 1) + " must have " +
                                  std::to_string(cols) + " entries");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("vector must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

/// Explicit form: every matrix written out, so any reader reproduces the data.
inline nlohmann::json instance_to_json(const ProblemInstance& inst) {
  nlohmann::json j;
  j["format"] = "explicit";
  j["case"] = inst.case_tag;
  j["topology"] = inst.topology;
  j["nodes"] = inst.num_nodes;
  j["ng"] = inst.group_size;
  j["groups"] = inst.num_groups;
  j["dim"] = inst.dim;
  j["delta"] = inst.delta;
  j["seed"] = inst.seed;
  auto edges = nlohmann::json::array();
  for (const auto& e : inst.graph.edges()) edges.push_back({e.u + 1, e.v + 1});
  j["edges"] = edges;
  j["x_gen"] = std::vector<double>(inst.x_gen.data(), inst.x_gen.data() + inst.x_gen.size());
  auto nodes = nlohmann::json::array();
  for (const auto& p : inst.nodes) {
    nlohmann::json nj;
    nj["beta1"] = p.reg.l1;
    nj["beta2"] = p.reg.group;
    nj["partition"] = p.reg.partition.to_json();
    if (const auto* h = std::get_if<HuberLoss>(&p.loss)) {
      nj["loss"] = "huber";
      nj["delta"] = h->delta;
    } else {
      nj["loss"] = "quadratic";
    }
    nj["A"] = detail::matrix_to_json(loss_matrix(p.loss));
    const auto& b = loss_offsets(p.loss);
    nj["b"] = std::vector<double>(b.data(), b.data() + b.size());
    nodes.push_back(std::move(nj));
  }
  j["node_data"] = std::move(nodes);
  return j;
}

inline ProblemInstance instance_from_explicit_json(const nlohmann::json& j) {
  ProblemInstance inst;
  inst.case_tag = j.value("case", 1);
  inst.topology = j.value("topology", std::string("file"));
  inst.num_nodes = j.at("nodes").get<int>();
  inst.dim = j.at("dim").get<Index>();
  inst.group_size = j.value("ng", Index{0});
  inst.num_groups = j.value("groups", Index{0});
  inst.delta = j.value("delta", 1.0);
  inst.seed = j.value("seed", std::uint64_t{0});
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<int>() - 1, e.at(1).get<int>() - 1});
  inst.graph = Graph::from_edges(inst.num_nodes, std::move(edges));
  if (j.contains("x_gen")) inst.x_gen = detail::vector_from_json(j["x_gen"]);
  const auto& nd = j.at("node_data");
  if (static_cast<int>(nd.size()) != inst.num_nodes) {
    throw std::invalid_argument("instance lists " + std::to_string(nd.size()) + " node records for " +
                                std::to_string(inst.num_nodes) + " nodes");
  }
  for (const auto& nj : nd) {
    NodeProblem p;
    p.reg.l1 = nj.at("beta1").get<double>();
    p.reg.group = nj.at("beta2").get<double>();
    p.reg.partition = nj.contains("partition") ? GroupPartition::from_json(nj["partition"], inst.dim)
                                               : GroupPartition::singletons(inst.dim);
    Matrix A = detail::matrix_from_json(nj.at("A"), inst.dim);
    Vector b = detail::vector_from_json(nj.at("b"));
    if (b.size() != A.rows()) throw std::invalid_argument("node data: A and b row counts differ");
    const std::string kind = nj.value("loss", std::string("huber"));
    if (kind == "huber") {
      p.loss = HuberLoss{std::move(A), std::move(b), nj.value("delta", inst.delta)};
    } else if (kind == "quadratic") {
      p.loss = QuadraticLoss{std::move(A), std::move(b)};
    } else {
      throw std::invalid_argument("unknown loss '" + kind + "'");
    }
    inst.nodes.push_back(std::move(p));
  }
  if (!inst.nodes.empty()) inst.rows_per_node = loss_matrix(inst.nodes.front().loss).rows();
  return inst;
}

}  // namespace dfal
