#pragma once
/*
 * Deterministic message-passing simulator.
 *
 * Each channel holds the latest block every node has published. A node may
 * read its own published block and those of its graph neighbors, nothing
 * else (NodeView enforces this). Publishing a block costs one unit (one
 * n-vector over one directed edge) per neighbor.
 */

#include "dfal/common.hpp"
#include "dfal/graph.hpp"
#include "dfal/random.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dfal {

struct NodeCounters {
  long vectors_sent = 0;
  long vectors_received = 0;
  long prox_evals = 0;
  long grad_evals = 0;
  long control_sent = 0;  // zero-length control messages

  friend bool operator==(const NodeCounters&, const NodeCounters&) = default;
};

struct CommLedger {
  std::vector<NodeCounters> nodes;
  long rounds = 0;
  long events = 0;

  long total_sent() const {
    long s = 0;
    for (const auto& c : nodes) s += c.vectors_sent;
    return s;
  }
  long total_received() const {
    long s = 0;
    for (const auto& c : nodes) s += c.vectors_received;
    return s;
  }
  long max_sent() const {
    long s = 0;
    for (const auto& c : nodes) s = std::max(s, c.vectors_sent);
    return s;
  }
  long max_prox() const {
    long s = 0;
    for (const auto& c : nodes) s = std::max(s, c.prox_evals);
    return s;
  }
  long max_grad() const {
    long s = 0;
    for (const auto& c : nodes) s = std::max(s, c.grad_evals);
    return s;
  }
};

class Simulator;

/// What node `self` can see on one channel.
class NodeView {
 public:
  int self() const { return self_; }

  /// Node's own published block.
  Eigen::Ref<const Vector> own() const;

  /// Block last received from neighbor j.
  Eigen::Ref<const Vector> at(int j) const;

  /// Stamp of the block last received from j.
  long stamp(int j) const;

 private:
  friend class Simulator;
  NodeView(const Simulator* sim, int channel, int self) : sim_(sim), channel_(channel), self_(self) {}
  void check(int j) const;

  const Simulator* sim_;
  int channel_;
  int self_;
};

class Simulator {
 public:
  Simulator(const Graph& graph, Index dim, int channels = 1)
      : graph_(&graph), dim_(dim) {
    require(dim >= 1, "simulator block dimension must be positive");
    require(channels >= 1, "simulator needs at least one channel");
    const int n = graph.num_nodes();
    blocks_.assign(channels, BlockMatrix::Zero(dim, n));
    stamps_.assign(channels, std::vector<long>(n, -1));
    ledger_.nodes.assign(n, {});
  }

  const Graph& graph() const { return *graph_; }
  Index dim() const { return dim_; }
  int num_channels() const { return static_cast<int>(blocks_.size()); }
  long clock() const { return clock_; }

  NodeView view(int channel, int node) const {
    check_channel(channel);
    check_node(node);
    return NodeView(this, channel, node);
  }

  /// Node broadcasts a block to all neighbors.
  void publish(int channel, int node, const Eigen::Ref<const Vector>& block) {
    check_channel(channel);
    check_node(node);
    if (block.size() != dim_) {
      throw std::invalid_argument("node " + std::to_string(node + 1) + " produced a block of size " +
                                  std::to_string(block.size()) + ", expected " + std::to_string(dim_));
    }
    blocks_[channel].col(node) = block;
    stamps_[channel][node] = clock_;
    charge_broadcast(node);
  }

  /// Publishes only if the block differs from what neighbors already hold.
  bool publish_if_changed(int channel, int node, const Eigen::Ref<const Vector>& block) {
    check_channel(channel);
    check_node(node);
    if (stamps_[channel][node] >= 0 && block.size() == dim_ && blocks_[channel].col(node) == block) return false;
    publish(channel, node, block);
    return true;
  }

  /// Initial state known to everyone (no messages charged).
  void seed_channel(int channel, const BlockMatrix& blocks) {
    check_channel(channel);
    require(blocks.rows() == dim_ && blocks.cols() == graph_->num_nodes(), "seed_channel shape mismatch");
    blocks_[channel] = blocks;
    std::fill(stamps_[channel].begin(), stamps_[channel].end(), clock_);
  }

  /// Extra traffic charged without moving data, in units per neighbor.
  void charge_broadcast(int node, long units_per_neighbor = 1) {
    const long d = graph_->degree(node);
    ledger_.nodes[node].vectors_sent += units_per_neighbor * d;
    for (int j : graph_->neighbors(node)) ledger_.nodes[j].vectors_received += units_per_neighbor;
  }

  void charge_grad(int node, long count = 1) { ledger_.nodes[node].grad_evals += count; }
  void charge_prox(int node, long count = 1) { ledger_.nodes[node].prox_evals += count; }

  /// Zero-length control message from node to each neighbor.
  void control(int node) { ledger_.nodes[node].control_sent += graph_->degree(node); }

  /// All nodes compute from round-start values, then publish in node order.
  template <class Producer>
  void sync_round(int channel, Producer&& producer) {
    check_channel(channel);
    const int n = graph_->num_nodes();
    BlockMatrix next(dim_, n);
    for (int i = 0; i < n; ++i) {
      Vector b = producer(i, view(channel, i));
      if (b.size() != dim_) {
        throw std::invalid_argument("node " + std::to_string(i + 1) + " produced a block of size " +
                                    std::to_string(b.size()) + ", expected " + std::to_string(dim_));
      }
      next.col(i) = b;
    }
    for (int i = 0; i < n; ++i) publish(channel, i, next.col(i));
    end_round();
  }

  void end_round() {
    ++ledger_.rounds;
    ++clock_;
  }
  void end_event() {
    ++ledger_.events;
    ++clock_;
  }

  CommLedger ledger_snapshot() const { return ledger_; }
  const CommLedger& ledger() const { return ledger_; }

  /// Published blocks of a channel, for diagnostics outside the protocol.
  const BlockMatrix& published(int channel) const {
    check_channel(channel);
    return blocks_[channel];
  }

 private:
  friend class NodeView;

  void check_channel(int c) const {
    if (c < 0 || c >= num_channels()) throw std::out_of_range("no channel " + std::to_string(c));
  }
  void check_node(int i) const {
    if (i < 0 || i >= graph_->num_nodes()) throw std::out_of_range("no node " + std::to_string(i + 1));
  }

  const Graph* graph_;
  Index dim_;
  std::vector<BlockMatrix> blocks_;
  std::vector<std::vector<long>> stamps_;
  CommLedger ledger_;
  long clock_ = 0;
};

inline void NodeView::check(int j) const {
  if (!sim_->graph().adjacent(self_, j)) {
    throw ProtocolError("node " + std::to_string(self_ + 1) + " read the block of node " +
                        std::to_string(j + 1) + ", which is not a neighbor");
  }
  if (sim_->stamps_[channel_][j] < 0) {
    throw ProtocolError("node " + std::to_string(self_ + 1) + " has no block from neighbor " +
                        std::to_string(j + 1));
  }
}

inline Eigen::Ref<const Vector> NodeView::own() const {
  return sim_->blocks_[channel_].col(self_);
}

inline Eigen::Ref<const Vector> NodeView::at(int j) const {
  check(j);
  return sim_->blocks_[channel_].col(j);
}

inline long NodeView::stamp(int j) const {
  check(j);
  return sim_->stamps_[channel_][j];
}

/// Equal-rate exponential clocks: the next node to wake is uniform over the
/// N nodes and the gap to the next event is Exp(N) in virtual time.
class AsyncClock {
 public:
  AsyncClock(std::uint64_t seed, int num_nodes) : rng_(seed), n_(num_nodes) {
    require(num_nodes >= 1, "async clock needs N >= 1");
  }

  Index operator()() {
    time_ += rng_.exponential(static_cast<double>(n_));
    return static_cast<Index>(rng_.index(static_cast<std::size_t>(n_)));
  }

  double time() const { return time_; }

 private:
  Rng rng_;
  int n_;
  double time_ = 0.0;
};

/// Seeded sequence of activated node ids (0-based).
inline std::vector<int> async_schedule(std::uint64_t seed, long num_events, int num_nodes) {
  AsyncClock clock(seed, num_nodes);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, num_events)));
  for (long e = 0; e < num_events; ++e) out.push_back(static_cast<int>(clock()));
  return out;
}

}  // namespace dfal
