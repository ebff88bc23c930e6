#include "sus/graph_stoch.hpp"

#include <cmath>

#include "sus/error.hpp"

namespace sus::graph {

NodeId DagGraph::add_input(std::string name) {
  Node node;
  node.input = true;
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  inputs_.push_back(nodes_.size() - 1);
  return nodes_.size() - 1;
}

NodeId DagGraph::add_node(std::vector<NodeId> parents, NodeFn fn, NodeGradFn grad,
                          std::string name) {
  require(!parents.empty(), ErrorKind::kValidation, "non-input node needs at least one parent");
  require(static_cast<bool>(fn) && static_cast<bool>(grad), ErrorKind::kValidation,
          "node function and gradient must be set");
  const NodeId id = nodes_.size();
  Node node;
  for (std::size_t slot = 0; slot < parents.size(); ++slot) {
    require(parents[slot] < id, ErrorKind::kLookup,
            "parent " + std::to_string(parents[slot]) + " does not exist yet");
    node.in_edges.push_back(edges_.size());
    edges_.push_back(Edge{parents[slot], id, slot});
  }
  node.parents = std::move(parents);
  node.fn = std::move(fn);
  node.grad = std::move(grad);
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  return id;
}

void DagGraph::check(NodeId id) const {
  require(id < nodes_.size(), ErrorKind::kLookup, "unknown node " + std::to_string(id));
}

const std::vector<NodeId>& DagGraph::parents(NodeId id) const {
  check(id);
  return nodes_[id].parents;
}

const std::string& DagGraph::name(NodeId id) const {
  check(id);
  return nodes_[id].name;
}

bool DagGraph::is_input(NodeId id) const {
  check(id);
  return nodes_[id].input;
}

std::vector<double> DagGraph::forward(std::span<const double> inputs) const {
  require(inputs.size() == inputs_.size(), ErrorKind::kArity,
          "graph has " + std::to_string(inputs_.size()) + " inputs, got " +
              std::to_string(inputs.size()));
  std::vector<double> values(nodes_.size(), 0.0);
  std::size_t next_input = 0;
  std::vector<double> args;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.input) {
      values[id] = inputs[next_input++];
      continue;
    }
    args.clear();
    for (NodeId p : node.parents) args.push_back(values[p]);
    values[id] = node.fn(args);
  }
  return values;
}

std::vector<double> DagGraph::edge_partials(std::span<const double> values) const {
  require(values.size() == nodes_.size(), ErrorKind::kDimension, "value vector size mismatch");
  std::vector<double> partials(edges_.size(), 0.0);
  std::vector<double> args;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.input) continue;
    args.clear();
    for (NodeId p : node.parents) args.push_back(values[p]);
    const std::vector<double> g = node.grad(args);
    require(g.size() == node.parents.size(), ErrorKind::kValidation,
            "gradient arity does not match parent count at node " + std::to_string(id));
    for (std::size_t slot = 0; slot < g.size(); ++slot) partials[node.in_edges[slot]] = g[slot];
  }
  return partials;
}

EdgeMaskPolicy EdgeMaskPolicy::independent(std::size_t edge_count, double q) {
  return independent(std::vector<double>(edge_count, q));
}

EdgeMaskPolicy EdgeMaskPolicy::independent(std::vector<double> q_per_edge) {
  EdgeMaskPolicy p;
  p.variable_of_edge.resize(q_per_edge.size());
  for (std::size_t e = 0; e < q_per_edge.size(); ++e) p.variable_of_edge[e] = e;
  p.q = std::move(q_per_edge);
  return p;
}

void EdgeMaskPolicy::validate(std::size_t edge_count) const {
  require(variable_of_edge.size() == edge_count, ErrorKind::kPolicy,
          "policy covers " + std::to_string(variable_of_edge.size()) + " edges, graph has " +
              std::to_string(edge_count));
  for (std::size_t v = 0; v < q.size(); ++v)
    require(q[v] > 0.0 && q[v] <= 1.0, ErrorKind::kPolicy,
            "acceptance probability of variable " + std::to_string(v) + " outside (0, 1]");
  for (std::size_t var : variable_of_edge)
    require(var < q.size(), ErrorKind::kPolicy, "edge refers to unknown mask variable");
}

double weighted_path_sum(const DagGraph& g, NodeId source, NodeId sink,
                         std::span<const double> edge_partials,
                         std::span<const double> edge_weights) {
  require(source < g.node_count() && sink < g.node_count(), ErrorKind::kLookup,
          "unknown source or sink node");
  const auto& edges = g.edges();
  require(edge_partials.size() == edges.size() && edge_weights.size() == edges.size(),
          ErrorKind::kDimension, "per-edge vector size mismatch");
  // Forward accumulation in topological order: acc[i] is the sum over
  // source->i paths of the weighted partial products. Edges were appended in
  // order of their head node, so one pass suffices.
  std::vector<double> acc(g.node_count(), 0.0);
  acc[source] = 1.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& edge = edges[e];
    if (edge.to <= source) continue;
    acc[edge.to] += acc[edge.from] * edge_partials[e] * edge_weights[e];
  }
  return acc[sink];
}

double path_sum_derivative(const DagGraph& g, NodeId source, NodeId sink,
                           std::span<const double> inputs) {
  require(source < g.node_count() && sink < g.node_count(), ErrorKind::kLookup,
          "unknown source or sink node");
  const auto values = g.forward(inputs);
  const auto partials = g.edge_partials(values);
  const std::vector<double> ones(partials.size(), 1.0);
  return weighted_path_sum(g, source, sink, partials, ones);
}

double stochastic_backprop(const DagGraph& g, const EdgeMaskPolicy& policy, NodeId source,
                           NodeId sink, std::span<const double> inputs, const RngStream& rng) {
  policy.validate(g.edges().size());
  const auto values = g.forward(inputs);
  const auto partials = g.edge_partials(values);
  std::vector<double> mask(policy.variable_count());
  for (std::size_t v = 0; v < mask.size(); ++v)
    mask[v] = rng.uniform_at(v) < policy.q[v] ? 1.0 / policy.q[v] : 0.0;
  std::vector<double> weights(partials.size());
  for (std::size_t e = 0; e < weights.size(); ++e) weights[e] = mask[policy.variable_of_edge[e]];
  return weighted_path_sum(g, source, sink, partials, weights);
}

double exact_mask_expectation(const DagGraph& g, const EdgeMaskPolicy& policy, NodeId source,
                              NodeId sink, std::span<const double> inputs) {
  policy.validate(g.edges().size());
  require(g.edges().size() <= kMaxEnumeratedEdges, ErrorKind::kCapacity,
          "enumeration is bounded to " + std::to_string(kMaxEnumeratedEdges) + " edges");
  const auto values = g.forward(inputs);
  const auto partials = g.edge_partials(values);

  // Variables with q = 1 are always on and contribute a single configuration.
  std::vector<std::size_t> random_vars;
  for (std::size_t v = 0; v < policy.variable_count(); ++v)
    if (policy.q[v] < 1.0) random_vars.push_back(v);

  std::vector<double> mask(policy.variable_count(), 1.0);
  std::vector<double> weights(partials.size());
  double expectation = 0.0;
  const std::size_t configs = std::size_t{1} << random_vars.size();
  for (std::size_t bits = 0; bits < configs; ++bits) {
    double prob = 1.0;
    for (std::size_t r = 0; r < random_vars.size(); ++r) {
      const std::size_t v = random_vars[r];
      const bool on = (bits >> r) & 1U;
      prob *= on ? policy.q[v] : 1.0 - policy.q[v];
      mask[v] = on ? 1.0 / policy.q[v] : 0.0;
    }
    for (std::size_t e = 0; e < weights.size(); ++e) weights[e] = mask[policy.variable_of_edge[e]];
    expectation += prob * weighted_path_sum(g, source, sink, partials, weights);
  }
  return expectation;
}

GraphCase chain_case() {
  GraphCase c{"chain", {}, 0, 0, {0.7}};
  c.source = c.graph.add_input("x");
  const NodeId g = c.graph.add_node(
      {c.source}, [](std::span<const double> p) { return p[0] * p[0] + 1.0; },
      [](std::span<const double> p) { return std::vector<double>{2.0 * p[0]}; }, "g");
  c.sink = c.graph.add_node(
      {g}, [](std::span<const double> p) { return std::sin(p[0]); },
      [](std::span<const double> p) { return std::vector<double>{std::cos(p[0])}; }, "h");
  return c;
}

GraphCase diamond_case() {
  GraphCase c{"diamond", {}, 0, 0, {1.0}};
  c.source = c.graph.add_input("x");
  const NodeId a = c.graph.add_node(
      {c.source}, [](std::span<const double> p) { return 2.0 * p[0]; },
      [](std::span<const double>) { return std::vector<double>{2.0}; }, "a");
  const NodeId b = c.graph.add_node(
      {c.source}, [](std::span<const double> p) { return 3.0 * p[0]; },
      [](std::span<const double>) { return std::vector<double>{3.0}; }, "b");
  c.sink = c.graph.add_node(
      {a, b}, [](std::span<const double> p) { return p[0] * p[1]; },
      [](std::span<const double> p) { return std::vector<double>{p[1], p[0]}; }, "y");
  return c;
}

GraphCase random_dag_case(std::size_t nodes, std::uint64_t seed) {
  require(nodes >= 2, ErrorKind::kValidation, "random DAG needs at least 2 nodes");
  GraphCase c{"random-dag", {}, 0, 0, {}};
  RngCursor rng(RngStream(seed, stream_id_of(0x646167, nodes)));
  c.source = c.graph.add_input("x0");
  c.inputs.push_back(rng.uniform() - 0.5);
  for (std::size_t i = 1; i < nodes; ++i) {
    std::vector<NodeId> parents;
    for (std::size_t j = 0; j + 1 < i; ++j)
      if (rng.uniform() < 0.5) parents.push_back(j);
    parents.push_back(i - 1);
    std::vector<double> a(parents.size());
    for (double& v : a) v = 2.0 * rng.uniform() - 1.0;
    const double b = 2.0 * rng.uniform() - 1.0;
    auto fn = [a, b](std::span<const double> p) {
      double lin = 0.0, prod = 1.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        lin += a[k] * p[k];
        prod *= p[k];
      }
      return lin + b * prod;
    };
    auto grad = [a, b](std::span<const double> p) {
      std::vector<double> g(p.size());
      for (std::size_t k = 0; k < p.size(); ++k) {
        double prod = 1.0;
        for (std::size_t l = 0; l < p.size(); ++l)
          if (l != k) prod *= p[l];
        g[k] = a[k] + b * prod;
      }
      return g;
    };
    c.sink = c.graph.add_node(std::move(parents), fn, grad, "x" + std::to_string(i));
  }
  return c;
}

EdgeMaskPolicy shared_variable_policy(std::size_t edge_count, double q) {
  return EdgeMaskPolicy{{q}, std::vector<std::size_t>(edge_count, 0)};
}

}  // namespace sus::graph
