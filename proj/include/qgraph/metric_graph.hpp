#pragma once

// Compact metric graphs with delta-type vertex conditions.
//
// A vertex carries either a delta condition with coefficient alpha
// (continuity plus sum of outgoing derivatives = alpha * f(v)) or a Dirichlet
// condition, which is only admitted at vertices of degree one. Multi-edges
// and looping edges are allowed. Values are immutable once constructed; every
// surgery operation returns a new graph.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qgraph/error.hpp"

namespace qgraph {

class VertexCondition {
 public:
  enum class Kind : std::uint8_t { Delta, Dirichlet };

  static VertexCondition nk() { return VertexCondition(Kind::Delta, 0.0); }
  static VertexCondition delta(double alpha) { return VertexCondition(Kind::Delta, alpha); }
  static VertexCondition dirichlet() {
    return VertexCondition(Kind::Dirichlet, std::numeric_limits<double>::infinity());
  }
  // alpha = +inf is read as Dirichlet.
  static VertexCondition from_alpha(double alpha) {
    return std::isinf(alpha) && alpha > 0 ? dirichlet() : delta(alpha);
  }

  Kind kind() const noexcept { return kind_; }
  bool is_dirichlet() const noexcept { return kind_ == Kind::Dirichlet; }
  bool is_delta() const noexcept { return kind_ == Kind::Delta; }
  bool is_nk() const noexcept { return kind_ == Kind::Delta && alpha_ == 0.0; }
  bool is_robin() const noexcept { return kind_ == Kind::Delta && alpha_ != 0.0; }
  // +inf for Dirichlet.
  double alpha() const noexcept { return alpha_; }

  friend bool operator==(const VertexCondition&, const VertexCondition&) = default;

 private:
  VertexCondition(Kind kind, double alpha) : kind_(kind), alpha_(alpha) {}

  Kind kind_;
  double alpha_;
};

struct Vertex {
  std::string id;
  VertexCondition condition = VertexCondition::nk();
};

// Edge coordinate x runs from tail (x = 0) to head (x = length).
struct Edge {
  std::string id;
  std::size_t tail = 0;
  std::size_t head = 0;
  double length = 1.0;

  bool is_loop() const noexcept { return tail == head; }
};

enum class EndSide : std::uint8_t { Tail, Head };

struct EdgeEnd {
  std::size_t edge = 0;
  EndSide side = EndSide::Tail;

  friend auto operator<=>(const EdgeEnd&, const EdgeEnd&) = default;
};

class MetricGraph {
 public:
  enum class Connectivity { Require, Allow };

  MetricGraph(std::vector<Vertex> vertices, std::vector<Edge> edges,
              Connectivity connectivity = Connectivity::Require)
      : vertices_(std::move(vertices)), edges_(std::move(edges)) {
    validate(connectivity);
  }

  const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Vertex& vertex(std::size_t v) const { return vertices_.at(v); }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }
  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  std::optional<std::size_t> find_vertex(std::string_view id) const {
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      if (vertices_[v].id == id) return v;
    return std::nullopt;
  }
  std::optional<std::size_t> find_edge(std::string_view id) const {
    for (std::size_t e = 0; e < edges_.size(); ++e)
      if (edges_[e].id == id) return e;
    return std::nullopt;
  }
  std::size_t vertex_index(std::string_view id) const {
    if (auto v = find_vertex(id)) return *v;
    throw Error(Errc::UnknownId, "no vertex '" + std::string(id) + "'");
  }
  std::size_t edge_index(std::string_view id) const {
    if (auto e = find_edge(id)) return *e;
    throw Error(Errc::UnknownId, "no edge '" + std::string(id) + "'");
  }

  // Edge-ends incident to v; a looping edge contributes both of its ends.
  const std::vector<EdgeEnd>& ends_at(std::size_t v) const { return incidence_.at(v); }
  std::size_t degree(std::size_t v) const { return incidence_.at(v).size(); }

  std::size_t end_vertex(EdgeEnd end) const {
    const Edge& e = edges_.at(end.edge);
    return end.side == EndSide::Tail ? e.tail : e.head;
  }
  EdgeEnd opposite(EdgeEnd end) const {
    return {end.edge, end.side == EndSide::Tail ? EndSide::Head : EndSide::Tail};
  }

  double total_length() const {
    return std::accumulate(edges_.begin(), edges_.end(), 0.0,
                           [](double acc, const Edge& e) { return acc + e.length; });
  }
  double min_length() const {
    double m = std::numeric_limits<double>::infinity();
    for (const Edge& e : edges_) m = std::min(m, e.length);
    return m;
  }
  std::vector<double> lengths() const {
    std::vector<double> out;
    out.reserve(edges_.size());
    for (const Edge& e : edges_) out.push_back(e.length);
    return out;
  }

  bool connected() const noexcept { return components_ == 1; }
  std::size_t component_count() const noexcept { return components_; }

  bool has_robin() const {
    return std::any_of(vertices_.begin(), vertices_.end(),
                       [](const Vertex& v) { return v.condition.is_robin(); });
  }
  // True when the bond scattering matrix is k-independent.
  bool nk_dirichlet_only() const { return !has_robin(); }

  std::size_t negative_alpha_count() const {
    return static_cast<std::size_t>(std::count_if(
        vertices_.begin(), vertices_.end(),
        [](const Vertex& v) { return v.condition.is_delta() && v.condition.alpha() < 0; }));
  }

 private:
  void validate(Connectivity connectivity) {
    if (edges_.empty()) throw Error(Errc::InvalidArgument, "graph has no edges");
    std::set<std::string_view> seen;
    for (const Vertex& v : vertices_)
      if (!seen.insert(v.id).second) throw Error(Errc::DuplicateId, "vertex '" + v.id + "'");
    seen.clear();
    for (const Edge& e : edges_)
      if (!seen.insert(e.id).second) throw Error(Errc::DuplicateId, "edge '" + e.id + "'");

    incidence_.assign(vertices_.size(), {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const Edge& e = edges_[i];
      if (e.tail >= vertices_.size() || e.head >= vertices_.size())
        throw Error(Errc::UnknownId, "edge '" + e.id + "' references a missing vertex");
      if (!(e.length > 0.0) || !std::isfinite(e.length))
        throw Error(Errc::NonpositiveLength, "edge '" + e.id + "'");
      incidence_[e.tail].push_back({i, EndSide::Tail});
      incidence_[e.head].push_back({i, EndSide::Head});
    }
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      if (incidence_[v].empty())
        throw Error(Errc::DisconnectedGraph, "vertex '" + vertices_[v].id + "' is isolated");
      if (vertices_[v].condition.is_dirichlet() && incidence_[v].size() != 1)
        throw Error(Errc::DirichletAtInternalVertex, "vertex '" + vertices_[v].id + "'");
    }

    components_ = count_components();
    if (connectivity == Connectivity::Require && components_ != 1)
      throw Error(Errc::DisconnectedGraph,
                  std::to_string(components_) + " connected components");
  }

  std::size_t count_components() const {
    std::vector<std::size_t> parent(vertices_.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::size_t count = vertices_.size();
    for (const Edge& e : edges_) {
      const std::size_t a = find(e.tail), b = find(e.head);
      if (a != b) {
        parent[a] = b;
        --count;
      }
    }
    return count;
  }

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeEnd>> incidence_;
  std::size_t components_ = 0;
};

// ---------------------------------------------------------------------------
// Loops

// A chain v, v_1, ..., v_n, v closing on the attachment vertex through
// degree-2 intermediates. A bare looping edge has no intermediates.
struct LoopDescriptor {
  std::size_t attachment_vertex = 0;
  std::vector<std::size_t> edge_chain;
  std::vector<std::size_t> intermediate_vertices;
  double total_length = 0.0;
  bool pure = true;

  bool contains_edge(std::size_t e) const {
    return std::find(edge_chain.begin(), edge_chain.end(), e) != edge_chain.end();
  }
};

inline std::vector<LoopDescriptor> find_loops(const MetricGraph& g) {
  std::vector<LoopDescriptor> loops;
  std::set<EdgeEnd> used;
  std::vector<bool> visited(g.vertex_count(), false);

  auto walk = [&](std::size_t start, EdgeEnd first) {
    LoopDescriptor loop;
    loop.attachment_vertex = start;
    EdgeEnd end = first;
    while (true) {
      loop.edge_chain.push_back(end.edge);
      loop.total_length += g.edge(end.edge).length;
      const EdgeEnd arrival = g.opposite(end);
      const std::size_t at = g.end_vertex(arrival);
      visited[at] = true;
      if (at == start) {
        used.insert(arrival);
        return std::optional<LoopDescriptor>(std::move(loop));
      }
      if (g.degree(at) != 2) return std::optional<LoopDescriptor>();
      loop.intermediate_vertices.push_back(at);
      const auto& ends = g.ends_at(at);
      end = ends[0] == arrival ? ends[1] : ends[0];
    }
  };

  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    if (g.degree(v) == 2) continue;
    visited[v] = true;
    for (const EdgeEnd& end : g.ends_at(v)) {
      if (used.count(end)) continue;
      used.insert(end);
      if (auto loop = walk(v, end)) {
        loop->pure = std::all_of(
            loop->intermediate_vertices.begin(), loop->intermediate_vertices.end(),
            [&](std::size_t u) { return g.vertex(u).condition.is_nk(); });
        loops.push_back(std::move(*loop));
      }
    }
  }
  // Cycle components made only of degree-2 vertices. The lowest-index vertex
  // is the attachment point and purity includes it: such a component is a
  // circle exactly when every vertex is NK.
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    if (visited[v] || g.degree(v) != 2) continue;
    visited[v] = true;
    auto loop = walk(v, g.ends_at(v)[0]);
    if (!loop) continue;
    loop->pure = g.vertex(v).condition.is_nk() &&
                 std::all_of(loop->intermediate_vertices.begin(),
                             loop->intermediate_vertices.end(),
                             [&](std::size_t u) { return g.vertex(u).condition.is_nk(); });
    loops.push_back(std::move(*loop));
  }
  return loops;
}

// ---------------------------------------------------------------------------
// Surgery

namespace detail {

inline std::string unique_vertex_id(const std::vector<Vertex>& vertices, const std::string& base) {
  auto taken = [&](const std::string& id) {
    return std::any_of(vertices.begin(), vertices.end(),
                       [&](const Vertex& v) { return v.id == id; });
  };
  if (!taken(base)) return base;
  for (int n = 2;; ++n)
    if (std::string id = base + "_" + std::to_string(n); !taken(id)) return id;
}

inline std::string unique_edge_id(const std::vector<Edge>& edges, const std::string& base) {
  auto taken = [&](const std::string& id) {
    return std::any_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.id == id; });
  };
  if (!taken(base)) return base;
  for (int n = 2;; ++n)
    if (std::string id = base + "_" + std::to_string(n); !taken(id)) return id;
}

inline constexpr auto allow = MetricGraph::Connectivity::Allow;

}  // namespace detail

// Splits `edge` at distance `offset` from its tail by a new NK vertex of
// degree 2. The new vertex is appended last; the tail piece keeps the edge id.
inline MetricGraph insert_trivial_vertex(const MetricGraph& g, std::string_view edge_id,
                                         double offset) {
  const std::size_t e = g.edge_index(edge_id);
  const Edge original = g.edge(e);
  if (!(offset > 0.0 && offset < original.length))
    throw Error(Errc::OffsetOutOfRange, "offset must lie strictly inside edge '" +
                                            original.id + "'");
  std::vector<Vertex> vertices = g.vertices();
  std::vector<Edge> edges = g.edges();
  const std::size_t w = vertices.size();
  vertices.push_back({detail::unique_vertex_id(vertices, original.id + "_t"),
                      VertexCondition::nk()});
  edges[e] = {original.id, original.tail, w, offset};
  edges.push_back({detail::unique_edge_id(edges, original.id + "_b"), w, original.head,
                   original.length - offset});
  return MetricGraph(std::move(vertices), std::move(edges), detail::allow);
}

// Removes every NK vertex of degree 2 whose two ends belong to different
// edges, concatenating those edges. Robin degree-2 vertices are kept.
inline MetricGraph suppress_trivial_vertices(const MetricGraph& g) {
  std::vector<Vertex> vertices = g.vertices();
  std::vector<Edge> edges = g.edges();
  while (true) {
    std::vector<std::vector<EdgeEnd>> ends(vertices.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      ends[edges[i].tail].push_back({i, EndSide::Tail});
      ends[edges[i].head].push_back({i, EndSide::Head});
    }
    std::optional<std::size_t> victim;
    for (std::size_t v = 0; v < vertices.size() && !victim; ++v)
      if (vertices[v].condition.is_nk() && ends[v].size() == 2 &&
          ends[v][0].edge != ends[v][1].edge)
        victim = v;
    if (!victim) break;

    const std::size_t v = *victim;
    const EdgeEnd a = ends[v][0], b = ends[v][1];
    auto far = [&](EdgeEnd end) {
      const Edge& e = edges[end.edge];
      return end.side == EndSide::Tail ? e.head : e.tail;
    };
    Edge merged{edges[a.edge].id, far(a), far(b),
                edges[a.edge].length + edges[b.edge].length};
    edges[a.edge] = merged;
    edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(b.edge));
    vertices.erase(vertices.begin() + static_cast<std::ptrdiff_t>(v));
    for (Edge& e : edges) {
      if (e.tail > v) --e.tail;
      if (e.head > v) --e.head;
    }
  }
  return MetricGraph(std::move(vertices), std::move(edges), detail::allow);
}

// Replaces v by two vertices sharing its edge-ends; the first keeps v's slot.
// The result may be disconnected, which callers read off connected().
inline MetricGraph split_vertex(const MetricGraph& g, std::string_view vertex_id,
                                const std::pair<std::vector<EdgeEnd>, std::vector<EdgeEnd>>& partition,
                                std::pair<double, double> alphas) {
  const std::size_t v = g.vertex_index(vertex_id);
  const auto& [first, second] = partition;
  std::set<EdgeEnd> expected(g.ends_at(v).begin(), g.ends_at(v).end());
  std::set<EdgeEnd> got;
  for (const auto* part : {&first, &second})
    for (const EdgeEnd& end : *part)
      if (!got.insert(end).second)
        throw Error(Errc::PartitionNotCovering, "edge-end listed twice");
  if (got != expected || first.empty() || second.empty())
    throw Error(Errc::PartitionNotCovering,
                "partition must split the edge-ends at '" + std::string(vertex_id) +
                    "' into two non-empty sets");
  const VertexCondition& original = g.vertex(v).condition;
  if (original.is_dirichlet())
    throw Error(Errc::AlphaSumMismatch, "cannot split a Dirichlet vertex");
  const double sum = alphas.first + alphas.second;
  if (std::abs(sum - original.alpha()) > 1e-12 * (1.0 + std::abs(original.alpha())))
    throw Error(Errc::AlphaSumMismatch, "alphas must add up to the original coefficient");

  std::vector<Vertex> vertices = g.vertices();
  std::vector<Edge> edges = g.edges();
  const std::string base(vertex_id);
  vertices[v] = {detail::unique_vertex_id(vertices, base + "_1"),
                 VertexCondition::delta(alphas.first)};
  const std::size_t w = vertices.size();
  vertices.push_back({detail::unique_vertex_id(vertices, base + "_2"),
                      VertexCondition::delta(alphas.second)});
  for (const EdgeEnd& end : second) {
    Edge& e = edges[end.edge];
    (end.side == EndSide::Tail ? e.tail : e.head) = w;
  }
  return MetricGraph(std::move(vertices), std::move(edges), detail::allow);
}

// Merges v2 into v1; coefficients add. v1 keeps its id and slot.
inline MetricGraph glue_vertices(const MetricGraph& g, std::string_view v1_id,
                                 std::string_view v2_id) {
  const std::size_t v1 = g.vertex_index(v1_id);
  const std::size_t v2 = g.vertex_index(v2_id);
  if (v1 == v2) throw Error(Errc::InvalidArgument, "cannot glue a vertex to itself");
  const VertexCondition& c1 = g.vertex(v1).condition;
  const VertexCondition& c2 = g.vertex(v2).condition;
  if (c1.is_dirichlet() || c2.is_dirichlet())
    throw Error(Errc::DirichletGlue, "both vertices must carry delta conditions");

  std::vector<Vertex> vertices = g.vertices();
  std::vector<Edge> edges = g.edges();
  vertices[v1].condition = VertexCondition::delta(c1.alpha() + c2.alpha());
  vertices.erase(vertices.begin() + static_cast<std::ptrdiff_t>(v2));
  const std::size_t target = v1 > v2 ? v1 - 1 : v1;
  for (Edge& e : edges) {
    for (std::size_t* end : {&e.tail, &e.head}) {
      if (*end == v2)
        *end = target;
      else if (*end > v2)
        --*end;
    }
  }
  return MetricGraph(std::move(vertices), std::move(edges), detail::allow);
}

// Adds an independent uniform shift in [-epsilon, epsilon] to every length.
inline MetricGraph perturb_lengths(const MetricGraph& g, double epsilon, std::uint64_t seed) {
  if (!(epsilon >= 0.0)) throw Error(Errc::InvalidArgument, "epsilon must be non-negative");
  if (epsilon >= g.min_length())
    throw Error(Errc::EpsilonTooLarge, "epsilon must be below the minimal edge length");
  std::vector<Edge> edges = g.edges();
  if (epsilon > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> shift(-epsilon, epsilon);
    for (Edge& e : edges) e.length += shift(rng);
  }
  return MetricGraph(g.vertices(), std::move(edges),
                     g.connected() ? MetricGraph::Connectivity::Require : detail::allow);
}

inline MetricGraph with_condition(const MetricGraph& g, std::size_t v, VertexCondition condition) {
  std::vector<Vertex> vertices = g.vertices();
  vertices.at(v).condition = condition;
  return MetricGraph(std::move(vertices), g.edges(), detail::allow);
}

inline MetricGraph with_lengths(const MetricGraph& g, const std::vector<double>& lengths) {
  if (lengths.size() != g.edge_count())
    throw Error(Errc::InvalidArgument, "length vector does not match the edge count");
  std::vector<Edge> edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) edges[e].length = lengths[e];
  return MetricGraph(g.vertices(), std::move(edges), detail::allow);
}

// A graph that reduces to a single NK vertex carrying one looping edge.
inline bool is_circle(const MetricGraph& g) {
  const MetricGraph reduced = suppress_trivial_vertices(g);
  return reduced.vertex_count() == 1 && reduced.edge_count() == 1 &&
         reduced.vertex(0).condition.is_nk();
}

// Relabeling-invariant fingerprint from sorted degree/condition/length data.
// Adequate for the small graphs we compare after surgery round trips.
inline std::string canonical_signature(const MetricGraph& g, double length_quantum = 1e-9) {
  auto vertex_label = [&](std::size_t v) {
    std::ostringstream os;
    const VertexCondition& c = g.vertex(v).condition;
    os << 'd' << g.degree(v) << (c.is_dirichlet() ? "D" : "a");
    if (c.is_delta()) os << std::llround(c.alpha() / length_quantum);
    return os.str();
  };
  std::vector<std::string> vertex_labels, edge_labels;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) vertex_labels.push_back(vertex_label(v));
  for (const Edge& e : g.edges()) {
    std::string a = vertex_label(e.tail), b = vertex_label(e.head);
    if (b < a) std::swap(a, b);
    std::ostringstream os;
    os << std::llround(e.length / length_quantum) << (e.is_loop() ? "L" : "") << '(' << a << ','
       << b << ')';
    edge_labels.push_back(os.str());
  }
  std::sort(vertex_labels.begin(), vertex_labels.end());
  std::sort(edge_labels.begin(), edge_labels.end());
  std::ostringstream os;
  os << "V";
  for (const auto& s : vertex_labels) os << ' ' << s;
  os << " | E";
  for (const auto& s : edge_labels) os << ' ' << s;
  return os.str();
}

inline bool isomorphic(const MetricGraph& a, const MetricGraph& b) {
  return canonical_signature(a) == canonical_signature(b);
}

}  // namespace qgraph
