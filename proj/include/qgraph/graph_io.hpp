#pragma once

// Line-oriented graph description format:
//
//   # comment
//   vertex <id> nk | delta <alpha> | dirichlet
//   edge <id> <u> <v> <length>
//
// Tokens are whitespace-separated; numbers are decimal reals.

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "qgraph/error.hpp"
#include "qgraph/metric_graph.hpp"

namespace qgraph {

struct GraphDescription {
  struct VertexRecord {
    std::string id;
    VertexCondition condition = VertexCondition::nk();
    int line = 0;
  };
  struct EdgeRecord {
    std::string id;
    std::string u;
    std::string v;
    double length = 0.0;
    int line = 0;
  };
  std::vector<VertexRecord> vertices;
  std::vector<EdgeRecord> edges;
};

namespace detail {

inline double parse_real(const std::string& token, int line) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw Error(Errc::ParseError,
                "line " + std::to_string(line) + ": expected a number, got '" + token + "'");
  return value;
}

}  // namespace detail

inline GraphDescription parse_graph_description(std::istream& in) {
  GraphDescription desc;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream tokens(raw);
    std::vector<std::string> words;
    for (std::string w; tokens >> w;) words.push_back(w);
    if (words.empty()) continue;

    auto fail = [&](const std::string& why) {
      throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + why);
    };
    if (words[0] == "vertex") {
      if (words.size() < 3) fail("vertex needs an id and a condition");
      GraphDescription::VertexRecord rec{words[1], VertexCondition::nk(), line};
      const std::string& kind = words[2];
      if (kind == "nk") {
        if (words.size() != 3) fail("unexpected tokens after 'nk'");
      } else if (kind == "dirichlet") {
        if (words.size() != 3) fail("unexpected tokens after 'dirichlet'");
        rec.condition = VertexCondition::dirichlet();
      } else if (kind == "delta") {
        if (words.size() != 4) fail("delta needs exactly one coefficient");
        const double alpha = detail::parse_real(words[3], line);
        if (!std::isfinite(alpha)) fail("delta coefficient must be finite");
        rec.condition = VertexCondition::delta(alpha);
      } else {
        fail("unknown vertex condition '" + kind + "'");
      }
      desc.vertices.push_back(std::move(rec));
    } else if (words[0] == "edge") {
      if (words.size() != 5) fail("edge needs: <id> <u> <v> <length>");
      desc.edges.push_back(
          {words[1], words[2], words[3], detail::parse_real(words[4], line), line});
    } else {
      fail("unknown record '" + words[0] + "'");
    }
  }
  return desc;
}

inline GraphDescription parse_graph_description(const std::string& text) {
  std::istringstream in(text);
  return parse_graph_description(in);
}

// Validates the description and builds the (connected) graph.
inline MetricGraph build_graph(const GraphDescription& desc,
                               MetricGraph::Connectivity connectivity =
                                   MetricGraph::Connectivity::Require) {
  std::vector<Vertex> vertices;
  vertices.reserve(desc.vertices.size());
  for (const auto& rec : desc.vertices) vertices.push_back({rec.id, rec.condition});
  std::map<std::string, std::size_t> index;
  for (std::size_t v = 0; v < vertices.size(); ++v)
    if (!index.emplace(vertices[v].id, v).second)
      throw Error(Errc::DuplicateId, "vertex '" + vertices[v].id + "'");

  std::vector<Edge> edges;
  edges.reserve(desc.edges.size());
  for (const auto& rec : desc.edges) {
    auto u = index.find(rec.u), v = index.find(rec.v);
    if (u == index.end() || v == index.end())
      throw Error(Errc::UnknownId, "line " + std::to_string(rec.line) + ": edge '" + rec.id +
                                       "' references an undeclared vertex");
    edges.push_back({rec.id, u->second, v->second, rec.length});
  }
  return MetricGraph(std::move(vertices), std::move(edges), connectivity);
}

inline MetricGraph parse_graph(const std::string& text) {
  return build_graph(parse_graph_description(text));
}

inline MetricGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return build_graph(parse_graph_description(in));
}

inline std::string format_graph(const MetricGraph& g) {
  std::ostringstream os;
  os.precision(17);
  for (const Vertex& v : g.vertices()) {
    os << "vertex " << v.id << ' ';
    if (v.condition.is_dirichlet())
      os << "dirichlet";
    else if (v.condition.is_nk())
      os << "nk";
    else
      os << "delta " << v.condition.alpha();
    os << '\n';
  }
  for (const Edge& e : g.edges())
    os << "edge " << e.id << ' ' << g.vertex(e.tail).id << ' ' << g.vertex(e.head).id << ' '
       << e.length << '\n';
  return os.str();
}

}  // namespace qgraph
