#pragma once

// Small named graphs used throughout the tests and the data directory.

#include <array>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "qgraph/metric_graph.hpp"

namespace qgraph::catalog {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline MetricGraph interval(double length = std::numbers::pi) {
  return MetricGraph({{"v0"}, {"v1"}}, {{"e", 0, 1, length}});
}

inline MetricGraph circle(double length = two_pi) {
  return MetricGraph({{"v"}}, {{"e", 0, 0, length}});
}

inline MetricGraph figure8(double l1 = two_pi, double l2 = two_pi * std::numbers::sqrt2) {
  return MetricGraph({{"v"}}, {{"a", 0, 0, l1}, {"b", 0, 0, l2}});
}

// Centre c with leaves a, b, d on edges e1, e2, e3.
inline MetricGraph star3(std::array<double, 3> lengths = {1.0, 1.0, 1.0},
                         VertexCondition leaf = VertexCondition::dirichlet()) {
  return MetricGraph({{"c"}, {"a", leaf}, {"b", leaf}, {"d", leaf}},
                     {{"e1", 0, 1, lengths[0]}, {"e2", 0, 2, lengths[1]}, {"e3", 0, 3, lengths[2]}});
}

inline MetricGraph mandarin3(std::array<double, 3> lengths = {1.0, 1.0, 1.0}) {
  return MetricGraph({{"u"}, {"w"}},
                     {{"e1", 0, 1, lengths[0]}, {"e2", 0, 1, lengths[1]}, {"e3", 0, 1, lengths[2]}});
}

// Looping edge at v plus a pendant edge to w.
inline MetricGraph lollipop(double loop = two_pi, double pendant = 1.3) {
  return MetricGraph({{"v"}, {"w"}}, {{"loop", 0, 0, loop}, {"tail", 0, 1, pendant}});
}

// Triangle a-b-c with a tail a-d.
inline MetricGraph cycle_with_tail(std::array<double, 4> lengths = {1.0, 1.0, 1.0, 1.0}) {
  return MetricGraph({{"a"}, {"b"}, {"c"}, {"d"}}, {{"ab", 0, 1, lengths[0]},
                                                    {"bc", 1, 2, lengths[1]},
                                                    {"ca", 2, 0, lengths[2]},
                                                    {"ad", 0, 3, lengths[3]}});
}

// A cycle of two edges joined at a Robin vertex r and an NK vertex n.
inline MetricGraph impure_loop(double length = two_pi, double alpha = 1.0) {
  return MetricGraph({{"r", VertexCondition::delta(alpha)}, {"n"}},
                     {{"e1", 0, 1, 0.5 * length}, {"e2", 1, 0, 0.5 * length}});
}

// The fixed set of graphs every solver is cross-checked on.
inline std::vector<std::pair<std::string, MetricGraph>> corpus() {
  return {
      {"interval", interval()},
      {"circle", circle()},
      {"figure8", figure8()},
      {"star3d", star3({1.0, 1.3, 1.7})},
      {"mandarin3", mandarin3({1.0, 1.3, 1.7})},
      {"lollipop", lollipop()},
      {"cycle_with_tail", cycle_with_tail({1.0, 1.2, 1.45, 0.8})},
      {"impure_loop", impure_loop()},
  };
}

}  // namespace qgraph::catalog
