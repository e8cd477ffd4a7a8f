#pragma once

// Eigenfunctions from the null space of the direct vertex system.
//
// On edge e an eigenfunction is a_e c(kx) + b_e s(kx) with (c, s) one of
// (cos, sin), (1, x) or (cosh, sinh) depending on the sign of lambda; x runs
// from the edge tail. Inner products use closed-form antiderivatives.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/error.hpp"
#include "qgraph/metric_graph.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

struct EdgeCoefficients {
  double a = 0.0;
  double b = 0.0;
};

enum class SupportKind { NonvanishingOnVertices, VanishesAtVertices, LoopSupported };

struct SupportClass {
  SupportKind kind = SupportKind::NonvanishingOnVertices;
  std::vector<std::size_t> vanishing_vertices;
  // Set for LoopSupported.
  std::optional<LoopDescriptor> loop;
  // Pure loops that together carry the whole support when no single one does.
  std::vector<LoopDescriptor> ambiguous_loops;
};

struct EigenmodeOptions {
  double null_threshold = 1e-8;
  double vanish_tolerance = 1e-7;
  double coefficient_tolerance = 1e-8;
  double sign_tolerance = 1e-8;
};

class EigenFunction {
 public:
  EigenFunction(std::shared_ptr<const MetricGraph> graph, double lambda,
                std::vector<EdgeCoefficients> coefficients, std::size_t index)
      : graph_(std::move(graph)),
        lambda_(lambda),
        basis_(basis_for(lambda)),
        k_(std::sqrt(std::abs(lambda))),
        coefficients_(std::move(coefficients)),
        index_(index) {
    vertex_values_.resize(graph_->vertex_count());
    for (std::size_t v = 0; v < graph_->vertex_count(); ++v)
      vertex_values_[v] = end_value(graph_->ends_at(v).front());
  }

  const MetricGraph& graph() const noexcept { return *graph_; }
  std::shared_ptr<const MetricGraph> graph_ptr() const noexcept { return graph_; }
  double lambda() const noexcept { return lambda_; }
  double k() const noexcept { return k_; }
  BasisKind basis() const noexcept { return basis_; }
  std::size_t index() const noexcept { return index_; }
  const std::vector<EdgeCoefficients>& coefficients() const noexcept { return coefficients_; }
  const EdgeCoefficients& coefficients(std::size_t e) const { return coefficients_.at(e); }
  const std::vector<double>& vertex_values() const noexcept { return vertex_values_; }
  double vertex_value(std::size_t v) const { return vertex_values_.at(v); }

  const SupportClass& support() const noexcept { return support_; }
  void set_support(SupportClass s) { support_ = std::move(s); }

  double value_on(std::size_t e, double x) const {
    const auto [c, s] = basis_pair(x);
    return coefficients_.at(e).a * c + coefficients_.at(e).b * s;
  }
  double derivative_on(std::size_t e, double x) const {
    const auto [dc, ds] = basis_derivative(x);
    return coefficients_.at(e).a * dc + coefficients_.at(e).b * ds;
  }

  double end_value(EdgeEnd end) const {
    return value_on(end.edge, end.side == EndSide::Tail ? 0.0 : graph_->edge(end.edge).length);
  }
  // Derivative pointing into the edge.
  double end_derivative(EdgeEnd end) const {
    return end.side == EndSide::Tail ? derivative_on(end.edge, 0.0)
                                     : -derivative_on(end.edge, graph_->edge(end.edge).length);
  }
  double flux(std::size_t v) const {
    double sum = 0.0;
    for (const EdgeEnd& end : graph_->ends_at(v)) sum += end_derivative(end);
    return sum;
  }

  // Largest mismatch between edge-end values at a shared vertex, and
  // between f(v) and zero at Dirichlet vertices.
  double continuity_residual() const {
    double worst = 0.0;
    for (std::size_t v = 0; v < graph_->vertex_count(); ++v) {
      const auto& ends = graph_->ends_at(v);
      const double f0 = end_value(ends.front());
      if (graph_->vertex(v).condition.is_dirichlet()) worst = std::max(worst, std::abs(f0));
      for (const EdgeEnd& end : ends) worst = std::max(worst, std::abs(end_value(end) - f0));
    }
    return worst;
  }
  // max over delta vertices of |sum f' - alpha f(v)|.
  double flux_residual() const {
    double worst = 0.0;
    for (std::size_t v = 0; v < graph_->vertex_count(); ++v) {
      const VertexCondition& c = graph_->vertex(v).condition;
      if (c.is_dirichlet()) continue;
      worst = std::max(worst, std::abs(flux(v) - c.alpha() * vertex_values_[v]));
    }
    return worst;
  }

  std::map<std::string, double> vertex_value_map() const {
    std::map<std::string, double> out;
    for (std::size_t v = 0; v < graph_->vertex_count(); ++v)
      out.emplace(graph_->vertex(v).id, vertex_values_[v]);
    return out;
  }

 private:
  std::pair<double, double> basis_pair(double x) const {
    switch (basis_) {
      case BasisKind::Oscillatory: return {std::cos(k_ * x), std::sin(k_ * x)};
      case BasisKind::Hyperbolic: return {std::cosh(k_ * x), std::sinh(k_ * x)};
      case BasisKind::Polynomial: break;
    }
    return {1.0, x};
  }
  std::pair<double, double> basis_derivative(double x) const {
    switch (basis_) {
      case BasisKind::Oscillatory: return {-k_ * std::sin(k_ * x), k_ * std::cos(k_ * x)};
      case BasisKind::Hyperbolic: return {k_ * std::sinh(k_ * x), k_ * std::cosh(k_ * x)};
      case BasisKind::Polynomial: break;
    }
    return {0.0, 1.0};
  }

  std::shared_ptr<const MetricGraph> graph_;
  double lambda_;
  BasisKind basis_;
  double k_;
  std::vector<EdgeCoefficients> coefficients_;
  std::size_t index_;
  std::vector<double> vertex_values_;
  SupportClass support_;
};

inline std::map<std::string, double> vertex_values(const EigenFunction& f) {
  return f.vertex_value_map();
}

inline double evaluate(const EigenFunction& f, std::string_view edge_id, double x) {
  const std::size_t e = f.graph().edge_index(edge_id);
  const double length = f.graph().edge(e).length;
  if (!(x >= 0.0 && x <= length))
    throw Error(Errc::CoordinateOutOfRange, "x = " + std::to_string(x) + " outside edge '" +
                                                std::string(edge_id) + "'");
  return f.value_on(e, x);
}

namespace detail {

// Gram matrix of (c, s) on [0, length]: {int c c, int c s, int s s}.
inline std::array<double, 3> basis_gram(BasisKind basis, double k, double length) {
  switch (basis) {
    case BasisKind::Oscillatory: {
      const double s2 = std::sin(2.0 * k * length) / (4.0 * k);
      const double s = std::sin(k * length);
      return {0.5 * length + s2, s * s / (2.0 * k), 0.5 * length - s2};
    }
    case BasisKind::Hyperbolic: {
      const double s2 = std::sinh(2.0 * k * length) / (4.0 * k);
      const double s = std::sinh(k * length);
      return {s2 + 0.5 * length, s * s / (2.0 * k), s2 - 0.5 * length};
    }
    case BasisKind::Polynomial: break;
  }
  return {length, 0.5 * length * length, length * length * length / 3.0};
}

// Block-diagonal weight W with <f, g> = f^T W g for stacked (a_e, b_e).
inline Eigen::MatrixXd l2_weight(const MetricGraph& g, double lambda) {
  const BasisKind basis = basis_for(lambda);
  const double k = std::sqrt(std::abs(lambda));
  const auto n = static_cast<Eigen::Index>(2 * g.edge_count());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto [cc, cs, ss] = basis_gram(basis, k, g.edge(e).length);
    const auto i = static_cast<Eigen::Index>(2 * e);
    W(i, i) = cc;
    W(i, i + 1) = W(i + 1, i) = cs;
    W(i + 1, i + 1) = ss;
  }
  return W;
}

inline double l2_dot(const Eigen::VectorXd& x, const Eigen::MatrixXd& W, const Eigen::VectorXd& y) {
  return x.dot(W * y);
}

// Combinations of the columns of `basis` annihilated by `constraints`.
inline Eigen::MatrixXd constrained_subspace(const Eigen::MatrixXd& basis,
                                            const Eigen::MatrixXd& constraints, double relative) {
  const Eigen::MatrixXd reduced = constraints * basis;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(reduced, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double scale = std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > relative * scale) ++rank;
  const Eigen::Index dim = basis.cols() - rank;
  return basis * svd.matrixV().rightCols(dim);
}

}  // namespace detail

// Pure loops of g on which a loop-supported state lives at wavenumber k:
// k times the loop length is a positive multiple of 2 pi.
inline std::vector<LoopDescriptor> resonant_pure_loops(const MetricGraph& g, double lambda,
                                                       double tolerance = 1e-7) {
  std::vector<LoopDescriptor> out;
  if (!(lambda > 0.0)) return out;
  const double k = std::sqrt(lambda);
  for (const LoopDescriptor& loop : find_loops(g))
    if (loop.pure && std::abs(std::sin(0.5 * k * loop.total_length)) < tolerance)
      out.push_back(loop);
  return out;
}

inline SupportClass classify_support(const MetricGraph& g, const EigenFunction& f,
                                     const EigenmodeOptions& opt = {}) {
  SupportClass out;
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (!g.vertex(v).condition.is_dirichlet() && std::abs(f.vertex_value(v)) <= opt.vanish_tolerance)
      out.vanishing_vertices.push_back(v);
  if (out.vanishing_vertices.empty()) return out;
  out.kind = SupportKind::VanishesAtVertices;

  auto supported_on = [&](const std::vector<const LoopDescriptor*>& loops) {
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const bool inside = std::any_of(loops.begin(), loops.end(),
                                      [&](const LoopDescriptor* l) { return l->contains_edge(e); });
      if (inside) continue;
      const EdgeCoefficients& c = f.coefficients(e);
      if (std::abs(c.a) > opt.coefficient_tolerance || std::abs(c.b) > opt.coefficient_tolerance)
        return false;
    }
    return std::all_of(loops.begin(), loops.end(), [&](const LoopDescriptor* l) {
      return std::abs(f.vertex_value(l->attachment_vertex)) <= opt.coefficient_tolerance;
    });
  };

  const std::vector<LoopDescriptor> loops = resonant_pure_loops(g, f.lambda());
  std::vector<const LoopDescriptor*> matches;
  for (const LoopDescriptor& loop : loops)
    if (supported_on({&loop})) matches.push_back(&loop);
  if (matches.size() == 1) {
    out.kind = SupportKind::LoopSupported;
    out.loop = *matches.front();
    return out;
  }
  std::vector<const LoopDescriptor*> all;
  for (const LoopDescriptor& loop : loops) all.push_back(&loop);
  if (all.size() >= 2 && supported_on(all))
    for (const LoopDescriptor* l : all) out.ambiguous_loops.push_back(*l);
  return out;
}

// L2-orthonormal basis of the eigenspace of `record`. Loop-supported states
// come first, one per resonant pure loop; the rest of the basis is orthogonal
// to them.
inline std::vector<EigenFunction> eigenfunctions_at(const MetricGraph& g,
                                                    const EigenvalueRecord& record,
                                                    const EigenmodeOptions& opt = {}) {
  auto graph = std::make_shared<const MetricGraph>(g);
  const DirectSystem sys = assemble_direct_system(g, record.lambda);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::Index n = sv.size();
  const auto m = static_cast<Eigen::Index>(record.multiplicity);
  const double tau = opt.null_threshold * direct_scale(sv);
  Eigen::Index nullity = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (sv(i) < tau) ++nullity;
  if (m < 1 || m > n || nullity != m)
    throw Error(Errc::NullSpaceDimensionMismatch,
                "expected " + std::to_string(m) + " null vectors at lambda = " +
                    std::to_string(record.lambda) + ", found " + std::to_string(nullity));

  // Null vectors converted to the unscaled basis.
  Eigen::MatrixXd N = svd.matrixV().rightCols(m);
  for (Eigen::Index e = 0; e < n / 2; ++e) N.row(2 * e + 1) *= sys.b_scale;
  const Eigen::MatrixXd W = detail::l2_weight(g, record.lambda);

  std::vector<Eigen::VectorXd> candidates;
  for (const LoopDescriptor& loop : resonant_pure_loops(g, record.lambda)) {
    std::vector<Eigen::Index> rows;
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      if (!loop.contains_edge(e)) {
        rows.push_back(static_cast<Eigen::Index>(2 * e));
        rows.push_back(static_cast<Eigen::Index>(2 * e + 1));
      }
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()) + 1, n);
    for (std::size_t r = 0; r < rows.size(); ++r) C(static_cast<Eigen::Index>(r), rows[r]) = 1.0;
    // f(attachment) through the first loop edge-end found there.
    for (const EdgeEnd& end : g.ends_at(loop.attachment_vertex)) {
      if (!loop.contains_edge(end.edge)) continue;
      const auto c = detail::end_coefficients(sys.basis, sys.k, g.edge(end.edge).length, end.side);
      const auto row = static_cast<Eigen::Index>(rows.size());
      C(row, static_cast<Eigen::Index>(2 * end.edge)) = c.value_a;
      C(row, static_cast<Eigen::Index>(2 * end.edge + 1)) = c.value_b / sys.b_scale;
      break;
    }
    const Eigen::MatrixXd sub = detail::constrained_subspace(N, C, 1e-6);
    if (sub.cols() >= 1) candidates.push_back(sub.col(0));
  }
  for (Eigen::Index j = 0; j < m; ++j) candidates.push_back(N.col(j));

  // Gram-Schmidt in L2, twice for stability.
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::VectorXd x : candidates) {
    if (static_cast<Eigen::Index>(basis.size()) == m) break;
    const double original = std::sqrt(std::max(0.0, detail::l2_dot(x, W, x)));
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) x -= detail::l2_dot(q, W, x) * q;
    const double norm = std::sqrt(std::max(0.0, detail::l2_dot(x, W, x)));
    if (norm <= 1e-6 * original) continue;
    basis.push_back(x / norm);
  }
  if (static_cast<Eigen::Index>(basis.size()) != m)
    throw Error(Errc::NullSpaceDimensionMismatch, "eigenspace basis collapsed");

  std::vector<std::size_t> edge_order(g.edge_count());
  std::iota(edge_order.begin(), edge_order.end(), std::size_t{0});
  std::sort(edge_order.begin(), edge_order.end(),
            [&](std::size_t a, std::size_t b) { return g.edge(a).id < g.edge(b).id; });

  std::vector<EigenFunction> out;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    Eigen::VectorXd x = basis[j];
    for (std::size_t e : edge_order) {
      const auto i = static_cast<Eigen::Index>(2 * e);
      const double lead = std::abs(x(i)) > opt.sign_tolerance ? x(i) : x(i + 1);
      if (std::abs(lead) > opt.sign_tolerance) {
        if (lead < 0.0) x = -x;
        break;
      }
    }
    std::vector<EdgeCoefficients> coeffs(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      coeffs[e] = {x(static_cast<Eigen::Index>(2 * e)), x(static_cast<Eigen::Index>(2 * e + 1))};
    EigenFunction f(graph, record.lambda, std::move(coeffs), record.first_index + j);
    f.set_support(classify_support(g, f, opt));
    out.push_back(std::move(f));
  }
  return out;
}

inline double l2_inner_product(const EigenFunction& f, const EigenFunction& h) {
  if (f.lambda() != h.lambda())
    throw Error(Errc::InvalidArgument, "inner products need a common eigenvalue");
  const MetricGraph& g = f.graph();
  double sum = 0.0;
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto [cc, cs, ss] = detail::basis_gram(f.basis(), f.k(), g.edge(e).length);
    const EdgeCoefficients& p = f.coefficients(e);
    const EdgeCoefficients& q = h.coefficients(e);
    sum += p.a * q.a * cc + (p.a * q.b + p.b * q.a) * cs + p.b * q.b * ss;
  }
  return sum;
}

// Samples f on every edge as "edge<TAB>x<TAB>f" rows after a header.
inline void write_eigenfunction_tsv(std::ostream& os, const EigenFunction& f,
                                    std::size_t samples_per_edge = 64) {
  const MetricGraph& g = f.graph();
  const auto old_precision = os.precision(12);
  os << "edge\tx\tf\n";
  const std::size_t n = std::max<std::size_t>(samples_per_edge, 2);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const double length = g.edge(e).length;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = length * static_cast<double>(i) / static_cast<double>(n - 1);
      os << g.edge(e).id << '\t' << x << '\t' << f.value_on(e, x) << '\n';
    }
  }
  os.precision(old_precision);
}

}  // namespace qgraph
