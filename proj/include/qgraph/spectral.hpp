#pragma once

// Eigenvalues of the Laplacian on a metric graph with delta-type conditions.
//
// Two ingredients:
//  * the direct system H(lambda): on each edge f = a c(x) + b s(x), with
//    (c, s) = (cos kx, w sin(kx)/k), (1, x) or (cosh kx, w sinh(kx)/k) for
//    lambda > 0, = 0, < 0, w = max(1, k), and one row per vertex condition.
//    lambda is an eigenvalue iff H is singular, with multiplicity equal to
//    its nullity. The scaling keeps H analytic across lambda = 0 and its
//    entries of order one for large k.
//  * an exact eigenvalue counting function from the inertia of the vertex
//    Dirichlet-to-Neumann matrix: N(lambda) = N_D(lambda) + n_+(M(lambda)),
//    where N_D counts eigenvalues of the edges decoupled with Dirichlet ends.
//
// scan_spectrum isolates eigenvalues by bisection on the count, then polishes
// each root by golden-section search on the smallest singular value of H.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/error.hpp"
#include "qgraph/metric_graph.hpp"
#include "qgraph/secular.hpp"

namespace qgraph {

enum class BasisKind { Oscillatory, Polynomial, Hyperbolic };

inline BasisKind basis_for(double lambda) {
  if (lambda > 0.0) return BasisKind::Oscillatory;
  if (lambda < 0.0) return BasisKind::Hyperbolic;
  return BasisKind::Polynomial;
}

struct DirectSystem {
  double lambda = 0.0;
  BasisKind basis = BasisKind::Polynomial;
  double k = 0.0;  // sqrt(|lambda|)
  // Coefficient of sin(kx), sinh(kx) or x is b * b_scale.
  double b_scale = 1.0;
  Eigen::MatrixXd matrix;  // 2E x 2E; columns (a_e, b_e) per edge in the scaled basis
};

inline double basis_weight(double k) { return std::max(1.0, k); }

namespace detail {

struct EndCoefficients {
  double value_a, value_b;
  double deriv_a, deriv_b;  // derivative taken into the edge
};

// Value and inward derivative at an edge end, in the scaled basis.
inline EndCoefficients end_coefficients(BasisKind basis, double k, double length, EndSide side) {
  const double w = basis_weight(k);
  if (side == EndSide::Tail) return {1.0, 0.0, 0.0, basis == BasisKind::Polynomial ? 1.0 : w};
  switch (basis) {
    case BasisKind::Oscillatory: {
      const double c = std::cos(k * length), s = std::sin(k * length);
      return {c, w * s / k, k * s, -w * c};
    }
    case BasisKind::Hyperbolic: {
      const double c = std::cosh(k * length), s = std::sinh(k * length);
      return {c, w * s / k, -k * s, -w * c};
    }
    case BasisKind::Polynomial:
      break;
  }
  return {1.0, length, 0.0, -1.0};
}

}  // namespace detail

inline DirectSystem assemble_direct_system(const MetricGraph& g, double lambda) {
  DirectSystem sys;
  sys.lambda = lambda;
  sys.basis = basis_for(lambda);
  sys.k = std::sqrt(std::abs(lambda));
  if (sys.basis != BasisKind::Polynomial) sys.b_scale = basis_weight(sys.k) / sys.k;
  const auto n = static_cast<Eigen::Index>(2 * g.edge_count());
  sys.matrix = Eigen::MatrixXd::Zero(n, n);
  const double flux_scale = 1.0 / basis_weight(sys.k);

  auto coeffs = [&](EdgeEnd end) {
    return detail::end_coefficients(sys.basis, sys.k, g.edge(end.edge).length, end.side);
  };
  auto col = [](EdgeEnd end, int which) { return static_cast<Eigen::Index>(2 * end.edge + which); };

  Eigen::Index row = 0;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const auto& ends = g.ends_at(v);
    const VertexCondition& cond = g.vertex(v).condition;
    const auto first = coeffs(ends[0]);
    if (cond.is_dirichlet()) {
      sys.matrix(row, col(ends[0], 0)) += first.value_a;
      sys.matrix(row, col(ends[0], 1)) += first.value_b;
      ++row;
      continue;
    }
    for (std::size_t j = 1; j < ends.size(); ++j) {
      const auto other = coeffs(ends[j]);
      sys.matrix(row, col(ends[0], 0)) += first.value_a;
      sys.matrix(row, col(ends[0], 1)) += first.value_b;
      sys.matrix(row, col(ends[j], 0)) -= other.value_a;
      sys.matrix(row, col(ends[j], 1)) -= other.value_b;
      ++row;
    }
    for (const EdgeEnd& end : ends) {
      const auto c = coeffs(end);
      sys.matrix(row, col(end, 0)) += flux_scale * c.deriv_a;
      sys.matrix(row, col(end, 1)) += flux_scale * c.deriv_b;
    }
    sys.matrix(row, col(ends[0], 0)) -= flux_scale * cond.alpha() * first.value_a;
    sys.matrix(row, col(ends[0], 1)) -= flux_scale * cond.alpha() * first.value_b;
    ++row;
  }
  return sys;
}

struct DirectDeterminant {
  double value = 0.0;
  double second_smallest_singular_value = 0.0;
  double smallest_singular_value = 0.0;
};

inline DirectDeterminant direct_determinant(const MetricGraph& g, double lambda) {
  const DirectSystem sys = assemble_direct_system(g, lambda);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(sys.matrix).singularValues();
  const Eigen::Index n = sv.size();
  return {sys.matrix.partialPivLu().determinant(), n >= 2 ? sv(n - 2) : sv(n - 1), sv(n - 1)};
}

// Norm used for relative thresholds. H can vanish identically at an
// eigenvalue (a single looping edge), so the scale is floored at one; the
// basis scaling keeps healthy entries of order one.
inline double direct_scale(const Eigen::VectorXd& singular_values) {
  return std::max(1.0, singular_values(0));
}

// Number of singular values of H(lambda) below relative_threshold * ||H||.
inline int multiplicity_at(const MetricGraph& g, double lambda, double relative_threshold = 1e-8) {
  const DirectSystem sys = assemble_direct_system(g, lambda);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(sys.matrix).singularValues();
  const double tau = relative_threshold * direct_scale(sv);
  int nullity = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) < tau) ++nullity;
  return nullity;
}

// ---------------------------------------------------------------------------
// Counting function

// Number of eigenvalues strictly below s|s|, for a signed wavenumber s that is
// not itself an eigenvalue. Edges whose Dirichlet spectrum sits near s are
// subdivided by a virtual NK vertex; this leaves the graph spectrum untouched
// and keeps M(lambda) finite.
inline std::size_t eigenvalue_count_below(const MetricGraph& g, double s) {
  const double k = std::abs(s);
  constexpr std::size_t eliminated = std::numeric_limits<std::size_t>::max();

  std::vector<std::size_t> slot(g.vertex_count(), eliminated);
  std::size_t dim = 0;
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (!g.vertex(v).condition.is_dirichlet()) slot[v] = dim++;

  struct Piece {
    std::size_t u, v;
    double length;
  };
  std::vector<Piece> pieces;
  for (const Edge& e : g.edges()) {
    const std::size_t u = slot[e.tail], v = slot[e.head];
    const double phase = k * e.length;
    if (s > 0.0 && phase > 1.0 && std::abs(std::sin(phase)) < 0.05) {
      // Put the virtual vertex a quarter wavelength from the tail.
      const double m = std::round(phase / std::numbers::pi);
      const double first = 0.5 * e.length / m;
      const std::size_t w = dim++;
      pieces.push_back({u, w, first});
      pieces.push_back({w, v, e.length - first});
    } else {
      pieces.push_back({u, v, e.length});
    }
  }

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                            static_cast<Eigen::Index>(dim));
  for (std::size_t v = 0; v < g.vertex_count(); ++v)
    if (slot[v] != eliminated)
      M(static_cast<Eigen::Index>(slot[v]), static_cast<Eigen::Index>(slot[v])) -=
          g.vertex(v).condition.alpha();

  std::size_t dirichlet_count = 0;
  for (const Piece& p : pieces) {
    double diag = 0.0, off = 0.0, loop = 0.0;
    const double x = k * p.length;
    if (s > 0.0) {
      dirichlet_count += static_cast<std::size_t>(std::floor(x / std::numbers::pi));
      diag = -k / std::tan(x);
      off = k / std::sin(x);
      loop = 2.0 * k * std::tan(0.5 * x);
    } else if (s < 0.0) {
      diag = -k / std::tanh(x);
      off = k / std::sinh(x);
      loop = -2.0 * k * std::tanh(0.5 * x);
    } else {
      diag = -1.0 / p.length;
      off = 1.0 / p.length;
    }
    const auto u = static_cast<Eigen::Index>(p.u), v = static_cast<Eigen::Index>(p.v);
    if (p.u == p.v) {
      if (p.u != eliminated) M(u, u) += loop;
      continue;
    }
    if (p.u != eliminated) M(u, u) += diag;
    if (p.v != eliminated) M(v, v) += diag;
    if (p.u != eliminated && p.v != eliminated) {
      M(u, v) += off;
      M(v, u) += off;
    }
  }

  std::size_t positive = 0;
  if (dim > 0) {
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev(i) > 0.0) ++positive;
  }
  return dirichlet_count + positive;
}

// ---------------------------------------------------------------------------
// Spectrum scan

struct EigenvalueRecord {
  double lambda = 0.0;
  double k = 0.0;  // sqrt(|lambda|)
  bool negative = false;
  int multiplicity = 1;
  std::size_t first_index = 0;
  double residual = 0.0;  // smallest singular value of H at the root, relative
  bool degeneracy_suspected = false;

  std::size_t last_index() const { return first_index + static_cast<std::size_t>(multiplicity) - 1; }
  double signed_k() const { return negative ? -k : k; }
};

struct WeylEstimate {
  double expected = 0.0;
  double tolerance = 0.0;

  bool accepts(std::size_t count) const {
    return std::abs(static_cast<double>(count) - expected) <= tolerance;
  }
};

inline WeylEstimate weyl_count(const MetricGraph& g, double k_max) {
  if (!(k_max > 0.0)) throw Error(Errc::NonpositiveK, "k_max must be positive");
  return {g.total_length() * k_max / std::numbers::pi,
          static_cast<double>(g.vertex_count()) + 2.0};
}

struct ScanOptions {
  // Clusters holding several eigenvalues are split until this relative width.
  double isolation_width = 1e-11;
  // Single eigenvalues are bracketed to this relative width before polishing.
  double polish_width = 1e-6;
  double refine_tolerance = 1e-14;
  // |s| below this belongs to the lambda = 0 cluster.
  double zero_window = 1e-4;
  double null_threshold = 1e-8;
  bool check_weyl = true;
};

namespace detail {

inline double smallest_relative_singular_value(const MetricGraph& g, double s) {
  const DirectSystem sys = assemble_direct_system(g, s * std::abs(s));
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(sys.matrix).singularValues();
  return sv(sv.size() - 1) / direct_scale(sv);
}

inline double negative_search_bound(const MetricGraph& g) {
  double bound = 1.0;
  for (const Vertex& v : g.vertices())
    if (v.condition.is_delta()) bound += std::abs(std::min(v.condition.alpha(), 0.0));
  for (int i = 0; i < 60 && eigenvalue_count_below(g, -bound) > 0; ++i) bound *= 2.0;
  if (eigenvalue_count_below(g, -bound) > 0)
    throw Error(Errc::NoConvergence, "could not bracket the negative spectrum");
  return bound;
}

struct Cluster {
  double lo, hi;
  std::size_t count;
};

inline void isolate(const MetricGraph& g, double lo, double hi, std::size_t count_lo,
                    std::size_t count_hi, const ScanOptions& opt, std::vector<Cluster>& out) {
  if (count_hi == count_lo) return;
  const double scale = 1.0 + std::max(std::abs(lo), std::abs(hi));
  const std::size_t inside = count_hi - count_lo;
  const double width = hi - lo;
  if ((inside == 1 && width <= opt.polish_width * scale) ||
      width <= opt.isolation_width * scale) {
    out.push_back({lo, hi, inside});
    return;
  }
  const double mid = 0.5 * (lo + hi);
  const std::size_t count_mid = eigenvalue_count_below(g, mid);
  if (count_mid < count_lo || count_mid > count_hi)
    throw Error(Errc::NoConvergence, "eigenvalue count is not monotone");
  isolate(g, lo, mid, count_lo, count_mid, opt, out);
  isolate(g, mid, hi, count_mid, count_hi, opt, out);
}

// Locates the root inside a bracket holding `count` eigenvalues.
inline EigenvalueRecord polish(const MetricGraph& g, Cluster c, const ScanOptions& opt) {
  auto objective = [&](double s) { return smallest_relative_singular_value(g, s); };
  const double scale = 1.0 + std::max(std::abs(c.lo), std::abs(c.hi));
  double s = golden_section_minimum(objective, c.lo, c.hi, opt.refine_tolerance * scale);
  double residual = objective(s);
  if (residual > 1e-8) {
    // The singular value landscape was not unimodal; keep bisecting the count.
    const std::size_t below = eigenvalue_count_below(g, c.lo);
    double lo = c.lo, hi = c.hi;
    while (hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * scale) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (eigenvalue_count_below(g, mid) > below ? hi : lo) = mid;
    }
    s = 0.5 * (lo + hi);
    residual = objective(s);
    if (residual > 1e-6)
      throw Error(Errc::NoConvergence, "root refinement stalled near k = " + std::to_string(s));
  }
  EigenvalueRecord rec;
  rec.k = std::abs(s);
  rec.negative = s < 0.0;
  rec.lambda = s * std::abs(s);
  rec.multiplicity = static_cast<int>(c.count);
  rec.residual = residual;
  const int nullity = multiplicity_at(g, rec.lambda, opt.null_threshold);
  rec.degeneracy_suspected = nullity != rec.multiplicity;
  return rec;
}

}  // namespace detail

// All eigenvalues with lambda <= k_max^2, negative ones included, sorted and
// indexed from 0.
inline std::vector<EigenvalueRecord> scan_spectrum(const MetricGraph& g, double k_max,
                                                   const ScanOptions& opt = {}) {
  if (!(k_max > 0.0)) throw Error(Errc::NonpositiveK, "k_max must be positive");
  const double neg_bound = detail::negative_search_bound(g);
  const double zw = opt.zero_window;
  const double top = k_max + 1e-10 * (1.0 + k_max);
  if (top <= zw) throw Error(Errc::InvalidArgument, "k_max below the zero window");

  const std::size_t n_negative = eigenvalue_count_below(g, -zw);
  const std::size_t n_nonpositive = eigenvalue_count_below(g, zw);
  const std::size_t n_total = eigenvalue_count_below(g, top);

  std::vector<detail::Cluster> clusters;
  detail::isolate(g, -neg_bound, -zw, 0, n_negative, opt, clusters);
  const std::size_t zero_count = n_nonpositive - n_negative;
  std::vector<detail::Cluster> positive;
  detail::isolate(g, zw, top, n_nonpositive, n_total, opt, positive);

  std::vector<EigenvalueRecord> records;
  for (const auto& c : clusters) records.push_back(detail::polish(g, c, opt));
  if (zero_count > 0) {
    EigenvalueRecord rec;
    rec.multiplicity = static_cast<int>(zero_count);
    rec.residual = detail::smallest_relative_singular_value(g, 0.0);
    rec.degeneracy_suspected = multiplicity_at(g, 0.0, opt.null_threshold) != rec.multiplicity;
    records.push_back(rec);
  }
  for (const auto& c : positive) records.push_back(detail::polish(g, c, opt));

  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  std::size_t index = 0;
  for (auto& rec : records) {
    rec.first_index = index;
    index += static_cast<std::size_t>(rec.multiplicity);
  }

  if (opt.check_weyl) {
    const WeylEstimate weyl = weyl_count(g, k_max);
    if (!weyl.accepts(index))
      throw Error(Errc::WeylCountMismatch,
                  "found " + std::to_string(index) + " eigenvalues, expected " +
                      std::to_string(weyl.expected) + " +- " + std::to_string(weyl.tolerance));
  }
  return records;
}

// Records covering at least the first n eigenvalues (indices 0..n-1).
inline std::vector<EigenvalueRecord> first_eigenvalues(const MetricGraph& g, std::size_t n,
                                                       const ScanOptions& opt = {}) {
  if (n == 0) return {};
  double k = (static_cast<double>(n + g.vertex_count()) + 2.0) * std::numbers::pi /
             g.total_length();
  for (int i = 0; eigenvalue_count_below(g, k) < n; ++i) {
    if (i > 200) throw Error(Errc::NoConvergence, "could not reach the requested index");
    k *= 1.5;
  }
  std::vector<EigenvalueRecord> records = scan_spectrum(g, k, opt);
  std::erase_if(records, [&](const EigenvalueRecord& r) { return r.first_index >= n; });
  return records;
}

// Eigenvalues repeated according to multiplicity.
inline std::vector<double> expand_multiplicities(const std::vector<EigenvalueRecord>& records) {
  std::vector<double> out;
  for (const auto& r : records) out.insert(out.end(), static_cast<std::size_t>(r.multiplicity), r.lambda);
  return out;
}

}  // namespace qgraph
