#pragma once

// Bond scattering formulation of the spectral problem.
//
// Every edge carries two directed bonds. With S the bond scattering matrix
// and L the diagonal matrix of bond lengths, eigenvalues k^2 > 0 are the zeros
// of
//
//   F(k) = i^p det(exp(-ikL/2) - exp(ikL/2) S),
//
// where the power p is calibrated once per graph so that F is real for graphs
// with only NK and Dirichlet vertices. Replacing k*l_e by torus variables
// kappa_e gives the torus function Phi with Phi(k*l) = F(k).

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/error.hpp"
#include "qgraph/metric_graph.hpp"

namespace qgraph {

using cdouble = std::complex<double>;

// Bond 2e runs tail -> head of edge e, bond 2e+1 runs head -> tail.
class BondIndex {
 public:
  explicit BondIndex(const MetricGraph& g) : graph_(&g) {}

  std::size_t size() const noexcept { return 2 * graph_->edge_count(); }
  static std::size_t edge(std::size_t bond) noexcept { return bond / 2; }
  static std::size_t reverse(std::size_t bond) noexcept { return bond ^ 1U; }
  static std::size_t forward_bond(std::size_t e) noexcept { return 2 * e; }
  static std::size_t backward_bond(std::size_t e) noexcept { return 2 * e + 1; }

  std::size_t tail(std::size_t bond) const {
    const Edge& e = graph_->edge(edge(bond));
    return bond % 2 == 0 ? e.tail : e.head;
  }
  std::size_t head(std::size_t bond) const {
    const Edge& e = graph_->edge(edge(bond));
    return bond % 2 == 0 ? e.head : e.tail;
  }
  // Bond leaving the vertex through this edge-end.
  static std::size_t outgoing(EdgeEnd end) noexcept {
    return end.side == EndSide::Tail ? forward_bond(end.edge) : backward_bond(end.edge);
  }
  // Bond arriving at the vertex through this edge-end.
  static std::size_t incoming(EdgeEnd end) noexcept { return reverse(outgoing(end)); }

 private:
  const MetricGraph* graph_;
};

// Local scattering matrix (2/(d + i alpha/k)) J - I; (-1) at Dirichlet leaves.
inline Eigen::MatrixXcd vertex_scattering(const VertexCondition& condition, std::size_t degree,
                                          double k) {
  if (!(k > 0.0)) throw Error(Errc::NonpositiveK, "k must be positive");
  if (degree == 0) throw Error(Errc::InvalidArgument, "degree must be positive");
  const auto d = static_cast<Eigen::Index>(degree);
  if (condition.is_dirichlet()) {
    if (degree != 1) throw Error(Errc::DirichletAtInternalVertex, "Dirichlet needs degree 1");
    return Eigen::MatrixXcd::Constant(1, 1, -1.0);
  }
  const cdouble weight = 2.0 / cdouble(static_cast<double>(degree), condition.alpha() / k);
  Eigen::MatrixXcd sigma = Eigen::MatrixXcd::Constant(d, d, weight);
  sigma.diagonal().array() -= 1.0;
  return sigma;
}

struct SecularSystem {
  Eigen::MatrixXcd scattering;   // S, 2E x 2E, row = outgoing bond, column = incoming bond
  Eigen::VectorXd bond_lengths;  // diagonal of L
  int phase_power = 0;           // C = i^phase_power
};

namespace detail {

inline Eigen::MatrixXcd assemble_scattering(const MetricGraph& g, double k) {
  const BondIndex bonds(g);
  const auto n = static_cast<Eigen::Index>(bonds.size());
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const auto& ends = g.ends_at(v);
    const Eigen::MatrixXcd sigma = vertex_scattering(g.vertex(v).condition, ends.size(), k);
    for (std::size_t i = 0; i < ends.size(); ++i)
      for (std::size_t j = 0; j < ends.size(); ++j)
        S(static_cast<Eigen::Index>(BondIndex::outgoing(ends[j])),
          static_cast<Eigen::Index>(BondIndex::incoming(ends[i]))) =
            sigma(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  }
  return S;
}

inline cdouble i_power(int p) {
  switch (((p % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

}  // namespace detail

// Evaluates F and Phi for one graph. The scattering matrix is cached when it
// does not depend on k.
class SecularFunction {
 public:
  explicit SecularFunction(const MetricGraph& g)
      : graph_(g), k_independent_(g.nk_dirichlet_only()) {
    bond_lengths_.resize(static_cast<Eigen::Index>(2 * g.edge_count()));
    for (std::size_t e = 0; e < g.edge_count(); ++e)
      bond_lengths_(2 * e) = bond_lengths_(2 * e + 1) = g.edge(e).length;
    if (k_independent_) fixed_S_ = detail::assemble_scattering(g, 1.0);
    phase_power_ = calibrate_phase();
  }

  const MetricGraph& graph() const noexcept { return graph_; }
  bool k_independent() const noexcept { return k_independent_; }
  int phase_power() const noexcept { return phase_power_; }

  Eigen::MatrixXcd scattering(double k) const {
    if (!(k > 0.0)) throw Error(Errc::NonpositiveK, "k must be positive");
    return k_independent_ ? fixed_S_ : detail::assemble_scattering(graph_, k);
  }

  SecularSystem system(double k) const { return {scattering(k), bond_lengths_, phase_power_}; }

  // exp(-ikL/2) - exp(ikL/2) S; singular exactly at eigenvalues k^2.
  Eigen::MatrixXcd secular_matrix(double k) const {
    return phase_matrix(k * bond_lengths_, scattering(k));
  }

  cdouble value(double k) const {
    return detail::i_power(phase_power_) * secular_matrix(k).partialPivLu().determinant();
  }

  // Phi(kappa); requires a k-independent S.
  double torus_value(std::span<const double> kappa) const {
    require_torus(kappa.size());
    Eigen::VectorXd phases(bond_lengths_.size());
    for (std::size_t e = 0; e < kappa.size(); ++e) phases(2 * e) = phases(2 * e + 1) = kappa[e];
    return (detail::i_power(phase_power_) *
            phase_matrix(phases, fixed_S_).partialPivLu().determinant())
        .real();
  }

  void require_torus(std::size_t dims) const {
    if (!k_independent_)
      throw Error(Errc::RobinNotSupportedOnTorus,
                  "the torus function needs NK/Dirichlet conditions only");
    if (dims != graph_.edge_count())
      throw Error(Errc::InvalidArgument, "torus point dimension must equal the edge count");
  }

  const Eigen::MatrixXcd& fixed_scattering() const { return fixed_S_; }

 private:
  static Eigen::MatrixXcd phase_matrix(const Eigen::VectorXd& phases, const Eigen::MatrixXcd& S) {
    const Eigen::Index n = S.rows();
    Eigen::MatrixXcd A(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const cdouble up = std::polar(1.0, 0.5 * phases(r));
      A.row(r) = -up * S.row(r);
      A(r, r) += std::conj(up);
    }
    return A;
  }

  // Choose p in {0,1,2,3} minimising the worst relative imaginary part over
  // a fixed scan of k.
  int calibrate_phase() const {
    std::array<double, 4> worst{};
    const double total = graph_.total_length();
    for (int j = 1; j <= 24; ++j) {
      const double k = (0.37 + 1.13 * j) * std::numbers::pi / total;
      const cdouble det = secular_matrix(k).partialPivLu().determinant();
      for (int p = 0; p < 4; ++p) {
        const cdouble f = detail::i_power(p) * det;
        worst[static_cast<std::size_t>(p)] =
            std::max(worst[static_cast<std::size_t>(p)], std::abs(f.imag()) / (1.0 + std::abs(f)));
      }
    }
    int best = 0;
    for (int p = 1; p < 4; ++p)
      if (worst[static_cast<std::size_t>(p)] < worst[static_cast<std::size_t>(best)] - 1e-14) best = p;
    return best;
  }

  MetricGraph graph_;
  bool k_independent_;
  Eigen::VectorXd bond_lengths_;
  Eigen::MatrixXcd fixed_S_;
  int phase_power_ = 0;
};

inline SecularSystem assemble_secular_system(const MetricGraph& g, double k) {
  return SecularFunction(g).system(k);
}

// F(k); imaginary part vanishes to rounding for NK/Dirichlet graphs.
inline cdouble secular_value(const MetricGraph& g, double k) {
  if (!(k > 0.0)) throw Error(Errc::NonpositiveK, "k must be positive");
  return SecularFunction(g).value(k);
}

inline double torus_value(const MetricGraph& g, std::span<const double> kappa) {
  return SecularFunction(g).torus_value(kappa);
}

// ---------------------------------------------------------------------------
// Closed forms for the three-edge star and mandarin.

inline double star3_dirichlet_closed_form(const std::array<double, 3>& kappa) {
  double sum = 0.0;
  for (std::size_t j = 0; j < 3; ++j)
    sum += std::sin(kappa[j]) * std::sin(kappa[(j + 1) % 3]) * std::cos(kappa[(j + 2) % 3]);
  return sum;
}

inline double star3_neumann_closed_form(const std::array<double, 3>& kappa) {
  double sum = 0.0;
  for (std::size_t j = 0; j < 3; ++j)
    sum += std::cos(kappa[j]) * std::cos(kappa[(j + 1) % 3]) * std::sin(kappa[(j + 2) % 3]);
  return sum;
}

inline double mandarin3_closed_form(const std::array<double, 3>& kappa) {
  const std::array<double, 3> half{0.5 * kappa[0], 0.5 * kappa[1], 0.5 * kappa[2]};
  return star3_dirichlet_closed_form(half) * star3_neumann_closed_form(half);
}

struct ProportionalityFit {
  double constant = 0.0;
  // max |a - c b| / max |a|
  double relative_residual = 0.0;
};

// Least-squares c with a ~ c b.
inline ProportionalityFit fit_proportionality(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw Error(Errc::InvalidArgument, "fit needs two equally sized non-empty samples");
  double ab = 0.0, bb = 0.0, amax = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    bb += b[i] * b[i];
    amax = std::max(amax, std::abs(a[i]));
  }
  ProportionalityFit fit;
  fit.constant = bb > 0.0 ? ab / bb : 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - fit.constant * b[i]));
  fit.relative_residual = amax > 0.0 ? worst / amax : worst;
  return fit;
}

// ---------------------------------------------------------------------------
// Root finding on the secular determinant alone. Kept independent of the
// direct vertex system so the two routes can be compared.

struct SecularRoot {
  double k = 0.0;
  int multiplicity = 0;
  double residual = 0.0;  // smallest singular value of the secular matrix
};

namespace detail {

inline Eigen::VectorXd secular_singular_values(const SecularFunction& f, double k) {
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(f.secular_matrix(k)).singularValues();
}

template <class F>
double golden_section_minimum(F&& objective, double lo, double hi, double tolerance) {
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  while (hi - lo > tolerance) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

}  // namespace detail

// Roots of F in [k_lo, k_hi]: local minima of the smallest singular value on
// a uniform grid refined by golden section, plus sign changes of the real
// part when F is real.
inline std::vector<SecularRoot> secular_roots(const MetricGraph& g, double k_lo, double k_hi,
                                              double null_threshold = 1e-8) {
  if (!(k_lo > 0.0) || !(k_hi > k_lo)) throw Error(Errc::NonpositiveK, "need 0 < k_lo < k_hi");
  const SecularFunction f(g);
  const double step = std::min(std::numbers::pi / (4.0 * g.total_length()), 0.01);
  const auto n = static_cast<std::size_t>(std::ceil((k_hi - k_lo) / step));
  std::vector<double> grid(n + 1), smin(n + 1), re(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    grid[i] = std::min(k_lo + static_cast<double>(i) * step, k_hi);
    const Eigen::VectorXd sv = detail::secular_singular_values(f, grid[i]);
    smin[i] = sv(sv.size() - 1);
    re[i] = f.value(grid[i]).real();
  }

  std::vector<double> candidates;
  auto sigma_min = [&](double k) {
    const Eigen::VectorXd sv = detail::secular_singular_values(f, k);
    return sv(sv.size() - 1);
  };
  for (std::size_t i = 0; i <= n; ++i) {
    const bool left = i == 0 || smin[i] <= smin[i - 1];
    const bool right = i == n || smin[i] < smin[i + 1];
    if (!(left && right)) continue;
    const double lo = i == 0 ? grid[0] : grid[i - 1];
    const double hi = i == n ? grid[n] : grid[i + 1];
    const double k = detail::golden_section_minimum(sigma_min, lo, hi, 1e-14 * (1.0 + hi));
    if (sigma_min(k) < null_threshold) candidates.push_back(k);
  }
  if (f.k_independent()) {
    auto real_part = [&](double k) { return f.value(k).real(); };
    for (std::size_t i = 0; i < n; ++i) {
      if (re[i] == 0.0 || re[i] * re[i + 1] >= 0.0) continue;
      double lo = grid[i], hi = grid[i + 1], flo = re[i];
      while (hi - lo > 1e-15 * (1.0 + hi)) {
        const double mid = 0.5 * (lo + hi);
        const double fm = real_part(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      candidates.push_back(0.5 * (lo + hi));
    }
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<SecularRoot> roots;
  for (double k : candidates) {
    if (k < k_lo || k > k_hi) continue;
    if (!roots.empty() && std::abs(roots.back().k - k) < 1e-8 * (1.0 + k)) continue;
    const Eigen::VectorXd sv = detail::secular_singular_values(f, k);
    // The matrix can vanish entirely (trivial vertices), so sv(0) alone is no scale.
    const double scale = std::max(1.0, sv(0));
    int mult = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) < null_threshold * scale) ++mult;
    roots.push_back({k, std::max(mult, 1), sv(sv.size() - 1)});
  }
  return roots;
}

}  // namespace qgraph
