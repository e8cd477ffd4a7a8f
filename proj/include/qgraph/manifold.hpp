#pragma once

// The secular manifold: zero set of the torus function Phi on [0, 2 pi)^E for
// graphs with NK and Dirichlet vertices.
//
// Phi is a trigonometric polynomial of degree at most one in each kappa_e
// (after the half-angle prefactor):
//
//   Phi(kappa) = Re sum_m c_m exp(i sum_e (m_e - 1) kappa_e),  m in {0,1,2}^E,
//
// with c_m collected from the principal minors of S through
// det(I - Z S) = sum_B (-1)^|B| prod_{b in B} z_b det S[B,B]. The grid is
// sampled through this expansion and checked against the determinant in the
// tests.
//
// Zero cells are grid cells whose corners change sign. Their gradient comes
// from corner differences; cells with a small gradient are singular, and
// their neighbours are left out of the component labelling so that sheets
// touching at conical points are not merged.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qgraph/error.hpp"
#include "qgraph/metric_graph.hpp"
#include "qgraph/secular.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

class TorusPolynomial {
 public:
  explicit TorusPolynomial(const SecularFunction& f) : dims_(f.graph().edge_count()) {
    f.require_torus(dims_);
    std::size_t terms = 1;
    for (std::size_t e = 0; e < dims_; ++e) terms *= 3;
    coeffs_.assign(terms, cdouble(0.0, 0.0));
    const Eigen::MatrixXcd& S = f.fixed_scattering();
    const auto bonds = static_cast<std::size_t>(S.rows());
    const cdouble prefactor = detail::i_power(f.phase_power());
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << bonds); ++mask) {
      std::vector<Eigen::Index> members;
      std::size_t term = 0, stride = 1;
      std::vector<int> exponent(dims_, 0);
      for (std::size_t b = 0; b < bonds; ++b)
        if (mask >> b & 1U) {
          members.push_back(static_cast<Eigen::Index>(b));
          ++exponent[BondIndex::edge(b)];
        }
      for (std::size_t e = 0; e < dims_; ++e, stride *= 3)
        term += static_cast<std::size_t>(exponent[e]) * stride;
      cdouble minor(1.0, 0.0);
      if (!members.empty()) {
        const auto n = static_cast<Eigen::Index>(members.size());
        Eigen::MatrixXcd sub(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < n; ++j) sub(i, j) = S(members[static_cast<std::size_t>(i)],
                                                             members[static_cast<std::size_t>(j)]);
        minor = sub.determinant();
      }
      coeffs_[term] += prefactor * (members.size() % 2 == 0 ? minor : -minor);
    }
  }

  std::size_t dims() const noexcept { return dims_; }
  // Coefficient of exp(i sum (m_e - 1) kappa_e), m_e = (term / 3^e) mod 3.
  const std::vector<cdouble>& coefficients() const noexcept { return coeffs_; }

  double value(std::span<const double> kappa) const {
    double out = 0.0;
    for_each_term(kappa, [&](const cdouble& c, const cdouble& w, const std::vector<int>&) {
      out += (c * w).real();
    });
    return out;
  }

  std::vector<double> gradient(std::span<const double> kappa) const {
    std::vector<double> grad(dims_, 0.0);
    for_each_term(kappa, [&](const cdouble& c, const cdouble& w, const std::vector<int>& p) {
      const cdouble cw = c * w;
      for (std::size_t e = 0; e < dims_; ++e) grad[e] += -cw.imag() * p[e];
    });
    return grad;
  }

  Eigen::MatrixXd hessian(std::span<const double> kappa) const {
    const auto n = static_cast<Eigen::Index>(dims_);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for_each_term(kappa, [&](const cdouble& c, const cdouble& w, const std::vector<int>& p) {
      const double re = (c * w).real();
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
          H(a, b) -= re * p[static_cast<std::size_t>(a)] * p[static_cast<std::size_t>(b)];
    });
    return H;
  }

 private:
  template <class F>
  void for_each_term(std::span<const double> kappa, F&& f) const {
    if (kappa.size() != dims_) throw Error(Errc::InvalidArgument, "torus point dimension");
    std::vector<int> power(dims_);
    for (std::size_t term = 0; term < coeffs_.size(); ++term) {
      if (coeffs_[term] == cdouble(0.0, 0.0)) continue;
      double phase = 0.0;
      std::size_t rest = term;
      for (std::size_t e = 0; e < dims_; ++e, rest /= 3) {
        power[e] = static_cast<int>(rest % 3) - 1;
        phase += power[e] * kappa[e];
      }
      f(coeffs_[term], std::polar(1.0, phase), power);
    }
  }

  std::size_t dims_;
  std::vector<cdouble> coeffs_;
};

struct ZeroCell {
  std::size_t cell = 0;             // linear index of the lowest corner
  std::vector<double> gradient;     // corner-difference estimate at the centre
  double gradient_norm = 0.0;
  bool singular = false;
  bool excluded = false;            // singular or next to a singular cell
  int component = -1;               // union-find label, -1 when unlabeled
  int sign = 0;                     // common gradient sign, 0 when unlabeled
};

class TorusField {
 public:
  TorusField(std::size_t dims, std::size_t resolution, std::vector<double> values)
      : dims_(dims), resolution_(resolution), values_(std::move(values)) {
    strides_.resize(dims_);
    std::size_t stride = 1;
    for (std::size_t e = 0; e < dims_; ++e, stride *= resolution_) strides_[e] = stride;
    for (double v : values_) max_abs_ = std::max(max_abs_, std::abs(v));
  }

  std::size_t dims() const noexcept { return dims_; }
  std::size_t resolution() const noexcept { return resolution_; }
  double spacing() const noexcept { return 2.0 * std::numbers::pi / static_cast<double>(resolution_); }
  std::size_t point_count() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double max_abs() const noexcept { return max_abs_; }

  std::vector<std::size_t> unflatten(std::size_t index) const {
    std::vector<std::size_t> out(dims_);
    for (std::size_t e = 0; e < dims_; ++e, index /= resolution_) out[e] = index % resolution_;
    return out;
  }
  std::size_t flatten(const std::vector<std::size_t>& idx) const {
    std::size_t out = 0;
    for (std::size_t e = 0; e < dims_; ++e) out += (idx[e] % resolution_) * strides_[e];
    return out;
  }
  // Neighbour of `index` along axis e by +-1 with wraparound.
  std::size_t shifted(std::size_t index, std::size_t e, int delta) const {
    const std::size_t i = index / strides_[e] % resolution_;
    const auto n = static_cast<long>(resolution_);
    const auto j = static_cast<std::size_t>((static_cast<long>(i) + delta + n) % n);
    return index - i * strides_[e] + j * strides_[e];
  }
  // Corner c (bit e set means +1 along axis e) of a cell.
  std::size_t corner(std::size_t cell, std::size_t c) const {
    std::size_t index = cell;
    for (std::size_t e = 0; e < dims_; ++e)
      if (c >> e & 1U) index = shifted(index, e, 1);
    return index;
  }
  std::vector<double> point(std::size_t index) const {
    std::vector<double> kappa(dims_);
    const auto idx = unflatten(index);
    for (std::size_t e = 0; e < dims_; ++e) kappa[e] = spacing() * static_cast<double>(idx[e]);
    return kappa;
  }
  std::vector<double> cell_centre(std::size_t cell) const {
    std::vector<double> kappa = point(cell);
    for (double& x : kappa) x += 0.5 * spacing();
    return kappa;
  }
  std::size_t cell_containing(std::span<const double> kappa) const {
    if (kappa.size() != dims_) throw Error(Errc::InvalidArgument, "torus point dimension");
    std::vector<std::size_t> idx(dims_);
    for (std::size_t e = 0; e < dims_; ++e) {
      double x = std::fmod(kappa[e], 2.0 * std::numbers::pi);
      if (x < 0.0) x += 2.0 * std::numbers::pi;
      idx[e] = static_cast<std::size_t>(std::floor(x / spacing())) % resolution_;
    }
    return flatten(idx);
  }

  std::vector<ZeroCell>& zero_cells() noexcept { return zero_cells_; }
  const std::vector<ZeroCell>& zero_cells() const noexcept { return zero_cells_; }
  const ZeroCell* find_zero_cell(std::size_t cell) const {
    auto it = std::lower_bound(zero_cells_.begin(), zero_cells_.end(), cell,
                               [](const ZeroCell& z, std::size_t c) { return z.cell < c; });
    return it != zero_cells_.end() && it->cell == cell ? &*it : nullptr;
  }
  ZeroCell* find_zero_cell(std::size_t cell) {
    return const_cast<ZeroCell*>(std::as_const(*this).find_zero_cell(cell));
  }

  // Thresholds used by classify_points.
  double tau_zero = 0.0;
  double tau_grad = 0.0;
  double tau_mix = 0.0;
  bool classified = false;
  std::size_t component_count = 0;
  bool degenerate = false;
  // Multiplicity cross-check of singular cells.
  std::size_t singular_checked = 0;
  std::size_t singular_confirmed = 0;

 private:
  std::size_t dims_;
  std::size_t resolution_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
  double max_abs_ = 0.0;
  std::vector<ZeroCell> zero_cells_;
};

inline constexpr std::size_t max_torus_dimension = 4;
inline constexpr std::size_t max_grid_points = std::size_t{1} << 27;

// Phi on the regular grid kappa_j = 2 pi j / resolution.
inline TorusField sample_field(const MetricGraph& g, std::size_t resolution, unsigned threads = 1) {
  if (g.has_robin())
    throw Error(Errc::RobinNotSupportedOnTorus, "the torus function needs NK/Dirichlet only");
  const std::size_t E = g.edge_count();
  if (E > max_torus_dimension)
    throw Error(Errc::DimensionTooLarge, std::to_string(E) + " edges; at most 4 supported");
  if (resolution < 16) throw Error(Errc::InvalidArgument, "resolution must be at least 16");
  std::size_t total = 1;
  std::vector<std::size_t> stride(E), pow3(E + 1, 1);
  for (std::size_t e = 0; e < E; ++e) {
    if (total > max_grid_points / resolution)
      throw Error(Errc::DimensionTooLarge, "grid too large");
    stride[e] = total;
    total *= resolution;
    pow3[e + 1] = 3 * pow3[e];
  }

  const SecularFunction f(g);
  const TorusPolynomial poly(f);
  const double h = 2.0 * std::numbers::pi / static_cast<double>(resolution);
  // w[p][j] = exp(i (p - 1) j h)
  std::array<std::vector<cdouble>, 3> w;
  for (std::size_t p = 0; p < 3; ++p) {
    w[p].resize(resolution);
    for (std::size_t j = 0; j < resolution; ++j)
      w[p][j] = std::polar(1.0, (static_cast<double>(p) - 1.0) * h * static_cast<double>(j));
  }

  std::vector<double> values(total);
  // Contracts the coefficient tensor against axis `axis` at index j; the
  // tensor holds 3^(axis+1) entries with axis 0 fastest.
  auto contract = [&](const cdouble* tensor, std::size_t axis, std::size_t j, cdouble* out) {
    const std::size_t rest = pow3[axis];
    for (std::size_t r = 0; r < rest; ++r)
      out[r] = tensor[r] * w[0][j] + tensor[r + rest] * w[1][j] + tensor[r + 2 * rest] * w[2][j];
  };
  auto sweep = [&](auto&& self, const cdouble* tensor, std::size_t axis, std::size_t offset,
                   std::vector<std::vector<cdouble>>& buffers) -> void {
    cdouble* out = buffers[axis].data();
    for (std::size_t j = 0; j < resolution; ++j) {
      contract(tensor, axis, j, out);
      if (axis == 0)
        values[offset + j] = out[0].real();
      else
        self(self, out, axis - 1, offset + j * stride[axis], buffers);
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    std::vector<std::vector<cdouble>> buffers(E);
    for (std::size_t a = 0; a < E; ++a) buffers[a].resize(pow3[a]);
    const std::size_t last = E - 1;
    for (std::size_t j = next++; j < resolution; j = next++) {
      contract(poly.coefficients().data(), last, j, buffers[last].data());
      if (last == 0)
        values[j] = buffers[0][0].real();
      else
        sweep(sweep, buffers[last].data(), last - 1, j * stride[last], buffers);
    }
  };
  const unsigned count = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(resolution)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return TorusField(E, resolution, std::move(values));
}

struct ClassifyOptions {
  // Zero cells with gradient norm below grad_factor * max|Phi| * h are singular.
  double grad_factor = 2.0;
  double zero_relative = 1e-12;
  // Singular cells checked against the direct system (0 disables).
  std::size_t max_checks = 24;
  // Relative nullity threshold at the refined point. Near zeros of high
  // order the refinement stalls about 1e-5 away from the exact point, so
  // this asks for a nearby degenerate realisation rather than an exact one.
  double multiplicity_threshold = 1e-3;
};

namespace detail {

// Gauss-Newton on (Phi, grad Phi) = 0 starting at kappa. Iterates until the
// step stalls: at zeros of high order the residual becomes tiny long before
// the point is accurate.
inline bool refine_singular_point(const TorusPolynomial& poly, std::vector<double>& kappa,
                                  double scale) {
  const auto n = static_cast<Eigen::Index>(kappa.size());
  auto residual = [&](Eigen::VectorXd& r, std::vector<double>& grad) {
    grad = poly.gradient(kappa);
    r.resize(n + 1);
    r(0) = poly.value(kappa);
    for (Eigen::Index e = 0; e < n; ++e) r(e + 1) = grad[static_cast<std::size_t>(e)];
  };
  Eigen::VectorXd r;
  std::vector<double> grad;
  for (int iter = 0; iter < 300; ++iter) {
    residual(r, grad);
    Eigen::MatrixXd J(n + 1, n);
    for (Eigen::Index e = 0; e < n; ++e) J(0, e) = grad[static_cast<std::size_t>(e)];
    J.bottomRows(n) = poly.hessian(kappa);
    // The Hessian degenerates near zeros of high order; keep its small
    // directions instead of truncating them.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J.rows(), J.cols());
    cod.setThreshold(1e-30);
    cod.compute(J);
    const Eigen::VectorXd step = cod.solve(-r);
    for (Eigen::Index e = 0; e < n; ++e) kappa[static_cast<std::size_t>(e)] += step(e);
    if (step.norm() < 1e-14) break;
  }
  residual(r, grad);
  return r.norm() <= 1e-8 * scale;
}

}  // namespace detail

// Finds zero cells, estimates gradients, flags singular cells and their
// neighbours, and cross-checks a sample of singular cells: the graph with
// lengths kappa mod 2 pi must have 1 as a multiple eigenvalue there.
inline void classify_points(TorusField& field, const MetricGraph& g,
                            const ClassifyOptions& opt = {}) {
  const std::size_t E = field.dims();
  const std::size_t corners = std::size_t{1} << E;
  const double h = field.spacing();
  const double M = field.max_abs();
  field.tau_zero = opt.zero_relative * M;
  field.tau_grad = opt.grad_factor * M * h;
  field.tau_mix = field.tau_grad;
  const auto& values = field.values();

  auto& cells = field.zero_cells();
  cells.clear();
  std::vector<double> corner_values(corners);
  for (std::size_t cell = 0; cell < field.point_count(); ++cell) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, near = lo;
    for (std::size_t c = 0; c < corners; ++c) {
      const double v = values[field.corner(cell, c)];
      corner_values[c] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      near = std::min(near, std::abs(v));
    }
    if (!((lo < 0.0 && hi > 0.0) || near <= field.tau_zero)) continue;
    ZeroCell z;
    z.cell = cell;
    z.gradient.assign(E, 0.0);
    const double weight = 2.0 / (static_cast<double>(corners) * h);
    for (std::size_t c = 0; c < corners; ++c)
      for (std::size_t e = 0; e < E; ++e)
        z.gradient[e] += (c >> e & 1U ? weight : -weight) * corner_values[c];
    double norm2 = 0.0;
    for (double x : z.gradient) norm2 += x * x;
    z.gradient_norm = std::sqrt(norm2);
    z.singular = z.gradient_norm < field.tau_grad;
    z.excluded = z.singular;
    cells.push_back(std::move(z));
  }

  // Exclude every zero cell within one cell (any direction) of a singular one.
  std::size_t neighbourhood = 1;
  for (std::size_t e = 0; e < E; ++e) neighbourhood *= 3;
  for (const ZeroCell& z : std::vector<ZeroCell>(cells)) {
    if (!z.singular) continue;
    for (std::size_t code = 0; code < neighbourhood; ++code) {
      std::size_t index = z.cell, rest = code;
      for (std::size_t e = 0; e < E; ++e, rest /= 3)
        if (rest % 3 != 1) index = field.shifted(index, e, static_cast<int>(rest % 3) - 1);
      if (ZeroCell* other = field.find_zero_cell(index)) other->excluded = true;
    }
  }

  field.singular_checked = field.singular_confirmed = 0;
  std::vector<const ZeroCell*> singular;
  for (const ZeroCell& z : cells)
    if (z.singular) singular.push_back(&z);
  if (opt.max_checks > 0 && !singular.empty()) {
    const TorusPolynomial poly{SecularFunction(g)};
    const std::size_t checks = std::min(opt.max_checks, singular.size());
    for (std::size_t i = 0; i < checks; ++i) {
      const ZeroCell& z = *singular[i * singular.size() / checks];
      std::vector<double> kappa = field.cell_centre(z.cell);
      ++field.singular_checked;
      detail::refine_singular_point(poly, kappa, std::max(1.0, M));
      std::vector<double> lengths(E);
      for (std::size_t e = 0; e < E; ++e) {
        double x = std::fmod(kappa[e], 2.0 * std::numbers::pi);
        if (x <= 1e-12) x += 2.0 * std::numbers::pi;
        lengths[e] = x;
      }
      if (multiplicity_at(with_lengths(g, lengths), 1.0, opt.multiplicity_threshold) >= 2)
        ++field.singular_confirmed;
    }
  }
  field.classified = true;
}

struct ComponentResult {
  std::size_t count = 0;
  // Union-find has no meaning for isolated points on a one-dimensional torus.
  bool degenerate = false;
  std::vector<std::size_t> cells_per_component;
};

// Union-find over face-adjacent zero cells that are neither singular nor next
// to a singular cell, with wraparound.
inline ComponentResult connected_components(TorusField& field) {
  if (!field.classified) throw Error(Errc::InvalidArgument, "classify the field first");
  auto& cells = field.zero_cells();
  std::vector<std::size_t> parent(cells.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto position = [&](const ZeroCell* z) { return static_cast<std::size_t>(z - cells.data()); };
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].excluded) continue;
    for (std::size_t e = 0; e < field.dims(); ++e) {
      const ZeroCell* other = field.find_zero_cell(field.shifted(cells[i].cell, e, 1));
      if (other == nullptr || other->excluded) continue;
      const std::size_t a = find(i), b = find(position(other));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  ComponentResult result;
  std::map<std::size_t, int> label;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].excluded) {
      cells[i].component = -1;
      continue;
    }
    auto [it, inserted] = label.emplace(find(i), static_cast<int>(label.size()));
    if (inserted) result.cells_per_component.push_back(0);
    cells[i].component = it->second;
    ++result.cells_per_component[static_cast<std::size_t>(it->second)];
  }
  result.count = label.size();
  result.degenerate = field.dims() == 1;
  field.component_count = result.count;
  field.degenerate = result.degenerate;
  return result;
}

struct SignAgreement {
  std::size_t labeled_cells = 0;
  std::size_t agreeing_cells = 0;
  // Majority gradient sign of each component.
  std::vector<int> component_sign;
  double fraction() const {
    return labeled_cells == 0 ? 1.0
                              : static_cast<double>(agreeing_cells) /
                                    static_cast<double>(labeled_cells);
  }
};

// Assigns each labeled cell the common sign of its gradient components and
// compares the two-colouring with the union-find labels.
inline SignAgreement gradient_sign_labels(TorusField& field) {
  if (!field.classified) throw Error(Errc::InvalidArgument, "classify the field first");
  SignAgreement out;
  out.component_sign.assign(field.component_count, 0);
  std::vector<std::array<std::size_t, 2>> votes(field.component_count, {0, 0});
  for (ZeroCell& z : field.zero_cells()) {
    z.sign = 0;
    if (z.excluded || z.component < 0) continue;
    const auto [lo, hi] = std::minmax_element(z.gradient.begin(), z.gradient.end());
    if (*lo < -field.tau_mix && *hi > field.tau_mix)
      throw Error(Errc::MixedSignAtSmoothCell,
                  "gradient components of both signs at cell " + std::to_string(z.cell));
    const double sum = std::accumulate(z.gradient.begin(), z.gradient.end(), 0.0);
    z.sign = sum >= 0.0 ? 1 : -1;
    ++votes[static_cast<std::size_t>(z.component)][z.sign > 0 ? 1 : 0];
    ++out.labeled_cells;
  }
  for (std::size_t c = 0; c < votes.size(); ++c)
    out.component_sign[c] = votes[c][1] >= votes[c][0] ? 1 : -1;
  for (const ZeroCell& z : field.zero_cells())
    if (z.sign != 0 && z.sign == out.component_sign[static_cast<std::size_t>(z.component)])
      ++out.agreeing_cells;
  return out;
}

// ---------------------------------------------------------------------------
// Output

// "kappa1 ... kappaE phi" rows after a header.
inline void write_field(std::ostream& os, const TorusField& field) {
  const auto old_precision = os.precision(12);
  for (std::size_t e = 0; e < field.dims(); ++e) os << "kappa" << e + 1 << '\t';
  os << "phi\n";
  for (std::size_t i = 0; i < field.point_count(); ++i) {
    for (double x : field.point(i)) os << x << '\t';
    os << field.values()[i] << '\n';
  }
  os.precision(old_precision);
}

struct Mesh {
  std::vector<std::array<double, 3>> vertices;
  // Triangles (0-based vertex indices) grouped by component label + 1;
  // group 0 holds cells near singular points.
  std::map<int, std::vector<std::array<std::size_t, 3>>> groups;

  std::size_t triangle_count() const {
    std::size_t n = 0;
    for (const auto& [g, tris] : groups) n += tris.size();
    return n;
  }
};

// Marching tetrahedra on the periodic grid over the window
// [origin, origin + 2 pi)^3; the origin is snapped to the grid.
inline Mesh build_mesh(const TorusField& field, std::array<double, 3> origin = {0.0, 0.0, 0.0}) {
  if (field.dims() != 3) throw Error(Errc::DimensionNot3, "meshes need a three-dimensional torus");
  const std::size_t n = field.resolution();
  const double h = field.spacing();
  std::array<long, 3> shift{};
  for (std::size_t e = 0; e < 3; ++e) shift[e] = std::lround(origin[e] / h);
  auto wrapped = [&](const std::array<std::size_t, 3>& u) {
    std::vector<std::size_t> idx(3);
    for (std::size_t e = 0; e < 3; ++e) {
      const long x = (static_cast<long>(u[e]) + shift[e]) % static_cast<long>(n);
      idx[e] = static_cast<std::size_t>(x < 0 ? x + static_cast<long>(n) : x);
    }
    return field.flatten(idx);
  };
  auto key_of = [&](const std::array<std::size_t, 3>& u) {
    return (u[2] * (n + 1) + u[1]) * (n + 1) + u[0];
  };

  Mesh mesh;
  std::unordered_map<std::uint64_t, std::size_t> vertex_of_edge;
  auto edge_vertex = [&](const std::array<std::size_t, 3>& a, const std::array<std::size_t, 3>& b) {
    std::size_t ka = key_of(a), kb = key_of(b);
    const auto& pa = ka < kb ? a : b;
    const auto& pb = ka < kb ? b : a;
    if (kb < ka) std::swap(ka, kb);
    const std::uint64_t key = static_cast<std::uint64_t>(ka) * (n + 1) * (n + 1) * (n + 1) + kb;
    if (auto it = vertex_of_edge.find(key); it != vertex_of_edge.end()) return it->second;
    const double fa = field.values()[wrapped(pa)], fb = field.values()[wrapped(pb)];
    const double t = fa == fb ? 0.5 : fa / (fa - fb);
    std::array<double, 3> x{};
    for (std::size_t e = 0; e < 3; ++e)
      x[e] = h * (static_cast<double>(shift[e]) + static_cast<double>(pa[e]) +
                  t * (static_cast<double>(pb[e]) - static_cast<double>(pa[e])));
    mesh.vertices.push_back(x);
    vertex_of_edge.emplace(key, mesh.vertices.size() - 1);
    return mesh.vertices.size() - 1;
  };

  static constexpr std::array<std::array<std::size_t, 3>, 6> orders{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::array<std::size_t, 3> u{};
  for (u[2] = 0; u[2] < n; ++u[2])
    for (u[1] = 0; u[1] < n; ++u[1])
      for (u[0] = 0; u[0] < n; ++u[0]) {
        const std::size_t cell = wrapped(u);
        const ZeroCell* z = field.find_zero_cell(cell);
        if (z == nullptr) continue;
        const int group = z->component + 1;
        for (const auto& order : orders) {
          std::array<std::array<std::size_t, 3>, 4> tet{};
          tet[0] = u;
          for (std::size_t s = 1; s < 4; ++s) {
            tet[s] = tet[s - 1];
            ++tet[s][order[s - 1]];
          }
          std::array<bool, 4> inside{};
          int count = 0;
          for (std::size_t s = 0; s < 4; ++s) {
            inside[s] = field.values()[wrapped(tet[s])] > 0.0;
            count += inside[s];
          }
          if (count == 0 || count == 4) continue;
          std::vector<std::size_t> in, out;
          for (std::size_t s = 0; s < 4; ++s) (inside[s] ? in : out).push_back(s);
          auto& tris = mesh.groups[group];
          if (in.size() == 1 || out.size() == 1) {
            const auto& lone = in.size() == 1 ? in : out;
            const auto& rest = in.size() == 1 ? out : in;
            tris.push_back({edge_vertex(tet[lone[0]], tet[rest[0]]),
                            edge_vertex(tet[lone[0]], tet[rest[1]]),
                            edge_vertex(tet[lone[0]], tet[rest[2]])});
          } else {
            const std::size_t a = edge_vertex(tet[in[0]], tet[out[0]]);
            const std::size_t b = edge_vertex(tet[in[0]], tet[out[1]]);
            const std::size_t c = edge_vertex(tet[in[1]], tet[out[1]]);
            const std::size_t d = edge_vertex(tet[in[1]], tet[out[0]]);
            tris.push_back({a, b, c});
            tris.push_back({a, c, d});
          }
        }
      }
  return mesh;
}

// Plain-text polygon file: "v x y z" lines, then "g component_<n>" groups of
// 1-based "f i j k" lines.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  const auto old_precision = os.precision(10);
  for (const auto& v : mesh.vertices) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& [group, tris] : mesh.groups) {
    os << "g component_" << group << '\n';
    for (const auto& t : tris) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  os.precision(old_precision);
}

inline Mesh export_mesh(const TorusField& field, const std::string& path,
                        std::array<double, 3> origin = {0.0, 0.0, 0.0}) {
  Mesh mesh = build_mesh(field, origin);
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
  write_mesh(out, mesh);
  if (!out) throw Error(Errc::IoError, "write to '" + path + "' failed");
  return mesh;
}

}  // namespace qgraph
