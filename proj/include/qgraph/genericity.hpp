#pragma once

// Numerical checks of spectral genericity: simplicity and vertex
// non-vanishing under random length perturbations, eigenvalue interlacing
// when one vertex coefficient changes, point picking away from nodal sets,
// and continuation of an eigenvalue along the leaf-angle path on the torus.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "qgraph/eigenmode.hpp"
#include "qgraph/error.hpp"
#include "qgraph/metric_graph.hpp"
#include "qgraph/secular.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

// Gap below which two neighbouring eigenvalues count as one.
inline double simplicity_threshold(double lambda, double relative = 1e-6) {
  return relative * (1.0 + std::abs(lambda));
}

struct GenericityReport {
  struct Incident {
    std::size_t index;
    std::string vertex;
  };
  struct LoopState {
    std::size_t index;
    LoopDescriptor loop;
  };

  std::string signature;
  std::size_t examined = 0;
  std::vector<double> eigenvalues;
  double min_spectral_gap = std::numeric_limits<double>::infinity();
  // Smallest gap minus its threshold; positive iff every gap certifies.
  double gap_margin = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> nonvanishing;
  std::vector<Incident> vanishing_incidents;
  std::vector<LoopState> loop_states;
  std::vector<std::size_t> ambiguous;

  bool simple = true;                // clause (i)
  bool vertices_nonvanishing = true; // clause (ii)(a) for every non-loop state
  bool loops_unique = true;          // clause (ii)(b): no state spread over several loops

  bool passes() const { return simple && vertices_nonvanishing && loops_unique; }
};

struct GenericityOptions {
  double gap_relative = 1e-6;
  ScanOptions scan;
  EigenmodeOptions modes;
};

inline GenericityReport genericity_report(const MetricGraph& g, std::size_t n,
                                          const GenericityOptions& opt = {}) {
  if (n == 0) throw Error(Errc::InvalidArgument, "need at least one eigenvalue");
  if (is_circle(g))
    throw Error(Errc::CircleExcluded, "a circle has degenerate spectrum for every length");
  GenericityReport report;
  report.signature = canonical_signature(g);
  const std::vector<EigenvalueRecord> records = first_eigenvalues(g, n, opt.scan);
  std::vector<double> all = expand_multiplicities(records);
  all.resize(std::min(all.size(), n));
  report.eigenvalues = all;
  report.examined = all.size();
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    const double gap = all[i + 1] - all[i];
    report.min_spectral_gap = std::min(report.min_spectral_gap, gap);
    report.gap_margin =
        std::min(report.gap_margin, gap - simplicity_threshold(all[i], opt.gap_relative));
  }
  report.simple = std::all_of(records.begin(), records.end(),
                              [](const EigenvalueRecord& r) { return r.multiplicity == 1; }) &&
                  report.gap_margin > 0.0;

  for (const EigenvalueRecord& r : records) {
    for (const EigenFunction& f : eigenfunctions_at(g, r, opt.modes)) {
      if (f.index() >= n) break;
      const SupportClass& s = f.support();
      switch (s.kind) {
        case SupportKind::NonvanishingOnVertices:
          report.nonvanishing.push_back(f.index());
          break;
        case SupportKind::LoopSupported:
          report.loop_states.push_back({f.index(), *s.loop});
          break;
        case SupportKind::VanishesAtVertices:
          if (!s.ambiguous_loops.empty()) {
            report.ambiguous.push_back(f.index());
            report.loops_unique = false;
          }
          for (std::size_t v : s.vanishing_vertices)
            report.vanishing_incidents.push_back({f.index(), g.vertex(v).id});
          report.vertices_nonvanishing = false;
          break;
      }
    }
  }
  return report;
}

struct TrialSummary {
  std::size_t trials = 0;
  std::size_t passed = 0;
  // Undefined without trials.
  std::optional<double> fraction;
  std::vector<std::uint64_t> failed_seeds;
  std::vector<std::string> failure_reasons;
};

// Trial i perturbs the lengths with seed + i. Failures of the numerical
// machinery inside a trial count as failed trials and are reported.
inline TrialSummary randomized_genericity_trial(const MetricGraph& g, std::size_t trials,
                                                double epsilon, std::size_t n, std::uint64_t seed,
                                                unsigned threads = 1,
                                                const GenericityOptions& opt = {}) {
  if (is_circle(g))
    throw Error(Errc::CircleExcluded, "a circle has degenerate spectrum for every length");
  // Validates epsilon before any work starts.
  (void)perturb_lengths(g, epsilon, seed);

  TrialSummary summary;
  summary.trials = trials;
  if (trials == 0) return summary;

  std::vector<char> ok(trials, 0);
  std::vector<std::string> reason(trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < trials; i = next++) {
      try {
        const MetricGraph trial = perturb_lengths(g, epsilon, seed + i);
        const GenericityReport r = genericity_report(trial, n, opt);
        ok[i] = r.passes();
        if (!ok[i])
          reason[i] = !r.simple ? "spectrum not simple"
                      : !r.vertices_nonvanishing ? "eigenfunction vanishes at a vertex"
                                                 : "state spread over several loops";
      } catch (const Error& e) {
        reason[i] = e.what();
      }
    }
  };
  const unsigned count = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < trials; ++i) {
    if (ok[i]) {
      ++summary.passed;
    } else {
      summary.failed_seeds.push_back(seed + i);
      summary.failure_reasons.push_back(reason[i]);
    }
  }
  summary.fraction = static_cast<double>(summary.passed) / static_cast<double>(trials);
  return summary;
}

// ---------------------------------------------------------------------------
// Interlacing

struct InterlacingResult {
  double alpha = 0.0;
  double alpha_prime = 0.0;
  bool reversed = false;  // alpha' < alpha
  std::vector<double> spectrum;        // lambda_n(alpha)
  std::vector<double> spectrum_prime;  // lambda_n(alpha')
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_index = 0;
  // Indices where the strict form was required by its preconditions.
  std::vector<std::size_t> strict_checked;
  std::vector<std::size_t> strict_failures;
  // Indices where an inequality holds with equality.
  std::vector<std::size_t> equalities;
};

struct InterlacingOptions {
  double strict_precondition = 1e-6;
  double equality_relative = 1e-9;
  GenericityOptions generic;
};

namespace detail {

inline std::vector<double> first_n_eigenvalues(const MetricGraph& g, std::size_t n,
                                               const ScanOptions& opt) {
  std::vector<double> all = expand_multiplicities(first_eigenvalues(g, n, opt));
  all.resize(std::min(all.size(), n));
  return all;
}

}  // namespace detail

// For alpha < alpha':  lambda_{n-1}(alpha') <= lambda_n(alpha) <= lambda_n(alpha').
// For alpha' < alpha:  lambda_n(alpha') <= lambda_n(alpha) <= lambda_{n+1}(alpha').
// Infinite alphas mean Dirichlet. Margins are the signed distances to the
// bounds, so a negative margin is a violation.
inline std::vector<InterlacingResult> verify_interlacing(
    const MetricGraph& g, std::string_view vertex_id,
    const std::vector<std::pair<double, double>>& alpha_pairs, std::size_t n,
    const InterlacingOptions& opt = {}) {
  const std::size_t v = g.vertex_index(vertex_id);
  std::vector<InterlacingResult> results;
  for (const auto& [alpha, alpha_prime] : alpha_pairs) {
    if (std::isnan(alpha) || std::isnan(alpha_prime) || alpha == alpha_prime)
      throw Error(Errc::InvalidArgument, "alpha pairs must hold two different numbers");
    const MetricGraph ga = with_condition(g, v, VertexCondition::from_alpha(alpha));
    const MetricGraph gp = with_condition(g, v, VertexCondition::from_alpha(alpha_prime));

    InterlacingResult r;
    r.alpha = alpha;
    r.alpha_prime = alpha_prime;
    r.reversed = alpha_prime < alpha;
    r.spectrum = detail::first_n_eigenvalues(ga, n, opt.generic.scan);
    r.spectrum_prime = detail::first_n_eigenvalues(gp, n + 1, opt.generic.scan);
    const auto& A = r.spectrum;
    const auto& B = r.spectrum_prime;

    const std::vector<EigenvalueRecord> records = first_eigenvalues(ga, n, opt.generic.scan);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double lower = r.reversed ? B[i] : (i == 0 ? -std::numeric_limits<double>::infinity()
                                                       : B[i - 1]);
      const double upper = r.reversed ? B[i + 1] : B[i];
      const double margin = std::min(A[i] - lower, upper - A[i]);
      if (margin < r.worst_margin) {
        r.worst_margin = margin;
        r.worst_index = i;
      }
      const double tol = opt.equality_relative * (1.0 + std::abs(A[i]));
      if (std::abs(margin) <= tol) r.equalities.push_back(i);

      // Strictness needs a simple lambda_n(alpha) whose eigenfunction has
      // f(v) or the derivative sum at v away from zero.
      const auto rec = std::find_if(records.begin(), records.end(), [&](const EigenvalueRecord& x) {
        return x.first_index <= i && i <= x.last_index();
      });
      if (rec == records.end() || rec->multiplicity != 1) continue;
      const bool isolated =
          (i == 0 || A[i] - A[i - 1] > simplicity_threshold(A[i], opt.generic.gap_relative)) &&
          (i + 1 >= A.size() || A[i + 1] - A[i] > simplicity_threshold(A[i], opt.generic.gap_relative));
      if (!isolated) continue;
      const EigenFunction f = eigenfunctions_at(ga, *rec, opt.generic.modes).front();
      const double strength = ga.vertex(v).condition.is_dirichlet()
                                  ? std::abs(f.flux(v))
                                  : std::abs(f.vertex_value(v)) + std::abs(f.flux(v));
      if (strength <= opt.strict_precondition) continue;
      r.strict_checked.push_back(i);
      if (margin <= tol) r.strict_failures.push_back(i);
    }
    results.push_back(std::move(r));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Point picking

// A point y in (x0 - radius, x0 + radius) where each of the first n
// eigenfunctions is either away from zero or vanishes on the whole edge.
// Candidates follow a golden-ratio sequence through the window.
inline double pick_nonvanishing_point(const MetricGraph& g, std::string_view edge_id, double x0,
                                      double radius, std::size_t n, double tolerance = 1e-6,
                                      std::size_t max_candidates = 1000,
                                      const GenericityOptions& opt = {}) {
  const std::size_t e = g.edge_index(edge_id);
  const double length = g.edge(e).length;
  if (!(radius > 0.0) || x0 - radius < 0.0 || x0 + radius > length)
    throw Error(Errc::CoordinateOutOfRange, "window must lie inside the edge");
  if (n == 0) return x0;

  std::vector<EigenFunction> modes;
  for (const EigenvalueRecord& r : first_eigenvalues(g, n, opt.scan))
    for (EigenFunction& f : eigenfunctions_at(g, r, opt.modes))
      if (f.index() < n) modes.push_back(std::move(f));

  auto identically_zero = [&](const EigenFunction& f) {
    const EdgeCoefficients& c = f.coefficients(e);
    return std::abs(c.a) <= opt.modes.coefficient_tolerance &&
           std::abs(c.b) <= opt.modes.coefficient_tolerance;
  };
  constexpr double golden = 0.6180339887498949;
  double frac = 0.5;
  for (std::size_t i = 0; i < max_candidates; ++i) {
    const double y = x0 + radius * (2.0 * frac - 1.0) * (1.0 - 1e-12);
    frac = std::fmod(frac + golden, 1.0);
    const bool good = std::all_of(modes.begin(), modes.end(), [&](const EigenFunction& f) {
      return identically_zero(f) || std::abs(f.value_on(e, y)) > tolerance;
    });
    if (good) return y;
  }
  throw Error(Errc::NoPointFound, "every candidate hit a zero of some eigenfunction");
}

// ---------------------------------------------------------------------------
// Leaf-angle path

struct ThetaSample {
  double theta = 0.0;
  double lambda = 0.0;
  double extended_length = 0.0;
  std::vector<double> torus_point;  // reduced to [0, 2 pi)
  double phi_residual = 0.0;
};

struct ThetaPath {
  std::string leaf;
  std::size_t leaf_edge = 0;
  double theta_start = 0.0;  // 0 for an NK leaf, pi for a Dirichlet leaf
  int turns = 0;
  std::size_t start_index = 0;
  std::size_t end_index = 0;
  std::vector<ThetaSample> samples;

  double max_residual() const {
    double worst = 0.0;
    for (const auto& s : samples) worst = std::max(worst, s.phi_residual);
    return worst;
  }
};

namespace detail {

inline double wrap_angle(double x) {
  const double r = std::fmod(x, 2.0 * std::numbers::pi);
  return r < 0.0 ? r + 2.0 * std::numbers::pi : r;
}

// Gradient of Phi by central differences.
inline std::vector<double> torus_gradient(const SecularFunction& f, std::vector<double> kappa,
                                          double step = 1e-6) {
  std::vector<double> grad(kappa.size());
  for (std::size_t e = 0; e < kappa.size(); ++e) {
    const double x = kappa[e];
    kappa[e] = x + step;
    const double up = f.torus_value(kappa);
    kappa[e] = x - step;
    const double down = f.torus_value(kappa);
    kappa[e] = x;
    grad[e] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace detail

// The leaf condition cos(theta/2) f' = k sin(theta/2) f is scale invariant,
// so an eigenfunction at angle theta is the restriction of an eigenfunction
// of the graph whose leaf edge is longer by (theta_v - theta) / (2k) with
// the original leaf condition. With t = (theta_v - theta)/2 the path is the
// curve k(t) solving Phi(k l0 + t e_leaf) = 0, continued from k(0) = k_start.
// One full turn of theta moves the eigenvalue index down by one.
inline ThetaPath trace_theta_path(const MetricGraph& g, std::string_view leaf_id,
                                  std::size_t start_index, int turns, std::size_t steps_per_turn = 200,
                                  const ScanOptions& scan = {}) {
  const std::size_t v = g.vertex_index(leaf_id);
  if (g.degree(v) != 1) throw Error(Errc::InvalidArgument, "the leaf must have degree one");
  if (turns < 0 || turns % 2 != 0)
    throw Error(Errc::InvalidArgument, "the number of turns must be even and non-negative");
  if (steps_per_turn < 4) throw Error(Errc::InvalidArgument, "need at least 4 steps per turn");
  const SecularFunction phi(g);
  phi.require_torus(g.edge_count());
  if (g.has_robin()) throw Error(Errc::RobinNotSupportedOnTorus, "path needs NK/Dirichlet only");

  ThetaPath path;
  path.leaf = std::string(leaf_id);
  path.leaf_edge = g.ends_at(v).front().edge;
  path.theta_start = g.vertex(v).condition.is_dirichlet() ? std::numbers::pi : 0.0;
  path.turns = turns;
  path.start_index = start_index;
  const std::vector<double> l0 = g.lengths();
  const double l_leaf = l0[path.leaf_edge];
  const std::size_t E = l0.size();

  const std::vector<EigenvalueRecord> records = first_eigenvalues(g, start_index + 1, scan);
  const auto rec = std::find_if(records.begin(), records.end(), [&](const EigenvalueRecord& r) {
    return r.first_index <= start_index && start_index <= r.last_index();
  });
  if (rec == records.end() || rec->multiplicity != 1 || rec->negative || rec->k <= 0.0)
    throw Error(Errc::PathThroughDegeneracy, "the start eigenvalue must be simple and positive");

  auto point = [&](double k, double t) {
    std::vector<double> kappa(E);
    for (std::size_t e = 0; e < E; ++e) kappa[e] = k * l0[e];
    kappa[path.leaf_edge] += t;
    return kappa;
  };
  auto h = [&](double k, double t) { return phi.torus_value(point(k, t)); };
  double grad_scale = 0.0;
  auto record_sample = [&](double k, double t) {
    ThetaSample s;
    s.theta = path.theta_start - 2.0 * t;
    s.lambda = k * k;
    s.extended_length = l_leaf + t / k;
    std::vector<double> kappa = point(k, t);
    s.phi_residual = std::abs(phi.torus_value(kappa));
    const std::vector<double> grad = detail::torus_gradient(phi, kappa);
    double norm = 0.0;
    for (double x : grad) norm += x * x;
    norm = std::sqrt(norm);
    grad_scale = std::max(grad_scale, norm);
    if (norm < 1e-8 * std::max(1.0, grad_scale))
      throw Error(Errc::PathThroughDegeneracy,
                  "gradient of the torus function vanishes at theta = " + std::to_string(s.theta));
    for (double& x : kappa) x = detail::wrap_angle(x);
    s.torus_point = std::move(kappa);
    path.samples.push_back(std::move(s));
  };

  double k = rec->k;
  double t = 0.0;
  record_sample(k, t);
  const double t_end = std::numbers::pi * turns;
  const double base_dt = std::numbers::pi / static_cast<double>(steps_per_turn);
  const double tol_k = 1e-15;
  std::size_t grid_step = 0;
  const std::size_t grid_steps = steps_per_turn * static_cast<std::size_t>(turns);
  while (grid_step < grid_steps) {
    const double target = std::min(t_end, base_dt * static_cast<double>(grid_step + 1));
    double dt = target - t;
    bool advanced = false;
    for (int halvings = 0; halvings < 40 && !advanced; ++halvings, dt *= 0.5) {
      const double t_new = t + dt;
      // dk/dt lies in [-1/l_leaf, 0] because the gradient is single-signed.
      const double pad = 1e-3 * dt / l_leaf;
      const double lo = std::max(1e-12, k - dt / l_leaf - pad);
      const double hi = k + pad;
      const double f_lo = h(lo, t_new), f_hi = h(hi, t_new);
      if (f_lo == 0.0 || f_hi == 0.0) {
        k = f_lo == 0.0 ? lo : hi;
      } else if ((f_lo < 0.0) != (f_hi < 0.0)) {
        std::uintmax_t iterations = 200;
        const auto bracket = boost::math::tools::toms748_solve(
            [&](double x) { return h(x, t_new); }, lo, hi, f_lo, f_hi,
            [&](double a, double b) { return std::abs(b - a) <= tol_k * (1.0 + std::abs(a)); },
            iterations);
        k = 0.5 * (bracket.first + bracket.second);
      } else {
        continue;
      }
      t = t_new;
      advanced = true;
    }
    if (!advanced) throw Error(Errc::NoConvergence, "lost the eigenvalue branch");
    if (t >= target - 1e-14 * (1.0 + target)) {
      t = target;
      ++grid_step;
      record_sample(k, t);
    }
  }

  // The final point is an eigenvalue of the original graph again.
  const double below = static_cast<double>(eigenvalue_count_below(g, k * (1.0 - 1e-9)));
  path.end_index = static_cast<std::size_t>(below);
  return path;
}

}  // namespace qgraph
