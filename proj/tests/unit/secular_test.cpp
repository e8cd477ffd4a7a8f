#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "qgraph/catalog.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/secular.hpp"

using namespace qgraph;

namespace {

constexpr double pi = std::numbers::pi;
using cd = std::complex<double>;

double unitarity_defect(const Eigen::MatrixXcd& S) {
  return (S * S.adjoint() - Eigen::MatrixXcd::Identity(S.rows(), S.cols())).norm();
}

std::array<double, 3> random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * pi);
  return {u(rng), u(rng), u(rng)};
}

// Closed forms written out term by term.
double star_d(double a, double b, double c) {
  return std::sin(a) * std::sin(b) * std::cos(c) + std::sin(b) * std::sin(c) * std::cos(a) +
         std::sin(c) * std::sin(a) * std::cos(b);
}
double star_n(double a, double b, double c) {
  return std::cos(a) * std::cos(b) * std::sin(c) + std::cos(b) * std::cos(c) * std::sin(a) +
         std::cos(c) * std::cos(a) * std::sin(b);
}

}  // namespace

TEST(VertexScattering, TrivialVertexTransmits) {
  const Eigen::MatrixXcd s = vertex_scattering(VertexCondition::nk(), 2, 1.7);
  EXPECT_NEAR(std::abs(s(0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s(0, 1) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s(1, 0) - 1.0), 0.0, 1e-15);
}

TEST(VertexScattering, DirichletReflects) {
  const Eigen::MatrixXcd s = vertex_scattering(VertexCondition::dirichlet(), 1, 3.0);
  ASSERT_EQ(s.rows(), 1);
  EXPECT_NEAR(std::abs(s(0, 0) + 1.0), 0.0, 1e-15);
}

TEST(VertexScattering, RobinLeafAtUnitK) {
  // 2/(1 + i) - 1 = -i
  const Eigen::MatrixXcd s = vertex_scattering(VertexCondition::delta(1.0), 1, 1.0);
  EXPECT_NEAR(std::abs(s(0, 0) - cd(0.0, -1.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s(0, 0)), 1.0, 1e-15);
}

TEST(VertexScattering, NonpositiveKRejected) {
  EXPECT_THROW(vertex_scattering(VertexCondition::delta(1.0), 3, 0.0), Error);
}

TEST(VertexScattering, UnitaryForEveryCondition) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> alpha(-5.0, 5.0), k(0.05, 30.0);
  for (int i = 0; i < 200; ++i) {
    for (std::size_t d = 1; d <= 5; ++d) {
      const Eigen::MatrixXcd s = vertex_scattering(VertexCondition::delta(alpha(rng)), d, k(rng));
      EXPECT_LE(unitarity_defect(s), 1e-12);
    }
  }
}

TEST(SecularSystem, DirichletIntervalBonds) {
  const MetricGraph g = parse_graph("vertex a dirichlet\nvertex b dirichlet\nedge e a b 3.14159\n");
  const SecularSystem sys = assemble_secular_system(g, 1.0);
  ASSERT_EQ(sys.scattering.rows(), 2);
  EXPECT_NEAR(std::abs(sys.scattering(0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(sys.scattering(0, 1) + 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(sys.scattering(1, 0) + 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(sys.scattering(1, 1)), 0.0, 1e-15);
}

TEST(SecularSystem, CircleBonds) {
  const SecularSystem sys = assemble_secular_system(catalog::circle(), 0.7);
  // Each bond continues into itself through the trivial vertex.
  EXPECT_NEAR(std::abs(sys.scattering(0, 0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(sys.scattering(1, 1) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(sys.scattering(0, 1)), 0.0, 1e-15);
  for (double k : {1.0, 2.0, 3.0}) EXPECT_NEAR(std::abs(secular_value(catalog::circle(), k)), 0.0, 1e-9);
}

TEST(SecularSystem, KIndependentWithoutRobin) {
  for (const auto& [name, g] : catalog::corpus()) {
    if (g.has_robin()) continue;
    const SecularSystem a = assemble_secular_system(g, 0.3), b = assemble_secular_system(g, 7.9);
    EXPECT_LE((a.scattering - b.scattering).norm(), 1e-15) << name;
  }
}

TEST(SecularSystem, UnitaryOnCorpus) {
  for (const auto& [name, g] : catalog::corpus())
    for (double k : {0.1, 0.9, 2.5, 11.0})
      EXPECT_LE(unitarity_defect(assemble_secular_system(g, k).scattering), 1e-12) << name;
}

TEST(SecularValue, DirichletIntervalZeros) {
  const MetricGraph g = parse_graph("vertex a dirichlet\nvertex b dirichlet\nedge e a b 3.141592653589793\n");
  for (double k : {1.0, 2.0, 3.0}) EXPECT_NEAR(std::abs(secular_value(g, k)), 0.0, 1e-9);
}

TEST(SecularValue, CircleNonzeroOffSpectrum) {
  EXPECT_GT(std::abs(secular_value(catalog::circle(), 0.5)), 1e-3);
}

TEST(SecularValue, FigureEightSymmetricFamily) {
  const double k = 1.0 / (1.0 + std::numbers::sqrt2);
  EXPECT_NEAR(std::abs(secular_value(catalog::figure8(), k)), 0.0, 1e-9);
}

TEST(SecularValue, RealForNkDirichletGraphs) {
  for (const auto& [name, g] : catalog::corpus()) {
    if (g.has_robin()) continue;
    const SecularFunction f(g);
    for (double k = 0.01; k <= 30.0; k += 0.0731) {
      const cd v = f.value(k);
      EXPECT_LE(std::abs(v.imag()), 1e-10 * (1.0 + std::abs(v))) << name << " k=" << k;
    }
  }
}

TEST(SecularValue, NonpositiveKRejected) {
  EXPECT_THROW(secular_value(catalog::circle(), 0.0), Error);
  EXPECT_THROW(secular_value(catalog::circle(), -1.0), Error);
}

TEST(TorusValue, DefiningIdentity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 12.0);
  for (const auto& [name, g] : catalog::corpus()) {
    if (g.has_robin()) continue;
    const SecularFunction f(g);
    for (int i = 0; i < 50; ++i) {
      const double k = u(rng);
      std::vector<double> kappa;
      for (double l : g.lengths()) kappa.push_back(k * l);
      const double torus = f.torus_value(kappa);
      const double direct = f.value(k).real();
      EXPECT_NEAR(torus, direct, 1e-9 * (1.0 + std::abs(direct))) << name;
    }
  }
}

TEST(TorusValue, StarSpecialPoints) {
  const MetricGraph star = catalog::star3();
  const std::vector<double> centre{pi / 2, pi / 2, pi / 2};
  EXPECT_NEAR(torus_value(star, centre), 0.0, 1e-12);
  const std::vector<double> p{pi / 2, pi / 2, 0.0};
  EXPECT_GT(std::abs(torus_value(star, p)), 0.1);
}

TEST(TorusValue, Guards) {
  EXPECT_EQ(([] {
    try {
      const std::vector<double> p{1.0, 2.0};
      torus_value(catalog::impure_loop(), p);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  }()), Errc::RobinNotSupportedOnTorus);
  const std::vector<double> wrong{1.0, 2.0};
  EXPECT_THROW(torus_value(catalog::star3(), wrong), Error);
}

TEST(ClosedForms, HandEvaluations) {
  EXPECT_NEAR(star3_dirichlet_closed_form({pi / 2, pi / 2, pi / 2}), 0.0, 1e-15);
  EXPECT_NEAR(star3_dirichlet_closed_form({pi / 2, pi / 2, 0.0}), 1.0, 1e-15);
  EXPECT_NEAR(star3_dirichlet_closed_form({0.0, 0.0, 0.0}), 0.0, 1e-15);
  EXPECT_NEAR(star3_neumann_closed_form({pi / 2, pi / 2, pi / 2}), 0.0, 1e-15);
  EXPECT_NEAR(star3_neumann_closed_form({0.0, 0.0, pi / 2}), 1.0, 1e-15);
  EXPECT_NEAR(mandarin3_closed_form({pi, pi, pi}), 0.0, 1e-15);
}

TEST(ClosedForms, MatchTermByTermOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto k = random_point(rng);
    EXPECT_NEAR(star3_dirichlet_closed_form(k), star_d(k[0], k[1], k[2]), 1e-14);
    EXPECT_NEAR(star3_neumann_closed_form(k), star_n(k[0], k[1], k[2]), 1e-14);
    EXPECT_NEAR(star3_neumann_closed_form(k),
                star3_dirichlet_closed_form({k[0] - pi / 2, k[1] - pi / 2, k[2] - pi / 2}), 1e-14);
    EXPECT_NEAR(mandarin3_closed_form(k),
                star_d(k[0] / 2, k[1] / 2, k[2] / 2) * star_n(k[0] / 2, k[1] / 2, k[2] / 2), 1e-14);
  }
}

TEST(ClosedForms, DeterminantProportionalToStarAndMandarin) {
  std::mt19937_64 rng(17);
  const SecularFunction star(catalog::star3({1.0, 1.3, 1.7}));
  const SecularFunction mandarin(catalog::mandarin3({1.0, 1.3, 1.7}));
  std::vector<double> ds, cs, dm, cm;
  for (int i = 0; i < 1000; ++i) {
    const auto k = random_point(rng);
    const std::vector<double> kv(k.begin(), k.end());
    ds.push_back(star.torus_value(kv));
    cs.push_back(star_d(k[0], k[1], k[2]));
    dm.push_back(mandarin.torus_value(kv));
    cm.push_back(star_d(k[0] / 2, k[1] / 2, k[2] / 2) * star_n(k[0] / 2, k[1] / 2, k[2] / 2));
  }
  const ProportionalityFit fs = fit_proportionality(ds, cs);
  const ProportionalityFit fm = fit_proportionality(dm, cm);
  EXPECT_LE(fs.relative_residual, 1e-8);
  EXPECT_LE(fm.relative_residual, 1e-8);
  EXPECT_NEAR(std::abs(fs.constant), 8.0 / 3.0, 1e-9);
  EXPECT_NEAR(std::abs(fm.constant), 64.0 / 9.0, 1e-9);
}

TEST(ClosedForms, NeumannStarIsShiftedDirichletStar) {
  std::mt19937_64 rng(23);
  const SecularFunction d(catalog::star3({1.0, 1.3, 1.7}));
  const SecularFunction n(catalog::star3({1.0, 1.3, 1.7}, VertexCondition::nk()));
  std::vector<double> dn, dd;
  for (int i = 0; i < 500; ++i) {
    const auto k = random_point(rng);
    dn.push_back(n.torus_value(std::vector<double>(k.begin(), k.end())));
    dd.push_back(d.torus_value(std::vector<double>{k[0] - pi / 2, k[1] - pi / 2, k[2] - pi / 2}));
  }
  const ProportionalityFit fit = fit_proportionality(dn, dd);
  EXPECT_NEAR(std::abs(fit.constant), 1.0, 1e-10);
  EXPECT_LE(fit.relative_residual, 1e-10);
}

TEST(SecularRoots, DirichletIntervalIntegers) {
  const MetricGraph g = parse_graph("vertex a dirichlet\nvertex b dirichlet\nedge e a b 3.141592653589793\n");
  const auto roots = secular_roots(g, 0.5, 5.5);
  ASSERT_EQ(roots.size(), 5U);
  for (std::size_t i = 0; i < roots.size(); ++i) {
    EXPECT_NEAR(roots[i].k, static_cast<double>(i + 1), 1e-9);
    EXPECT_EQ(roots[i].multiplicity, 1);
  }
}

TEST(SecularRoots, CircleDoubleRoots) {
  const auto roots = secular_roots(catalog::circle(), 0.5, 3.5);
  ASSERT_EQ(roots.size(), 3U);
  for (std::size_t i = 0; i < roots.size(); ++i) {
    EXPECT_NEAR(roots[i].k, static_cast<double>(i + 1), 1e-9);
    EXPECT_EQ(roots[i].multiplicity, 2);
  }
}
