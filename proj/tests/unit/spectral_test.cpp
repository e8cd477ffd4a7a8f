#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "qgraph/catalog.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/secular.hpp"
#include "qgraph/spectral.hpp"

using namespace qgraph;

namespace {

constexpr double pi = std::numbers::pi;

MetricGraph dirichlet_interval(double length = pi) {
  return MetricGraph({{"a", VertexCondition::dirichlet()}, {"b", VertexCondition::dirichlet()}},
                     {{"e", 0, 1, length}});
}

// NK at x = 0, delta(alpha) at x = 1.
MetricGraph robin_interval(double alpha) {
  return MetricGraph({{"a"}, {"b", VertexCondition::delta(alpha)}}, {{"e", 0, 1, 1.0}});
}

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> ks_of(const std::vector<EigenvalueRecord>& recs) {
  std::vector<double> out;
  for (const auto& r : recs)
    for (int m = 0; m < r.multiplicity; ++m) out.push_back(r.k);
  return out;
}

}  // namespace

TEST(DirectDeterminant, DirichletIntervalRoot) {
  const DirectDeterminant d = direct_determinant(dirichlet_interval(), 4.0);
  EXPECT_LT(d.smallest_singular_value, 1e-10);
  EXPECT_GT(d.second_smallest_singular_value, 1e-3);
}

TEST(DirectDeterminant, NeumannIntervalConstant) {
  EXPECT_EQ(multiplicity_at(catalog::interval(), 0.0), 1);
}

TEST(DirectDeterminant, RobinNegativeEigenvalue) {
  // f = cosh(kx): k tanh(k) = 2.
  const double kstar = bisect([](double k) { return k * std::tanh(k) - 2.0; }, 0.5, 5.0);
  EXPECT_EQ(multiplicity_at(robin_interval(-2.0), -kstar * kstar), 1);
  EXPECT_EQ(multiplicity_at(robin_interval(-2.0), -kstar * kstar * 1.01), 0);
}

TEST(Multiplicity, Circle) {
  EXPECT_EQ(multiplicity_at(catalog::circle(), 1.0), 2);
  EXPECT_EQ(multiplicity_at(catalog::circle(), 0.0), 1);
  EXPECT_EQ(multiplicity_at(catalog::circle(), 0.7), 0);
  EXPECT_EQ(multiplicity_at(dirichlet_interval(), 2.0), 0);
}

TEST(Weyl, DirichletInterval) {
  const WeylEstimate w = weyl_count(dirichlet_interval(), 10.5);
  EXPECT_NEAR(w.expected, 10.5, 1e-12);
  const auto recs = scan_spectrum(dirichlet_interval(), 10.5);
  ASSERT_EQ(recs.size(), 10U);
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_NEAR(recs[i].k, i + 1.0, 1e-9);
  EXPECT_TRUE(w.accepts(10));
  EXPECT_FALSE(w.accepts(20));
}

TEST(Weyl, Circle) {
  const WeylEstimate w = weyl_count(catalog::circle(), 3.5);
  EXPECT_NEAR(w.expected, 7.0, 1e-12);
  EXPECT_EQ(ks_of(scan_spectrum(catalog::circle(), 3.5)).size(), 7U);
}

TEST(Weyl, NonpositiveKRejected) { EXPECT_THROW(weyl_count(catalog::circle(), 0.0), Error); }

TEST(ScanSpectrum, CircleMultiplicities) {
  const auto recs = scan_spectrum(catalog::circle(), 3.5);
  ASSERT_EQ(recs.size(), 4U);
  const int mult[] = {1, 2, 2, 2};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(recs[i].k, static_cast<double>(i), 1e-9);
    EXPECT_EQ(recs[i].multiplicity, mult[i]);
    EXPECT_FALSE(recs[i].degeneracy_suspected);
  }
  EXPECT_EQ(recs[2].first_index, 3U);
}

TEST(ScanSpectrum, FigureEightFamilies) {
  const double l1 = 2 * pi, l2 = 2 * pi * std::numbers::sqrt2;
  const auto recs = scan_spectrum(catalog::figure8(l1, l2), 2.0);
  std::vector<double> expected;
  for (int n = 0; n <= 10; ++n) {
    expected.push_back(2 * pi * n / l1);
    if (n > 0) expected.push_back(2 * pi * n / l2);
    if (n > 0) expected.push_back(2 * pi * n / (l1 + l2));
  }
  std::sort(expected.begin(), expected.end());
  expected.erase(std::unique(expected.begin(), expected.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 expected.end());
  std::erase_if(expected, [](double k) { return k > 2.0; });
  ASSERT_EQ(recs.size(), expected.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_NEAR(recs[i].k, expected[i], 1e-9);
    EXPECT_EQ(recs[i].multiplicity, 1);
  }
}

TEST(ScanSpectrum, RobinIntervalMatchesBisection) {
  const MetricGraph g = robin_interval(-2.0);
  const auto recs = scan_spectrum(g, 12.0);
  ASSERT_FALSE(recs.empty());
  ASSERT_TRUE(recs[0].negative);
  EXPECT_NEAR(recs[0].k, bisect([](double k) { return k * std::tanh(k) - 2.0; }, 0.5, 5.0), 1e-9);
  // Positive roots of k tan k = -2, one per branch ((n - 1/2) pi, n pi).
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const double n = static_cast<double>(i);
    const double k = bisect([](double x) { return x * std::sin(x) + 2.0 * std::cos(x); },
                            (n - 0.5) * pi + 1e-12, n * pi);
    EXPECT_NEAR(recs[i].k, k, 1e-9);
  }
}

TEST(ScanSpectrum, ImpureLoopFamilies) {
  const auto recs = scan_spectrum(catalog::impure_loop(), 6.0);
  std::vector<double> expected;
  for (int n = 1; n <= 6; ++n) expected.push_back(n);
  for (int n = 0; n <= 6; ++n) {
    const double lo = n == 0 ? 1e-9 : n * 1.0;
    const double hi = n + 0.5;
    expected.push_back(bisect(
        [](double k) { return 2.0 * k * std::sin(k * pi) - std::cos(k * pi); }, lo, hi));
  }
  std::sort(expected.begin(), expected.end());
  std::erase_if(expected, [](double k) { return k > 6.0; });
  const auto found = ks_of(recs);
  ASSERT_EQ(found.size(), expected.size());
  for (std::size_t i = 0; i < found.size(); ++i) EXPECT_NEAR(found[i], expected[i], 1e-9);
}

TEST(ScanSpectrum, NegativeCountBoundedByNegativeAlphas) {
  const MetricGraph g = parse_graph(
      "vertex a delta -3\nvertex b delta -1\nvertex c nk\nvertex d delta 2\n"
      "edge x a b 1\nedge y b c 0.7\nedge z c d 1.4\nedge w a c 0.9\n");
  const auto recs = scan_spectrum(g, 5.0);
  std::size_t negative = 0;
  for (const auto& r : recs) negative += r.negative ? r.multiplicity : 0;
  EXPECT_GE(negative, 1U);
  EXPECT_LE(negative, g.negative_alpha_count());
}

TEST(ScanSpectrum, WeylCountOnCorpus) {
  for (const auto& [name, g] : catalog::corpus()) {
    const auto recs = scan_spectrum(g, 10.0);
    const std::size_t count = ks_of(recs).size();
    EXPECT_LE(std::abs(static_cast<double>(count) - g.total_length() * 10.0 / pi),
              g.vertex_count() + 2.0)
        << name;
  }
}

TEST(ScanSpectrum, AgreesWithSecularRoots) {
  for (const auto& [name, g] : catalog::corpus()) {
    if (g.has_robin()) continue;
    const auto direct = scan_spectrum(g, 6.0);
    std::vector<EigenvalueRecord> positive;
    for (const auto& r : direct)
      if (!r.negative && r.k >= 0.1) positive.push_back(r);
    const auto secular = secular_roots(g, 0.1, 6.0);
    ASSERT_EQ(positive.size(), secular.size()) << name;
    for (std::size_t i = 0; i < secular.size(); ++i) {
      EXPECT_NEAR(positive[i].k, secular[i].k, 1e-9) << name;
      EXPECT_EQ(positive[i].multiplicity, secular[i].multiplicity) << name;
    }
  }
}

TEST(ScanSpectrum, ContinuousUnderLengthChange) {
  const double delta = 1e-4;
  for (const auto& [name, g] : catalog::corpus()) {
    std::vector<double> lengths = g.lengths();
    lengths[0] += delta;
    const auto a = expand_multiplicities(first_eigenvalues(g, 12));
    const auto b = expand_multiplicities(first_eigenvalues(with_lengths(g, lengths), 12));
    for (std::size_t i = 0; i < 12; ++i)
      EXPECT_LE(std::abs(a[i] - b[i]), 10.0 * std::max(a[i], 1e-12) * delta / g.min_length() + 1e-9)
          << name << " index " << i;
  }
}

TEST(ScanSpectrum, CountingFunctionMonotone) {
  const MetricGraph g = catalog::cycle_with_tail({1.0, 1.2, 1.45, 0.8});
  std::size_t previous = 0;
  for (double s = -2.0; s <= 12.0; s += 0.0173) {
    const std::size_t c = eigenvalue_count_below(g, s);
    EXPECT_GE(c, previous);
    previous = c;
  }
}

TEST(FirstEigenvalues, CoversRequestedIndices) {
  const auto recs = first_eigenvalues(catalog::circle(), 4);
  EXPECT_EQ(recs.back().last_index(), 4U);
  EXPECT_EQ(expand_multiplicities(recs).size(), 5U);
  EXPECT_TRUE(first_eigenvalues(catalog::circle(), 0).empty());
}
