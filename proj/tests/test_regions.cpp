#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lnsm/regions.hpp"

using namespace lnsm;

namespace {

// composite Simpson on the bump, normalized by its full integral
double step_oracle(double x) {
  auto bump = [](double t) {
    double d = 0.0625 - t * t;
    return d > 0.0 ? std::exp(-1.0 / d) : 0.0;
  };
  auto simpson = [&](double a, double b) {
    const int n = 20000;
    double h = (b - a) / n, s = bump(a) + bump(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * bump(a + i * h);
    return s * h / 3.0;
  };
  if (x <= -0.25) return 0.0;
  if (x >= 0.25) return 1.0;
  return simpson(-0.25, x) / simpson(-0.25, 0.25);
}

// gap between closed boxes [lo, lo+1] per axis
double box_distance(Square p, Square q) {
  auto gap = [](int a, int b) { return std::max({0.0, double(b) - (a + 1.0), double(a) - (b + 1.0)}); };
  double gx = gap(p.a, q.a), gy = gap(p.b, q.b);
  return std::hypot(gx, gy);
}

double set_dist(const std::vector<Square>& a, const std::vector<Square>& b) {
  double d = 1e300;
  for (auto& s : a)
    for (auto& t : b) d = std::min(d, box_distance(s, t));
  return d;
}

std::set<Square> as_set(const std::vector<Square>& v) { return {v.begin(), v.end()}; }

ModelParams params_N(long long N, double M) { return params_with_mass(1.0, 1.0, N, 0.1, Regulator::exponential, M); }

LSAssignment single(const LatticeGeometry& geo, std::vector<std::pair<Square, int>> ls) {
  std::vector<int> lv(geo.square_count(), 0);
  for (auto& [s, n] : ls) lv[geo.square_index(s)] = n;
  return assignment_from_levels(lv);
}

} // namespace

TEST_CASE("smooth step") {
  CHECK(smooth_step(-0.3) == 0.0);
  CHECK(smooth_step(0.3) == 1.0);
  CHECK(smooth_step(0.0) == 0.5);
  double prev = 0.0;
  for (double x = -0.25; x <= 0.25; x += 0.01) {
    double v = smooth_step(x);
    CHECK(v >= prev);
    CHECK(v + smooth_step(-x) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(v == doctest::Approx(step_oracle(x)).epsilon(1e-10));
    prev = v;
  }
}

TEST_CASE("partition of unity and window structure on random masses") {
  std::mt19937_64 rng(7);
  for (double N : {1e3, 4096.0, 1e6}) {
    std::uniform_real_distribution<double> lu(std::log(1e-3), std::log(N));
    for (int k = 0; k < 1000; ++k) {
      double v = std::exp(lu(rng));
      int nmax = window_count(v, N);
      double sum = theta_small(v, N);
      int nonzero = 0, first = -1;
      for (int n = 1; n <= nmax; ++n) {
        double t = theta_window(v, N, n);
        CHECK(t >= 0.0);
        sum += t;
        if (t > 0.0) {
          if (first < 0) first = n;
          ++nonzero;
          CHECK(v >= 0.75 * std::pow(N, n / 6.0));
          CHECK(v < 1.25 * std::pow(N, (n + 1) / 6.0));
        }
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(nonzero <= 2);
      if (theta_small(v, N) > 0.0) CHECK(v < 1.25 * std::pow(N, 1.0 / 6.0));
    }
  }
}

TEST_CASE("classification examples") {
  LatticeGeometry geo(1, 2);
  ModelParams p = params_with_mass(1.0, 1.0, 4096, 0.1, Regulator::exponential);
  FieldConfig zero = make_field(geo, std::vector<double>(geo.site_count(), 0.0));
  LSAssignment a = classify_squares(zero, p, geo);
  for (int q = 0; q < geo.square_count(); ++q) {
    CHECK(a.level[q] == 0);
    CHECK(a.theta_s[q] == 1.0);
  }

  std::mt19937_64 rng(3);
  const double N = 4096.0;
  std::vector<double> v(geo.square_count(), 0.0);
  v[0] = 0.75 * std::pow(N, 1.0 / 6.0);
  v[1] = 2.0 * std::pow(N, 2.0 / 6.0);
  FieldConfig f = field_with_masses(geo, p, v, rng);
  CHECK(f.masses[1] == doctest::Approx(32.0).epsilon(1e-12));
  LSAssignment b = classify_squares(f, p, geo);
  CHECK(b.level[0] == 0);
  CHECK(b.theta_s[0] == 1.0);
  CHECK(b.theta_n[0][0] == 0.0);
  CHECK(b.level[1] == 2);
  // direct check of the l^2 window: 5/4 N^{1/2} > v >= 3/4 N^{1/3}
  CHECK(32.0 < 1.25 * std::pow(N, 0.5));
  CHECK(32.0 >= 0.75 * std::pow(N, 1.0 / 3.0));
  CHECK(b.theta_n[1][1] == 1.0);
}

TEST_CASE("regions: empty large field set") {
  LatticeGeometry geo(2, 1);
  RegionSet r = build_regions(single(geo, {}), geo, 3.0);
  CHECK(r.gamma.empty());
  CHECK(r.bigGamma.empty());
  CHECK(r.bigGammaE.empty());
  CHECK(r.components.empty());
  CHECK(r.lambda_s.size() == 16);
}

TEST_CASE("regions: corridor of a single square matches a brute force scan") {
  LatticeGeometry geo(6, 1);
  RegionSet r = build_regions(single(geo, {{{0, 0}, 1}}), geo, 3.0);
  std::set<Square> expect, expect_gamma;
  for (Square s : geo.lambda_squares())
    if (box_distance(s, {0, 0}) <= 3.0) expect.insert(s);
  for (int a = -10; a <= 10; ++a)
    for (int b = -10; b <= 10; ++b)
      if (box_distance({a, b}, {0, 0}) <= 1.5) expect_gamma.insert({a, b});
  CHECK(as_set(r.bigGamma) == expect);
  CHECK(as_set(r.gamma) == expect_gamma);
  CHECK(expect.size() == 61);
  CHECK(as_set(r.bigGammaE) == expect);
  REQUIRE(r.components.size() == 1);
  CHECK(r.ecomponents.size() == 1);
}

TEST_CASE("regions: connectivity link at 2M-1 but not at 2M+3") {
  const double M = 3.0;
  LatticeGeometry geo(11, 1);
  for (int gap : {5, 9}) {
    Square p{-gap - 1, 0}, q{0, 0};
    CHECK(box_distance(p, q) == double(gap));
    RegionSet r = build_regions(single(geo, {{p, 1}, {q, 1}}), geo, M);
    bool witness = false;
    for (Square w : geo.lambda_squares())
      if (box_distance(p, w) + box_distance(q, w) <= 2.0 * M) witness = true;
    CHECK(r.l_components.size() == 2);
    CHECK(r.components.size() == (witness ? 1u : 2u));
    CHECK(witness == (gap == 5));
  }
}

TEST_CASE("region invariants on random assignments") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LatticeGeometry geo(5, 1);
  const double M = 2.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> lv(geo.square_count(), 0);
    for (int q = 0; q < geo.square_count(); ++q)
      if (u(rng) < 0.05) lv[q] = u(rng) < 0.7 ? 1 : 2;
    RegionSet r = build_regions(assignment_from_levels(lv), geo, M);
    auto L = as_set(r.lambda_l), G = as_set(r.bigGamma), GE = as_set(r.bigGammaE);
    std::set<Square> gl;
    for (auto& s : r.gamma)
      if (geo.in_lambda(s)) gl.insert(s);
    CHECK(std::includes(gl.begin(), gl.end(), L.begin(), L.end()));
    CHECK(std::includes(G.begin(), G.end(), gl.begin(), gl.end()));
    CHECK(std::includes(GE.begin(), GE.end(), G.begin(), G.end()));

    std::set<Square> un, une;
    std::size_t tot = 0, tote = 0;
    for (auto& c : r.components) {
      un.insert(c.bigGamma.begin(), c.bigGamma.end());
      tot += c.bigGamma.size();
    }
    for (auto& c : r.ecomponents) {
      une.insert(c.bigGammaE.begin(), c.bigGammaE.end());
      tote += c.bigGammaE.size();
    }
    CHECK(un == G);
    CHECK(tot == G.size());
    CHECK(une == GE);
    CHECK(tote == GE.size());

    std::vector<Square> outside;
    for (Square s : geo.lambda_squares())
      if (!G.count(s)) outside.push_back(s);
    if (!r.gamma.empty() && !outside.empty()) CHECK(set_dist(r.gamma, outside) >= M / 2.0 - std::sqrt(2.0) - 1e-12);
    CHECK(set_distance(r.lambda_l, r.lambda_l) == (r.lambda_l.empty() ? 1e300 : 0.0));
  }
}

TEST_CASE("large field suppression: both sides against direct evaluation") {
  LatticeGeometry geo(2, 2);
  ModelParams p = params_N(1000000, 1.0);
  std::mt19937_64 rng(5);
  std::vector<double> v(geo.square_count(), 1.0);
  FieldConfig f = field_with_masses(geo, p, v, rng);
  SuppressionBound empty = large_field_suppression(classify_squares(f, p, geo), f, p, geo);
  CHECK(empty.log_left == 0.0);
  CHECK(empty.log_right == 0.0);
  CHECK(empty.holds);

  v[geo.square_index({0, 0})] = 40.0;
  f = field_with_masses(geo, p, v, rng);
  LSAssignment a = classify_squares(f, p, geo);
  CHECK(a.level[geo.square_index({0, 0})] == 1);
  SuppressionBound b = large_field_suppression(a, f, p, geo);
  RegionSet r = build_regions(a, geo, 1.0);
  const double X = 40.0, n18 = std::pow(1e6, 0.125);
  CHECK(b.log_left == doctest::Approx(-0.49 * X).epsilon(1e-12));
  CHECK(b.log_product == doctest::Approx(-n18 * double(r.bigGammaE.size()) - 1.0).epsilon(1e-12));
  CHECK(b.log_right == doctest::Approx(-0.25 * X + b.log_product).epsilon(1e-12));
  // 0.24 X = 9.6 against N^{1/8} |Gamma^e| + 1 = 5.62 * 15 + 1
  CHECK(r.bigGammaE.size() == 15);
  CHECK_FALSE(b.holds);
}

TEST_CASE("suppression scan over N") {
  auto rows = suppression_scan({1e6, 1e20, 1e100, 1e250, 1e300}, 0.1, 1.0);
  REQUIRE(rows.size() == 5);
  CHECK_FALSE(rows[0].holds);
  CHECK_FALSE(rows[2].holds);
  CHECK(rows[3].holds);
  CHECK(rows[4].holds);
  double flip = suppression_threshold(0.1, 1.0);
  CHECK(flip > 100.0);
  CHECK(flip < 250.0);
}
