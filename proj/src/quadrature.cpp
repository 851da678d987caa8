#include "lnsm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

namespace lnsm {

double integrate(const Fn& f, double a, double b, double rel_tol, double* err) {
  if (b <= a) return 0.0;
  double e = 0.0;
  const double w = b - a;
  auto g = [&](double t) { return w * f(a + w * t); };
  double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, 1.0, 12, std::max(rel_tol, 2e-14), &e);
  if (err) *err = e;
  return v;
}

double integrate_pieces(const Fn& f, const std::vector<double>& pts, double rel_tol) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    s += integrate(f, pts[i], pts[i + 1], rel_tol);
  return s;
}

double integrate_to_infinity(const Fn& f, double a, double rel_tol) {
  auto g = [&](double t) {
    if (t >= 1.0) return 0.0;
    double u = 1.0 - t;
    return f(a + t / u) / (u * u);
  };
  return integrate(g, 0.0, 1.0, rel_tol);
}

void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

static double j0_zero(unsigned k) {
  static std::vector<double> zeros;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  while (zeros.size() < k) zeros.push_back(boost::math::cyl_bessel_j_zero(0.0, unsigned(zeros.size() + 1)));
  return zeros[k - 1];
}

double hankel0(const Fn& g, double r, double qmax, const std::vector<double>& breaks, double rel_tol) {
  std::vector<double> pts{0.0, qmax};
  for (double b : breaks)
    if (b > 0.0 && b < qmax) pts.push_back(b);
  if (r > 0.0) {
    for (unsigned k = 1;; ++k) {
      double z = j0_zero(k) / r;
      if (z >= qmax) break;
      pts.push_back(z);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  auto h = [&](double q) { return q * boost::math::cyl_bessel_j(0, q * r) * g(q); };
  return integrate_pieces(h, pts, rel_tol) / (2.0 * std::numbers::pi);
}

HankelRule::HankelRule(Fn g, double qmax, std::vector<double> breaks, int order)
    : g_(std::move(g)), qmax_(qmax), breaks_(std::move(breaks)), order_(order) {
  rule_ = build(16.0);
}

std::shared_ptr<const HankelRule::Rule> HankelRule::build(double rmax) const {
  auto rule = std::make_shared<Rule>();
  rule->rmax = rmax;
  const double h = std::min(0.25, 2.5 / rmax);
  std::vector<double> pts{0.0, qmax_};
  for (double b : breaks_)
    if (b > 0.0 && b < qmax_) pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> x, w;
  gauss_legendre01(order_, x, w);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i], b = pts[i + 1];
    const int n = std::max(1, int(std::ceil((b - a) / h)));
    for (int k = 0; k < n; ++k) {
      const double lo = a + (b - a) * k / n, len = (b - a) / n;
      for (int j = 0; j < order_; ++j) {
        double q = lo + len * x[j];
        rule->q.push_back(q);
        rule->c.push_back(len * w[j] * q * g_(q) / (2.0 * std::numbers::pi));
      }
    }
  }
  return rule;
}

double HankelRule::operator()(double r) const {
  std::shared_ptr<const Rule> rule;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (r > rule_->rmax) {
      double rm = rule_->rmax;
      while (rm < r) rm *= 2.0;
      rule_ = build(rm);
    }
    rule = rule_;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < rule->q.size(); ++k) s += rule->c[k] * boost::math::cyl_bessel_j(0, rule->q[k] * r);
  return s;
}

std::size_t HankelRule::nodes() const {
  std::lock_guard<std::mutex> lock(mu_);
  return rule_->q.size();
}

} // namespace lnsm
