#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace lnsm {

using Fn = std::function<double(double)>;

// Adaptive 61-point Gauss-Kronrod on [a,b].
double integrate(const Fn& f, double a, double b, double rel_tol = 1e-13, double* err = nullptr);

// Same, split at the given ordered break points (first and last are the limits).
double integrate_pieces(const Fn& f, const std::vector<double>& pts, double rel_tol = 1e-13);

// [a, inf) through s = a + t/(1-t).
double integrate_to_infinity(const Fn& f, double a, double rel_tol = 1e-13);

// Gauss-Legendre nodes and weights on [0,1].
void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w);

// (1/2pi) int_0^qmax q J0(q r) g(q) dq, split at the zeros of J0(q r).
double hankel0(const Fn& g, double r, double qmax, const std::vector<double>& breaks,
               double rel_tol = 1e-12);

// Fixed panel Gauss-Legendre version of hankel0, reused across radii.
// Panels are short enough to resolve J0(q r) up to rmax; the rule is rebuilt
// with a doubled rmax when a larger radius is requested.
class HankelRule {
public:
  HankelRule(Fn g, double qmax, std::vector<double> breaks, int order = 24);
  double operator()(double r) const;
  std::size_t nodes() const;

private:
  struct Rule {
    double rmax = 0.0;
    std::vector<double> q, c;
  };
  std::shared_ptr<const Rule> build(double rmax) const;
  Fn g_;
  double qmax_;
  std::vector<double> breaks_;
  int order_;
  mutable std::mutex mu_;
  mutable std::shared_ptr<const Rule> rule_;
};

} // namespace lnsm
