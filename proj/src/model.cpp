#include "lnsm/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <iomanip>
#include <vector>

#include <boost/math/special_functions/expint.hpp>

#include "lnsm/errors.hpp"
#include "lnsm/quadrature.hpp"

namespace lnsm {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> mass_breaks(double m2, double top) {
  std::vector<double> b{0.0};
  for (double x = m2; x < top; x *= 8.0) b.push_back(x);
  b.push_back(top);
  return b;
}

// int_0^inf du / (u e^u + m2)^k
double exp_integral(double m2, int k) {
  auto f = [m2, k](double u) { return std::pow(u * std::exp(u) + m2, -k); };
  double s = integrate_pieces(f, mass_breaks(m2, 1.0), 1e-13) + integrate(f, 1.0, 40.0, 1e-13);
  if (k == 1) s += boost::math::expint(1, 40.0);
  return s;
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be positive");
}

} // namespace

Regulator parse_regulator(const std::string& s) {
  if (s == "sharp") return Regulator::sharp;
  if (s == "exponential") return Regulator::exponential;
  if (s == "none") return Regulator::none;
  throw ValidationError("regulator: unknown value '" + s + "'");
}

std::string to_string(Regulator r) {
  switch (r) {
  case Regulator::sharp: return "sharp";
  case Regulator::exponential: return "exponential";
  case Regulator::none: return "none";
  }
  return "?";
}

double gap_lhs(double m2, Regulator reg) {
  switch (reg) {
  case Regulator::sharp: return std::log1p(1.0 / m2) / (8.0 * kPi);
  case Regulator::exponential: return exp_integral(m2, 1) / (8.0 * kPi);
  case Regulator::none: break;
  }
  throw ValidationError("gap equation needs a regulator");
}

double solve_gap_equation(double lambda, double bigK, Regulator reg) {
  check_positive(lambda, "lambda");
  check_positive(bigK, "K");
  const double lk = lambda * bigK;
  auto h = [&](double x) {
    double m2 = std::exp(x);
    return gap_lhs(m2, reg) - m2 / lk - 0.5 / lambda;
  };
  double lo = std::log(1e-30), hi = 0.0;
  double hlo = h(lo), hhi = h(hi);
  if (!(hlo > 0.0 && hhi < 0.0))
    throw NoRootError("gap equation: no sign change on [1e-30, 1]");
  while (hi - lo > 1e-13) {
    double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? lo : hi) = mid;
  }
  double m2 = std::exp(0.5 * (lo + hi));
  if (reg == Regulator::exponential) {
    for (int it = 0; it < 3; ++it) {
      double r = gap_lhs(m2, reg) - m2 / lk - 0.5 / lambda;
      double d = -exp_integral(m2, 2) / (8.0 * kPi) - 1.0 / lk;
      double step = r / d;
      if (!(std::abs(step) < 1e-6 * m2)) break;
      m2 -= step;
    }
  } else {
    for (int it = 0; it < 3; ++it) {
      double r = gap_lhs(m2, reg) - m2 / lk - 0.5 / lambda;
      double d = -1.0 / (8.0 * kPi * m2 * (1.0 + m2)) - 1.0 / lk;
      double step = r / d;
      if (!(std::abs(step) < 1e-6 * m2)) break;
      m2 -= step;
    }
  }
  return m2;
}

double leading_mass(double lambda) { return std::exp(-4.0 * kPi / lambda); }

ModelParams params_with_mass(double lambda, double bigK, long long bigN, double m, Regulator reg,
                             std::optional<double> corridor_override) {
  check_positive(lambda, "lambda");
  check_positive(bigK, "K");
  check_positive(m, "m");
  if (bigN < 2) throw ValidationError("N must be at least 2");
  if (bigN % 2 != 0) throw ValidationError("N must be even");
  ModelParams p;
  p.lambda = lambda;
  p.bigK = bigK;
  p.bigN = bigN;
  p.regulator = reg;
  p.g = std::sqrt(lambda * bigK / double(bigN));
  p.m = m;
  p.epsilon = std::pow(double(bigN), -0.4);
  if (corridor_override) {
    check_positive(*corridor_override, "corridor_override");
    p.corridorM = *corridor_override;
  } else {
    p.corridorM = 2.0 / m * std::log(double(bigN));
  }
  if (lambda > 2.0 / kPi && lambda < kPi)
    p.mass_window_ok = m > std::exp(-10.0) && m < 1.0 / 6.0;
  return p;
}

ModelParams derive_params(double lambda, double bigK, long long bigN, Regulator reg,
                          std::optional<double> corridor_override) {
  if (bigN < 2) throw ValidationError("N must be at least 2");
  if (bigN % 2 != 0) throw ValidationError("N must be even");
  double m2 = solve_gap_equation(lambda, bigK, reg);
  return params_with_mass(lambda, bigK, bigN, std::sqrt(m2), reg, corridor_override);
}

std::string report(const ModelParams& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "lambda=" << p.lambda << "\n"
     << "K=" << p.bigK << "\n"
     << "N=" << p.bigN << "\n"
     << "regulator=" << to_string(p.regulator) << "\n"
     << "g=" << p.g << "\n"
     << "m=" << p.m << "\n"
     << "m2=" << p.m2() << "\n"
     << "c_m=" << p.m2() * std::exp(4.0 * kPi / p.lambda) << "\n"
     << "epsilon=" << p.epsilon << "\n"
     << "corridorM=" << p.corridorM << "\n"
     << "mass_window_ok=" << (p.mass_window_ok ? 1 : 0) << "\n";
  return os.str();
}

} // namespace lnsm
