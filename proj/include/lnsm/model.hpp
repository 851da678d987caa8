#pragma once

#include <optional>
#include <string>

namespace lnsm {

// none is the unregulated test mode (p^2 instead of p^2 e^{p^2}).
enum class Regulator { sharp, exponential, none };

Regulator parse_regulator(const std::string& s);
std::string to_string(Regulator r);

struct ModelParams {
  double lambda = 1.0;
  double bigK = 1.0;
  long long bigN = 2;
  double g = 0.0;
  double m = 0.0;
  double epsilon = 0.0;
  double corridorM = 0.0;
  Regulator regulator = Regulator::exponential;
  // mass window e^-10 < m < 1/6, evaluated for 2/pi < lambda < pi.
  bool mass_window_ok = true;

  double m2() const { return m * m; }
  double lambdaK() const { return lambda * bigK; }
};

// (1/8pi) int_0^inf du / (u_reg + m2), u_reg = u e^u (exponential) or u (none);
// for sharp, the integral cut at u = 1.
double gap_lhs(double m2, Regulator reg);

// Returns m^2.
double solve_gap_equation(double lambda, double bigK, Regulator reg);

double leading_mass(double lambda);

ModelParams derive_params(double lambda, double bigK, long long bigN, Regulator reg,
                          std::optional<double> corridor_override = std::nullopt);

// Same thresholds but with the gap mass given directly.
ModelParams params_with_mass(double lambda, double bigK, long long bigN, double m, Regulator reg,
                             std::optional<double> corridor_override = std::nullopt);

std::string report(const ModelParams& p);

} // namespace lnsm
