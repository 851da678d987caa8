#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lnsm/model.hpp"
#include "lnsm/quadrature.hpp"

namespace lnsm {

// f(p) = c (p^2)^2 with alpha (p^2)^2 <= f <= A (p^2)^2.
// compact: the kernel is multiplied by the Wendland taper (1-r)^4 (4r+1) and renormalized,
// which keeps it positive definite with support |x| <= 1.
struct CutoffSpec {
  double alpha = 0.5;
  double bigA = 2.0;
  double c = 1.0;
  bool compact = true;
  void validate() const;
};

double regulated_p2(double p2, Regulator reg);
double propagator_momentum(double p2, double m2, Regulator reg);

// pi(p) by direct 2D quadrature (shifted polar coordinates).
double polarization_momentum(double p2, const ModelParams& params, double rel_tol = 1e-12);

// Piecewise Chebyshev table of log pi(p) in |p| on geometric panels.
class PolarizationTable {
public:
  explicit PolarizationTable(const ModelParams& params, double qmax = 8.0, int nodes = 20);
  double operator()(double p) const;
  double qmax() const { return qmax_; }
  double at_zero() const { return pi0_; }

private:
  struct Panel {
    double a, b;
    std::vector<double> x, f, w;
  };
  std::vector<Panel> panels_;
  double qmax_;
  double pi0_;
};

struct DecayFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double residual = 0.0; // rms of the log residual
  int points = 0;
  double r_lo = 0.0, r_hi = 0.0;
};

// Least squares of log|v| + kappa log r against r on [r_lo, r_hi]; values below 1e-13 dropped.
DecayFit fit_decay(const std::vector<double>& r, const std::vector<double>& v, double r_lo, double r_hi,
                   double kappa);
DecayFit measure_decay(const Fn& k, double r_lo, double r_hi, double kappa, int points = 48);

struct RadialKernel {
  std::string name;
  Fn f;              // continuous part, as a function of |x|
  double delta = 0;  // weight of the delta part
  double rate_hint = 0; // expected decay rate, sets the fit window
  double kappa = 0;  // power-law prefactor used in the fit
};

struct SampledKernel {
  std::string name;
  double grid_step = 0.125;
  double half_extent = 10.0;
  int half = 0;                 // values for displacements -half..half per axis
  std::vector<double> values;   // row-major (2 half + 1)^2
  double delta = 0.0;
  double fitted_decay_rate = 0.0;
  double fit_residual = 0.0;
  double fit_r2 = 0.0;
  double fit_lo = 0.0, fit_hi = 0.0;
  double sup_norm = 0.0;

  int width() const { return 2 * half + 1; }
  double at(int di, int dj) const { return values[std::size_t(di + half) * width() + (dj + half)]; }
};

SampledKernel tabulate(const RadialKernel& k, double grid_step, double half_extent, bool fit = true);

// Radial kernels.
double propagator_radial(double r, double m, Regulator reg = Regulator::exponential);
RadialKernel propagator_radial_kernel(double m, Regulator reg = Regulator::exponential);
RadialKernel polarization_radial_kernel(const ModelParams& params);
RadialKernel sqrt_pi_radial_kernel(const ModelParams& params, int sign,
                                   std::shared_ptr<const PolarizationTable> table = nullptr);
RadialKernel cutoff_radial_kernel(const CutoffSpec& spec);

// Relative momentum tail of F beyond the Nyquist radius pi/grid_step.
double aliasing_tail(double m, double grid_step, Regulator reg = Regulator::exponential);

SampledKernel propagator_kernel(double m, double grid_step, double half_extent,
                                Regulator reg = Regulator::exponential);
SampledKernel polarization_kernel(const ModelParams& params, double grid_step, double half_extent);
SampledKernel sqrt_one_plus_pi_kernel(const ModelParams& params, int sign, double grid_step,
                                      double half_extent,
                                      std::shared_ptr<const PolarizationTable> table = nullptr);
SampledKernel cutoff_inverse_kernel(const CutoffSpec& spec, double grid_step, double half_extent);

double kelvin_kei(double x);
double cutoff_mass_outside(const CutoffSpec& spec, double radius = 1.0);
// int d^2p (1 + c p^4)^{-r}
double cutoff_power_integral(double c, int r);

void write_kernel_cache(const std::string& path, const SampledKernel& k, const std::string& params_hash);
SampledKernel read_kernel_cache(const std::string& path, std::string* params_hash = nullptr);
void write_radial_profile_csv(const std::string& path, const RadialKernel& k, double r_max, int points);

} // namespace lnsm
