#pragma once

#include <map>
#include <random>
#include <vector>

#include "lnsm/geometry.hpp"
#include "lnsm/model.hpp"

namespace lnsm {

// C-infinity step: 0 for x <= -1/4, 1 for x >= 1/4.
double smooth_step(double x);

// Windows in terms of v = lambda K ||tau_Delta||^2.
double theta_small(double v, double bigN);
double theta_window(double v, double bigN, int n);
int window_count(double v_max, double bigN);

struct LSAssignment {
  std::vector<int> level;              // per square of the geometry: 0 = s, n >= 1 = l^n
  std::vector<double> theta_s;
  std::vector<std::vector<double>> theta_n; // theta_n[sq][n-1]
};

LSAssignment classify_squares(const FieldConfig& field, const ModelParams& params, const LatticeGeometry& geo);
LSAssignment assignment_from_levels(std::vector<int> levels);

struct RegionComponent {
  std::vector<Square> l, gamma, bigGamma;
};

struct RegionEComponent {
  std::vector<Square> l, bigGammaE;
};

struct RegionSet {
  double corridorM = 0.0;
  std::vector<Square> lambda_l, lambda_s;
  std::map<int, std::vector<Square>> lambda_ln;
  std::vector<Square> gamma, bigGamma, bigGammaE;
  std::vector<std::vector<Square>> l_components; // connected components of Lambda_l
  std::vector<RegionComponent> components;
  std::vector<RegionEComponent> ecomponents;
};

RegionSet build_regions(const LSAssignment& assignment, const LatticeGeometry& geo, double corridorM);

double set_distance(const std::vector<Square>& a, const std::vector<Square>& b);

struct SuppressionBound {
  double log_left = 0.0;     // -(49/100) int_{Lambda_l} tau^2
  double log_product = 0.0;  // -N^{1/8}|Gamma^e| - sum N^{(n-1)/8}
  double log_right = 0.0;    // -(1/4) int_{Lambda_l} tau^2 + log_product
  bool holds = true;
};

// Gaussian noise rescaled per square so that lambda K ||tau_Delta||^2 equals target_v[square];
// squares outside Lambda stay zero.
FieldConfig field_with_masses(const LatticeGeometry& geo, const ModelParams& params, const std::vector<double>& target_v,
                              std::mt19937_64& rng);

SuppressionBound large_field_suppression(const LSAssignment& assignment, const FieldConfig& field,
                                         const ModelParams& params, const LatticeGeometry& geo);

struct SuppressionScanRow {
  double bigN = 0.0;
  double corridorM = 0.0;
  double gammaE_squares = 0.0;
  double margin = 0.0; // log_right - log_left
  bool holds = false;
};

// Single l^1 square at the bottom of its window, corridor (2/m) ln N, unbounded Lambda.
std::vector<SuppressionScanRow> suppression_scan(const std::vector<double>& Ns, double m, double lambdaK);
// log10 N where the scan margin changes sign.
double suppression_threshold(double m, double lambdaK);

} // namespace lnsm
