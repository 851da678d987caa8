#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lnsm/kernels.hpp"
#include "lnsm/operators.hpp"
#include "lnsm/regions.hpp"

namespace lnsm {

struct CovarianceOptions {
  CutoffSpec cutoff;
  double epsilon = -1.0; // negative: N^{-2/5}
  bool pi_zero = false;  // 1 + pi -> 1
  bool f_zero = false;   // 1/(1+f) -> delta
};

// Lattice operators shared by every gamma: Q = (1+pi)^{-1/2}, S = Q^{-1}, T = 1/(1+f) (unit lattice sum).
// All matrices are action matrices over the sites of geo.
struct CovarianceContext {
  LatticeGeometry geo{1, 1};
  ModelParams params;
  double epsilon = 0.0;
  double pi0 = 0.0; // pi at p = 0
  Eigen::MatrixXd Q, S, T, Thalf, C0;
  double t_min = 0.0, t_max = 0.0; // spectrum of T

  double weight() const { return geo.weight(); }
  Eigen::MatrixXd one_plus_pi() const { return S * S; }
  Eigen::MatrixXd f_hat() const; // S (T^{-1} - 1) S
};

CovarianceContext build_covariance_context(const ModelParams& params, const LatticeGeometry& geo,
                                           const CovarianceOptions& opt = {});

DiscretizedOperator build_C0(const CovarianceContext& ctx);

struct CovarianceSet {
  Eigen::MatrixXd Cgamma, correction;          // direct inverse
  Eigen::MatrixXd Cgamma_neumann;
  std::vector<Eigen::MatrixXd> pieces;         // C^{gamma_i}
  int neumann_terms = 0;
  double neumann_residual = 0.0;               // sup |direct - neumann| / sup |Cgamma|
  double factor_residual = 0.0;                // sup |C^gamma - sum_i C^{gamma_i}|
  double cross_entry_max = 0.0;                // sup |C^gamma(x,y)|, x in Gamma_i, y in Gamma_j, i != j
  double min_eig_C0 = 0.0, min_eig_Cgamma = 0.0;
  double log_Z = 0.0;                          // from P_gamma T P_gamma
  double log_Z_generalized = 0.0;              // from the pencil (C_gamma, C_0)
  std::vector<double> log_Z_components;
  double gamma_volume = 0.0;
};

SiteMask gamma_mask(const LatticeGeometry& geo, const std::vector<Square>& gamma);

CovarianceSet build_Cgamma(const CovarianceContext& ctx, const RegionSet& regions);

// log Z_gamma = -1/2 log det(1 - (1-eps) P_gamma T P_gamma)
double log_Zgamma(const CovarianceContext& ctx, const SiteMask& gamma);

struct DeltaC {
  Eigen::MatrixXd d1, d2, d3, d4;
  Eigen::MatrixXd sum() const { return d1 + d2 + d3 + d4; }
  double identity_residual = 0.0;      // restricted to Lambda, against delta C - P_l
  double full_identity_residual = 0.0; // whole grid, against delta C - P_l - (1 - P_Lambda)
  double d1_max_eig = 0.0;
  double d2_norm = 0.0;
  double d3_max_eig = 0.0;
  double d4_norm = 0.0;
};

// checks = false skips the identity residuals and spectral diagnostics.
DeltaC build_deltaC(const CovarianceContext& ctx, const RegionSet& regions, bool checks = true);

struct FittedConstant {
  std::string name;
  double value = 0.0;
};

// max |quantity| / envelope for the decay and separation bounds on C0 and C^gamma.
std::vector<FittedConstant> covariance_constants(const CovarianceContext& ctx, const RegionSet& regions,
                                                 const CovarianceSet& cs);

// Factor L with L L^T = cov (spectral; tiny negative eigenvalues clipped).
class GaussianSampler {
public:
  explicit GaussianSampler(const Eigen::MatrixXd& cov_kernel);
  Eigen::VectorXd draw(std::mt19937_64& rng) const;
  int dim() const { return int(L_.rows()); }
  double clipped() const { return clipped_; }

private:
  Eigen::MatrixXd L_;
  double clipped_ = 0.0;
};

std::vector<Eigen::VectorXd> sample_gaussian(const Eigen::MatrixXd& cov_kernel, std::uint64_t seed, int count);

struct StabilityTerms {
  double log_theta = 0.0;
  double log_l_gauss = 0.0; // -1/2 int_{Lambda_l} tau^2
  double log_det3 = 0.0;    // log |det_3^{-N/2}(1 + iA_s)|
  double log_det2 = 0.0;    // log |det_2^{-N/2}(1 + B)|
  double quad_dC = 0.0;     // 1/2 (tau, delta C tau)
  double log_Z = 0.0;
  double int_l = 0.0, int_s = 0.0;
  int l_squares = 0;

  double log_lhs() const { return log_theta + log_l_gauss + log_det3 + log_det2 + quad_dC + log_Z; }
  // c such that log_lhs = -49/100 int_l + c N^{-2/5} int_s
  double constant(double bigN) const;
};

StabilityTerms stability_terms(const CovarianceContext& ctx, const FieldConfig& field, const SampledKernel& F,
                       double corridorM);

struct ZDeltaEstimate {
  double z = 0.0, stderr_ = 0.0;
  double mean_theta = 0.0;
  int samples = 0;
};

// Single square with covariance chi C0 chi, integrand theta_s det_3^{-N/2}(1 + iA).
ZDeltaEstimate zdelta_mc(const CovarianceContext& ctx, const SampledKernel& F, int samples, std::uint64_t seed);

} // namespace lnsm
