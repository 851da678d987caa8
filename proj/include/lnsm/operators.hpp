#pragma once

#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lnsm/geometry.hpp"
#include "lnsm/kernels.hpp"
#include "lnsm/model.hpp"
#include "lnsm/regions.hpp"

namespace lnsm {

using cplx = std::complex<double>;

// Action matrix over the sites of a geometry: (K phi)(x) = sum_y matrix(x,y) phi(y).
// For an integral kernel k this is k(x-y) w_y, so matrix products compose operators.
struct DiscretizedOperator {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd weights;

  int size() const { return int(matrix.rows()); }
  Eigen::MatrixXd kernel() const;
};

using SiteMask = std::vector<char>;

SiteMask mask_of_squares(const LatticeGeometry& geo, const std::vector<Square>& squares);
SiteMask mask_and(const SiteMask& a, const SiteMask& b);
SiteMask mask_not(const SiteMask& a);
Eigen::MatrixXd projector(const SiteMask& mask);
// P_rows M P_cols
Eigen::MatrixXd restrict_matrix(const Eigen::MatrixXd& m, const SiteMask& rows, const SiteMask& cols);

// Kernel sampled exactly at the lattice displacements of the geometry (no decay fit).
SampledKernel lattice_kernel(const RadialKernel& k, const LatticeGeometry& geo);
// Regulated propagator on the lattice; throws ResolutionError if the momentum tail
// beyond the lattice Nyquist radius exceeds 1e-6.
SampledKernel lattice_propagator(const ModelParams& params, const LatticeGeometry& geo);

// Translation invariant operator from a sampled kernel whose grid divides the lattice step.
DiscretizedOperator kernel_operator(const SampledKernel& k, const LatticeGeometry& geo);

// A = P_Lambda F g tau P_Lambda.
DiscretizedOperator build_A(const FieldConfig& field, const ModelParams& params, const LatticeGeometry& geo,
                            const SampledKernel& F);

struct ABlocks {
  Eigen::MatrixXd A, As, Al, Aprime;
  SiteMask small, large;
  Eigen::MatrixXd App() const { return A - As; } // A'' = A' + A_l
};

ABlocks split_blocks(const DiscretizedOperator& A, const LatticeGeometry& geo, const LSAssignment& assignment);

// Largest singular value by power iteration on M^* M.
double operator_norm(const Eigen::MatrixXcd& m, std::uint64_t seed = 1, double tol = 1e-12);
double operator_norm(const Eigen::MatrixXd& m, std::uint64_t seed = 1, double tol = 1e-12);

// Eigenvalues of an operator claimed to have real spectrum; max |imag| reported.
Eigen::VectorXd real_spectrum(const Eigen::MatrixXd& m, double* max_imag = nullptr);

struct RegDet {
  cplx log{0.0, 0.0}; // log det_n(1+K), branch chosen by summing per-eigenvalue logs
  cplx value() const { return std::exp(log); }
};

// det_n(1+K) = det(1+K) exp(sum_{j<n} (-1)^j Tr K^j / j), from the eigenvalues of K.
RegDet det_reg_eigenvalues(const Eigen::VectorXcd& mu, int order);
RegDet det_reg(const Eigen::MatrixXcd& K, int order);

struct DetSplit {
  double split_residual = 0.0;   // det(1+iA) vs det(1+iA_s) det(1+B)
  double middle_residual = 0.0;  // single determinant with the trace exponential
  double rewrite_residual = 0.0; // det_2(1+iA) exp Tr{-(iA_s)^2/2}
  double b_det_log = 0.0;       // log |det_2^{-N/2}(1+B)|
  double max_residual() const;
};

// B = (1+iA_s)^{-1} iA''
Eigen::MatrixXcd b_operator(const ABlocks& blocks);
DetSplit det_split_identity(const ABlocks& blocks, const ModelParams& params);

struct DSplit {
  double d_plus_norm = 0.0;
  double d_minus_norm = 0.0;
  double tr_dminus_sq = 0.0;
  double eta = 0.0;             // 2 ||delta||, delta = i((1+iA_s)^{-1} - 1)
  double eta_bound = 0.0;       // 4/25 eta^2 / (1 - eta)
  double abs_det_residual = 0.0; // |det^{-1}(1+B)| vs det^{-1/2}(1+D)
};

DSplit D_decomposition(const ABlocks& blocks);

// (Tr (PAP)^r, Tr P A^r P) for Hermitian PSD A.
std::pair<double, double> trace_projection_inequality(const Eigen::MatrixXd& A, const SiteMask& P, int r);

// ||P_to A P_from||
double derived_link_norm(const DiscretizedOperator& A, const LatticeGeometry& geo, Square from, Square to);

struct LinkPair {
  Square from, to;
};

// ||sum_l alpha_l P_to A P_from|| with |alpha_l| = N^{1/6} exp(9 m d_l / 10) and seeded random phases.
double cauchy_link_norm(const DiscretizedOperator& A, const LatticeGeometry& geo, const std::vector<LinkPair>& links,
                        const ModelParams& params, std::uint64_t seed = 1);

// |Tr A_s^3| and ||A_s|| Tr(A_s^* A_s)
std::pair<double, double> cubic_trace_bound(const Eigen::MatrixXd& As);

double integral_tau2(const FieldConfig& field, const LatticeGeometry& geo, const SiteMask& mask);

} // namespace lnsm
