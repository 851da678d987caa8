#include "lnsm/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "lnsm/errors.hpp"
#include "lnsm/util.hpp"

namespace lnsm {

Eigen::MatrixXd DiscretizedOperator::kernel() const {
  Eigen::MatrixXd k = matrix;
  for (int y = 0; y < k.cols(); ++y) k.col(y) /= weights(y);
  return k;
}

SiteMask mask_of_squares(const LatticeGeometry& geo, const std::vector<Square>& squares) {
  SiteMask m(geo.site_count(), 0);
  for (const Square& s : squares) {
    int q = geo.square_index(s);
    if (q < 0) continue;
    for (int x : geo.square_sites(q)) m[x] = 1;
  }
  return m;
}

SiteMask mask_and(const SiteMask& a, const SiteMask& b) {
  SiteMask m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = a[i] && b[i];
  return m;
}

SiteMask mask_not(const SiteMask& a) {
  SiteMask m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = !a[i];
  return m;
}

Eigen::MatrixXd projector(const SiteMask& mask) {
  Eigen::VectorXd d(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) d(i) = mask[i] ? 1.0 : 0.0;
  return d.asDiagonal();
}

Eigen::MatrixXd restrict_matrix(const Eigen::MatrixXd& m, const SiteMask& rows, const SiteMask& cols) {
  Eigen::MatrixXd r = m;
  for (int i = 0; i < r.rows(); ++i)
    for (int j = 0; j < r.cols(); ++j)
      if (!rows[i] || !cols[j]) r(i, j) = 0.0;
  return r;
}

SampledKernel lattice_kernel(const RadialKernel& k, const LatticeGeometry& geo) {
  return tabulate(k, geo.step(), geo.step() * (geo.sites_per_side() - 1), false);
}

SampledKernel lattice_propagator(const ModelParams& params, const LatticeGeometry& geo) {
  if (params.regulator != Regulator::none) {
    double tail = aliasing_tail(params.m, geo.step(), params.regulator);
    if (tail > 1e-6) throw ResolutionError("propagator: momentum tail beyond lattice Nyquist " + fmt17(tail));
  }
  return lattice_kernel(propagator_radial_kernel(params.m, params.regulator), geo);
}

DiscretizedOperator kernel_operator(const SampledKernel& k, const LatticeGeometry& geo) {
  const double ratio = geo.step() / k.grid_step;
  const int r = int(std::lround(ratio));
  if (r < 1 || std::abs(ratio - r) > 1e-9)
    throw ValidationError("kernel grid step does not divide the lattice step");
  const int ns = geo.sites_per_side();
  if ((ns - 1) * r > k.half) throw ValidationError("kernel extent smaller than the lattice");
  const int n = geo.site_count();
  const double w = geo.weight();
  DiscretizedOperator op;
  op.weights = Eigen::VectorXd::Constant(n, w);
  op.matrix.resize(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      op.matrix(x, y) = w * k.at(r * (geo.site_ix(x) - geo.site_ix(y)), r * (geo.site_iy(x) - geo.site_iy(y)));
  op.matrix.diagonal().array() += k.delta;
  return op;
}

DiscretizedOperator build_A(const FieldConfig& field, const ModelParams& params, const LatticeGeometry& geo,
                            const SampledKernel& F) {
  if (int(field.tau.size()) != geo.site_count()) throw ValidationError("build_A: field does not match geometry");
  DiscretizedOperator op = kernel_operator(F, geo);
  const SiteMask lam = geo.lambda_mask();
  for (int y = 0; y < op.size(); ++y) op.matrix.col(y) *= lam[y] ? params.g * field.tau[y] : 0.0;
  for (int x = 0; x < op.size(); ++x)
    if (!lam[x]) op.matrix.row(x).setZero();
  return op;
}

ABlocks split_blocks(const DiscretizedOperator& A, const LatticeGeometry& geo, const LSAssignment& assignment) {
  if (int(assignment.level.size()) != geo.square_count()) throw ValidationError("split_blocks: assignment size");
  ABlocks b;
  const int n = A.size();
  b.small.assign(n, 0);
  b.large.assign(n, 0);
  for (int x = 0; x < n; ++x) {
    int q = geo.site_square(x);
    if (!geo.in_lambda(geo.square(q))) continue;
    (assignment.level[q] > 0 ? b.large : b.small)[x] = 1;
  }
  b.A = A.matrix;
  b.As = restrict_matrix(A.matrix, b.small, b.small);
  b.Al = restrict_matrix(A.matrix, b.large, b.large);
  b.Aprime = restrict_matrix(A.matrix, b.small, b.large) + restrict_matrix(A.matrix, b.large, b.small);
  return b;
}

double operator_norm(const Eigen::MatrixXcd& m, std::uint64_t seed, double tol) {
  if (m.size() == 0) return 0.0;
  if (!m.allFinite()) throw ValidationError("operator_norm: non-finite entries");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd v(m.cols());
  for (int i = 0; i < v.size(); ++i) v(i) = cplx(nd(rng), nd(rng));
  v.normalize();
  double est = 0.0;
  int stable = 0;
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXcd u = m.adjoint() * (m * v);
    double nu = u.norm();
    if (nu == 0.0) return 0.0;
    double next = std::sqrt(nu);
    v = u / nu;
    if (std::abs(next - est) <= tol * next) {
      if (++stable >= 5) return next;
    } else {
      stable = 0;
    }
    est = next;
  }
  throw ConvergenceError("operator_norm: power iteration did not converge");
}

double operator_norm(const Eigen::MatrixXd& m, std::uint64_t seed, double tol) {
  return operator_norm(Eigen::MatrixXcd(m.cast<cplx>()), seed, tol);
}

Eigen::VectorXd real_spectrum(const Eigen::MatrixXd& m, double* max_imag) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  Eigen::VectorXcd ev = es.eigenvalues();
  double im = 0.0;
  Eigen::VectorXd re(ev.size());
  for (int i = 0; i < ev.size(); ++i) {
    im = std::max(im, std::abs(ev(i).imag()));
    re(i) = ev(i).real();
  }
  if (max_imag) *max_imag = im;
  std::sort(re.data(), re.data() + re.size());
  return re;
}

namespace {

// log(1+mu) + sum_{j=1}^{n-1} (-1)^j mu^j / j
cplx log_reg_term(cplx mu, int order) {
  if (std::abs(mu) < 0.25) {
    cplx s = 0.0, p = std::pow(mu, order);
    for (int j = order; j < order + 200; ++j) {
      cplx t = (j % 2 ? 1.0 : -1.0) * p / double(j);
      s += t;
      if (std::abs(t) < 1e-18 * std::max(std::abs(s), 1e-300)) break;
      p *= mu;
    }
    return s;
  }
  cplx s = std::log(1.0 + mu), p = mu;
  for (int j = 1; j < order; ++j) {
    s += (j % 2 ? -1.0 : 1.0) * p / double(j);
    p *= mu;
  }
  return s;
}

cplx lu_logdet(const Eigen::MatrixXcd& m) {
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
  const Eigen::MatrixXcd& f = lu.matrixLU();
  cplx s = 0.0;
  for (int i = 0; i < f.rows(); ++i) s += std::log(f(i, i));
  if (lu.permutationP().determinant() < 0) s += cplx(0.0, M_PI);
  return s;
}

double rel_diff_exp(cplx a, cplx b) {
  // |e^a - e^b| / |e^a|
  return std::abs(1.0 - std::exp(b - a));
}

} // namespace

RegDet det_reg_eigenvalues(const Eigen::VectorXcd& mu, int order) {
  if (order < 1) throw ValidationError("det_reg: order must be >= 1");
  RegDet d;
  for (int i = 0; i < mu.size(); ++i) {
    if (std::abs(1.0 + mu(i)) < 1e-12) throw SingularityError("det_reg: 1 + K has an eigenvalue near 0");
    d.log += log_reg_term(mu(i), order);
  }
  return d;
}

RegDet det_reg(const Eigen::MatrixXcd& K, int order) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(K, false);
  return det_reg_eigenvalues(es.eigenvalues(), order);
}

double DetSplit::max_residual() const {
  return std::max({split_residual, middle_residual, rewrite_residual});
}

Eigen::MatrixXcd b_operator(const ABlocks& blocks) {
  const int n = int(blocks.A.rows());
  const cplx I(0.0, 1.0);
  Eigen::MatrixXcd one = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd Ks = I * blocks.As.cast<cplx>();
  Eigen::MatrixXcd K2 = I * blocks.App().cast<cplx>();
  return (one + Ks).partialPivLu().solve(K2);
}

DetSplit det_split_identity(const ABlocks& blocks, const ModelParams& params) {
  const int n = int(blocks.A.rows());
  const cplx I(0.0, 1.0);
  Eigen::MatrixXcd one = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd K = I * blocks.A.cast<cplx>();
  Eigen::MatrixXcd Ks = I * blocks.As.cast<cplx>();
  Eigen::MatrixXcd B = b_operator(blocks);

  DetSplit out;
  const cplx full = lu_logdet(one + K);
  const cplx s_part = lu_logdet(one + Ks), b_part = lu_logdet(one + B);
  out.split_residual = rel_diff_exp(full, s_part + b_part);

  // det_3(1+K_s) det_2(1+B) against the single determinant forms
  const cplx lhs = det_reg(Ks, 3).log + det_reg(B, 2).log;
  const cplx trK2s = (Ks * Ks).trace();
  const cplx middle = full - (Ks.trace() - 0.5 * trK2s + B.trace());
  out.middle_residual = rel_diff_exp(lhs, middle);
  const cplx rewrite = det_reg(K, 2).log + 0.5 * trK2s;
  out.rewrite_residual = rel_diff_exp(lhs, rewrite);

  out.b_det_log = -0.5 * double(params.bigN) * det_reg(B, 2).log.real();
  return out;
}

DSplit D_decomposition(const ABlocks& blocks) {
  const int n = int(blocks.A.rows());
  const cplx I(0.0, 1.0);
  Eigen::MatrixXcd one = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd B = b_operator(blocks);
  Eigen::MatrixXcd D = B + B.adjoint() + B.adjoint() * B;
  D = 0.5 * (D + D.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(D, Eigen::EigenvaluesOnly);
  DSplit out;
  double logdet_d = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = es.eigenvalues()(i);
    if (d < 0.0) {
      out.d_minus_norm = std::max(out.d_minus_norm, -d);
      out.tr_dminus_sq += d * d;
    } else {
      out.d_plus_norm = std::max(out.d_plus_norm, d);
    }
    logdet_d += std::log1p(d);
  }
  Eigen::MatrixXcd Ks = I * blocks.As.cast<cplx>();
  Eigen::MatrixXcd delta = I * ((one + Ks).inverse() - one);
  out.eta = 2.0 * operator_norm(delta);
  out.eta_bound = out.eta < 1.0 ? 4.0 / 25.0 * out.eta * out.eta / (1.0 - out.eta) : INFINITY;
  const double log_abs_det_b = lu_logdet(one + B).real();
  out.abs_det_residual = std::abs(std::expm1(0.5 * logdet_d - log_abs_det_b));
  return out;
}

std::pair<double, double> trace_projection_inequality(const Eigen::MatrixXd& A, const SiteMask& P, int r) {
  if (r < 1) throw ValidationError("trace inequality: r must be >= 1");
  Eigen::MatrixXd p = projector(P);
  Eigen::MatrixXd pap = p * A * p;
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(A.rows(), A.cols()), ar = lhs;
  for (int i = 0; i < r; ++i) {
    lhs = lhs * pap;
    ar = ar * A;
  }
  return {lhs.trace(), (p * ar * p).trace()};
}

double derived_link_norm(const DiscretizedOperator& A, const LatticeGeometry& geo, Square from, Square to) {
  if (from == to) throw ValidationError("link norm: squares must differ");
  return operator_norm(restrict_matrix(A.matrix, mask_of_squares(geo, {to}), mask_of_squares(geo, {from})));
}

double cauchy_link_norm(const DiscretizedOperator& A, const LatticeGeometry& geo, const std::vector<LinkPair>& links,
                        const ModelParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(A.size(), A.size());
  for (const LinkPair& l : links) {
    double d = square_distance(l.from, l.to);
    double radius = std::pow(double(params.bigN), 1.0 / 6.0) * std::exp(0.9 * params.m * d);
    cplx alpha = std::polar(radius, phase(rng));
    sum += alpha * restrict_matrix(A.matrix, mask_of_squares(geo, {l.to}), mask_of_squares(geo, {l.from})).cast<cplx>();
  }
  return operator_norm(sum);
}

std::pair<double, double> cubic_trace_bound(const Eigen::MatrixXd& As) {
  double lhs = std::abs((As * As * As).trace());
  double rhs = operator_norm(As) * (As.transpose() * As).trace();
  return {lhs, rhs};
}

double integral_tau2(const FieldConfig& field, const LatticeGeometry& geo, const SiteMask& mask) {
  double s = 0.0;
  for (int x = 0; x < geo.site_count(); ++x)
    if (mask[x]) s += geo.weight() * field.tau[x] * field.tau[x];
  return s;
}

} // namespace lnsm
