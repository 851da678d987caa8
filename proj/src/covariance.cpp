#include "lnsm/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "lnsm/errors.hpp"

namespace lnsm {

namespace {

Eigen::MatrixXd sym(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

Eigen::MatrixXd diag_mask(const SiteMask& m) { return projector(m); }

double sup(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double max_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

SiteMask level_mask(const LatticeGeometry& geo, const std::vector<Square>& squares) {
  return mask_of_squares(geo, squares);
}

// (1 - X)^{-1} by repeated squaring of the Neumann partial sums
Eigen::MatrixXd neumann_inverse(const Eigen::MatrixXd& X, double tol, int* terms) {
  const int n = int(X.rows());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n), P = X;
  const double q = X.size() ? operator_norm(X) : 0.0;
  if (q >= 1.0) throw ConvergenceError("Neumann series: ratio " + std::to_string(q) + " >= 1");
  long long count = 1;
  double pn = q;
  for (int it = 0; it < 60; ++it) {
    if (pn <= tol * (1.0 - q)) break;
    sum += P * sum;
    P = P * P;
    count *= 2;
    pn = operator_norm(P);
  }
  if (terms) *terms = int(std::min<long long>(count, std::numeric_limits<int>::max()));
  return sum;
}

double site_gamma_distance(const LatticeGeometry& geo, int x, const std::vector<Square>& gamma) {
  auto p = geo.site_pos(x);
  double d = 1e300;
  for (const Square& s : gamma) {
    double dx = std::max({0.0, s.a - p[0], p[0] - (s.a + 1.0)});
    double dy = std::max({0.0, s.b - p[1], p[1] - (s.b + 1.0)});
    d = std::min(d, std::hypot(dx, dy));
  }
  return d;
}

} // namespace

Eigen::MatrixXd CovarianceContext::f_hat() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  Eigen::MatrixXd Tinv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return S * (Tinv - Eigen::MatrixXd::Identity(T.rows(), T.cols())) * S;
}

CovarianceContext build_covariance_context(const ModelParams& params, const LatticeGeometry& geo,
                                           const CovarianceOptions& opt) {
  CovarianceContext ctx;
  ctx.geo = geo;
  ctx.params = params;
  ctx.epsilon = opt.epsilon >= 0.0 ? opt.epsilon : std::pow(double(params.bigN), -0.4);
  if (!(ctx.epsilon > 0.0 && ctx.epsilon < 1.0)) throw ValidationError("covariance: epsilon must lie in (0,1)");
  const int n = geo.site_count();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  if (opt.pi_zero) {
    ctx.Q = I;
    ctx.S = I;
    ctx.pi0 = 0.0;
  } else {
    auto table = std::make_shared<PolarizationTable>(params);
    ctx.pi0 = table->at_zero();
    ctx.Q = sym(kernel_operator(lattice_kernel(sqrt_pi_radial_kernel(params, -1, table), geo), geo).matrix);
    Eigen::LLT<Eigen::MatrixXd> llt(ctx.Q);
    if (llt.info() != Eigen::Success) throw ResolutionError("(1+pi)^{-1/2} is not positive on this lattice");
    ctx.S = sym(llt.solve(I));
  }

  if (opt.f_zero) {
    ctx.T = I;
  } else {
    RadialKernel k = cutoff_radial_kernel(opt.cutoff);
    const double h = geo.step();
    const int reach = int(std::ceil(1.0 / h)) + 1;
    double lattice_sum = 0.0;
    for (int i = -reach; i <= reach; ++i)
      for (int j = -reach; j <= reach; ++j) lattice_sum += k.f(h * std::hypot(i, j));
    lattice_sum *= geo.weight();
    if (!opt.cutoff.compact) throw ValidationError("covariance: the lattice cutoff must be the compact one");
    ctx.T = sym(kernel_operator(lattice_kernel(k, geo), geo).matrix) / lattice_sum;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.T);
  ctx.t_min = es.eigenvalues().minCoeff();
  ctx.t_max = es.eigenvalues().maxCoeff();
  if (!(ctx.t_min > 0.0)) throw ResolutionError("cutoff kernel not positive definite on this lattice");
  ctx.Thalf = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  ctx.C0 = sym(ctx.Q * ctx.T * ctx.Q);
  return ctx;
}

DiscretizedOperator build_C0(const CovarianceContext& ctx) {
  if (!(min_eig(ctx.C0) > 0.0)) throw ResolutionError("C0 is not positive definite; grid too coarse");
  DiscretizedOperator op;
  op.matrix = ctx.C0;
  op.weights = Eigen::VectorXd::Constant(ctx.geo.site_count(), ctx.weight());
  return op;
}

SiteMask gamma_mask(const LatticeGeometry& geo, const std::vector<Square>& gamma) { return mask_of_squares(geo, gamma); }

double log_Zgamma(const CovarianceContext& ctx, const SiteMask& gamma) {
  std::vector<int> idx;
  for (int x = 0; x < int(gamma.size()); ++x)
    if (gamma[x]) idx.push_back(x);
  if (idx.empty()) return 0.0;
  Eigen::MatrixXd sub(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) sub(i, j) = ctx.T(idx[i], idx[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) s -= 0.5 * std::log1p(-(1.0 - ctx.epsilon) * es.eigenvalues()(i));
  return s;
}

CovarianceSet build_Cgamma(const CovarianceContext& ctx, const RegionSet& regions) {
  const LatticeGeometry& geo = ctx.geo;
  const int n = geo.site_count();
  const double e1 = 1.0 - ctx.epsilon;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  CovarianceSet cs;
  const SiteMask g = gamma_mask(geo, regions.gamma);
  const Eigen::MatrixXd P = diag_mask(g);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.T);
  Eigen::MatrixXd Tinv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  Eigen::MatrixXd inv = sym(ctx.S * (Tinv - e1 * P) * ctx.S);
  Eigen::LLT<Eigen::MatrixXd> llt(inv);
  if (llt.info() != Eigen::Success) throw SingularityError("C_gamma^{-1} is not positive definite");
  cs.Cgamma = sym(llt.solve(I));
  cs.correction = cs.Cgamma - ctx.C0;

  Eigen::MatrixXd X = e1 * ctx.Thalf * P * ctx.Thalf;
  cs.Cgamma_neumann = sym(ctx.Q * ctx.Thalf * neumann_inverse(X, 1e-12, &cs.neumann_terms) * ctx.Thalf * ctx.Q);
  cs.neumann_residual = sup(cs.Cgamma - cs.Cgamma_neumann) / sup(cs.Cgamma);

  Eigen::MatrixXd sum_pieces = Eigen::MatrixXd::Zero(n, n);
  for (const RegionComponent& c : regions.components) {
    Eigen::MatrixXd Pi = diag_mask(gamma_mask(geo, c.gamma));
    Eigen::MatrixXd Xi = e1 * ctx.Thalf * Pi * ctx.Thalf;
    Eigen::MatrixXd piece = sym(ctx.Q * ctx.Thalf * (neumann_inverse(Xi, 1e-12, nullptr) - I) * ctx.Thalf * ctx.Q);
    cs.log_Z_components.push_back(log_Zgamma(ctx, gamma_mask(geo, c.gamma)));
    sum_pieces += piece;
    cs.pieces.push_back(std::move(piece));
  }
  cs.factor_residual = sup(cs.correction - sum_pieces);

  for (std::size_t i = 0; i < regions.components.size(); ++i)
    for (std::size_t j = 0; j < regions.components.size(); ++j) {
      if (i == j) continue;
      SiteMask a = mask_of_squares(geo, regions.components[i].bigGamma);
      SiteMask b = mask_of_squares(geo, regions.components[j].bigGamma);
      for (int x = 0; x < n; ++x)
        if (a[x])
          for (int y = 0; y < n; ++y)
            if (b[y]) cs.cross_entry_max = std::max(cs.cross_entry_max, std::abs(cs.correction(x, y)) / ctx.weight());
    }

  cs.min_eig_C0 = min_eig(ctx.C0);
  cs.min_eig_Cgamma = min_eig(cs.Cgamma);
  cs.log_Z = log_Zgamma(ctx, g);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(cs.Cgamma, ctx.C0, Eigen::EigenvaluesOnly);
  for (int i = 0; i < ges.eigenvalues().size(); ++i) cs.log_Z_generalized += 0.5 * std::log(ges.eigenvalues()(i));
  for (char c : g) cs.gamma_volume += c ? ctx.weight() : 0.0;
  return cs;
}

DeltaC build_deltaC(const CovarianceContext& ctx, const RegionSet& regions, bool checks) {
  const LatticeGeometry& geo = ctx.geo;
  const int n = geo.site_count();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const SiteMask lam = geo.lambda_mask();
  const Eigen::MatrixXd Pg = diag_mask(gamma_mask(geo, regions.gamma));
  const Eigen::MatrixXd Ps = diag_mask(level_mask(geo, regions.lambda_s));
  const Eigen::MatrixXd Pl = diag_mask(level_mask(geo, regions.lambda_l));
  const Eigen::MatrixXd PL = diag_mask(lam), O = I - PL;
  const Eigen::MatrixXd& S = ctx.S;

  DeltaC d;
  Eigen::MatrixXd X = S * (I - Pg) * S;
  d.d1 = -Ps * S * Pg * S * Ps;
  d.d2 = Pl * X * Ps + Ps * X * Pl + Pl * X * Pl;
  d.d3 = O * X * PL + PL * X * O + O * X * O;
  d.d4 = ctx.epsilon * S * Pg * S;
  if (!checks) return d;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ctx.T);
  Eigen::MatrixXd Tinv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  Eigen::MatrixXd pi = S * S - I;
  Eigen::MatrixXd Cg_inv = S * (Tinv - (1.0 - ctx.epsilon) * Pg) * S;
  Eigen::MatrixXd Cls_inv = Ps * pi * Ps + I + S * (Tinv - I) * S;
  Eigen::MatrixXd lhs = Cg_inv - Cls_inv, dc = d.sum();
  const double scale = std::max(1.0, sup(lhs));
  d.full_identity_residual = sup(lhs - (dc - Pl - O)) / scale;
  d.identity_residual = sup(PL * (lhs - (dc - Pl)) * PL) / scale;

  d.d1_max_eig = max_eig(d.d1);
  d.d2_norm = operator_norm(d.d2);
  d.d3_max_eig = max_eig(d.d3);
  d.d4_norm = operator_norm(d.d4);
  return d;
}

std::vector<FittedConstant> covariance_constants(const CovarianceContext& ctx, const RegionSet& regions,
                                                 const CovarianceSet& cs) {
  const LatticeGeometry& geo = ctx.geo;
  const int n = geo.site_count();
  const double w = ctx.weight(), m = ctx.params.m, N = double(ctx.params.bigN);
  std::vector<double> dg(n);
  for (int x = 0; x < n; ++x) dg[x] = regions.gamma.empty() ? 1e300 : site_gamma_distance(geo, x, regions.gamma);
  SiteMask big = mask_of_squares(geo, regions.bigGamma), lam = geo.lambda_mask();

  double c0 = 0.0, env = 0.0, outside = 0.0, mixed = 0.0;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      auto px = geo.site_pos(x), py = geo.site_pos(y);
      double r = std::hypot(px[0] - py[0], px[1] - py[1]);
      c0 = std::max(c0, std::abs(ctx.C0(x, y)) / w * std::exp(2.0 * m * r));
      double cg = std::abs(cs.correction(x, y)) / w;
      if (regions.gamma.empty()) continue;
      env = std::max(env, cg / (std::pow(N, 0.4) * std::exp(-2.0 * m * (dg[x] + dg[y]))));
      bool xo = lam[x] && !big[x], yo = lam[y] && !big[y];
      if (xo && yo) outside = std::max(outside, cg);
      if (big[x] && yo) mixed = std::max(mixed, cg);
    }
  std::vector<FittedConstant> out = {{"C0_decay", c0}};
  if (!regions.gamma.empty()) {
    out.push_back({"Cgamma_envelope", env});
    out.push_back({"Cgamma_outside", outside * std::pow(N, 3.6)});
    out.push_back({"Cgamma_cross", cs.cross_entry_max * std::pow(N, 3.6)});
    out.push_back({"Cgamma_mixed", mixed * std::pow(N, 1.6)});
    out.push_back({"Z_volume", cs.gamma_volume > 0 ? cs.log_Z / cs.gamma_volume : 0.0});
  }
  return out;
}

GaussianSampler::GaussianSampler(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw ValidationError("sampler: covariance must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(cov));
  if (es.info() != Eigen::Success) throw ConvergenceError("sampler: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double top = std::max(ev.maxCoeff(), 0.0);
  if (ev.minCoeff() < -1e-8 * top) throw ValidationError("sampler: covariance is not positive semidefinite");
  clipped_ = ev.minCoeff() < 0.0 ? -ev.minCoeff() / top : 0.0;
  L_ = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd GaussianSampler::draw(std::mt19937_64& rng) const {
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(L_.cols());
  for (int i = 0; i < z.size(); ++i) z(i) = nd(rng);
  return L_ * z;
}

std::vector<Eigen::VectorXd> sample_gaussian(const Eigen::MatrixXd& cov_kernel, std::uint64_t seed, int count) {
  GaussianSampler s(cov_kernel);
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(s.draw(rng));
  return out;
}

double StabilityTerms::constant(double bigN) const {
  double num = log_lhs() + 0.49 * int_l;
  if (int_s == 0.0) return num <= 0.0 ? 0.0 : INFINITY;
  return num / (std::pow(bigN, -0.4) * int_s);
}

StabilityTerms stability_terms(const CovarianceContext& ctx, const FieldConfig& field, const SampledKernel& F,
                       double corridorM) {
  const LatticeGeometry& geo = ctx.geo;
  const ModelParams& p = ctx.params;
  const double N = double(p.bigN);
  StabilityTerms t;
  LSAssignment a = classify_squares(field, p, geo);
  RegionSet R = build_regions(a, geo, corridorM);
  for (int q = 0; q < geo.square_count(); ++q) {
    if (!geo.in_lambda(geo.square(q))) continue;
    double th = a.level[q] == 0 ? a.theta_s[q] : a.theta_n[q][a.level[q] - 1];
    t.log_theta += std::log(th);
    if (a.level[q] > 0) ++t.l_squares;
  }
  ABlocks b = split_blocks(build_A(field, p, geo, F), geo, a);
  t.int_l = integral_tau2(field, geo, b.large);
  t.int_s = integral_tau2(field, geo, b.small);
  t.log_l_gauss = -0.5 * t.int_l;
  const cplx I(0.0, 1.0);
  t.log_det3 = -0.5 * N * det_reg(Eigen::MatrixXcd(I * b.As.cast<cplx>()), 3).log.real();
  t.log_det2 = -0.5 * N * det_reg(b_operator(b), 2).log.real();
  Eigen::Map<const Eigen::VectorXd> tau(field.tau.data(), Eigen::Index(field.tau.size()));
  t.quad_dC = 0.5 * ctx.weight() * tau.dot(build_deltaC(ctx, R, false).sum() * tau);
  t.log_Z = log_Zgamma(ctx, gamma_mask(geo, R.gamma));
  return t;
}

ZDeltaEstimate zdelta_mc(const CovarianceContext& ctx, const SampledKernel& F, int samples, std::uint64_t seed) {
  const LatticeGeometry& geo = ctx.geo;
  const ModelParams& p = ctx.params;
  const int q = geo.square_index({0, 0});
  if (q < 0) throw ValidationError("zdelta: square (0,0) outside the grid");
  std::vector<int> sites = geo.square_sites(q);
  const int k = int(sites.size());
  const double w = ctx.weight(), N = double(p.bigN);
  DiscretizedOperator Fop = kernel_operator(F, geo);
  Eigen::MatrixXd cov(k, k), Fd(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      cov(i, j) = ctx.C0(sites[i], sites[j]) / w;
      Fd(i, j) = Fop.matrix(sites[i], sites[j]);
    }
  GaussianSampler sampler(cov);
  std::mt19937_64 rng(seed);
  const cplx I(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0, th_sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd tau = sampler.draw(rng);
    double v = p.lambdaK() * w * tau.squaredNorm();
    double th = theta_small(v, N);
    double val = 0.0;
    if (th > 0.0) {
      Eigen::MatrixXcd A = (Fd * (p.g * tau).asDiagonal()).cast<cplx>();
      val = th * std::exp(-0.5 * N * det_reg(Eigen::MatrixXcd(I * A), 3).log).real();
    }
    sum += val;
    sum2 += val * val;
    th_sum += th;
  }
  ZDeltaEstimate z;
  z.samples = samples;
  z.z = sum / samples;
  z.stderr_ = std::sqrt(std::max(sum2 / samples - z.z * z.z, 0.0) / samples);
  z.mean_theta = th_sum / samples;
  return z;
}

} // namespace lnsm
