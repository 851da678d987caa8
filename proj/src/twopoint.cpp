#include "lnsm/twopoint.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "lnsm/errors.hpp"
#include "lnsm/operators.hpp"
#include "lnsm/util.hpp"

namespace lnsm {

namespace {

const cplx kI(0.0, 1.0);

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw ConvergenceError("square root: eigendecomposition failed");
  const double top = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-10 * top) throw ResolutionError("propagator is not positive on this lattice");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

struct Shard {
  std::vector<cplx> logw;
  std::vector<std::vector<cplx>> fwd, rev; // per sample, per separation
};

struct Layout {
  int source = 0;
  std::vector<int> targets;
  std::vector<double> r;
};

Layout axis_layout(const LatticeGeometry& geo) {
  const int ns = geo.sites_per_side();
  Layout L;
  const int iy = ns / 2, ix0 = ns / 4;
  L.source = geo.site_index(ix0, iy);
  for (int k = 0; ix0 + k < ns && k <= ns / 2; ++k) {
    L.targets.push_back(geo.site_index(ix0 + k, iy));
    L.r.push_back(k * geo.step());
  }
  return L;
}

Shard run_shard(const CovarianceContext& ctx, const Eigen::MatrixXd& Fh, const GaussianSampler& sampler,
                const Layout& L, const SamplerConfig& cfg, int shard, int count) {
  const LatticeGeometry& geo = ctx.geo;
  const double w = geo.weight(), g = ctx.params.g, N = double(ctx.params.bigN);
  const int n = geo.site_count(), k = int(L.targets.size());
  std::seed_seq seq{std::uint64_t(cfg.seed), std::uint64_t(shard), std::uint64_t(0x7470)};
  std::mt19937_64 rng(seq);
  Eigen::MatrixXd Ft(k, n);
  for (int j = 0; j < k; ++j) Ft.row(j) = Fh.row(L.targets[j]);
  Eigen::RowVectorXd Fs = Fh.row(L.source);

  Shard out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd tau = sampler.draw(rng);
    Eigen::VectorXd mu;
    Eigen::MatrixXd V;
    if (cfg.free_field || g == 0.0) {
      mu = Eigen::VectorXd::Zero(n);
      V = Eigen::MatrixXd::Identity(n, n);
    } else {
      Eigen::VectorXd d = g * w * tau;
      Eigen::MatrixXd H = Fh * d.asDiagonal() * Fh;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
      if (es.info() != Eigen::Success) throw ConvergenceError("two-point: eigendecomposition failed");
      mu = es.eigenvalues();
      V = es.eigenvectors();
    }
    RegDet det = det_reg_eigenvalues((kI * mu.cast<cplx>()).eval(), 3);
    out.logw.push_back(-0.5 * N * det.log);

    Eigen::RowVectorXcd a = (Fs * V).cast<cplx>();
    Eigen::MatrixXcd b = (Ft * V).cast<cplx>();
    Eigen::VectorXcd inv = (Eigen::VectorXcd::Ones(n) + kI * mu.cast<cplx>()).cwiseInverse();
    Eigen::RowVectorXcd as = a.cwiseProduct(inv.transpose());
    std::vector<cplx> f(k), r(k);
    for (int j = 0; j < k; ++j) {
      f[j] = (as.transpose().array() * b.row(j).transpose().array()).sum() / w;
      r[j] = (b.row(j).transpose().array() * inv.array() * a.transpose().array()).sum() / w;
    }
    out.fwd.push_back(std::move(f));
    out.rev.push_back(std::move(r));
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double std_error(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1) / double(v.size()));
}

struct LogLinear {
  double rate = 0.0, r2 = 0.0;
};

LogLinear log_linear(const std::vector<double>& r, const std::vector<double>& s) {
  std::vector<double> y;
  for (double v : s) y.push_back(std::log(std::abs(v)));
  const double mr = mean(r), my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    sxx += (r[i] - mr) * (r[i] - mr);
    sxy += (r[i] - mr) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LogLinear out;
  if (sxx == 0.0) return out;
  out.rate = -sxy / sxx;
  out.r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
  return out;
}

} // namespace

cplx resolvent_kernel_entry(const FieldConfig& field, const ModelParams& params, const LatticeGeometry& geo,
                            const SampledKernel& F, int x, int y) {
  const int n = geo.site_count();
  if (x < 0 || y < 0 || x >= n || y >= n) throw ValidationError("resolvent: site out of range");
  DiscretizedOperator A = build_A(field, params, geo, F);
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(n, n) + kI * A.matrix.cast<cplx>();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
  if (!(std::abs(lu.determinant()) > 0.0)) throw SingularityError("resolvent: 1 + iA is singular");
  Eigen::VectorXcd col = kernel_operator(F, geo).matrix.col(y).cast<cplx>();
  return lu.solve(col)(x) / geo.weight();
}

SampleWeight sample_weight(const FieldConfig& field, const ModelParams& params, const LatticeGeometry& geo,
                           const SampledKernel& F) {
  DiscretizedOperator A = build_A(field, params, geo, F);
  RegDet d = det_reg((kI * A.matrix.cast<cplx>()).eval(), 3);
  return SampleWeight{-0.5 * double(params.bigN) * d.log};
}

double fit_propagator_mass(const std::vector<double>& r, const std::vector<double>& s, const std::vector<double>& se,
                           double m_guess, Regulator reg, double* rms, double* r2) {
  if (r.empty() || r.size() != s.size() || r.size() != se.size()) throw ValidationError("mass fit: empty or mismatched data");
  const bool weighted = std::all_of(se.begin(), se.end(), [](double e) { return e > 0.0; });
  auto chi2 = [&](double lm) {
    double c = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      double d = (s[i] - propagator_radial(r[i], std::exp(lm), reg)) / (weighted ? se[i] : 1.0);
      c += d * d;
    }
    return c;
  };
  const double lm0 = std::log(m_guess);
  auto best = boost::math::tools::brent_find_minima(chi2, lm0 - 8.0, lm0 + 8.0, 50);
  const double mp = std::exp(best.first);
  if (rms || r2) {
    std::vector<double> ls;
    for (double v : s) ls.push_back(std::log(std::abs(v)));
    const double my = mean(ls);
    double res = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      double d = ls[i] - std::log(std::abs(propagator_radial(r[i], mp, reg)));
      res += d * d;
      tot += (ls[i] - my) * (ls[i] - my);
    }
    if (rms) *rms = std::sqrt(res / double(r.size()));
    if (r2) *r2 = tot > 0.0 ? 1.0 - res / tot : (res == 0.0 ? 1.0 : 0.0);
  }
  return mp;
}

TwoPointResult estimate_S2(const CovarianceContext& ctx, const SampledKernel& F, const SamplerConfig& cfg) {
  const LatticeGeometry& geo = ctx.geo;
  if (geo.margin() != 0) throw ValidationError("two-point: geometry must not carry a margin");
  if (cfg.batches < 20) throw ValidationError("two-point: at least 20 batches");
  if (cfg.samples < cfg.batches) throw ValidationError("two-point: fewer samples than batches");

  const Layout L = axis_layout(geo);
  const int k = int(L.targets.size()), B = cfg.batches;
  const Eigen::MatrixXd Fh = psd_sqrt(kernel_operator(F, geo).matrix);
  const GaussianSampler sampler(ctx.C0 / ctx.weight());

  std::vector<int> counts(B, cfg.samples / B);
  for (int b = 0; b < cfg.samples % B; ++b) ++counts[b];
  std::vector<Shard> shards(B);
  unsigned threads = cfg.threads > 0 ? unsigned(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < B; start += int(threads)) {
    std::vector<std::future<Shard>> jobs;
    for (int b = start; b < std::min(B, start + int(threads)); ++b)
      jobs.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                [&, b] { return run_shard(ctx, Fh, sampler, L, cfg, b, counts[b]); }));
    for (int b = start; b < std::min(B, start + int(threads)); ++b) shards[b] = jobs[b - start].get();
  }

  double shift = -INFINITY;
  for (auto& s : shards)
    for (cplx lw : s.logw) shift = std::max(shift, lw.real());

  // per batch sums of w, w R(x,y), w R(y,x), |w|
  std::vector<cplx> Wb(B, 0.0);
  std::vector<double> Ab(B, 0.0);
  std::vector<std::vector<cplx>> Fb(B, std::vector<cplx>(k, 0.0)), Rb = Fb;
  for (int b = 0; b < B; ++b)
    for (std::size_t i = 0; i < shards[b].logw.size(); ++i) {
      cplx w = std::exp(shards[b].logw[i] - shift);
      Wb[b] += w;
      Ab[b] += std::abs(w);
      for (int j = 0; j < k; ++j) {
        Fb[b][j] += w * shards[b].fwd[i][j];
        Rb[b][j] += w * shards[b].rev[i][j];
      }
    }
  cplx W = 0.0;
  double Aabs = 0.0;
  std::vector<cplx> Fs(k, 0.0), Rs(k, 0.0);
  for (int b = 0; b < B; ++b) {
    W += Wb[b];
    Aabs += Ab[b];
    for (int j = 0; j < k; ++j) Fs[j] += Fb[b][j], Rs[j] += Rb[b][j];
  }

  TwoPointResult out;
  out.m = ctx.params.m;
  out.sample_count = cfg.samples;
  out.batches = B;
  out.separations = L.r;
  out.sign_diagnostic = std::abs(W) / Aabs;
  if (cfg.abort_on_sign && out.sign_diagnostic < 0.05)
    throw SignProblemError("two-point: phase average " + fmt17(out.sign_diagnostic) + " below 0.05");

  for (int j = 0; j < k; ++j) {
    out.estimates.push_back(Fs[j] / W);
    std::vector<double> re, im, dz;
    for (int b = 0; b < B; ++b) {
      cplx rb = Fb[b][j] / Wb[b];
      re.push_back(rb.real());
      im.push_back(rb.imag());
      dz.push_back(std::abs(rb - Rb[b][j] / Wb[b]));
    }
    out.se_re.push_back(std_error(re));
    out.se_im.push_back(std_error(im));
    double comb = std::hypot(out.se_re.back(), out.se_im.back());
    double gap = std::abs(Fs[j] / W - Rs[j] / W);
    out.reverse_gap_z.push_back(comb > 0.0 ? gap / (std::sqrt(2.0) * comb) : (gap == 0.0 ? 0.0 : INFINITY));
    if (out.se_im.back() > 0.0) out.max_imag_z = std::max(out.max_imag_z, std::abs(out.estimates.back().imag()) / out.se_im.back());
  }

  // the two halves of the batches, mean weight per sample
  {
    std::vector<double> h1r, h1i, h2r, h2i;
    for (int b = 0; b < B; ++b) {
      cplx mw = Wb[b] / double(counts[b]);
      (b < B / 2 ? h1r : h2r).push_back(mw.real());
      (b < B / 2 ? h1i : h2i).push_back(mw.imag());
    }
    cplx d(mean(h1r) - mean(h2r), mean(h1i) - mean(h2i));
    double e = std::sqrt(std::pow(std_error(h1r), 2) + std::pow(std_error(h2r), 2) + std::pow(std_error(h1i), 2) +
                         std::pow(std_error(h2i), 2));
    out.half_sample_z = e > 0.0 ? std::abs(d) / e : (std::abs(d) == 0.0 ? 0.0 : INFINITY);
  }

  const double hi = cfg.fit_hi > 0.0 ? cfg.fit_hi : 2.0 * geo.n() / 3.0;
  std::vector<int> win;
  for (int j = 0; j < k; ++j)
    if (L.r[j] >= cfg.fit_lo - 1e-12 && L.r[j] <= hi + 1e-12) win.push_back(j);
  if (win.empty()) throw ValidationError("two-point: no separations in the fit window");
  auto fit = [&](const std::vector<cplx>& est, double* rms, double* r2) {
    std::vector<double> r, s, se;
    for (int j : win) r.push_back(L.r[j]), s.push_back(est[j].real()), se.push_back(out.se_re[j]);
    return fit_propagator_mass(r, s, se, out.m, ctx.params.regulator, rms, r2);
  };
  out.fitted_mprime = fit(out.estimates, &out.fit_residual, &out.fit_r2);
  {
    std::vector<double> r, s;
    for (int j : win) r.push_back(L.r[j]), s.push_back(out.estimates[j].real());
    LogLinear ll = log_linear(r, s);
    out.loglin_rate = ll.rate;
    out.loglin_r2 = ll.r2;
  }
  // leave one batch out
  std::vector<double> jk;
  for (int b = 0; b < B; ++b) {
    std::vector<cplx> est(k);
    for (int j = 0; j < k; ++j) est[j] = (Fs[j] - Fb[b][j]) / (W - Wb[b]);
    jk.push_back(fit(est, nullptr, nullptr));
  }
  const double mj = mean(jk);
  double v = 0.0;
  for (double x : jk) v += (x - mj) * (x - mj);
  out.mprime_se = std::sqrt(v * double(B - 1) / double(B));

  std::ostringstream h;
  h << report(ctx.params) << "|" << geo.n() << "," << geo.sites_per_square() << "|" << cfg.seed << "," << cfg.samples
    << "," << B << "," << cfg.free_field;
  out.params_hash = hex64(fnv1a(h.str()));
  return out;
}

MassScan mass_vs_N_scan(double lambda, double bigK, const std::vector<long long>& Ns, int n_squares_half,
                        int sites_per_square, const SamplerConfig& cfg, Regulator reg, double lambda_alt) {
  MassScan scan;
  const LatticeGeometry geo(n_squares_half, sites_per_square);
  for (long long N : Ns) {
    ModelParams p = derive_params(lambda, bigK, N, reg);
    CovarianceContext ctx = build_covariance_context(p, geo);
    SampledKernel F = lattice_propagator(p, geo);
    MassScanRow row;
    row.bigN = N;
    row.m = p.m;
    SamplerConfig free = cfg;
    free.free_field = true;
    free.samples = free.batches;
    row.free_mprime = estimate_S2(ctx, F, free).fitted_mprime;
    row.result = estimate_S2(ctx, F, cfg);
    row.mprime = row.result.fitted_mprime;
    row.mprime_se = row.result.mprime_se;
    row.deviation = std::abs(row.mprime / row.m - 1.0);
    row.sign_diagnostic = row.result.sign_diagnostic;
    scan.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i + 1 < scan.rows.size(); ++i) {
    const auto& a = scan.rows[i];
    const auto& b = scan.rows[i + 1];
    double sig = std::hypot(a.mprime_se / a.m, b.mprime_se / b.m);
    if (b.deviation > a.deviation + 2.0 * sig) scan.monotone = false;
  }
  scan.gap_ratio = std::sqrt(solve_gap_equation(lambda, bigK, reg) / solve_gap_equation(lambda_alt, bigK, reg));
  scan.leading_ratio = leading_mass(lambda) / leading_mass(lambda_alt);
  if (!scan.rows.empty()) {
    const MassScanRow& mid = scan.rows[scan.rows.size() / 2];
    ModelParams p = derive_params(lambda_alt, bigK, mid.bigN, reg);
    CovarianceContext ctx = build_covariance_context(p, geo);
    TwoPointResult alt = estimate_S2(ctx, lattice_propagator(p, geo), cfg);
    scan.mc_ratio = mid.mprime / alt.fitted_mprime;
    scan.mc_ratio_se = scan.mc_ratio * std::hypot(mid.mprime_se / mid.mprime, alt.mprime_se / alt.fitted_mprime);
  }
  return scan;
}

} // namespace lnsm
