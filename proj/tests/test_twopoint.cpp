#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "lnsm/errors.hpp"
#include "lnsm/operators.hpp"
#include "lnsm/twopoint.hpp"

using namespace lnsm;

namespace {

struct Setup {
  ModelParams p;
  LatticeGeometry geo{2, 2};
  SampledKernel F;
  Setup(long long N = 10000) : p(derive_params(1.0, 1.0, N, Regulator::exponential)) { F = lattice_propagator(p, geo); }
};

FieldConfig random_field(const LatticeGeometry& geo, double scale, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> tau(geo.site_count());
  for (double& t : tau) t = scale * nd(rng);
  return make_field(geo, tau);
}

} // namespace

TEST_CASE("free resolvent is the propagator") {
  Setup s;
  FieldConfig zero = make_field(s.geo, std::vector<double>(s.geo.site_count(), 0.0));
  Eigen::MatrixXd Fk = kernel_operator(s.F, s.geo).kernel();
  for (auto [x, y] : {std::pair{0, 0}, {3, 17}, {20, 63}}) {
    cplx r = resolvent_kernel_entry(zero, s.p, s.geo, s.F, x, y);
    CHECK(r.real() == doctest::Approx(Fk(x, y)).epsilon(1e-13));
    CHECK(r.imag() == 0.0);
    CHECK(std::abs(r - resolvent_kernel_entry(zero, s.p, s.geo, s.F, y, x)) < 1e-14);
  }
  CHECK(std::abs(sample_weight(zero, s.p, s.geo, s.F).value() - 1.0) == 0.0);
  CHECK_THROWS_AS(resolvent_kernel_entry(zero, s.p, s.geo, s.F, -1, 0), ValidationError);
}

TEST_CASE("resolvent entry against the eigendecomposition") {
  Setup s;
  FieldConfig f = random_field(s.geo, 40.0, 5);
  DiscretizedOperator A = build_A(f, s.p, s.geo, s.F);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(cplx(0.0, 1.0) * A.matrix.cast<cplx>());
  Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::VectorXcd d = (Eigen::VectorXcd::Ones(V.rows()) + es.eigenvalues()).cwiseInverse();
  Eigen::MatrixXcd R = V * d.asDiagonal() * V.inverse() * kernel_operator(s.F, s.geo).matrix.cast<cplx>();
  R /= s.geo.weight();
  for (auto [x, y] : {std::pair{0, 0}, {5, 40}, {63, 11}})
    CHECK(std::abs(resolvent_kernel_entry(f, s.p, s.geo, s.F, x, y) - R(x, y)) < 1e-10 * std::abs(R(x, y)) + 1e-12);
}

TEST_CASE("sample weight against the log determinant") {
  Setup s(1000000);
  FieldConfig f = random_field(s.geo, 3.0, 9);
  DiscretizedOperator A = build_A(f, s.p, s.geo, s.F);
  const int n = A.size();
  const cplx I(0.0, 1.0);
  Eigen::MatrixXcd K = I * A.matrix.cast<cplx>();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Eigen::MatrixXcd::Identity(n, n) + K);
  cplx logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(lu.matrixLU()(i, i));
  cplx log3 = logdet - K.trace() + 0.5 * (K * K).trace();
  SampleWeight w = sample_weight(f, s.p, s.geo, s.F);
  CHECK(std::abs(w.value() - std::exp(-0.5 * double(s.p.bigN) * log3)) < 1e-9);

  // weaker field: the cubic term alone
  FieldConfig g = random_field(s.geo, 1.0, 9);
  Eigen::MatrixXd B = build_A(g, s.p, s.geo, s.F).matrix;
  cplx cubic = std::exp(cplx(0.0, double(s.p.bigN) * (B * B * B).trace() / 6.0));
  CHECK(std::abs(sample_weight(g, s.p, s.geo, s.F).value() - cubic) < 1e-3);
}

TEST_CASE("mass fit recovers the propagator mass") {
  std::vector<double> r{2.0, 2.5, 3.0}, v, se(3, 1e-4);
  for (double x : r) v.push_back(propagator_radial(x, 0.02));
  double rms = -1.0, r2 = -1.0;
  CHECK(fit_propagator_mass(r, v, se, 0.05, Regulator::exponential, &rms, &r2) == doctest::Approx(0.02).epsilon(1e-6));
  CHECK(rms < 1e-8);
  CHECK(r2 > 0.999999);
}

TEST_CASE("two-point estimator") {
  Setup s;
  CovarianceContext ctx = build_covariance_context(s.p, s.geo);
  SamplerConfig cfg;
  cfg.samples = 20;
  cfg.free_field = true;
  cfg.fit_hi = 2.0;
  TwoPointResult fr = estimate_S2(ctx, s.F, cfg);
  Eigen::MatrixXd Fk = kernel_operator(s.F, s.geo).kernel();
  for (std::size_t j = 0; j < fr.separations.size(); ++j) {
    CHECK(fr.estimates[j].real() == doctest::Approx(propagator_radial(fr.separations[j], s.p.m)).epsilon(1e-9));
    CHECK(fr.se_re[j] < 1e-14);
  }
  CHECK(fr.ratio() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fr.sign_diagnostic == 1.0);

  cfg.free_field = false;
  cfg.samples = 400;
  TwoPointResult r = estimate_S2(ctx, s.F, cfg);
  CHECK(r.sample_count == 400);
  CHECK(r.batches == 20);
  CHECK(r.sign_diagnostic > 0.9);
  CHECK(std::abs(r.ratio() - 1.0) < 0.1);
  CHECK(r.mprime_se > 0.0);
  CHECK(r.max_imag_z < 5.0);
  CHECK(r.half_sample_z < 5.0);
  for (double z : r.reverse_gap_z) CHECK(z < 3.0);
  CHECK(std::abs(r.estimates[0]) >= std::abs(r.estimates.back()));
  CHECK(r.params_hash.size() == 16);

  TwoPointResult again = estimate_S2(ctx, s.F, cfg);
  CHECK(again.estimates[3] == r.estimates[3]);

  cfg.batches = 10;
  CHECK_THROWS_AS(estimate_S2(ctx, s.F, cfg), ValidationError);
}
