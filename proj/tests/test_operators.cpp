#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lnsm/errors.hpp"
#include "lnsm/operators.hpp"

using namespace lnsm;

namespace {

struct Setup {
  LatticeGeometry geo{4, 2};
  ModelParams params;
  SampledKernel F;
  explicit Setup(double m = 0.5, long long N = 1000000) {
    params = params_with_mass(1.0, 1.0, N, m, Regulator::exponential);
    F = lattice_propagator(params, geo);
  }
  FieldConfig field(std::mt19937_64& rng, double vmax, std::vector<std::pair<Square, double>> large = {}) {
    std::uniform_real_distribution<double> u(0.0, vmax);
    std::vector<double> v(geo.square_count());
    for (double& x : v) x = u(rng);
    for (auto& [s, val] : large) v[geo.square_index(s)] = val;
    return field_with_masses(geo, params, v, rng);
  }
  ABlocks blocks(const FieldConfig& f) {
    return split_blocks(build_A(f, params, geo, F), geo, classify_squares(f, params, geo));
  }
};

double svd_norm(const Eigen::MatrixXcd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues()(0);
}

Eigen::MatrixXcd random_complex(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  return m;
}

} // namespace

TEST_CASE("zero field gives vanishing blocks, determinants and D") {
  Setup S;
  FieldConfig zero = make_field(S.geo, std::vector<double>(S.geo.site_count(), 0.0));
  ABlocks b = S.blocks(zero);
  CHECK(b.A.cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.As.cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.Al.cwiseAbs().maxCoeff() == 0.0);
  DetSplit d = det_split_identity(b, S.params);
  CHECK(d.max_residual() == 0.0);
  CHECK(d.b_det_log == 0.0);
  DSplit ds = D_decomposition(b);
  CHECK(ds.d_plus_norm == 0.0);
  CHECK(ds.d_minus_norm == 0.0);
}

TEST_CASE("lattice propagator entries match the radial transform") {
  Setup S(0.1);
  const double h = S.geo.step();
  for (auto [i, j] : {std::pair{0, 0}, {1, 0}, {3, 4}, {10, 2}, {15, 15}})
    CHECK(S.F.at(i, j) == doctest::Approx(propagator_radial(h * std::hypot(i, j), 0.1)).epsilon(1e-9));
  CHECK_THROWS_AS(lattice_propagator(S.params, LatticeGeometry(2, 1)), ResolutionError);
}

TEST_CASE("operator composition uses the quadrature weights") {
  Setup S(0.5);
  LatticeGeometry geo(1, 2);
  DiscretizedOperator K = kernel_operator(lattice_propagator(S.params, geo), geo);
  Eigen::MatrixXd k = K.kernel(), prod = (K.matrix * K.matrix);
  const int n = K.size();
  for (int x = 0; x < n; x += 3)
    for (int y = 0; y < n; y += 5) {
      double s = 0.0;
      for (int z = 0; z < n; ++z) s += k(x, z) * K.weights(z) * k(z, y);
      CHECK(prod(x, y) / K.weights(y) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("block structure of A on a mixed configuration") {
  Setup S;
  std::mt19937_64 rng(21);
  FieldConfig f = S.field(rng, 8.0, {{{0, 0}, 40.0}, {{1, 0}, 30.0}});
  ABlocks b = S.blocks(f);
  CHECK((b.As + b.Al + b.Aprime - b.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b.As * b.Al).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(b.Aprime.trace()) < 1e-12);
  CHECK((b.App() - b.Aprime - b.Al).cwiseAbs().maxCoeff() == 0.0);
  double imag = 1.0;
  Eigen::VectorXd ev = real_spectrum(b.A, &imag);
  CHECK(imag < 1e-8 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300));
  CHECK(integral_tau2(f, S.geo, b.large) == doctest::Approx(70.0).epsilon(1e-12));
}

TEST_CASE("operator norm against dense SVD") {
  CHECK(operator_norm(Eigen::MatrixXd(-2.5 * Eigen::MatrixXd::Identity(7, 7))) == doctest::Approx(2.5).epsilon(1e-12));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd r(50, 50);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) r(i, j) = nd(rng);
  CHECK(operator_norm(r) == doctest::Approx(Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues()(0)).epsilon(1e-8));
  Eigen::MatrixXcd c = random_complex(40, rng);
  CHECK(operator_norm(c) == doctest::Approx(svd_norm(c)).epsilon(1e-8));
  CHECK(operator_norm(c, 9) == operator_norm(c, 9));
  r(3, 4) = NAN;
  CHECK_THROWS_AS(operator_norm(r), ValidationError);
}

TEST_CASE("regularized determinants") {
  Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(6, 6);
  for (int n = 1; n <= 4; ++n) CHECK(std::abs(det_reg(zero, n).value() - 1.0) == 0.0);

  Eigen::VectorXcd u = Eigen::VectorXcd::Zero(5);
  u(1) = 1.0;
  Eigen::MatrixXcd rank1 = 0.5 * u * u.adjoint();
  CHECK(det_reg(rank1, 2).value().real() == doctest::Approx(0.9097959895689501).epsilon(1e-14));
  CHECK(std::abs(det_reg(rank1, 2).value().imag()) < 1e-15);

  // Hermitian K with prescribed spectrum
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u01(-0.8, 1.5);
  const int n = 40;
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_complex(n, rng));
  Eigen::MatrixXcd Q = qr.householderQ();
  Eigen::VectorXd lam(n);
  for (int i = 0; i < n; ++i) lam(i) = u01(rng);
  Eigen::MatrixXcd K = Q * lam.cast<cplx>().asDiagonal() * Q.adjoint();
  double log_oracle = 0.0;
  for (int i = 0; i < n; ++i) log_oracle += std::log1p(lam(i)) - lam(i) + 0.5 * lam(i) * lam(i);
  RegDet d3 = det_reg(K, 3);
  CHECK(std::abs(std::expm1(d3.log.real() - log_oracle)) < 1e-10);
  CHECK(std::abs(std::sin(d3.log.imag())) < 1e-10);

  // traces of matrix powers and an LU determinant
  Eigen::MatrixXcd one = Eigen::MatrixXcd::Identity(n, n);
  cplx trace_form = (one + K).partialPivLu().determinant() * std::exp(-K.trace() + 0.5 * (K * K).trace());
  CHECK(std::abs(d3.value() / trace_form - 1.0) < 1e-10);
  CHECK(std::abs(det_reg(K, 1).value() / (one + K).partialPivLu().determinant() - 1.0) < 1e-10);

  Eigen::MatrixXcd sing = -rank1 * 2.0;
  CHECK_THROWS_AS(det_reg(sing, 2), SingularityError);
}

TEST_CASE("determinant splitting identities") {
  Setup S;
  std::mt19937_64 rng(3);
  FieldConfig small = S.field(rng, 9.0);
  DetSplit a = det_split_identity(S.blocks(small), S.params);
  CHECK(a.max_residual() < 1e-8);
  CHECK(std::abs(a.b_det_log) < 1e-12);
  for (int k = 0; k < 3; ++k) {
    FieldConfig mixed = S.field(rng, 9.0, {{{k - 2, 1}, 35.0 + 10.0 * k}});
    DetSplit d = det_split_identity(S.blocks(mixed), S.params);
    CHECK(d.split_residual < 1e-8);
    CHECK(d.middle_residual < 1e-8);
    CHECK(d.rewrite_residual < 1e-8);
  }
}

TEST_CASE("D decomposition") {
  Setup S;
  std::mt19937_64 rng(8);
  DSplit pure = D_decomposition(S.blocks(S.field(rng, 9.0)));
  CHECK(pure.d_plus_norm < 1e-14);
  CHECK(pure.d_minus_norm < 1e-14);
  for (int k = 0; k < 3; ++k) {
    ABlocks b = S.blocks(S.field(rng, 9.0, {{{0, 0}, 40.0}}));
    DSplit d = D_decomposition(b);
    CHECK(d.abs_det_residual < 1e-8);
    CHECK(d.tr_dminus_sq <= double(b.A.rows()) * d.d_minus_norm * d.d_minus_norm + 1e-30);
    CHECK(d.eta >= 0.0);
  }
}

TEST_CASE("trace of projected powers") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  const int n = 30;
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = nd(rng);
  Eigen::MatrixXd A = G * G.transpose() / n;
  SiteMask all(n, 1), P(n, 0);
  for (int i = 0; i < n; ++i) P[i] = (rng() % 2) == 0;

  auto eq = trace_projection_inequality(A, all, 3);
  CHECK(eq.first == doctest::Approx(eq.second).epsilon(1e-12));
  auto r1 = trace_projection_inequality(A, P, 1);
  CHECK(r1.first == doctest::Approx(r1.second).epsilon(1e-12));

  auto r3 = trace_projection_inequality(A, P, 3);
  Eigen::MatrixXd p = projector(P);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_pap(p * A * p), es_a(A);
  double lhs = es_pap.eigenvalues().array().cube().sum();
  Eigen::MatrixXd A3 = es_a.eigenvectors() * es_a.eigenvalues().array().cube().matrix().asDiagonal() *
                       es_a.eigenvectors().transpose();
  double rhs = 0.0;
  for (int i = 0; i < n; ++i)
    if (P[i]) rhs += A3(i, i);
  CHECK(r3.first == doctest::Approx(lhs).epsilon(1e-10));
  CHECK(r3.second == doctest::Approx(rhs).epsilon(1e-10));
  CHECK(r3.first <= r3.second + 1e-10);
}

TEST_CASE("link norms") {
  Setup S;
  std::mt19937_64 rng(4);
  FieldConfig f = S.field(rng, 9.0);
  for (int x : S.geo.square_sites(S.geo.square_index({-1, 0}))) f.tau[x] = 0.0;
  DiscretizedOperator A = build_A(f, S.params, S.geo, S.F);
  CHECK(derived_link_norm(A, S.geo, {-1, 0}, {2, 1}) == 0.0);
  CHECK_THROWS_AS(derived_link_norm(A, S.geo, {0, 0}, {0, 0}), ValidationError);

  Eigen::MatrixXd block = restrict_matrix(A.matrix, mask_of_squares(S.geo, {{3, 0}}), mask_of_squares(S.geo, {{-3, 0}}));
  CHECK(derived_link_norm(A, S.geo, {-3, 0}, {3, 0}) ==
        doctest::Approx(Eigen::JacobiSVD<Eigen::MatrixXd>(block).singularValues()(0)).epsilon(1e-8));

  double prev = 1e300;
  for (int d = 0; d <= 6; ++d) {
    double v = derived_link_norm(A, S.geo, {-4, 1}, {-3 + d, 1});
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("Cauchy link sum on disjoint pairs is a direct sum") {
  Setup S;
  std::mt19937_64 rng(6);
  DiscretizedOperator A = build_A(S.field(rng, 9.0), S.params, S.geo, S.F);
  std::vector<LinkPair> links = {{{-4, -4}, {-2, -4}}, {{0, 0}, {3, 3}}, {{-4, 2}, {1, -2}}};
  double expect = 0.0;
  for (auto& l : links) {
    double radius = std::pow(1e6, 1.0 / 6.0) * std::exp(0.9 * S.params.m * square_distance(l.from, l.to));
    expect = std::max(expect, radius * derived_link_norm(A, S.geo, l.from, l.to));
  }
  CHECK(cauchy_link_norm(A, S.geo, links, S.params, 3) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("cubic trace bound on small-field configurations") {
  Setup S;
  std::mt19937_64 rng(10);
  for (int k = 0; k < 5; ++k) {
    auto [lhs, rhs] = cubic_trace_bound(S.blocks(S.field(rng, 9.0)).As);
    CHECK(lhs <= rhs * (1.0 + 1e-10));
  }
}
