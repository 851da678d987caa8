#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "lnsm/errors.hpp"
#include "lnsm/forest.hpp"

using namespace lnsm;

TEST_CASE("forest enumeration counts") {
  CHECK(enumerate_forests(2).size() == 2);
  CHECK(enumerate_forests(3).size() == 7);
  CHECK(enumerate_forests(4).size() == 38);
  CHECK(spanning_trees(3).size() == 3);
  CHECK(spanning_trees(4).size() == 16);
  CHECK(spanning_trees(5).size() == 125);
  CHECK_THROWS_AS(enumerate_forests(9), ValidationError);
  Forest loop{3, {{0, 1}, {1, 2}, {0, 2}}, {}};
  CHECK_THROWS_AS(loop.validate(), ValidationError);
  Forest badh{2, {{0, 1}}, {1.5}};
  CHECK_THROWS_AS(badh.validate(), ValidationError);
}

TEST_CASE("effective parameter along paths") {
  Forest f{5, {{0, 1}, {1, 2}, {2, 3}}, {0.9, 0.3, 0.6}};
  CHECK(effective_parameter(f, 0, 1) == 0.9);
  CHECK(effective_parameter(f, 0, 3) == 0.3);
  CHECK(effective_parameter(f, 2, 3) == 0.6);
  CHECK(effective_parameter(f, 0, 4) == 0.0);
  Forest g{2, {{0, 1}}, {0.7}};
  CHECK(effective_parameter(g, 1, 0) == 0.7);

  InterpolatedKernelSchedule s{Forest{5, {{1, 2}}, {}}, f};
  CHECK(s.param(0, 3) == 0.6);
  CHECK(s.param(1, 2) == 1.0);
  CHECK(s.param(3, 4) == 0.0);
}

TEST_CASE("forest formula on test functions") {
  PairFunction sq{PairFunction::Kind::square_of_sum, {}};
  auto r2 = verify_forest_formula(sq, 2);
  CHECK(r2.lhs == 1.0);
  CHECK(r2.residual < 1e-12);

  PairFunction ex{PairFunction::Kind::exponential, {}};
  auto r3 = verify_forest_formula(ex, 3);
  CHECK(r3.forests == 7);
  CHECK(r3.rhs == doctest::Approx(std::exp(3.0)).epsilon(1e-12));
  CHECK(r3.residual < 1e-8);

  PairFunction pr{PairFunction::Kind::product, {}};
  CHECK(verify_forest_formula(pr, 3).rhs == doctest::Approx(8.0).epsilon(1e-12));

  PairFunction ex4{PairFunction::Kind::exponential, {0.3, -0.7, 1.1, 0.2, -0.4, 0.9}};
  CHECK(verify_forest_formula(ex4, 4).residual < 1e-8);
  PairFunction sq4{PairFunction::Kind::square_of_sum, {1, 2, 3, 4, 5, 6}};
  CHECK(verify_forest_formula(sq4, 4).residual < 1e-8 * 441.0);
}

TEST_CASE("first forest formula on toy large field blocks") {
  auto one = verify_first_forest_formula({{0, 0}, {1, 0}}, {0, 0});
  REQUIRE(one.surviving.size() == 1);
  CHECK(one.surviving[0].edges.size() == 1);
  CHECK(one.total_weight == doctest::Approx(1.0));

  auto two = verify_first_forest_formula({{0, 0}, {1, 0}, {5, 5}, {5, 6}}, {0, 0, 1, 1});
  REQUIRE(two.surviving.size() == 1);
  CHECK(two.clusters_match);
  CHECK(two.total_weight == doctest::Approx(1.0));

  // L shape: all three squares touch (corner contact counts)
  auto ell = verify_first_forest_formula({{0, 0}, {1, 0}, {0, 1}}, {0, 0, 0});
  CHECK(ell.surviving.size() == 3);
  CHECK(ell.clusters_match);
  CHECK(ell.total_weight == doctest::Approx(1.0).epsilon(1e-14));

  auto block = verify_first_forest_formula({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {3, 0}, {3, 1}}, {0, 0, 0, 0, 1, 1});
  CHECK(block.surviving.size() == 16);
  CHECK(block.clusters_match);
  CHECK(block.total_weight == doctest::Approx(1.0).epsilon(1e-13));

  // a label set that is not touching-connected is split into singletons
  auto split = verify_first_forest_formula({{0, 0}, {2, 0}}, {0, 0});
  CHECK(split.surviving.size() == 1);
  CHECK_FALSE(split.clusters_match);
}

TEST_CASE("positivity preserving decomposition") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) X(i, j) = nd(rng);
  Eigen::MatrixXd K = X * X.transpose();
  std::vector<int> block{0, 0, 1, 1, 2, 2};

  Forest ones{3, {{0, 1}, {1, 2}}, {1.0, 1.0}};
  auto t1 = positivity_decomposition(K, block, ones);
  REQUIRE(t1.size() == 1);
  CHECK((t1[0].op - K).cwiseAbs().maxCoeff() == 0.0);

  Forest zeros{3, {{0, 1}, {1, 2}}, {0.0, 0.0}};
  auto t0 = positivity_decomposition(K, block, zeros);
  REQUIRE(t0.size() == 1);
  CHECK(t0[0].op(0, 1) == K(0, 1));
  CHECK(t0[0].op(0, 2) == 0.0);
  CHECK((t0[0].op - interpolate_kernel(K, block, zeros)).cwiseAbs().maxCoeff() == 0.0);

  Forest f{3, {{0, 2}, {1, 2}}, {0.8, 0.35}};
  auto terms = positivity_decomposition(K, block, f);
  CHECK(terms.size() == 3);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(6, 6);
  for (auto& t : terms) {
    sum += t.weight * t.op;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t.op);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
  Eigen::MatrixXd Kh = interpolate_kernel(K, block, f);
  CHECK((sum - Kh).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Kh(0, 2) == doctest::Approx(0.35 * K(0, 2)));
  CHECK(Kh(0, 4) == doctest::Approx(0.8 * K(0, 4)));
}

TEST_CASE("Mayer connectivity factors") {
  CHECK(mayer_connectivity(Eigen::MatrixXd::Zero(1, 1)) == 1.0);
  CHECK(mayer_tree_formula(Eigen::MatrixXd::Zero(1, 1)) == 1.0);

  std::vector<std::vector<Square>> two{{{0, 0}, {1, 0}}, {{1, 0}}};
  Eigen::MatrixXd v2 = overlap_matrix(two);
  CHECK(v2(0, 1) == -1.0);
  CHECK(mayer_connectivity(v2) == -1.0);
  CHECK(mayer_tree_formula(v2) == doctest::Approx(-1.0));

  for (int q = 1; q <= 6; ++q) {
    Eigen::MatrixXd v = -Eigen::MatrixXd::Ones(q, q);
    v.diagonal().setZero();
    double expect = std::tgamma(double(q)) * (q % 2 ? 1.0 : -1.0);
    CHECK(mayer_connectivity(v) == doctest::Approx(expect));
    CHECK(mayer_connectivity_recursive(v) == doctest::Approx(expect));
    CHECK(mayer_tree_formula(v) == doctest::Approx(expect).epsilon(1e-10));
  }

  Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(3, 3);
  chain(0, 1) = chain(1, 0) = chain(1, 2) = chain(2, 1) = -1.0;
  CHECK(mayer_connectivity(chain) == 1.0);
  CHECK(mayer_tree_formula(chain) == doctest::Approx(1.0));

  Eigen::MatrixXd apart = Eigen::MatrixXd::Zero(3, 3);
  apart(0, 1) = apart(1, 0) = -1.0;
  CHECK(mayer_connectivity(apart) == 0.0);
  CHECK(mayer_tree_formula(apart) == 0.0);

  // general weights, every graph on 5 labels
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 0.5);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) w(i, j) = w(j, i) = u(rng);
  double g = mayer_connectivity(w);
  CHECK(mayer_connectivity_recursive(w) == doctest::Approx(g).epsilon(1e-12));
  CHECK(mayer_tree_formula(w) == doctest::Approx(g).epsilon(1e-10));
  CHECK_THROWS_AS(mayer_tree_formula(Eigen::MatrixXd::Zero(7, 7)), ValidationError);
}

TEST_CASE("polymer activity sum") {
  auto animals = animals_containing_origin(6);
  std::vector<int> per(7, 0);
  for (auto& y : animals) ++per[y.size()];
  const int fixed[] = {0, 1, 2, 6, 19, 63, 216};
  for (int s = 1; s <= 6; ++s) CHECK(per[s] == s * fixed[s]);

  PolymerSumOptions zero;
  zero.rho = 0.0;
  zero.amplitude = [](const std::vector<Square>& y) { return y.size() == 1 ? 0.3 : 0.0; };
  CHECK(polymer_activity_sum(zero).total() == doctest::Approx(0.3 * std::exp(1.0)));
  zero.include_singleton = false;
  CHECK(polymer_activity_sum(zero).total() == 0.0);

  PolymerSumOptions dom;
  dom.rho = 0.05;
  dom.max_size = 2;
  dom.include_singleton = false;
  dom.tail = false;
  CHECK(polymer_activity_sum(dom).total() == doctest::Approx(4.0 * std::pow(0.05 * std::exp(1.0), 2)));

  PolymerSumOptions small;
  small.rho = 0.01;
  PolymerSum s = polymer_activity_sum(small);
  CHECK(s.total() < 0.5);
  CHECK(s.tail < 1e-5);

  double rs = polymer_threshold();
  CHECK(rs > 0.01);
  small.rho = rs;
  CHECK(polymer_activity_sum(small).total() == doctest::Approx(0.5).epsilon(1e-9));
  small.rho = 1.05 * rs;
  CHECK(polymer_activity_sum(small).total() > 0.5);
}
