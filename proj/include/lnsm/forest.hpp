#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lnsm/geometry.hpp"

namespace lnsm {

using Edge = std::pair<int, int>; // i < j

struct Forest {
  int n = 0;
  std::vector<Edge> edges;
  std::vector<double> h; // one per edge, empty means all 1

  void validate() const;
  double param(int e) const { return h.empty() ? 1.0 : h[e]; }
  // cluster label per vertex, labels 0..k-1 in order of first appearance
  std::vector<int> clusters() const;
};

constexpr int kMaxForestLabels = 8;

// Every acyclic edge set on {0..n-1}, without parameters.
std::vector<Forest> enumerate_forests(int n);
std::vector<Forest> spanning_trees(int n);

int pair_index(int i, int j, int n);
std::vector<Edge> all_pairs(int n);

// Edge indices on the unique path from i to j; nullopt if not connected. Empty for i == j.
std::optional<std::vector<int>> forest_path(const Forest& f, int i, int j);

// inf of h along the path, 0 if disconnected
double effective_parameter(const Forest& f, int i, int j);

// Two-stage schedule: only edges of forest2 outside forest1 count on the path (inf of none is 1).
struct InterpolatedKernelSchedule {
  Forest forest1, forest2;
  double param(int i, int j) const;
};

// Test functions with closed-form mixed partials in the pair variables x_p.
struct PairFunction {
  enum class Kind { square_of_sum, exponential, product };
  Kind kind = Kind::exponential;
  std::vector<double> c; // one coefficient per pair

  double value(const std::vector<double>& x) const;
  // d^k / dx_{p1} ... dx_{pk}, the p distinct
  double partial(const std::vector<int>& pairs, const std::vector<double>& x) const;
};

struct ForestFormulaCheck {
  double lhs = 0.0, rhs = 0.0, residual = 0.0;
  int forests = 0;
};

// Sum over forests of the h-integrals of the mixed partials at the interpolated point.
// Each ordering of the forest parameters is integrated with nested Gauss-Legendre.
ForestFormulaCheck verify_forest_formula(const PairFunction& H, int n, int nodes = 24);

struct FirstForestCheck {
  std::vector<Forest> surviving;
  bool clusters_match = true; // every surviving forest has the components as clusters
  double total_weight = 0.0;  // sum of surviving terms, exactly 1
};

// Neighbour-link expansion on a set of squares with component labels. Pairs of touching squares in the
// same component get eps = 1, all other pairs eta = 1.
FirstForestCheck verify_first_forest_formula(const std::vector<Square>& squares, const std::vector<int>& component);

// K(h)_{xy} = h_{b(x) b(y)} K_{xy}, h_{bb} = 1
Eigen::MatrixXd interpolate_kernel(const Eigen::MatrixXd& K, const std::vector<int>& block, const Forest& f);

struct PositivityTerm {
  double weight = 0.0;
  std::vector<int> cluster; // per forest label
  Eigen::MatrixXd op;       // sum over clusters of chi K chi
};

// Terms with zero weight are dropped.
std::vector<PositivityTerm> positivity_decomposition(const Eigen::MatrixXd& K, const std::vector<int>& block,
                                                     const Forest& f);

// v_ij = -1 when Y_i and Y_j share a square, else 0
Eigen::MatrixXd overlap_matrix(const std::vector<std::vector<Square>>& polymers);

// Sum over connected graphs of prod v_ij, by enumeration of edge subsets.
double mayer_connectivity(const Eigen::MatrixXd& v);
// Same quantity by the connected-set recursion; used when there are too many edges to enumerate.
double mayer_connectivity_recursive(const Eigen::MatrixXd& v);
// Tree route: sum over spanning trees, exact integration over the ordered parameter simplices.
double mayer_tree_formula(const Eigen::MatrixXd& v);

struct PolymerSumOptions {
  double rho = 0.01;
  int max_size = 6;
  bool include_singleton = true;
  bool tail = true;
  // |b(Y)| <= rho^{|Y|} is assumed by the tail bound; default b(Y) = rho^{|Y|}
  std::function<double(const std::vector<Square>&)> amplitude;
};

struct PolymerSum {
  double finite = 0.0, tail = 0.0;
  std::vector<long long> counts; // counts[s] = sets of size s containing the origin
  double total() const { return finite + tail; }
};

constexpr double kAnimalGrowthBound = 4.65;

// Connected (edge-adjacent) sets of squares containing (0,0), up to max_size.
std::vector<std::vector<Square>> animals_containing_origin(int max_size);

PolymerSum polymer_activity_sum(const PolymerSumOptions& opt);
// rho at which the bounded sum reaches 1/2
double polymer_threshold(int max_size = 6, bool include_singleton = true);

} // namespace lnsm
