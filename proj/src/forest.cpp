#include "lnsm/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

#include "lnsm/errors.hpp"
#include "lnsm/quadrature.hpp"

namespace lnsm {

namespace {

struct DSU {
  std::vector<int> p;
  explicit DSU(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  bool unite(int a, int b) {
    a = find(a), b = find(b);
    if (a == b) return false;
    p[a] = b;
    return true;
  }
};

void check_labels(int n) {
  if (n < 1 || n > kMaxForestLabels) throw ValidationError("forest: label count must be in [1, 8]");
}

std::vector<int> relabel(DSU& d, int n) {
  std::vector<int> out(n), map(n, -1);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    int r = d.find(i);
    if (map[r] < 0) map[r] = k++;
    out[i] = map[r];
  }
  return out;
}

using Poly = std::vector<double>; // coefficients, lowest first

Poly mul(const Poly& a, const Poly& b) {
  Poly c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

Poly antiderivative(const Poly& a) {
  Poly c(a.size() + 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) c[i + 1] = a[i] / double(i + 1);
  return c;
}

// int over 0 <= t_0 <= ... <= t_{k-1} <= 1 of prod_r p_r(t_r)
double ordered_simplex(const std::vector<Poly>& p) {
  Poly f{1.0};
  for (const Poly& pr : p) f = antiderivative(mul(pr, f));
  return std::accumulate(f.begin(), f.end(), 0.0);
}

// all pair paths of a forest, as edge index lists (nullopt: disconnected)
std::vector<std::optional<std::vector<int>>> pair_paths(const Forest& f) {
  std::vector<std::optional<std::vector<int>>> out;
  for (auto [i, j] : all_pairs(f.n)) out.push_back(forest_path(f, i, j));
  return out;
}

int min_rank(const std::vector<int>& path, const std::vector<int>& rank) {
  int r = std::numeric_limits<int>::max();
  for (int e : path) r = std::min(r, rank[e]);
  return r;
}

} // namespace

void Forest::validate() const {
  check_labels(n);
  if (!h.empty() && h.size() != edges.size()) throw ValidationError("forest: one parameter per edge");
  DSU d(n);
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw ValidationError("forest: bad edge");
    if (!d.unite(i, j)) throw ValidationError("forest: edge set contains a loop");
  }
  for (double x : h)
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("forest: parameters must lie in [0,1]");
}

std::vector<int> Forest::clusters() const {
  DSU d(n);
  for (auto [i, j] : edges) d.unite(i, j);
  return relabel(d, n);
}

int pair_index(int i, int j, int n) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

std::vector<Edge> all_pairs(int n) {
  std::vector<Edge> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.push_back({i, j});
  return out;
}

std::vector<Forest> enumerate_forests(int n) {
  check_labels(n);
  const auto pairs = all_pairs(n);
  std::vector<Forest> out;
  std::vector<Edge> cur;
  std::function<void(std::size_t, std::vector<int>)> rec = [&](std::size_t k, std::vector<int> parent) {
    if (k == pairs.size()) {
      out.push_back(Forest{n, cur, {}});
      return;
    }
    rec(k + 1, parent);
    DSU d(n);
    d.p = parent;
    if (d.unite(pairs[k].first, pairs[k].second)) {
      cur.push_back(pairs[k]);
      rec(k + 1, d.p);
      cur.pop_back();
    }
  };
  std::vector<int> id(n);
  std::iota(id.begin(), id.end(), 0);
  rec(0, id);
  return out;
}

std::vector<Forest> spanning_trees(int n) {
  std::vector<Forest> out;
  for (Forest& f : enumerate_forests(n))
    if (int(f.edges.size()) == n - 1) out.push_back(std::move(f));
  return out;
}

std::optional<std::vector<int>> forest_path(const Forest& f, int i, int j) {
  std::vector<std::vector<std::pair<int, int>>> adj(f.n);
  for (int e = 0; e < int(f.edges.size()); ++e) {
    adj[f.edges[e].first].push_back({f.edges[e].second, e});
    adj[f.edges[e].second].push_back({f.edges[e].first, e});
  }
  std::vector<int> via(f.n, -2);
  via[i] = -1;
  std::queue<int> q;
  q.push(i);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (auto [w, e] : adj[u])
      if (via[w] == -2) via[w] = e, q.push(w);
  }
  if (via[j] == -2) return std::nullopt;
  std::vector<int> path;
  for (int u = j; u != i;) {
    int e = via[u];
    path.push_back(e);
    u = f.edges[e].first == u ? f.edges[e].second : f.edges[e].first;
  }
  return path;
}

double effective_parameter(const Forest& f, int i, int j) {
  auto path = forest_path(f, i, j);
  if (!path) return 0.0;
  double h = 1.0;
  for (int e : *path) h = std::min(h, f.param(e));
  return h;
}

double InterpolatedKernelSchedule::param(int i, int j) const {
  auto path = forest_path(forest2, i, j);
  if (!path) return 0.0;
  double h = 1.0;
  for (int e : *path)
    if (std::find(forest1.edges.begin(), forest1.edges.end(), forest2.edges[e]) == forest1.edges.end())
      h = std::min(h, forest2.param(e));
  return h;
}

double PairFunction::value(const std::vector<double>& x) const { return partial({}, x); }

double PairFunction::partial(const std::vector<int>& pairs, const std::vector<double>& x) const {
  const std::size_t m = x.size();
  auto coef = [&](std::size_t p) { return c.empty() ? 1.0 : c.at(p); };
  double s = 0.0;
  for (std::size_t p = 0; p < m; ++p) s += coef(p) * x[p];
  double cs = 1.0;
  for (int p : pairs) cs *= coef(p);
  switch (kind) {
  case Kind::square_of_sum:
    if (pairs.empty()) return s * s;
    if (pairs.size() == 1) return 2.0 * cs * s;
    if (pairs.size() == 2) return 2.0 * cs;
    return 0.0;
  case Kind::exponential:
    return cs * std::exp(s);
  case Kind::product: {
    double out = cs;
    for (std::size_t p = 0; p < m; ++p)
      if (std::find(pairs.begin(), pairs.end(), int(p)) == pairs.end()) out *= 1.0 + coef(p) * x[p];
    return out;
  }
  }
  return 0.0;
}

ForestFormulaCheck verify_forest_formula(const PairFunction& H, int n, int nodes) {
  check_labels(n);
  if (n > 4) throw ValidationError("forest formula check: at most 4 labels");
  const auto pairs = all_pairs(n);
  const std::size_t m = pairs.size();
  if (!H.c.empty() && H.c.size() != m) throw ValidationError("forest formula check: one coefficient per pair");
  std::vector<double> gx, gw;
  gauss_legendre01(nodes, gx, gw);

  ForestFormulaCheck out;
  out.lhs = H.value(std::vector<double>(m, 1.0));
  for (const Forest& f : enumerate_forests(n)) {
    ++out.forests;
    const int k = int(f.edges.size());
    std::vector<int> which;
    for (auto [i, j] : f.edges) which.push_back(pair_index(i, j, n));
    const auto paths = pair_paths(f);
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> t(k), x(m);
    double term = 0.0;
    do {
      // t[r] is the parameter of edge perm[r], t[0] <= ... <= t[k-1]
      std::vector<int> rank(k);
      for (int r = 0; r < k; ++r) rank[perm[r]] = r;
      std::vector<int> pr(m, -1);
      for (std::size_t p = 0; p < m; ++p)
        if (paths[p]) pr[p] = min_rank(*paths[p], rank);
      std::function<double(int, double)> nest = [&](int r, double upper) -> double {
        if (r < 0) {
          for (std::size_t p = 0; p < m; ++p) x[p] = pr[p] < 0 ? 0.0 : t[pr[p]];
          return H.partial(which, x);
        }
        double acc = 0.0;
        for (int q = 0; q < nodes; ++q) {
          t[r] = upper * gx[q];
          acc += gw[q] * upper * nest(r - 1, t[r]);
        }
        return acc;
      };
      term += nest(k - 1, 1.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.rhs += term;
  }
  out.residual = std::abs(out.rhs - out.lhs);
  return out;
}

FirstForestCheck verify_first_forest_formula(const std::vector<Square>& squares, const std::vector<int>& component) {
  const int n = int(squares.size());
  check_labels(n);
  if (int(component.size()) != n) throw ValidationError("first forest formula: one component label per square");
  const auto pairs = all_pairs(n);
  std::vector<char> eps(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [i, j] = pairs[p];
    eps[p] = component[i] == component[j] && square_distance(squares[i], squares[j]) == 0.0;
  }

  FirstForestCheck out;
  for (const Forest& f : enumerate_forests(n)) {
    bool zero = false;
    for (auto [i, j] : f.edges) zero |= !eps[pair_index(i, j, n)];
    if (zero) continue;
    const auto paths = pair_paths(f);
    for (std::size_t p = 0; p < pairs.size() && !zero; ++p) zero |= eps[p] && !paths[p];
    if (zero) continue;

    std::vector<int> cl = f.clusters();
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      auto [i, j] = pairs[p];
      if ((cl[i] == cl[j]) != (component[i] == component[j])) out.clusters_match = false;
    }

    // weight: int prod over non-forest eps pairs of h^F
    const int k = int(f.edges.size());
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double w = 0.0;
    do {
      std::vector<int> rank(k);
      for (int r = 0; r < k; ++r) rank[perm[r]] = r;
      std::vector<Poly> poly(k, Poly{1.0});
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (!eps[p]) continue;
        auto [i, j] = pairs[p];
        if (std::find(f.edges.begin(), f.edges.end(), Edge{i, j}) != f.edges.end()) continue;
        poly[min_rank(*paths[p], rank)] = mul(poly[min_rank(*paths[p], rank)], Poly{0.0, 1.0});
      }
      w += ordered_simplex(poly);
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.total_weight += w;
    out.surviving.push_back(f);
  }
  return out;
}

Eigen::MatrixXd interpolate_kernel(const Eigen::MatrixXd& K, const std::vector<int>& block, const Forest& f) {
  if (K.rows() != K.cols() || int(block.size()) != K.rows()) throw ValidationError("interpolate: block labels do not match K");
  f.validate();
  Eigen::MatrixXd hb(f.n, f.n);
  for (int a = 0; a < f.n; ++a)
    for (int b = 0; b < f.n; ++b) hb(a, b) = a == b ? 1.0 : effective_parameter(f, a, b);
  Eigen::MatrixXd out = K;
  for (int x = 0; x < K.rows(); ++x)
    for (int y = 0; y < K.cols(); ++y) out(x, y) *= hb(block[x], block[y]);
  return out;
}

std::vector<PositivityTerm> positivity_decomposition(const Eigen::MatrixXd& K, const std::vector<int>& block,
                                                     const Forest& f) {
  if (K.rows() != K.cols() || int(block.size()) != K.rows()) throw ValidationError("decomposition: block labels do not match K");
  f.validate();
  const int k = int(f.edges.size());
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return f.param(a) < f.param(b); });

  std::vector<PositivityTerm> out;
  double prev = 0.0;
  for (int p = 0; p <= k; ++p) {
    double hp = p < k ? f.param(order[p]) : 1.0;
    double w = hp - prev;
    prev = hp;
    if (w <= 0.0) continue;
    Forest upper{f.n, {}, {}};
    for (int r = p; r < k; ++r) upper.edges.push_back(f.edges[order[r]]);
    PositivityTerm t;
    t.weight = w;
    t.cluster = upper.clusters();
    t.op = Eigen::MatrixXd::Zero(K.rows(), K.cols());
    for (int x = 0; x < K.rows(); ++x)
      for (int y = 0; y < K.cols(); ++y)
        if (t.cluster[block[x]] == t.cluster[block[y]]) t.op(x, y) = K(x, y);
    out.push_back(std::move(t));
  }
  return out;
}

Eigen::MatrixXd overlap_matrix(const std::vector<std::vector<Square>>& polymers) {
  const int q = int(polymers.size());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) {
      std::set<Square> a(polymers[i].begin(), polymers[i].end());
      bool hit = std::any_of(polymers[j].begin(), polymers[j].end(), [&](const Square& s) { return a.count(s) > 0; });
      v(i, j) = v(j, i) = hit ? -1.0 : 0.0;
    }
  return v;
}

namespace {

void check_mayer(const Eigen::MatrixXd& v, int qmax) {
  if (v.rows() != v.cols() || v.rows() < 1) throw ValidationError("mayer: square matrix required");
  if (v.rows() > qmax) throw ValidationError("mayer: too many polymers");
}

} // namespace

double mayer_connectivity(const Eigen::MatrixXd& v) {
  check_mayer(v, kMaxForestLabels);
  const int q = int(v.rows());
  std::vector<Edge> e;
  for (auto [i, j] : all_pairs(q))
    if (v(i, j) != 0.0) e.push_back({i, j});
  if (e.size() > 22) return mayer_connectivity_recursive(v);
  const int full = (1 << q) - 1;
  double total = 0.0;
  for (unsigned long s = 0; s < (1ul << e.size()); ++s) {
    std::vector<int> adj(q, 0);
    double w = 1.0;
    for (std::size_t k = 0; k < e.size(); ++k)
      if (s >> k & 1) {
        adj[e[k].first] |= 1 << e[k].second;
        adj[e[k].second] |= 1 << e[k].first;
        w *= v(e[k].first, e[k].second);
      }
    int seen = 1, frontier = 1;
    while (frontier) {
      int next = 0;
      for (int i = 0; i < q; ++i)
        if (frontier >> i & 1) next |= adj[i];
      frontier = next & ~seen;
      seen |= next;
    }
    if (seen == full) total += w;
  }
  return total;
}

double mayer_connectivity_recursive(const Eigen::MatrixXd& v) {
  check_mayer(v, 16);
  const int q = int(v.rows()), full = (1 << q) - 1;
  std::vector<double> G(full + 1, 1.0), C(full + 1, 0.0);
  for (int s = 1; s <= full; ++s)
    for (auto [i, j] : all_pairs(q))
      if ((s >> i & 1) && (s >> j & 1)) G[s] *= 1.0 + v(i, j);
  for (int s = 1; s <= full; ++s) {
    int low = s & -s;
    double c = G[s];
    for (int t = (s - 1) & s; t > 0; t = (t - 1) & s)
      if (t & low) c -= C[t] * G[s ^ t];
    C[s] = c;
  }
  return C[full];
}

double mayer_tree_formula(const Eigen::MatrixXd& v) {
  check_mayer(v, 6);
  const int q = int(v.rows());
  if (q == 1) return 1.0;
  const auto pairs = all_pairs(q);
  double total = 0.0;
  for (const Forest& t : spanning_trees(q)) {
    double coef = 1.0;
    for (auto [i, j] : t.edges) coef *= v(i, j);
    if (coef == 0.0) continue;
    const auto paths = pair_paths(t);
    const int k = q - 1;
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double integral = 0.0;
    do {
      std::vector<int> rank(k);
      for (int r = 0; r < k; ++r) rank[perm[r]] = r;
      std::vector<Poly> poly(k, Poly{1.0});
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        auto [i, j] = pairs[p];
        if (paths[p]->size() == 1 || v(i, j) == 0.0) continue;
        int r = min_rank(*paths[p], rank);
        poly[r] = mul(poly[r], Poly{1.0, v(i, j)});
      }
      integral += ordered_simplex(poly);
    } while (std::next_permutation(perm.begin(), perm.end()));
    total += coef * integral;
  }
  return total;
}

std::vector<std::vector<Square>> animals_containing_origin(int max_size) {
  if (max_size < 1 || max_size > 10) throw ValidationError("animals: size must be in [1, 10]");
  std::vector<std::vector<Square>> out;
  std::set<std::vector<Square>> layer{{Square{0, 0}}};
  for (int s = 1; s <= max_size; ++s) {
    out.insert(out.end(), layer.begin(), layer.end());
    if (s == max_size) break;
    std::set<std::vector<Square>> next;
    for (const auto& y : layer)
      for (const Square& c : y)
        for (Square d : {Square{c.a + 1, c.b}, Square{c.a - 1, c.b}, Square{c.a, c.b + 1}, Square{c.a, c.b - 1}}) {
          if (std::binary_search(y.begin(), y.end(), d)) continue;
          auto z = y;
          z.insert(std::upper_bound(z.begin(), z.end(), d), d);
          next.insert(std::move(z));
        }
    layer = std::move(next);
  }
  return out;
}

namespace {

double tail_bound(double rho, int max_size) {
  const double x = kAnimalGrowthBound * rho * std::exp(1.0);
  if (x >= 1.0) return std::numeric_limits<double>::infinity();
  const double n = max_size + 1;
  return std::pow(x, n) * (n - (n - 1.0) * x) / ((1.0 - x) * (1.0 - x));
}

} // namespace

PolymerSum polymer_activity_sum(const PolymerSumOptions& opt) {
  if (!(opt.rho >= 0.0)) throw ValidationError("polymer sum: rho must be non-negative");
  PolymerSum out;
  out.counts.assign(opt.max_size + 1, 0);
  for (const auto& y : animals_containing_origin(opt.max_size)) {
    const int s = int(y.size());
    ++out.counts[s];
    if (s == 1 && !opt.include_singleton) continue;
    double b = opt.amplitude ? opt.amplitude(y) : std::pow(opt.rho, s);
    out.finite += b * std::exp(double(s));
  }
  if (opt.tail) out.tail = tail_bound(opt.rho, opt.max_size);
  return out;
}

double polymer_threshold(int max_size, bool include_singleton) {
  std::vector<long long> counts(max_size + 1, 0);
  for (const auto& y : animals_containing_origin(max_size)) ++counts[y.size()];
  auto total = [&](double rho) {
    double s = tail_bound(rho, max_size);
    for (int k = include_singleton ? 1 : 2; k <= max_size; ++k) s += counts[k] * std::pow(rho * std::exp(1.0), k);
    return s;
  };
  double lo = 0.0, hi = 1.0 / (kAnimalGrowthBound * std::exp(1.0));
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (total(mid) < 0.5 ? lo : hi) = mid;
  }
  return lo;
}

} // namespace lnsm
