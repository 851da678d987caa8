#include "lnsm/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "lnsm/errors.hpp"
#include "lnsm/quadrature.hpp"

namespace lnsm {

namespace {

double bump(double t) {
  double d = 0.0625 - t * t;
  return d > 0.0 ? std::exp(-1.0 / d) : 0.0;
}

double bump_half_mass() {
  static const double z = integrate(bump, 0.0, 0.25, 1e-15);
  return z;
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

double dist_to(const std::vector<Square>& set, Square q) {
  double d = 1e300;
  for (const Square& s : set) d = std::min(d, square_distance(s, q));
  return d;
}

// squares of the infinite paving within distance r of the given set
std::vector<Square> neighbourhood(const std::vector<Square>& set, double r) {
  std::set<Square> out;
  int reach = int(std::ceil(r)) + 1;
  for (const Square& s : set)
    for (int a = s.a - reach; a <= s.a + reach; ++a)
      for (int b = s.b - reach; b <= s.b + reach; ++b)
        if (square_distance(s, {a, b}) <= r + 1e-12) out.insert({a, b});
  return {out.begin(), out.end()};
}

std::vector<Square> clip(const std::vector<Square>& set, const LatticeGeometry& geo) {
  std::vector<Square> out;
  for (const Square& s : set)
    if (geo.in_lambda(s)) out.push_back(s);
  return out;
}

std::vector<Square> merge(std::vector<Square> a, const std::vector<Square>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

} // namespace

double smooth_step(double x) {
  if (x <= -0.25) return 0.0;
  if (x >= 0.25) return 1.0;
  if (x == 0.0) return 0.5;
  const double ax = std::abs(x), norm = 2.0 * bump_half_mass();
  if (ax > 0.125) {
    double tail = integrate(bump, ax, 0.25, 1e-15) / norm;
    return std::clamp(x > 0.0 ? 1.0 - tail : tail, 0.0, 1.0);
  }
  double part = integrate(bump, 0.0, ax, 1e-15) / norm;
  return x > 0.0 ? 0.5 + part : 0.5 - part;
}

double theta_small(double v, double bigN) { return 1.0 - smooth_step(v / std::pow(bigN, 1.0 / 6.0) - 1.0); }

double theta_window(double v, double bigN, int n) {
  double t = smooth_step(v / std::pow(bigN, n / 6.0) - 1.0) - smooth_step(v / std::pow(bigN, (n + 1) / 6.0) - 1.0);
  return std::max(t, 0.0);
}

int window_count(double v_max, double bigN) {
  int n = 1;
  while (0.75 * std::pow(bigN, n / 6.0) <= v_max) ++n;
  return n;
}

LSAssignment classify_squares(const FieldConfig& field, const ModelParams& params, const LatticeGeometry& geo) {
  if (int(field.masses.size()) != geo.square_count()) throw ValidationError("classify: masses do not match geometry");
  const double N = double(params.bigN), lk = params.lambdaK();
  LSAssignment out;
  double vmax = 0.0;
  for (double mass : field.masses) vmax = std::max(vmax, lk * mass);
  const int nmax = window_count(vmax, N);
  out.level.assign(geo.square_count(), 0);
  out.theta_s.assign(geo.square_count(), 1.0);
  out.theta_n.assign(geo.square_count(), std::vector<double>(nmax, 0.0));
  for (int q = 0; q < geo.square_count(); ++q) {
    if (!geo.in_lambda(geo.square(q))) continue;
    double v = lk * field.masses[q];
    out.theta_s[q] = theta_small(v, N);
    int best = 0;
    double bw = -1.0;
    for (int n = 1; n <= nmax; ++n) {
      double t = theta_window(v, N, n);
      out.theta_n[q][n - 1] = t;
      if (t > bw) bw = t, best = n;
    }
    out.level[q] = v < std::pow(N, 1.0 / 6.0) ? 0 : best;
  }
  return out;
}

LSAssignment assignment_from_levels(std::vector<int> levels) {
  LSAssignment a;
  a.level = std::move(levels);
  a.theta_s.resize(a.level.size());
  for (std::size_t i = 0; i < a.level.size(); ++i) a.theta_s[i] = a.level[i] == 0 ? 1.0 : 0.0;
  return a;
}

double set_distance(const std::vector<Square>& a, const std::vector<Square>& b) {
  double d = 1e300;
  for (const Square& s : a) d = std::min(d, dist_to(b, s));
  return d;
}

RegionSet build_regions(const LSAssignment& assignment, const LatticeGeometry& geo, double M) {
  if (int(assignment.level.size()) != geo.square_count()) throw ValidationError("regions: assignment does not match geometry");
  RegionSet R;
  R.corridorM = M;
  std::map<Square, int> level;
  for (int q = 0; q < geo.square_count(); ++q) {
    Square s = geo.square(q);
    if (!geo.in_lambda(s)) continue;
    if (assignment.level[q] > 0) {
      R.lambda_l.push_back(s);
      R.lambda_ln[assignment.level[q]].push_back(s);
      level[s] = assignment.level[q];
    } else {
      R.lambda_s.push_back(s);
    }
  }
  const int nl = int(R.lambda_l.size());
  if (nl == 0) return R;

  // connected components of Lambda_l (closed squares, distance 0)
  UnionFind uf(nl);
  for (int i = 0; i < nl; ++i)
    for (int j = i + 1; j < nl; ++j)
      if (square_distance(R.lambda_l[i], R.lambda_l[j]) == 0.0) uf.unite(i, j);
  std::map<int, int> root_to_comp;
  std::vector<int> comp_of(nl);
  for (int i = 0; i < nl; ++i) {
    int r = uf.find(i);
    if (!root_to_comp.count(r)) {
      root_to_comp[r] = int(R.l_components.size());
      R.l_components.emplace_back();
    }
    comp_of[i] = root_to_comp[r];
    R.l_components[comp_of[i]].push_back(R.lambda_l[i]);
  }
  const int r = int(R.l_components.size());
  const auto lam = geo.lambda_squares();

  // connectivity links and e-links through witnesses in Lambda
  UnionFind link(r), elink(r);
  for (const Square& w : lam) {
    std::vector<double> d(r), e(r);
    for (int i = 0; i < r; ++i) {
      d[i] = dist_to(R.l_components[i], w);
      e[i] = 1e300;
      for (const Square& s : R.l_components[i]) e[i] = std::min(e[i], square_distance(s, w) - level[s] * M);
    }
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) {
        if (d[i] + d[j] <= 2.0 * M + 1e-12) link.unite(i, j);
        if (e[i] + e[j] <= 1e-12) elink.unite(i, j);
      }
  }

  auto group = [&](UnionFind& u) {
    std::map<int, std::vector<Square>> g;
    for (int i = 0; i < r; ++i) g[u.find(i)] = merge(g[u.find(i)], R.l_components[i]);
    std::vector<std::vector<Square>> out;
    for (auto& kv : g) out.push_back(kv.second);
    return out;
  };

  for (auto& l : group(link)) {
    RegionComponent c;
    c.l = l;
    c.gamma = neighbourhood(l, 0.5 * M);
    c.bigGamma = clip(neighbourhood(l, M), geo);
    R.gamma = merge(R.gamma, c.gamma);
    R.bigGamma = merge(R.bigGamma, c.bigGamma);
    R.components.push_back(std::move(c));
  }
  for (auto& l : group(elink)) {
    RegionEComponent c;
    c.l = l;
    std::vector<Square> ge;
    for (const Square& s : l) ge = merge(ge, clip(neighbourhood({s}, level[s] * M), geo));
    c.bigGammaE = ge;
    R.bigGammaE = merge(R.bigGammaE, ge);
    R.ecomponents.push_back(std::move(c));
  }
  return R;
}

FieldConfig field_with_masses(const LatticeGeometry& geo, const ModelParams& params, const std::vector<double>& target_v,
                              std::mt19937_64& rng) {
  if (int(target_v.size()) != geo.square_count()) throw ValidationError("field_with_masses: one target per square");
  std::normal_distribution<double> nd;
  std::vector<double> tau(geo.site_count(), 0.0);
  for (int q = 0; q < geo.square_count(); ++q) {
    if (!geo.in_lambda(geo.square(q))) continue;
    auto sites = geo.square_sites(q);
    double m = 0.0;
    for (int x : sites) {
      tau[x] = nd(rng);
      m += geo.weight() * tau[x] * tau[x];
    }
    double scale = std::sqrt(std::max(target_v[q], 0.0) / (params.lambdaK() * m));
    for (int x : sites) tau[x] *= scale;
  }
  return make_field(geo, std::move(tau));
}

SuppressionBound large_field_suppression(const LSAssignment& assignment, const FieldConfig& field,
                                         const ModelParams& params, const LatticeGeometry& geo) {
  RegionSet R = build_regions(assignment, geo, params.corridorM);
  const double N = double(params.bigN);
  double mass_l = 0.0;
  SuppressionBound b;
  for (const Square& s : R.lambda_l) {
    int q = geo.square_index(s);
    mass_l += field.masses[q];
    b.log_product -= std::pow(N, (assignment.level[q] - 1) / 8.0);
  }
  b.log_product -= std::pow(N, 1.0 / 8.0) * double(R.bigGammaE.size());
  b.log_left = -0.49 * mass_l;
  b.log_right = -0.25 * mass_l + b.log_product;
  b.holds = b.log_left <= b.log_right;
  return b;
}

namespace {

double squares_within(double M) {
  long long r = (long long)std::floor(M) + 1;
  double count = 0.0;
  for (long long dx = -r; dx <= r; ++dx) {
    double gx = std::max(0.0, double(std::llabs(dx)) - 1.0);
    double rest = M * M - gx * gx;
    if (rest < 0.0) continue;
    count += 2.0 * (std::floor(std::sqrt(rest)) + 1.0) + 1.0;
  }
  return count;
}

SuppressionScanRow scan_row(double N, double m, double lambdaK) {
  SuppressionScanRow row;
  row.bigN = N;
  row.corridorM = 2.0 / m * std::log(N);
  row.gammaE_squares = squares_within(row.corridorM);
  double X = 0.75 * std::pow(N, 1.0 / 6.0) / lambdaK;
  row.margin = 0.24 * X - std::pow(N, 0.125) * row.gammaE_squares - 1.0;
  row.holds = row.margin >= 0.0;
  return row;
}

} // namespace

std::vector<SuppressionScanRow> suppression_scan(const std::vector<double>& Ns, double m, double lambdaK) {
  std::vector<SuppressionScanRow> out;
  for (double N : Ns) out.push_back(scan_row(N, m, lambdaK));
  return out;
}

double suppression_threshold(double m, double lambdaK) {
  double lo = 1.0, hi = 300.0;
  if (scan_row(std::pow(10.0, hi), m, lambdaK).margin < 0.0) return hi;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (scan_row(std::pow(10.0, mid), m, lambdaK).margin < 0.0 ? lo : hi) = mid;
  }
  return hi;
}

} // namespace lnsm
