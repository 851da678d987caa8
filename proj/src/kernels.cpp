#include "lnsm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "lnsm/errors.hpp"
#include "lnsm/util.hpp"

namespace lnsm {

namespace {

constexpr double kPi = std::numbers::pi;

double qmax_for(Regulator reg) { return reg == Regulator::sharp ? 1.0 : 7.5; }

std::vector<double> scale_breaks(double m, double top) {
  std::vector<double> b;
  for (double x = m / 4.0; x < top; x *= 2.0) b.push_back(x);
  return b;
}

} // namespace

void CutoffSpec::validate() const {
  if (!(alpha > 0.0) || !(bigA > 0.0)) throw ValidationError("cutoff: alpha and A must be positive");
  if (c != 0.0 && (c < alpha || c > bigA)) throw ValidationError("cutoff: c must lie in [alpha, A]");
  if (c < 0.0) throw ValidationError("cutoff: c must be nonnegative");
}

double regulated_p2(double p2, Regulator reg) {
  return reg == Regulator::exponential ? p2 * std::exp(p2) : p2;
}

double propagator_momentum(double p2, double m2, Regulator reg) {
  if (reg == Regulator::sharp && p2 > 1.0) return 0.0;
  return 1.0 / (regulated_p2(p2, reg) + m2);
}

double polarization_momentum(double p2, const ModelParams& params, double rel_tol) {
  const double m = params.m, m2 = params.m2();
  const Regulator reg = params.regulator;
  const double h = 0.5 * std::sqrt(std::max(p2, 0.0));
  auto G = [&](double k2) { return propagator_momentum(std::max(k2, 0.0), m2, reg); };

  auto inner = [&](double s) {
    const double base = s * s + h * h, cross = 2.0 * s * h;
    auto f = [&](double phi) {
      double c = std::cos(phi);
      // (s-h)^2 + 2sh(1-cos) avoids cancellation near the peak
      double one_minus = 2.0 * std::sin(0.5 * phi) * std::sin(0.5 * phi);
      double minus = (s - h) * (s - h) + cross * one_minus;
      return G(base + cross * c) * G(minus);
    };
    std::vector<double> pts{0.0};
    if (cross > 0.0) {
      for (double k : {1.0, 16.0, 256.0}) {
        double t = m2 * k / cross;
        if (t < 2.0) {
          double phi = 2.0 * std::asin(std::sqrt(0.5 * t));
          if (phi < 0.5 * kPi) pts.push_back(phi);
        }
      }
    }
    pts.push_back(0.5 * kPi);
    std::sort(pts.begin(), pts.end());
    return s * integrate_pieces(f, pts, rel_tol * 0.1);
  };

  std::vector<double> pts{0.0};
  for (double k : {1.0, 4.0, 16.0, 64.0}) {
    if (h - k * m > 0.0) pts.push_back(h - k * m);
    pts.push_back(h + k * m);
  }
  if (h > 0.0) pts.push_back(h);
  double top = reg == Regulator::none ? h + 64.0 * m + 1.0 : h + 8.0;
  if (reg == Regulator::sharp) top = std::min(top, 1.0 + h);
  pts.push_back(top);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  while (pts.size() > 1 && pts.back() > top) pts.pop_back();
  double s = integrate_pieces(inner, pts, rel_tol);
  if (reg == Regulator::none) s += integrate_to_infinity(inner, top, rel_tol);
  return params.lambdaK() / (2.0 * kPi * kPi) * s;
}

PolarizationTable::PolarizationTable(const ModelParams& params, double qmax, int nodes) : qmax_(qmax) {
  pi0_ = polarization_momentum(0.0, params);
  std::vector<double> edges{0.0};
  for (double x = params.m / 4.0; x < qmax; x *= 2.0) edges.push_back(x);
  edges.push_back(qmax);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    Panel pn;
    pn.a = edges[i];
    pn.b = edges[i + 1];
    for (int k = 0; k < nodes; ++k) {
      double th = kPi * (2.0 * k + 1.0) / (2.0 * nodes);
      double x = 0.5 * (pn.a + pn.b) + 0.5 * (pn.b - pn.a) * std::cos(th);
      pn.x.push_back(x);
      pn.f.push_back(std::log(polarization_momentum(x * x, params)));
      pn.w.push_back((k % 2 ? -1.0 : 1.0) * std::sin(th));
    }
    panels_.push_back(std::move(pn));
  }
}

double PolarizationTable::operator()(double p) const {
  p = std::abs(p);
  if (p >= qmax_) p = qmax_;
  auto it = std::upper_bound(panels_.begin(), panels_.end(), p,
                             [](double v, const Panel& pn) { return v < pn.b; });
  const Panel& pn = it == panels_.end() ? panels_.back() : *it;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < pn.x.size(); ++k) {
    double d = p - pn.x[k];
    if (d == 0.0) return std::exp(pn.f[k]);
    double t = pn.w[k] / d;
    num += t * pn.f[k];
    den += t;
  }
  return std::exp(num / den);
}

DecayFit fit_decay(const std::vector<double>& r, const std::vector<double>& v, double r_lo, double r_hi,
                   double kappa) {
  DecayFit fit;
  fit.r_lo = r_lo;
  fit.r_hi = r_hi;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < r_lo || r[i] > r_hi || r[i] <= 0.0) continue;
    double a = std::abs(v[i]);
    if (!(a > 1e-13)) continue;
    xs.push_back(r[i]);
    ys.push_back(std::log(a) + kappa * std::log(r[i]));
  }
  fit.points = int(xs.size());
  if (xs.size() < 2) return fit;
  double n = double(xs.size()), sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sx += xs[i], sy += ys[i];
  double mx = sx / n, my = sy / n, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  double slope = sxy / sxx;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double e = ys[i] - (fit.intercept + slope * xs[i]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  fit.r2 = syy > 0.0 ? 1.0 - ss / syy : 1.0;
  return fit;
}

DecayFit measure_decay(const Fn& k, double r_lo, double r_hi, double kappa, int points) {
  std::vector<double> r(points), v(points);
  for (int i = 0; i < points; ++i) {
    r[i] = r_lo + (r_hi - r_lo) * i / (points - 1);
    v[i] = k(r[i]);
  }
  return fit_decay(r, v, r_lo, r_hi, kappa);
}

SampledKernel tabulate(const RadialKernel& k, double grid_step, double half_extent, bool fit) {
  SampledKernel s;
  s.name = k.name;
  s.grid_step = grid_step;
  s.half_extent = half_extent;
  s.half = int(std::lround(half_extent / grid_step));
  s.delta = k.delta;
  s.values.assign(std::size_t(s.width()) * s.width(), 0.0);
  std::unordered_map<long, double> cache;
  for (int i = 0; i <= s.half; ++i) {
    for (int j = 0; j <= i; ++j) {
      long d2 = long(i) * i + long(j) * j;
      auto it = cache.find(d2);
      double v;
      if (it == cache.end()) {
        v = k.f(grid_step * std::sqrt(double(d2)));
        cache.emplace(d2, v);
      } else {
        v = it->second;
      }
      for (int si : {-1, 1})
        for (int sj : {-1, 1}) {
          s.values[std::size_t(si * i + s.half) * s.width() + (sj * j + s.half)] = v;
          s.values[std::size_t(sj * j + s.half) * s.width() + (si * i + s.half)] = v;
        }
      s.sup_norm = std::max(s.sup_norm, std::abs(v));
    }
  }
  if (fit && k.rate_hint > 0.0) {
    DecayFit f = measure_decay(k.f, 2.0 / k.rate_hint, 8.0 / k.rate_hint, k.kappa);
    s.fitted_decay_rate = f.rate;
    s.fit_residual = f.residual;
    s.fit_r2 = f.r2;
    s.fit_lo = f.r_lo;
    s.fit_hi = f.r_hi;
  }
  return s;
}

double propagator_radial(double r, double m, Regulator reg) {
  const double m2 = m * m;
  if (reg == Regulator::none) return boost::math::cyl_bessel_k(0, m * r) / (2.0 * kPi);
  double qmax = qmax_for(reg);
  auto g = [m2, reg](double q) { return propagator_momentum(q * q, m2, reg); };
  return hankel0(g, r, qmax, scale_breaks(m, qmax));
}

namespace {

Fn propagator_rule(double m, Regulator reg) {
  if (reg == Regulator::none) return [m](double r) { return propagator_radial(r, m, Regulator::none); };
  const double m2 = m * m, qmax = qmax_for(reg);
  auto g = [m2, reg](double q) { return propagator_momentum(q * q, m2, reg); };
  auto rule = std::make_shared<HankelRule>(g, qmax, scale_breaks(m, qmax));
  return [rule](double r) { return (*rule)(r); };
}

} // namespace

RadialKernel propagator_radial_kernel(double m, Regulator reg) {
  RadialKernel k;
  k.name = "propagator";
  k.f = propagator_rule(m, reg);
  k.rate_hint = m;
  k.kappa = 0.5;
  return k;
}

RadialKernel polarization_radial_kernel(const ModelParams& params) {
  RadialKernel k;
  k.name = "polarization";
  const double m = params.m, lk = params.lambdaK();
  const Regulator reg = params.regulator;
  Fn prop = propagator_rule(m, reg);
  k.f = [prop, lk](double r) {
    double F = prop(r);
    return 0.5 * lk * F * F;
  };
  k.rate_hint = 2.0 * m;
  k.kappa = 1.0;
  return k;
}

RadialKernel sqrt_pi_radial_kernel(const ModelParams& params, int sign,
                                   std::shared_ptr<const PolarizationTable> table) {
  if (sign != 1 && sign != -1) throw ValidationError("sign must be +1 or -1");
  if (!table) table = std::make_shared<PolarizationTable>(params);
  RadialKernel k;
  k.name = sign > 0 ? "sqrt_one_plus_pi" : "inv_sqrt_one_plus_pi";
  const double m = params.m, e = 0.5 * sign;
  auto s = [table, e](double q) { return std::pow(1.0 + (*table)(q), e) - 1.0; };
  const double qmax = table->qmax();
  auto rule = std::make_shared<HankelRule>(s, qmax, scale_breaks(m, qmax));
  k.f = [rule](double r) { return (*rule)(r); };
  k.delta = 1.0;
  k.rate_hint = 2.0 * m;
  k.kappa = 1.5 - 0.25 * sign; // threshold behaviour (p^2 + 4m^2)^{-sign/4}
  return k;
}

double kelvin_kei(double x) {
  x = std::abs(x);
  if (x == 0.0) return -0.25 * kPi;
  if (x <= 5.0) {
    const double y = 0.25 * x * x;
    double ber = 0.0, bei = 0.0, extra = 0.0;
    double term_even = 1.0; // y^{2k} / ((2k)!)^2
    for (int k = 0; k < 60; ++k) {
      double term_odd = term_even * y / ((2.0 * k + 1.0) * (2.0 * k + 1.0));
      double sg = k % 2 ? -1.0 : 1.0;
      ber += sg * term_even;
      bei += sg * term_odd;
      extra += sg * boost::math::digamma(2.0 * k + 2.0) * term_odd;
      term_even = term_odd * y / ((2.0 * k + 2.0) * (2.0 * k + 2.0));
      if (term_even < 1e-18 * (std::abs(ber) + 1e-300) && k > 4) break;
    }
    return -std::log(0.5 * x) * bei - 0.25 * kPi * ber + extra;
  }
  // kei(x) = Im K0(x e^{i pi/4}) with K0(z) = int_0^inf exp(-z cosh t) dt
  const double a = x / std::sqrt(2.0);
  auto f = [a](double t) {
    double c = std::cosh(t);
    return -std::exp(-a * c) * std::sin(a * c);
  };
  double tmax = std::acosh(std::max(1.0, 45.0 / a));
  return integrate(f, 0.0, tmax, 1e-14);
}

RadialKernel cutoff_radial_kernel(const CutoffSpec& spec) {
  spec.validate();
  RadialKernel k;
  k.name = spec.compact ? "cutoff_compact" : "cutoff";
  if (spec.c == 0.0) {
    k.f = [](double) { return 0.0; };
    k.delta = 1.0;
    return k;
  }
  const double c = spec.c, s = std::pow(c, -0.25);
  auto base = [c, s](double r) { return -kelvin_kei(r * s) / (2.0 * kPi * std::sqrt(c)); };
  if (!spec.compact) {
    k.f = base;
    return k;
  }
  auto taper = [](double r) {
    if (r >= 1.0) return 0.0;
    double u = 1.0 - r;
    return u * u * u * u * (4.0 * r + 1.0);
  };
  double z = integrate([&](double r) { return 2.0 * kPi * r * base(r) * taper(r); }, 0.0, 1.0, 1e-14);
  k.f = [base, taper, z](double r) { return r >= 1.0 ? 0.0 : base(r) * taper(r) / z; };
  return k;
}

double cutoff_mass_outside(const CutoffSpec& spec, double radius) {
  RadialKernel k = cutoff_radial_kernel(spec);
  if (spec.c == 0.0 || (spec.compact && radius >= 1.0)) return 0.0;
  double inside = integrate([&](double r) { return 2.0 * kPi * r * k.f(r); }, 0.0, radius, 1e-14);
  return 1.0 - inside;
}

double cutoff_power_integral(double c, int r) {
  auto f = [r](double v) { return std::pow(1.0 + v * v, -r); };
  return kPi / std::sqrt(c) * (integrate(f, 0.0, 1.0, 1e-14) + integrate_to_infinity(f, 1.0, 1e-14));
}

double aliasing_tail(double m, double grid_step, Regulator reg) {
  if (reg == Regulator::none) throw ValidationError("aliasing tail needs a regulator");
  const double m2 = m * m, qn = kPi / grid_step, qmax = qmax_for(reg);
  auto f = [m2, reg](double q) { return q * propagator_momentum(q * q, m2, reg); };
  double total = integrate_pieces(f, [&] {
    auto b = scale_breaks(m, qmax);
    b.insert(b.begin(), 0.0);
    b.push_back(qmax);
    return b;
  }(), 1e-13);
  double tail = qn < qmax ? integrate(f, qn, qmax, 1e-13) : 0.0;
  if (reg == Regulator::exponential) tail += integrate(f, std::max(qn, qmax), std::max(qn, qmax) + 8.0);
  return tail / total;
}

namespace {

void check_grid(double m, double grid_step, double half_extent) {
  if (!(m > 0.0 && m < 1.0)) throw ValidationError("kernel: m must lie in (0,1)");
  if (!(grid_step > 0.0 && grid_step <= 0.25)) throw ValidationError("kernel: grid_step must lie in (0, 0.25]");
  if (half_extent + 1e-12 < std::min(8.0 / m, 10.0))
    throw ValidationError("kernel: half_extent below min(8/m, 10)");
}

} // namespace

SampledKernel propagator_kernel(double m, double grid_step, double half_extent, Regulator reg) {
  check_grid(m, grid_step, half_extent);
  double tail = aliasing_tail(m, grid_step, reg);
  if (tail > 1e-6) throw ResolutionError("propagator: momentum tail beyond Nyquist " + fmt17(tail));
  return tabulate(propagator_radial_kernel(m, reg), grid_step, half_extent);
}

SampledKernel polarization_kernel(const ModelParams& params, double grid_step, double half_extent) {
  check_grid(params.m, grid_step, half_extent);
  return tabulate(polarization_radial_kernel(params), grid_step, half_extent);
}

SampledKernel sqrt_one_plus_pi_kernel(const ModelParams& params, int sign, double grid_step,
                                      double half_extent, std::shared_ptr<const PolarizationTable> table) {
  check_grid(params.m, grid_step, half_extent);
  if (!table) table = std::make_shared<PolarizationTable>(params);
  const double qn = kPi / grid_step, e = 0.5 * sign;
  if (qn < table->qmax()) {
    auto s = [&](double q) { return q * std::abs(std::pow(1.0 + (*table)(q), e) - 1.0); };
    double total = integrate(s, 0.0, table->qmax(), 1e-12);
    double tail = integrate(s, qn, table->qmax(), 1e-12);
    if (tail > 1e-6 * total) throw ResolutionError("sqrt(1+pi): momentum tail beyond Nyquist");
  }
  return tabulate(sqrt_pi_radial_kernel(params, sign, table), grid_step, half_extent);
}

SampledKernel cutoff_inverse_kernel(const CutoffSpec& spec, double grid_step, double half_extent) {
  if (!(grid_step > 0.0) || !(half_extent > 0.0)) throw ValidationError("cutoff kernel: bad grid");
  return tabulate(cutoff_radial_kernel(spec), grid_step, half_extent);
}

void write_kernel_cache(const std::string& path, const SampledKernel& k, const std::string& params_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "name=" << k.name << "\n"
     << "grid_step=" << fmt17(k.grid_step) << "\n"
     << "half_extent=" << fmt17(k.half_extent) << "\n"
     << "half=" << k.half << "\n"
     << "delta=" << fmt17(k.delta) << "\n"
     << "fitted_decay_rate=" << fmt17(k.fitted_decay_rate) << "\n"
     << "fit_residual=" << fmt17(k.fit_residual) << "\n"
     << "fit_r2=" << fmt17(k.fit_r2) << "\n"
     << "sup_norm=" << fmt17(k.sup_norm) << "\n"
     << "params_hash=" << params_hash << "\n"
     << "end\n";
  os.write(reinterpret_cast<const char*>(k.values.data()), std::streamsize(k.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

SampledKernel read_kernel_cache(const std::string& path, std::string* params_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  SampledKernel k;
  std::string line;
  while (std::getline(is, line) && line != "end") {
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("kernel cache: bad header line in " + path);
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "name") k.name = val;
    else if (key == "grid_step") k.grid_step = std::stod(val);
    else if (key == "half_extent") k.half_extent = std::stod(val);
    else if (key == "half") k.half = std::stoi(val);
    else if (key == "delta") k.delta = std::stod(val);
    else if (key == "fitted_decay_rate") k.fitted_decay_rate = std::stod(val);
    else if (key == "fit_residual") k.fit_residual = std::stod(val);
    else if (key == "fit_r2") k.fit_r2 = std::stod(val);
    else if (key == "sup_norm") k.sup_norm = std::stod(val);
    else if (key == "params_hash") { if (params_hash) *params_hash = val; }
  }
  k.values.resize(std::size_t(k.width()) * k.width());
  is.read(reinterpret_cast<char*>(k.values.data()), std::streamsize(k.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("kernel cache truncated: " + path);
  return k;
}

void write_radial_profile_csv(const std::string& path, const RadialKernel& k, double r_max, int points) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "r,value\n";
  for (int i = 0; i < points; ++i) {
    double r = r_max * i / (points - 1);
    os << fmt17(r) << "," << fmt17(k.f(r)) << "\n";
  }
}

} // namespace lnsm
