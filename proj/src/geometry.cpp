#include "lnsm/geometry.hpp"

#include <cmath>
#include <fstream>

#include "lnsm/errors.hpp"
#include "lnsm/util.hpp"

namespace lnsm {

double square_distance(Square p, Square q) {
  double dx = std::max(0, std::abs(p.a - q.a) - 1);
  double dy = std::max(0, std::abs(p.b - q.b) - 1);
  return std::sqrt(dx * dx + dy * dy);
}

LatticeGeometry::LatticeGeometry(int n, int sites_per_square, int margin)
    : n_(n), s_(sites_per_square), margin_(margin) {
  if (n < 1) throw ValidationError("geometry: n must be positive");
  if (sites_per_square < 1) throw ValidationError("geometry: sites_per_square must be positive");
  if (margin < 0) throw ValidationError("geometry: margin must be nonnegative");
}

Square LatticeGeometry::square(int idx) const {
  int side = squares_per_side(), lo = -(n_ + margin_);
  return {lo + idx / side, lo + idx % side};
}

int LatticeGeometry::square_index(Square q) const {
  int side = squares_per_side(), lo = -(n_ + margin_);
  int i = q.a - lo, j = q.b - lo;
  if (i < 0 || j < 0 || i >= side || j >= side) return -1;
  return i * side + j;
}

std::array<double, 2> LatticeGeometry::site_pos(int site) const {
  double lo = -(n_ + margin_);
  return {lo + (site_ix(site) + 0.5) * step(), lo + (site_iy(site) + 0.5) * step()};
}

int LatticeGeometry::site_square(int site) const {
  return (site_ix(site) / s_) * squares_per_side() + site_iy(site) / s_;
}

std::vector<int> LatticeGeometry::square_sites(int square_idx) const {
  int side = squares_per_side();
  int i = square_idx / side, j = square_idx % side;
  std::vector<int> out;
  out.reserve(std::size_t(s_) * s_);
  for (int u = 0; u < s_; ++u)
    for (int v = 0; v < s_; ++v) out.push_back(site_index(i * s_ + u, j * s_ + v));
  return out;
}

std::vector<Square> LatticeGeometry::lambda_squares() const {
  std::vector<Square> out;
  for (int a = -n_; a < n_; ++a)
    for (int b = -n_; b < n_; ++b) out.push_back({a, b});
  return out;
}

std::vector<char> LatticeGeometry::lambda_mask() const {
  std::vector<char> m(site_count());
  for (int x = 0; x < site_count(); ++x) m[x] = in_lambda(square(site_square(x)));
  return m;
}

void recompute_masses(const LatticeGeometry& geo, FieldConfig& field) {
  field.masses.assign(geo.square_count(), 0.0);
  for (int x = 0; x < geo.site_count(); ++x)
    field.masses[geo.site_square(x)] += geo.weight() * field.tau[x] * field.tau[x];
}

FieldConfig make_field(const LatticeGeometry& geo, std::vector<double> tau) {
  if (int(tau.size()) != geo.site_count())
    throw ValidationError("field: expected " + std::to_string(geo.site_count()) + " sites, got " +
                          std::to_string(tau.size()));
  FieldConfig f;
  f.tau = std::move(tau);
  recompute_masses(geo, f);
  return f;
}

void write_field(const std::string& path, const LatticeGeometry& geo, const FieldConfig& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "n=" << geo.n() << "\nsites_per_square=" << geo.sites_per_square() << "\nmargin=" << geo.margin()
     << "\nsites=" << field.tau.size() << "\nend\n";
  os.write(reinterpret_cast<const char*>(field.tau.data()), std::streamsize(field.tau.size() * sizeof(double)));
}

FieldConfig read_field(const std::string& path, int* n, int* sites_per_square, int* margin) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  int nn = 0, s = 0, mg = 0;
  long sites = 0;
  while (std::getline(is, line) && line != "end") {
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("field file: bad header in " + path);
    std::string key = line.substr(0, eq);
    long v = std::stol(line.substr(eq + 1));
    if (key == "n") nn = int(v);
    else if (key == "sites_per_square") s = int(v);
    else if (key == "margin") mg = int(v);
    else if (key == "sites") sites = v;
    else throw ValidationError("field file: unknown key '" + key + "'");
  }
  LatticeGeometry geo(nn, s, mg);
  if (sites != geo.site_count()) throw ValidationError("field file: site count does not match geometry");
  std::vector<double> tau(sites);
  is.read(reinterpret_cast<char*>(tau.data()), std::streamsize(sites * sizeof(double)));
  if (!is) throw std::runtime_error("field file truncated: " + path);
  if (n) *n = nn;
  if (sites_per_square) *sites_per_square = s;
  if (margin) *margin = mg;
  return make_field(geo, std::move(tau));
}

} // namespace lnsm
