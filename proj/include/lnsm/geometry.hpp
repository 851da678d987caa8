#pragma once

#include <array>
#include <string>
#include <vector>

namespace lnsm {

// Closed unit square with integer lower left corner (a, b).
struct Square {
  int a = 0, b = 0;
  bool operator==(const Square&) const = default;
  auto operator<=>(const Square&) const = default;
};

double square_distance(Square p, Square q);

// Lambda = [-n, n]^2 paved by 4n^2 unit squares, each carrying s x s sites at cell centres.
// A margin of extra squares around Lambda can be added for kernels acting outside Lambda.
class LatticeGeometry {
public:
  LatticeGeometry(int n, int sites_per_square, int margin = 0);

  int n() const { return n_; }
  int sites_per_square() const { return s_; }
  int margin() const { return margin_; }
  double step() const { return 1.0 / s_; }
  double weight() const { return step() * step(); }

  int squares_per_side() const { return 2 * (n_ + margin_); }
  int square_count() const { return squares_per_side() * squares_per_side(); }
  int lambda_square_count() const { return 4 * n_ * n_; }
  int sites_per_side() const { return squares_per_side() * s_; }
  int site_count() const { return sites_per_side() * sites_per_side(); }

  Square square(int idx) const;
  int square_index(Square q) const; // -1 outside the grid
  bool in_lambda(Square q) const { return q.a >= -n_ && q.a < n_ && q.b >= -n_ && q.b < n_; }
  bool on_grid(Square q) const { return square_index(q) >= 0; }

  int site_ix(int site) const { return site / sites_per_side(); }
  int site_iy(int site) const { return site % sites_per_side(); }
  int site_index(int ix, int iy) const { return ix * sites_per_side() + iy; }
  std::array<double, 2> site_pos(int site) const;
  int site_square(int site) const;
  std::vector<int> square_sites(int square_idx) const;
  std::vector<Square> lambda_squares() const;
  // 1 for sites inside Lambda
  std::vector<char> lambda_mask() const;

private:
  int n_, s_, margin_;
};

struct FieldConfig {
  std::vector<double> tau;    // one value per site
  std::vector<double> masses; // int_Delta tau^2 per square (midpoint rule)
};

FieldConfig make_field(const LatticeGeometry& geo, std::vector<double> tau);
void recompute_masses(const LatticeGeometry& geo, FieldConfig& field);

// Binary doubles after a text header carrying n, sites_per_square, margin.
void write_field(const std::string& path, const LatticeGeometry& geo, const FieldConfig& field);
FieldConfig read_field(const std::string& path, int* n, int* sites_per_square, int* margin);

} // namespace lnsm
