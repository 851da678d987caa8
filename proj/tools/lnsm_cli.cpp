#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "CLI11.hpp"
#include "lnsm/acceptance.hpp"
#include "lnsm/covariance.hpp"
#include "lnsm/errors.hpp"
#include "lnsm/forest.hpp"
#include "lnsm/kernels.hpp"
#include "lnsm/model.hpp"
#include "lnsm/operators.hpp"
#include "lnsm/regions.hpp"
#include "lnsm/results.hpp"
#include "lnsm/twopoint.hpp"
#include "lnsm/util.hpp"

using namespace lnsm;

namespace {

enum Exit { kPass = 0, kCheckFailed = 1, kConfigError = 2, kNumericalAbort = 3 };

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string outdir;

  RunConfig load() const {
    RunConfig c;
    c.outdir = default_output_dir();
    if (!config.empty()) c = load_config(config, c);
    for (const auto& s : sets) set_config_assignment(c, s);
    if (!outdir.empty()) c.outdir = outdir;
    c.validate();
    return c;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key=value config file with [sections]");
  sub->add_option("--set", c.sets, "override, e.g. model.N=10000")->take_all();
  sub->add_option("--out-dir", c.outdir, "output directory (default $LNSM_OUT or ./results)");
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.outdir, ec);
  if (ec) throw std::runtime_error("cannot create " + cfg.outdir + ": " + ec.message());
  return (std::filesystem::path(cfg.outdir) / name).string();
}

struct Check {
  std::string name;
  double value, bound;
  bool pass;
};

int report_checks(const std::vector<Check>& checks) {
  bool all = true;
  for (const auto& c : checks) {
    std::printf("  %-28s %-4s value=%-14.6g bound=%.6g\n", c.name.c_str(), c.pass ? "ok" : "FAIL", c.value, c.bound);
    all = all && c.pass;
  }
  return all ? kPass : kCheckFailed;
}

FieldConfig gaussian_field(const CovarianceContext& ctx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd v = GaussianSampler(ctx.C0 / ctx.weight()).draw(rng);
  return make_field(ctx.geo, std::vector<double>(v.data(), v.data() + v.size()));
}

FieldConfig load_or_sample(const std::string& path, const CovarianceContext& ctx, std::uint64_t seed) {
  if (path.empty()) return gaussian_field(ctx, seed);
  int n = 0, s = 0, margin = 0;
  FieldConfig f = read_field(path, &n, &s, &margin);
  if (n != ctx.geo.n() || s != ctx.geo.sites_per_square() || margin != ctx.geo.margin())
    throw ConfigError("field file geometry does not match geometry.n / geometry.sites_per_square");
  return f;
}

// l squares as lines "a,b[,level]"
std::vector<int> read_levels(const std::string& path, const LatticeGeometry& geo) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read regions file " + path);
  std::vector<int> lv(geo.square_count(), 0);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    int a, b, level = 1;
    if (!(ls >> a >> b)) continue;
    ls >> level;
    int q = geo.square_index({a, b});
    if (q < 0 || !geo.in_lambda({a, b})) throw ConfigError("regions file: square outside Lambda in " + path);
    lv[q] = level;
  }
  return lv;
}

double corridor(const RunConfig& cfg, const ModelParams& p) { return cfg.corridor_override.value_or(p.corridorM); }

int cmd_gap(double lambda, double bigK, const std::string& reg) {
  Regulator r = parse_regulator(reg);
  double m2 = solve_gap_equation(lambda, bigK, r);
  ModelParams p = derive_params(lambda, bigK, 1000000, r);
  std::printf("lambda=%.17g K=%.17g regulator=%s\n", lambda, bigK, to_string(r).c_str());
  std::printf("m2=%.17g\nm=%.17g\nc_m=%.17g\nleading_m=%.17g\n", m2, std::sqrt(m2),
              m2 * std::exp(4.0 * std::numbers::pi / lambda), leading_mass(lambda));
  std::printf("mass_window_ok=%s\n", p.mass_window_ok ? "true" : "false");
  std::printf("residual=%.3g\n", gap_lhs(m2, r) - m2 / (lambda * bigK) - 0.5 / lambda);
  return kPass;
}

int cmd_kernels(double m, double lambda, double bigK, double step, double extent, const std::string& outdir) {
  ModelParams p = params_with_mass(lambda, bigK, 1000000, m, Regulator::exponential);
  auto table = std::make_shared<PolarizationTable>(p);
  RunConfig cfg;
  cfg.outdir = outdir.empty() ? default_output_dir() : outdir;
  std::ostringstream h;
  h << report(p) << "|" << fmt17(step) << "|" << fmt17(extent);
  const std::string hash = hex64(fnv1a(h.str()));
  CsvTable csv({"kernel", "fitted_rate", "expected_rate", "rel_dev", "fit_r2", "min_value", "sup_norm", "pass"});
  std::vector<Check> checks;
  std::vector<std::pair<RadialKernel, double>> ks{{propagator_radial_kernel(m), m},
                                                  {polarization_radial_kernel(p), 2 * m},
                                                  {sqrt_pi_radial_kernel(p, 1, table), 2 * m},
                                                  {sqrt_pi_radial_kernel(p, -1, table), 2 * m}};
  for (auto& [k, expect] : ks) {
    SampledKernel s = tabulate(k, step, extent);
    double minv = *std::min_element(s.values.begin(), s.values.end());
    double dev = std::abs(s.fitted_decay_rate / expect - 1.0);
    bool pass = dev <= 0.1 && (k.name != "propagator" || minv > 0.0);
    csv.row({k.name, cell(s.fitted_decay_rate), cell(expect), cell(dev), cell(s.fit_r2), cell(minv), cell(s.sup_norm),
             cell(pass)});
    checks.push_back({k.name + " rate", s.fitted_decay_rate, expect, pass});
    write_kernel_cache(out_path(cfg, k.name + ".kernel"), s, hash);
  }
  std::string path = out_path(cfg, "kernels.csv");
  csv.write(path, hash);
  std::printf("m=%g pi(0)=%.10g -> %s\n", m, table->at_zero(), path.c_str());
  return report_checks(checks);
}

int cmd_decompose(const Common& common, const std::string& field_path, std::uint64_t seed) {
  RunConfig cfg = common.load();
  ModelParams p = cfg.params();
  LatticeGeometry geo = cfg.geometry();
  FieldConfig f;
  if (field_path.empty()) {
    CovarianceContext ctx = build_covariance_context(p, geo, {cfg.cutoff});
    f = gaussian_field(ctx, seed);
  } else {
    int n = 0, s = 0, margin = 0;
    f = read_field(field_path, &n, &s, &margin);
    geo = LatticeGeometry(n, s, margin);
  }
  LSAssignment a = classify_squares(f, p, geo);
  RegionSet R = build_regions(a, geo, corridor(cfg, p));
  auto member = [](const std::vector<Square>& v) { return std::set<Square>(v.begin(), v.end()); };
  auto G = member(R.bigGamma), GE = member(R.bigGammaE), g = member(R.gamma);
  std::map<Square, int> comp;
  for (std::size_t i = 0; i < R.components.size(); ++i)
    for (Square s : R.components[i].bigGamma) comp[s] = int(i);
  CsvTable csv({"a", "b", "v", "level", "theta_s", "gamma", "Gamma", "GammaE", "component"});
  for (int q = 0; q < geo.square_count(); ++q) {
    Square s = geo.square(q);
    csv.row({cell(s.a), cell(s.b), cell(p.lambdaK() * f.masses[q]), cell(a.level[q]), cell(a.theta_s[q]),
             cell(int(g.count(s))), cell(int(G.count(s))), cell(int(GE.count(s))), cell(comp.count(s) ? comp[s] : -1)});
  }
  std::string path = out_path(cfg, "regions.csv");
  csv.write(path, cfg.hash());
  std::printf("l squares=%zu gamma=%zu Gamma=%zu GammaE=%zu components=%zu corridor=%g -> %s\n", R.lambda_l.size(),
              R.gamma.size(), R.bigGamma.size(), R.bigGammaE.size(), R.components.size(), R.corridorM, path.c_str());
  return kPass;
}

int cmd_opcheck(const Common& common, const std::vector<std::string>& which, const std::string& field_path,
                std::uint64_t seed) {
  RunConfig cfg = common.load();
  ModelParams p = cfg.params();
  LatticeGeometry geo = cfg.geometry();
  CovarianceContext ctx = build_covariance_context(p, geo, {cfg.cutoff});
  SampledKernel F = lattice_propagator(p, geo);
  FieldConfig f = load_or_sample(field_path, ctx, seed);
  DiscretizedOperator A = build_A(f, p, geo, F);
  LSAssignment a = classify_squares(f, p, geo);
  ABlocks b = split_blocks(A, geo, a);
  std::vector<Check> checks;
  auto want = [&](const std::string& n) { return which.empty() || std::count(which.begin(), which.end(), n); };
  if (want("norm")) {
    double nrm = operator_norm(b.As), bound = std::pow(double(p.bigN), -0.4);
    checks.push_back({"||A_s|| <= N^(-2/5)", nrm, bound, nrm <= bound});
  }
  if (want("split")) {
    DetSplit d = det_split_identity(b, p);
    checks.push_back({"determinant split", d.max_residual(), 1e-8, d.max_residual() < 1e-8});
    DSplit ds = D_decomposition(b);
    checks.push_back({"|det(1+B)| via D", ds.abs_det_residual, 1e-8, ds.abs_det_residual < 1e-8});
  }
  if (want("detn")) {
    const cplx I(0.0, 1.0);
    Eigen::MatrixXcd K = I * A.matrix.cast<cplx>();
    const int n = int(K.rows());
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Eigen::MatrixXcd::Identity(n, n) + K);
    cplx logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(lu.matrixLU()(i, i));
    cplx ref = std::exp(logdet - K.trace() + 0.5 * (K * K).trace()) * double(lu.permutationP().determinant());
    double dev = std::abs(det_reg(K, 3).value() / ref - 1.0);
    checks.push_back({"det_3 vs LU oracle", dev, 1e-10, dev < 1e-10});
  }
  if (want("cubic")) {
    auto [lhs, rhs] = cubic_trace_bound(b.As);
    checks.push_back({"|Tr A_s^3| bound", lhs, rhs, lhs <= rhs * (1.0 + 1e-10)});
  }
  int nl = 0;
  for (int l : a.level) nl += l > 0;
  std::printf("N=%lld m=%.6g sites=%d l squares=%d\n", p.bigN, p.m, geo.site_count(), nl);
  if (checks.empty()) throw ConfigError("opcheck: --checks must name norm, split, detn or cubic");
  return report_checks(checks);
}

int cmd_covariance(const Common& common, const std::string& regions_path, std::uint64_t seed) {
  RunConfig cfg = common.load();
  ModelParams p = cfg.params();
  LatticeGeometry geo = cfg.geometry();
  CovarianceContext ctx = build_covariance_context(p, geo, {cfg.cutoff});
  std::vector<int> lv;
  if (regions_path.empty()) {
    lv = classify_squares(gaussian_field(ctx, seed), p, geo).level;
  } else {
    lv = read_levels(regions_path, geo);
  }
  RegionSet R = build_regions(assignment_from_levels(lv), geo, corridor(cfg, p));
  CovarianceSet cs = build_Cgamma(ctx, R);
  DeltaC dc = build_deltaC(ctx, R);
  double sum = 0.0;
  for (double z : cs.log_Z_components) sum += z;
  double fac = std::abs(std::expm1(cs.log_Z - sum));
  std::printf("eps=%.6g pi0=%.6g components=%zu gamma volume=%g log Z=%.10g\n", ctx.epsilon, ctx.pi0,
              R.components.size(), cs.gamma_volume, cs.log_Z);
  for (const auto& c : covariance_constants(ctx, R, cs)) std::printf("  constant %-18s %.6g\n", c.name.c_str(), c.value);
  return report_checks({{"Neumann vs direct", cs.neumann_residual, 1e-8, cs.neumann_residual < 1e-8},
                        {"log Z_gamma >= 0", cs.log_Z, 0.0, cs.log_Z >= 0.0},
                        {"Z factorization", fac, 1e-8, fac < 1e-8},
                        {"delta C_1 max eig", dc.d1_max_eig, 1e-10, dc.d1_max_eig <= 1e-10},
                        {"delta C identity", dc.identity_residual, 1e-10, dc.identity_residual < 1e-10}});
}

int cmd_forest(int max_size, int trials, std::uint64_t seed) {
  if (max_size < 2 || max_size > 6) throw ConfigError("forest-verify: --max-size must lie in [2, 6]");
  if (trials < 0) throw ConfigError("forest-verify: --trials must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uc(-1.0, 1.0), u01(0.0, 1.0);
  std::normal_distribution<double> nd;
  std::vector<Check> checks;
  for (int n = 2; n <= std::min(max_size, 4); ++n)
    for (auto kind : {PairFunction::Kind::square_of_sum, PairFunction::Kind::exponential, PairFunction::Kind::product}) {
      PairFunction H{kind, {}};
      for (int q = 0; q < n * (n - 1) / 2; ++q) H.c.push_back(uc(rng));
      ForestFormulaCheck c = verify_forest_formula(H, n);
      double rel = c.residual / std::max(1.0, std::abs(c.lhs));
      checks.push_back({"forest identity n=" + std::to_string(n) + " f" + std::to_string(int(kind)), rel, 1e-8,
                        rel < 1e-8});
    }
  double recon = 0.0, min_eig = 1e300;
  for (int t = 0; t < trials; ++t) {
    const int nb = 2 + int(rng() % 3);
    std::vector<int> block;
    for (int b = 0; b < nb; ++b)
      for (int s = 1 + int(rng() % 3); s > 0; --s) block.push_back(b);
    const int dim = int(block.size());
    Eigen::MatrixXd X(dim, dim + 1);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j <= dim; ++j) X(i, j) = nd(rng);
    Eigen::MatrixXd K = X * X.transpose();
    auto all = enumerate_forests(nb);
    Forest f = all[rng() % all.size()];
    for (std::size_t e = 0; e < f.edges.size(); ++e) f.h.push_back(u01(rng));
    Eigen::MatrixXd Kh = interpolate_kernel(K, block, f), sum = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& term : positivity_decomposition(K, block, f)) sum += term.weight * term.op;
    recon = std::max(recon, (sum - Kh).cwiseAbs().maxCoeff() / K.cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Kh).eigenvalues().minCoeff());
  }
  if (trials > 0) {
    checks.push_back({"decomposition reconstruction", recon, 1e-12, recon < 1e-12});
    checks.push_back({"K(h) min eigenvalue", min_eig, 0.0, min_eig >= -1e-12});
  }
  for (int q = 1; q <= max_size; ++q) {
    Eigen::MatrixXd v = -Eigen::MatrixXd::Ones(q, q);
    v.diagonal().setZero();
    double expect = std::tgamma(double(q)) * (q % 2 ? 1.0 : -1.0);
    double d = std::abs(mayer_tree_formula(v) - expect) + std::abs(mayer_connectivity(v) - expect);
    checks.push_back({"complete graph q=" + std::to_string(q), d, 1e-6, d < 1e-6});
  }
  double rho = polymer_threshold(max_size, true);
  PolymerSumOptions o;
  o.rho = rho;
  o.max_size = max_size;
  double total = polymer_activity_sum(o).total();
  std::printf("rho*=%.10g\n", rho);
  checks.push_back({"polymer sum at rho*", total, 0.5, total <= 0.5 + 1e-12});
  return report_checks(checks);
}

int cmd_twopoint(const Common& common, int samples, long long seed, int separations, const std::string& out) {
  RunConfig cfg = common.load();
  if (samples > 0) cfg.samples = samples;
  if (seed >= 0) cfg.seed = std::uint64_t(seed);
  cfg.validate();
  ModelParams p = cfg.params();
  LatticeGeometry geo = cfg.geometry();
  CovarianceContext ctx = build_covariance_context(p, geo, {cfg.cutoff});
  SampledKernel F = lattice_propagator(p, geo);
  SamplerConfig sc;
  sc.seed = cfg.seed;
  sc.samples = cfg.samples;
  sc.batches = cfg.batches;
  TwoPointResult r = estimate_S2(ctx, F, sc);

  CsvTable csv({"sep", "re_mean", "im_mean", "se", "weight_phase_diag"});
  int rows = separations > 0 ? std::min<int>(separations, int(r.separations.size())) : int(r.separations.size());
  for (int j = 0; j < rows; ++j)
    csv.row({cell(r.separations[j]), cell(r.estimates[j].real()), cell(r.estimates[j].imag()),
             cell(std::hypot(r.se_re[j], r.se_im[j])), cell(r.sign_diagnostic)});
  std::string path = out.empty() ? out_path(cfg, "twopoint.csv") : out;
  csv.write(path, cfg.hash());
  std::string summary_path = path + ".summary";
  std::ofstream sf(summary_path, std::ios::binary);
  if (!sf) throw std::runtime_error("cannot write " + summary_path);
  sf << "# config_hash=" << cfg.hash() << "\n"
     << "fitted_mprime=" << fmt17(r.fitted_mprime) << "\nmprime_se=" << fmt17(r.mprime_se) << "\nm=" << fmt17(r.m)
     << "\nratio=" << fmt17(r.ratio()) << "\nfit_r2=" << fmt17(r.fit_r2) << "\nloglin_rate=" << fmt17(r.loglin_rate)
     << "\nsign_diagnostic=" << fmt17(r.sign_diagnostic) << "\nsamples=" << r.sample_count << "\nbatches=" << r.batches
     << "\n";
  std::printf("fitted_mprime=%.10g +- %.3g\nm=%.10g\nratio=%.6f\nfit_r2=%.6f\nsign_diagnostic=%.6f\n-> %s\n",
              r.fitted_mprime, r.mprime_se, r.m, r.ratio(), r.fit_r2, r.sign_diagnostic, path.c_str());
  bool ok = r.fit_r2 >= 0.95 && r.ratio() >= 0.7 && r.ratio() <= 1.3;
  return ok ? kPass : kCheckFailed;
}

int cmd_accept(const std::string& profile, std::uint64_t seed, const std::vector<int>& only, const std::string& outdir) {
  Profile p = parse_profile(profile);
  AcceptanceReport rep = run_acceptance(p, seed, only, [](const CriterionOutcome& c) {
    std::printf("%s\n", format_outcome(c).c_str());
    std::fflush(stdout);
  });
  auto paths = persist_results(rep.table, outdir.empty() ? default_output_dir() : outdir, "acceptance_" + profile,
                               hex64(fnv1a(profile + "|" + std::to_string(seed))));
  std::printf("results: %s\n", paths[0].c_str());
  return rep.all_pass() ? kPass : kCheckFailed;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"lnsm: large-N sigma model numerics"};
  app.require_subcommand(1);

  double lambda = 1.0, bigK = 1.0, m = 0.1, step = 0.125, extent = 10.0;
  std::string regulator = "exponential", outdir, field, regions, out, profile = "quick";
  std::vector<std::string> checks;
  std::vector<int> only;
  int max_size = 4, trials = 200, samples = 0, separations = 0;
  long long seed_opt = -1;
  std::uint64_t seed = 1;
  Common common;

  auto* gap = app.add_subcommand("gap-solve", "solve the gap equation");
  gap->add_option("--lambda", lambda)->check(CLI::PositiveNumber);
  gap->add_option("--K", bigK)->check(CLI::PositiveNumber);
  gap->add_option("--regulator", regulator)->check(CLI::IsMember({"exponential", "sharp", "none"}));

  auto* ker = app.add_subcommand("kernels", "tabulate the kernels and fit their decay");
  ker->add_option("--m", m)->check(CLI::PositiveNumber);
  ker->add_option("--lambda", lambda)->check(CLI::PositiveNumber);
  ker->add_option("--K", bigK)->check(CLI::PositiveNumber);
  ker->add_option("--grid-step", step)->check(CLI::PositiveNumber);
  ker->add_option("--extent", extent)->check(CLI::PositiveNumber);
  ker->add_option("--out-dir", outdir);

  auto* dec = app.add_subcommand("decompose", "classify squares and build the regions");
  add_common(dec, common);
  dec->add_option("--field", field, "field file; a Gaussian draw when omitted");
  dec->add_option("--seed", seed);

  auto* op = app.add_subcommand("opcheck", "operator norms and determinant identities");
  add_common(op, common);
  op->add_option("--checks", checks, "norm, split, detn, cubic")->delimiter(',');
  op->add_option("--field", field);
  op->add_option("--seed", seed);

  auto* cov = app.add_subcommand("covariance", "C_gamma, Z_gamma and delta C on a region set");
  add_common(cov, common);
  cov->add_option("--regions", regions, "lines a,b[,level] listing the large squares");
  cov->add_option("--seed", seed);

  auto* fv = app.add_subcommand("forest-verify", "forest formulas, Mayer factors and the polymer sum");
  fv->add_option("--max-size", max_size);
  fv->add_option("--trials", trials);
  fv->add_option("--seed", seed);

  auto* tp = app.add_subcommand("twopoint", "Monte Carlo estimate of the two-point function");
  add_common(tp, common);
  tp->add_option("--samples", samples)->check(CLI::PositiveNumber);
  tp->add_option("--seed", seed_opt);
  tp->add_option("--separations", separations, "number of separations written (default all)");
  tp->add_option("--out", out, "csv path");

  auto* acc = app.add_subcommand("accept-all", "run the acceptance suite");
  acc->add_option("--profile", profile)->check(CLI::IsMember({"quick", "full"}));
  acc->add_option("--seed", seed);
  acc->add_option("--only", only);
  acc->add_option("--out-dir", outdir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kPass : kConfigError;
  }

  try {
    if (*gap) return cmd_gap(lambda, bigK, regulator);
    if (*ker) return cmd_kernels(m, lambda, bigK, step, extent, outdir);
    if (*dec) return cmd_decompose(common, field, seed);
    if (*op) return cmd_opcheck(common, checks, field, seed);
    if (*cov) return cmd_covariance(common, regions, seed);
    if (*fv) return cmd_forest(max_size, trials, seed);
    if (*tp) return cmd_twopoint(common, samples, seed_opt, separations, out);
    if (*acc) return cmd_accept(profile, seed, only, outdir);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const SignProblemError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kNumericalAbort;
  } catch (const ConvergenceError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kNumericalAbort;
  } catch (const SingularityError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kNumericalAbort;
  } catch (const ResolutionError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kNumericalAbort;
  } catch (const NoRootError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kNumericalAbort;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kCheckFailed;
  }
  return kPass;
}
