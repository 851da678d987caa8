#include "lnsm/results.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lnsm/errors.hpp"
#include "lnsm/util.hpp"

namespace lnsm {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& name, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("config: bad value for " + name + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& name, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad value for " + name + ": '" + v + "'");
}

std::string escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

} // namespace

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("config: " + key + " " + what);
  };
  need(lambda > 0.0, "model.lambda", "must be positive");
  need(bigK > 0.0, "model.K", "must be positive");
  need(bigN >= 2 && bigN % 2 == 0, "model.N", "must be an even integer >= 2");
  need(!corridor_override || *corridor_override > 0.0, "model.corridor_override", "must be positive");
  need(n >= 1 && n <= 16, "geometry.n", "must lie in [1, 16]");
  need(sites_per_square >= 1 && sites_per_square <= 8, "geometry.sites_per_square", "must lie in [1, 8]");
  need(cutoff.alpha > 0.0 && cutoff.alpha <= cutoff.c && cutoff.c <= cutoff.bigA, "cutoff.c",
       "must satisfy 0 < alpha <= c <= A");
  need(samples >= 1, "sampler.samples", "must be positive");
  need(batches >= 20, "sampler.batches", "must be at least 20");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "cutoff.A=" << fmt17(cutoff.bigA) << "\n"
     << "cutoff.alpha=" << fmt17(cutoff.alpha) << "\n"
     << "cutoff.c=" << fmt17(cutoff.c) << "\n"
     << "geometry.n=" << n << "\n"
     << "geometry.sites_per_square=" << sites_per_square << "\n"
     << "model.K=" << fmt17(bigK) << "\n"
     << "model.N=" << bigN << "\n"
     << "model.corridor_override=" << (corridor_override ? fmt17(*corridor_override) : "none") << "\n"
     << "model.lambda=" << fmt17(lambda) << "\n"
     << "model.regulator=" << to_string(regulator) << "\n"
     << "sampler.batches=" << batches << "\n"
     << "sampler.samples=" << samples << "\n"
     << "sampler.seed=" << seed << "\n";
  return os.str();
}

std::string RunConfig::hash() const { return hex64(fnv1a(canonical())); }

ModelParams RunConfig::params() const { return derive_params(lambda, bigK, bigN, regulator, corridor_override); }

LatticeGeometry RunConfig::geometry() const { return LatticeGeometry(n, sites_per_square); }

void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  const std::string name = section + "." + key;
  if (section == "model") {
    if (key == "lambda") return void(cfg.lambda = parse_number<double>(name, value));
    if (key == "K") return void(cfg.bigK = parse_number<double>(name, value));
    if (key == "N") return void(cfg.bigN = parse_number<long long>(name, value));
    if (key == "regulator") {
      try {
        cfg.regulator = parse_regulator(value);
      } catch (const std::exception&) {
        throw ConfigError("config: bad value for " + name + ": '" + value + "'");
      }
      return;
    }
    if (key == "corridor_override") {
      if (value == "none") return void(cfg.corridor_override.reset());
      return void(cfg.corridor_override = parse_number<double>(name, value));
    }
  } else if (section == "geometry") {
    if (key == "n") return void(cfg.n = parse_number<int>(name, value));
    if (key == "sites_per_square") return void(cfg.sites_per_square = parse_number<int>(name, value));
  } else if (section == "cutoff") {
    if (key == "alpha") return void(cfg.cutoff.alpha = parse_number<double>(name, value));
    if (key == "A") return void(cfg.cutoff.bigA = parse_number<double>(name, value));
    if (key == "c") return void(cfg.cutoff.c = parse_number<double>(name, value));
    if (key == "compact") return void(cfg.cutoff.compact = parse_bool(name, value));
  } else if (section == "sampler") {
    if (key == "seed") return void(cfg.seed = parse_number<std::uint64_t>(name, value));
    if (key == "samples") return void(cfg.samples = parse_number<int>(name, value));
    if (key == "batches") return void(cfg.batches = parse_number<int>(name, value));
  } else if (section == "output") {
    if (key == "dir") return void(cfg.outdir = value);
  }
  throw ConfigError("config: unknown key " + name);
}

void set_config_assignment(RunConfig& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("config: expected section.key=value, got '" + assignment + "'");
  set_config_value(cfg, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
                   trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(const std::string& text, RunConfig cfg) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: malformed section header on line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected key = value on line " + std::to_string(lineno));
    if (section.empty()) throw ConfigError("config: key " + trim(line.substr(0, eq)) + " outside a section");
    set_config_value(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string default_output_dir() {
  const char* env = std::getenv("LNSM_OUT");
  return env && *env ? env : "results";
}

bool ResultsTable::all_pass() const {
  for (const auto& r : rows_)
    if (!r.pass) return false;
  return true;
}

void ResultsTable::write_csv(const std::string& path, const std::string& config_hash) const {
  CsvTable t({"check_id", "module", "ref", "value", "bound", "pass"});
  for (const auto& r : rows_) t.row({r.check_id, r.module, r.ref, cell(r.value), cell(r.bound), cell(r.pass)});
  t.write(path, config_hash);
}

void ResultsTable::write_timing(const std::string& path, const std::string& config_hash) const {
  CsvTable t({"check_id", "runtime_ms"});
  for (const auto& r : rows_) t.row({r.check_id, cell(r.runtime_ms)});
  t.write(path, config_hash);
}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw std::logic_error("csv: row width does not match header");
  rows_.push_back(std::move(cells));
  return *this;
}

void CsvTable::write(const std::string& path, const std::string& config_hash) const {
  std::ofstream f = open_out(path);
  f << "# config_hash=" << config_hash << "\n";
  for (std::size_t i = 0; i < header_.size(); ++i) f << (i ? "," : "") << escape(header_[i]);
  f << "\n";
  for (const auto& r : rows_) {
    for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << escape(r[i]);
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string cell(double v) { return fmt17(v); }
std::string cell(long long v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "pass" : "fail"; }

std::vector<std::string> persist_results(const ResultsTable& table, const std::string& outdir, const std::string& name,
                                         const std::string& config_hash) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw std::runtime_error("cannot create " + outdir + ": " + ec.message());
  std::string main = (std::filesystem::path(outdir) / (name + ".csv")).string();
  std::string timing = (std::filesystem::path(outdir) / (name + ".timing.csv")).string();
  table.write_csv(main, config_hash);
  table.write_timing(timing, config_hash);
  return {main, timing};
}

} // namespace lnsm
