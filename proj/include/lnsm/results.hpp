#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lnsm/geometry.hpp"
#include "lnsm/kernels.hpp"
#include "lnsm/model.hpp"

namespace lnsm {

// Sections and keys:
//   [model]    lambda K N regulator corridor_override
//   [geometry] n sites_per_square
//   [cutoff]   alpha A c
//   [sampler]  seed samples batches
//   [output]   dir
struct RunConfig {
  double lambda = 1.0;
  double bigK = 1.0;
  long long bigN = 10000;
  Regulator regulator = Regulator::exponential;
  std::optional<double> corridor_override;
  int n = 4;
  int sites_per_square = 2;
  CutoffSpec cutoff;
  std::uint64_t seed = 1;
  int samples = 10000;
  int batches = 20;
  std::string outdir;

  void validate() const;
  std::string canonical() const; // sorted key=value lines, outdir excluded
  std::string hash() const;
  ModelParams params() const;
  LatticeGeometry geometry() const;
};

void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value);
// "section.key=value"
void set_config_assignment(RunConfig& cfg, const std::string& assignment);
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

// $LNSM_OUT, else "results"
std::string default_output_dir();

struct ResultRow {
  std::string check_id, module, ref;
  double value = 0.0, bound = 0.0;
  bool pass = false;
  double runtime_ms = 0.0;
};

// Runtimes go to a separate timing file so the main CSV is reproducible byte for byte.
class ResultsTable {
public:
  void add(ResultRow row) { rows_.push_back(std::move(row)); }
  const std::vector<ResultRow>& rows() const { return rows_; }
  bool all_pass() const;
  void write_csv(const std::string& path, const std::string& config_hash) const;
  void write_timing(const std::string& path, const std::string& config_hash) const;

private:
  std::vector<ResultRow> rows_;
};

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvTable& row(std::vector<std::string> cells);
  void write(const std::string& path, const std::string& config_hash) const;
  std::size_t size() const { return rows_.size(); }

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string cell(double v);
std::string cell(long long v);
std::string cell(int v);
std::string cell(bool v);

// Writes <outdir>/<name>.csv and <outdir>/<name>.timing.csv, creating outdir.
std::vector<std::string> persist_results(const ResultsTable& table, const std::string& outdir, const std::string& name,
                                         const std::string& config_hash);

} // namespace lnsm
