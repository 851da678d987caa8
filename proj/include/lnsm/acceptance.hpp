#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lnsm/results.hpp"

namespace lnsm {

enum class Profile { quick, full };

Profile parse_profile(const std::string& s);
std::string to_string(Profile p);

struct CriterionOutcome {
  int id = 0;
  std::string title;
  bool pass = false;
  double runtime_s = 0.0;
  double runtime_limit_s = 0.0;
  std::string summary;
};

struct AcceptanceReport {
  ResultsTable table;
  std::vector<CriterionOutcome> criteria;
  bool all_pass() const;
};

using CriterionFn = std::function<void(Profile, std::uint64_t seed, ResultsTable&, CriterionOutcome&)>;

struct CriterionSpec {
  int id;
  std::string title;
  double runtime_limit_s;
  CriterionFn run;
};

const std::vector<CriterionSpec>& acceptance_criteria();

// Runs the selected criteria (all when ids is empty); on_done is called after each one.
AcceptanceReport run_acceptance(Profile profile, std::uint64_t seed = 1, const std::vector<int>& ids = {},
                                const std::function<void(const CriterionOutcome&)>& on_done = {});

std::string format_outcome(const CriterionOutcome& c);

} // namespace lnsm
