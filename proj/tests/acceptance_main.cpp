#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lnsm/acceptance.hpp"
#include "lnsm/errors.hpp"
#include "lnsm/results.hpp"
#include "lnsm/util.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string profile = "quick", outdir = lnsm::default_output_dir();
  std::uint64_t seed = 1;
  std::vector<int> only;
  app.add_option("--profile", profile, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  app.add_option("--seed", seed);
  app.add_option("--only", only, "criterion ids to run");
  app.add_option("--out", outdir, "directory for the results csv");
  CLI11_PARSE(app, argc, argv);

  const lnsm::Profile p = lnsm::parse_profile(profile);
  std::printf("acceptance profile=%s seed=%llu\n", profile.c_str(), static_cast<unsigned long long>(seed));
  std::fflush(stdout);
  lnsm::AcceptanceReport rep = lnsm::run_acceptance(p, seed, only, [](const lnsm::CriterionOutcome& c) {
    std::printf("%s\n", lnsm::format_outcome(c).c_str());
    std::fflush(stdout);
  });

  int passed = 0;
  for (const auto& c : rep.criteria) passed += c.pass;
  std::printf("%d/%zu criteria pass\n", passed, rep.criteria.size());
  try {
    auto paths = lnsm::persist_results(rep.table, outdir, "acceptance_" + profile,
                                       lnsm::hex64(lnsm::fnv1a(profile + "|" + std::to_string(seed))));
    std::printf("results: %s\n", paths[0].c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
  }
  return rep.all_pass() ? 0 : 1;
}
