#pragma once

#include <optional>
#include <string>
#include <vector>

namespace metacp::testing {

/// A documented single edit to a bundled fixture and the first error it must
/// produce.
struct Mutation {
  std::string name;
  std::string fixture;
  std::string find;     // exact text in the fixture, first occurrence
  std::string replace;
  std::string expected_code;
  int expected_step = 0;
};

const std::vector<Mutation>& documented_mutations();

/// The fixture text with the mutation applied; nullopt when `find` is absent.
std::optional<std::string> apply_mutation(const Mutation& m);

struct MutationOutcome {
  bool ok = false;  // first error matches code and step
  std::string observed;  // "CODE@step" of the first error, or "none"
};

MutationOutcome run_mutation(const Mutation& m);

}  // namespace metacp::testing
