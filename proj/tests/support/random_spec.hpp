#pragma once

#include <cstdint>
#include <random>

#include "metacp/spec.hpp"

namespace metacp::testing {

struct RandomSpecLimits {
  int max_roles = 6;
  int max_messages = 12;
  int max_depth = 4;
};

/// Valid, executable protocol specifications drawn from a seeded generator.
/// Each sender builds its payload from terms it can already derive, so
/// every draw passes the builder and the executability check; the rare
/// draw that does not is retried.
class RandomSpecGenerator {
 public:
  explicit RandomSpecGenerator(std::uint64_t seed, RandomSpecLimits limits = {});

  ProtocolSpec next();

  /// Draws that were discarded because they failed a check.
  int rejected() const { return rejected_; }

 private:
  std::optional<ProtocolSpec> attempt();

  std::mt19937_64 rng_;
  RandomSpecLimits limits_;
  int counter_ = 0;
  int rejected_ = 0;
};

}  // namespace metacp::testing
