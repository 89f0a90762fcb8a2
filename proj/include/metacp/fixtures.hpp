#pragma once

#include <optional>
#include <string_view>
#include <vector>

namespace metacp {

struct Fixture {
  std::string_view name;  // e.g. "nsp"
  std::string_view text;  // canonical PSV
};

/// Protocols shipped with the toolchain, sorted by name.
const std::vector<Fixture>& bundled_fixtures();

std::optional<std::string_view> find_fixture(std::string_view name);

}  // namespace metacp
