#pragma once

#include <string>
#include <string_view>

namespace metacp::testing {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Contents of a golden file; empty when missing.
std::string read_golden(std::string_view file_name);

}  // namespace metacp::testing
