#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metacp/diagnostic.hpp"
#include "metacp/spec.hpp"

namespace metacp {

inline constexpr std::string_view kPsvFormatVersion = "1";
inline constexpr std::size_t kDefaultSizeCap = 4u << 20;

struct PsvDocument {
  std::string xml_version = "1.0";
  std::string format_version = std::string(kPsvFormatVersion);
  ProtocolSpec spec;
  /// Where declarations came from; empty for documents built in memory.
  SourceMap sources;
};

struct ParseOptions {
  std::size_t max_bytes = kDefaultSizeCap;
};

struct ParseResult {
  std::optional<PsvDocument> document;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return document.has_value(); }
};

/// Parses a PSV document. Total on arbitrary bytes: malformed input yields
/// at least one Error diagnostic, never an exception. Document type
/// declarations and entity definitions are rejected.
ParseResult parse_psv(std::string_view input, const ParseOptions& options = {});

/// Canonical serialization: fixed element order, alphabetical attributes,
/// two-space indentation, LF line endings, trailing newline.
std::string serialize_psv(const PsvDocument& doc);
std::string serialize_psv(const ProtocolSpec& spec);

/// Exactly the diagnostics parse_psv emits; empty iff parsing succeeds.
std::vector<Diagnostic> validate_schema(std::string_view input, const ParseOptions& options = {});

}  // namespace metacp
