#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metacp/analysis.hpp"
#include "metacp/diagnostic.hpp"
#include "metacp/plugin.hpp"
#include "metacp/psv_xml.hpp"

namespace metacp {

struct ValidationResult {
  std::optional<PsvDocument> document;
  std::optional<ExecutabilityReport> report;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return document.has_value() && !has_errors(diagnostics); }
};

/// Schema validation, executability and goal checks. Step and goal
/// diagnostics carry the location of the element they refer to.
ValidationResult validate_psv(std::string_view input, const ParseOptions& options = {});

struct CompileOutcome {
  std::optional<std::string> text;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return text.has_value(); }
};

/// Validation followed by the backend. No output is produced when
/// validation reports an error. `delivery` overrides every message.
CompileOutcome compile_psv(std::string_view input, const BackendPlugin& backend,
                           std::optional<Delivery> delivery = std::nullopt,
                           const ParseOptions& options = {});

}  // namespace metacp
