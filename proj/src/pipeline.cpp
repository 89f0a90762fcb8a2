#include "metacp/pipeline.hpp"

namespace metacp {

namespace {

void locate(std::vector<Diagnostic>& diags, const SourceMap& sources) {
  auto at = [](const std::vector<std::optional<SourceLocation>>& v, int index) -> std::optional<SourceLocation> {
    if (index < 1 || static_cast<std::size_t>(index) > v.size()) return std::nullopt;
    return v[static_cast<std::size_t>(index) - 1];
  };
  for (auto& d : diags) {
    if (d.location) continue;
    if (d.step) d.location = at(sources.steps, *d.step);
    else if (d.goal) d.location = at(sources.goals, *d.goal);
  }
}

}  // namespace

ValidationResult validate_psv(std::string_view input, const ParseOptions& options) {
  ValidationResult out;
  auto parsed = parse_psv(input, options);
  out.diagnostics = std::move(parsed.diagnostics);
  if (!parsed.document) return out;
  out.document = std::move(parsed.document);
  const auto& spec = out.document->spec;

  auto warnings = equation_warnings(spec);
  out.diagnostics.insert(out.diagnostics.end(), warnings.begin(), warnings.end());
  out.report = check_executability(spec);
  auto violations = to_diagnostics(*out.report);
  out.diagnostics.insert(out.diagnostics.end(), violations.begin(), violations.end());
  auto goals = check_goals(spec, *out.report);
  out.diagnostics.insert(out.diagnostics.end(), goals.begin(), goals.end());
  locate(out.diagnostics, out.document->sources);
  return out;
}

CompileOutcome compile_psv(std::string_view input, const BackendPlugin& backend, std::optional<Delivery> delivery,
                           const ParseOptions& options) {
  CompileOutcome out;
  auto validation = validate_psv(input, options);
  out.diagnostics = std::move(validation.diagnostics);
  if (!validation.document || has_errors(out.diagnostics)) return out;
  ProtocolSpec spec = validation.document->spec;
  if (delivery)
    for (auto& m : spec.exchange) m.delivery = *delivery;
  auto result = backend.compile(spec);
  locate(result.diagnostics, validation.document->sources);
  out.diagnostics.insert(out.diagnostics.end(), result.diagnostics.begin(), result.diagnostics.end());
  if (!has_errors(result.diagnostics)) out.text = std::move(result.text);
  return out;
}

}  // namespace metacp
