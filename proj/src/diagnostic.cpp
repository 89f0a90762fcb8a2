#include "metacp/diagnostic.hpp"

#include <algorithm>

namespace metacp {

Diagnostic make_error(std::string_view code, std::string message,
                      std::optional<SourceLocation> location, std::optional<int> step) {
  return Diagnostic{Severity::Error, std::string(code), std::move(message), location, step, {}};
}

Diagnostic make_warning(std::string_view code, std::string message,
                        std::optional<SourceLocation> location, std::optional<int> step) {
  return Diagnostic{Severity::Warning, std::string(code), std::move(message), location, step, {}};
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

std::string_view to_string(Severity severity) {
  return severity == Severity::Error ? "error" : "warning";
}

std::string format_diagnostic(std::string_view file, const Diagnostic& d) {
  std::string out(file);
  if (d.location) {
    out += ':' + std::to_string(d.location->line) + ':' + std::to_string(d.location->column);
  }
  out += ": ";
  out += to_string(d.severity);
  out += ' ';
  out += d.code;
  out += ' ';
  out += d.message;
  return out;
}

nlohmann::json to_json(const Diagnostic& d) {
  nlohmann::json j{{"severity", to_string(d.severity)}, {"code", d.code}, {"message", d.message}};
  if (d.location) {
    j["line"] = d.location->line;
    j["column"] = d.location->column;
  }
  if (d.step) j["step"] = *d.step;
  if (d.goal) j["goal"] = *d.goal;
  return j;
}

nlohmann::json to_json(const std::vector<Diagnostic>& ds) {
  auto arr = nlohmann::json::array();
  for (const auto& d : ds) arr.push_back(to_json(d));
  return arr;
}

}  // namespace metacp
