#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace metacp {

enum class Severity { Error, Warning };

struct SourceLocation {
  int line = 0;
  int column = 0;
  friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

/// Stable diagnostic codes. The registry is documented in docs/diagnostics.md;
/// codes are never renumbered.
namespace codes {
inline constexpr std::string_view XmlSyntax = "PSV001";
inline constexpr std::string_view Schema = "PSV002";
inline constexpr std::string_view Reference = "PSV003";
inline constexpr std::string_view SortError = "PSV004";
inline constexpr std::string_view Version = "PSV005";
inline constexpr std::string_view DuplicateRole = "PSV006";
inline constexpr std::string_view DuplicateSymbol = "PSV007";
inline constexpr std::string_view Identifier = "PSV008";
inline constexpr std::string_view FreshValue = "PSV009";
inline constexpr std::string_view MessageStep = "PSV010";
inline constexpr std::string_view EquationShape = "PSV011";
inline constexpr std::string_view SizeLimit = "PSV012";
inline constexpr std::string_view Dtd = "PSV013";
inline constexpr std::string_view EmptyProtocol = "PSV014";

inline constexpr std::string_view NotDerivable = "EXE001";
inline constexpr std::string_view FreshReuse = "EXE002";
inline constexpr std::string_view AtomicUndecomposable = "EXE003";

inline constexpr std::string_view GoalUnknown = "GOAL001";
inline constexpr std::string_view EquationIgnored = "ANA001";

inline constexpr std::string_view Unsupported = "TAM001";
inline constexpr std::string_view Unbindable = "TAM002";
inline constexpr std::string_view Internal = "TAM003";
}  // namespace codes

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  std::optional<SourceLocation> location;
  std::optional<int> step;
  std::optional<int> goal;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

Diagnostic make_error(std::string_view code, std::string message,
                      std::optional<SourceLocation> location = std::nullopt,
                      std::optional<int> step = std::nullopt);
Diagnostic make_warning(std::string_view code, std::string message,
                        std::optional<SourceLocation> location = std::nullopt,
                        std::optional<int> step = std::nullopt);

bool has_errors(const std::vector<Diagnostic>& diagnostics);

std::string_view to_string(Severity severity);

/// `file:line:col: severity code message`; the location part is dropped
/// when unknown.
std::string format_diagnostic(std::string_view file, const Diagnostic& d);

nlohmann::json to_json(const Diagnostic& d);
nlohmann::json to_json(const std::vector<Diagnostic>& ds);

}  // namespace metacp
