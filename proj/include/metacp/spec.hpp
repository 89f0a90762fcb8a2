#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "metacp/diagnostic.hpp"
#include "metacp/term.hpp"

namespace metacp {

// ---------------------------------------------------------------------------
// Equational theories
// ---------------------------------------------------------------------------

enum class Orientation { Destructor, Unoriented };

struct Equation {
  Term lhs;
  Term rhs;
  Orientation orientation = Orientation::Destructor;

  friend bool operator==(const Equation&, const Equation&) = default;
};

/// Returns a description of the first violated equation invariant, if any.
std::optional<std::string> equation_problem(const Equation& eq);

enum class Bundle {
  SymmetricEncryption,
  AsymmetricEncryption,
  Signing,
  Hashing,
  DiffieHellman,
  Pairing,
};

using BundleSet = std::set<Bundle>;

inline constexpr Bundle kAllBundles[] = {
    Bundle::SymmetricEncryption, Bundle::AsymmetricEncryption, Bundle::Signing,
    Bundle::Hashing,             Bundle::DiffieHellman,        Bundle::Pairing,
};

/// XML spelling: `symmetric-encryption`, `diffie-hellman`, ...
std::string_view bundle_name(Bundle b);
std::optional<Bundle> bundle_from_name(std::string_view name);

struct TheoryBundle {
  Bundle name;
  std::vector<FunctionSymbol> symbols;
  std::vector<Equation> equations;
};

/// The fixed symbol and equation table of a bundle.
const TheoryBundle& theory_bundle(Bundle b);

/// Name of the public generator constant of the Diffie-Hellman bundle.
inline constexpr std::string_view kDhGenerator = "g";
inline constexpr std::string_view kDhExp = "exp";

/// Canonical form modulo the bundles' equations. With DiffieHellman active,
/// nested `exp` chains are flattened to a base plus exponents sorted by the
/// term order and rebuilt left-nested. Everything else is normalized
/// argument-wise only.
Term normalize(const Term& t, const BundleSet& bundles);

/// Splits `exp(...exp(base,e1)...,en)` into base and exponents (in nesting
/// order). Non-exp terms return themselves with no exponents.
std::pair<Term, std::vector<Term>> exp_chain(const Term& t);

// ---------------------------------------------------------------------------
// Protocol structure
// ---------------------------------------------------------------------------

enum class KeyKind { Symmetric, AsymmetricPrivate };

struct LongTermKey {
  Term key;  // fresh-sorted variable
  KeyKind kind = KeyKind::AsymmetricPrivate;
  friend bool operator==(const LongTermKey&, const LongTermKey&) = default;
};

struct Role {
  std::string name;
  std::vector<Term> initial_knowledge;
  std::vector<Term> fresh_values;
  std::vector<LongTermKey> long_term_keys;
  friend bool operator==(const Role&, const Role&) = default;
};

enum class Delivery { Decompose, Atomic };

struct MessageStep {
  int index = 0;
  std::string from;
  std::string to;
  Term payload;
  Delivery delivery = Delivery::Decompose;
  friend bool operator==(const MessageStep&, const MessageStep&) = default;
};

struct SecrecyGoal {
  Term term;
  std::string role;
  friend bool operator==(const SecrecyGoal&, const SecrecyGoal&) = default;
};

struct AgreementGoal {
  std::string claimer;
  std::string peer;
  std::vector<Term> terms;
  friend bool operator==(const AgreementGoal&, const AgreementGoal&) = default;
};

/// Executability is implicit for every protocol and is not stored.
using SecurityGoal = std::variant<SecrecyGoal, AgreementGoal>;

struct ProtocolSpec {
  std::string name;
  BundleSet bundles;
  std::vector<FunctionSymbol> signature;
  std::vector<Equation> equations;
  std::vector<Role> roles;
  std::vector<MessageStep> exchange;
  std::vector<SecurityGoal> goals;

  const Role* find_role(std::string_view role) const;
  /// User symbols followed by bundle symbols.
  std::optional<FunctionSymbol> find_symbol(std::string_view fn) const;
  std::vector<FunctionSymbol> all_symbols() const;
  /// Bundle equations followed by user equations.
  std::vector<Equation> all_equations() const;

  friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

/// Source positions of the declarations a builder was fed, for diagnostics
/// produced after construction. Not part of the spec's value.
struct SourceMap {
  std::vector<std::optional<SourceLocation>> roles;
  std::vector<std::optional<SourceLocation>> steps;
  std::vector<std::optional<SourceLocation>> goals;
  std::vector<std::optional<SourceLocation>> equations;
};

struct BuildResult {
  std::optional<ProtocolSpec> spec;
  std::vector<Diagnostic> diagnostics;
};

/// Assembles a ProtocolSpec and checks every model invariant on build().
/// A spec is only handed out when no Error was found.
class SpecBuilder {
 public:
  explicit SpecBuilder(std::string name);

  SpecBuilder& bundle(Bundle b);
  SpecBuilder& function(FunctionSymbol symbol, std::optional<SourceLocation> at = {});
  SpecBuilder& equation(Equation eq, std::optional<SourceLocation> at = {});
  SpecBuilder& role(Role role, std::optional<SourceLocation> at = {});
  SpecBuilder& message(MessageStep step, std::optional<SourceLocation> at = {});
  SpecBuilder& goal(SecurityGoal goal, std::optional<SourceLocation> at = {});

  BuildResult build() const;
  const SourceMap& source_map() const { return sources_; }

 private:
  ProtocolSpec spec_;
  SourceMap sources_;
  std::vector<std::optional<SourceLocation>> function_sources_;
};

}  // namespace metacp
