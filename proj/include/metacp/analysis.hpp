#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metacp/diagnostic.hpp"
#include "metacp/spec.hpp"

namespace metacp {

using TermSet = std::set<Term>;

/// Signature, destructor rules and active bundles of a protocol, prepared
/// for knowledge computations.
class TheoryContext {
 public:
  TheoryContext() = default;
  explicit TheoryContext(const ProtocolSpec& spec);
  /// A bare context for the given bundles (no user symbols).
  explicit TheoryContext(BundleSet bundles);

  const BundleSet& bundles() const { return bundles_; }
  Term normalize(const Term& t) const { return metacp::normalize(t, bundles_); }

  struct Destructor {
    Equation equation;
    std::size_t main_argument = 0;  // the argument matched against known terms
  };
  const std::vector<Destructor>& destructors() const { return destructors_; }
  /// Unoriented user equations, ignored by derivability.
  const std::vector<Equation>& ignored_equations() const { return ignored_; }

 private:
  void add_equation(const Equation& eq, bool user);

  BundleSet bundles_;
  std::vector<Destructor> destructors_;
  std::vector<Equation> ignored_;
};

/// Least superset of `known` closed under tuple projection and destructor
/// application. Input terms are normalized first.
TermSet saturate(const TermSet& known, const TheoryContext& ctx);

/// True iff `goal` can be composed from the saturated set `known` using
/// public symbols, tuples and exp-chain extension.
bool derivable(const TermSet& known, const Term& goal, const TheoryContext& ctx);

/// The first smallest subterm of `goal` (pre-order descent) that is not
/// derivable, or nullopt when `goal` is derivable.
std::optional<Term> missing_subterm(const TermSet& known, const Term& goal, const TheoryContext& ctx);

/// Syntactic matching of `pattern` against `t`, extending `binding`.
bool match(const Term& pattern, const Term& t, Binding& binding);

struct KnowledgeState {
  std::string role;
  TermSet known;
  int at_step = 0;
  friend bool operator==(const KnowledgeState&, const KnowledgeState&) = default;
};

struct Violation {
  int step = 0;
  std::string role;
  std::string code;
  std::optional<Term> missing;
  std::string explanation;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ExecutabilityReport {
  bool ok = true;
  std::vector<Violation> violations;
  std::map<std::string, KnowledgeState> final_knowledge;
  friend bool operator==(const ExecutabilityReport&, const ExecutabilityReport&) = default;
};

/// Knowledge of every role before the first message (index 0) and after
/// each message (index i), plus the violations found along the way.
struct KnowledgeTrace {
  std::map<std::string, std::vector<KnowledgeState>> states;
  std::vector<Violation> violations;
};

/// Knowledge a role holds before any message is exchanged, unsaturated.
TermSet initial_knowledge(const ProtocolSpec& spec, const Role& role);

KnowledgeTrace trace_knowledge(const ProtocolSpec& spec);
ExecutabilityReport check_executability(const ProtocolSpec& spec);

/// Well-formedness of goals against the final knowledge in `report`.
std::vector<Diagnostic> check_goals(const ProtocolSpec& spec, const ExecutabilityReport& report);

/// Warnings for user equations that derivability ignores.
std::vector<Diagnostic> equation_warnings(const ProtocolSpec& spec);

std::vector<Diagnostic> to_diagnostics(const ExecutabilityReport& report);

nlohmann::json to_json(const ExecutabilityReport& report);

}  // namespace metacp
