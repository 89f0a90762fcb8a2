#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "metacp/diagnostic.hpp"
#include "metacp/spec.hpp"

namespace metacp {

/// A multiset-rewriting fact with already rendered arguments.
struct Fact {
  std::string name;
  bool persistent = false;
  std::vector<std::string> args;
  friend bool operator==(const Fact&, const Fact&) = default;
};

struct TamarinRule {
  std::string name;
  std::vector<Fact> premises;
  std::vector<Fact> actions;
  std::vector<Fact> conclusions;
  friend bool operator==(const TamarinRule&, const TamarinRule&) = default;
};

enum class LemmaKind { ExistsTrace, AllTraces };

struct Lemma {
  std::string name;
  LemmaKind kind = LemmaKind::AllTraces;
  std::string formula;
  friend bool operator==(const Lemma&, const Lemma&) = default;
};

struct Restriction {
  std::string name;
  std::string formula;
  friend bool operator==(const Restriction&, const Restriction&) = default;
};

struct TamarinTheory {
  std::string name;
  std::vector<std::string> builtins;
  std::vector<std::string> function_decls;
  std::vector<std::string> equation_decls;
  std::vector<TamarinRule> rules;
  std::vector<Restriction> restrictions;
  std::vector<Lemma> lemmas;
  /// Nullary function names, needed to tell constants from variables when
  /// scanning rendered terms.
  std::set<std::string> nullary_functions;
  friend bool operator==(const TamarinTheory&, const TamarinTheory&) = default;
};

struct CompileOptions {
  /// Forces every message to the given delivery mode.
  std::optional<Delivery> delivery;
};

struct TamarinCompileResult {
  std::optional<TamarinTheory> theory;
  std::vector<Diagnostic> diagnostics;
};

/// Compiles an executable protocol into a theory: PKI registration rules,
/// one init rule per role, one rule per (role, message) pair, goal labels
/// and lemmas. Fails with diagnostics when the protocol is not executable
/// or uses a construct the target cannot express.
TamarinCompileResult compile_tamarin(const ProtocolSpec& spec, const CompileOptions& options = {});

/// Executability lemma (when the exchange is nonempty) followed by one lemma
/// per goal, in goal order.
std::vector<Lemma> gen_lemmas(const ProtocolSpec& spec);

/// Deterministic `.spthy` text.
std::string render_theory(const TamarinTheory& theory);

std::string render_fact(const Fact& fact);

/// Variables (with their `~`/`$` prefix) occurring in rendered fact
/// arguments. Quoted constants, function names and `nullary` names are
/// skipped.
std::set<std::string> fact_variables(const std::vector<Fact>& facts,
                                     const std::set<std::string>& nullary = {});

/// Variables of actions and conclusions that no premise binds. Public
/// (`$`) variables are exempt: they range over public names.
std::set<std::string> unbound_variables(const TamarinRule& rule,
                                        const std::set<std::string>& nullary = {});

}  // namespace metacp
