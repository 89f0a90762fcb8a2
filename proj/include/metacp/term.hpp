#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metacp {

/// Message sort. Fresh and Public are subsorts of Message.
enum class Sort { Message, Fresh, Public };

enum class Visibility { Public, Private };

std::string_view to_string(Sort sort);

/// True when a term of sort `actual` may stand where `expected` is required.
bool sort_accepts(Sort expected, Sort actual);

bool is_identifier(std::string_view name);

struct FunctionSymbol {
  std::string name;
  std::size_t arity = 0;
  Visibility visibility = Visibility::Public;

  friend bool operator==(const FunctionSymbol&, const FunctionSymbol&) = default;
};

class SortMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable symbolic message term.
///
/// A term is a variable, a constant, an application of a function symbol or
/// a tuple of at least two items. Nodes are shared and never mutated, so
/// copies are cheap and terms may be handed across threads freely.
///
/// Every node caches its canonical printed form. Equality and ordering are
/// defined on that form, which makes the order total, deterministic and
/// platform independent:
///
///   msg var `x`, fresh var `~x`, public var `$x`,
///   public const `'c'`, message const `"c"`,
///   application `f(a,b)` (nullary `f()`), tuple `<a,b>`.
class Term {
 public:
  enum class Kind { Var, Const, Apply, Tuple };

  static Term var(std::string name, Sort sort = Sort::Message);
  static Term constant(std::string name, Sort sort = Sort::Public);
  /// Throws std::invalid_argument when args.size() != symbol.arity.
  static Term apply(FunctionSymbol symbol, std::vector<Term> args);
  /// Throws std::invalid_argument for fewer than two items.
  static Term tuple(std::vector<Term> items);

  Kind kind() const;
  bool is_var() const { return kind() == Kind::Var; }
  bool is_const() const { return kind() == Kind::Const; }
  bool is_apply() const { return kind() == Kind::Apply; }
  bool is_tuple() const { return kind() == Kind::Tuple; }
  bool is_atom() const { return is_var() || is_const(); }

  /// Name of a variable or constant, or the applied symbol's name.
  const std::string& name() const;
  /// Apply and Tuple terms have sort Message.
  Sort sort() const;
  /// Only meaningful for Apply.
  const FunctionSymbol& symbol() const;
  /// Arguments of an Apply or items of a Tuple; empty for atoms.
  const std::vector<Term>& args() const;

  const std::string& str() const;
  std::size_t size() const;
  std::size_t depth() const;
  std::size_t hash() const;

  friend bool operator==(const Term& a, const Term& b);
  friend std::strong_ordering operator<=>(const Term& a, const Term& b);

 private:
  struct Node;
  explicit Term(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct TermHash {
  std::size_t operator()(const Term& t) const { return t.hash(); }
};

using Binding = std::map<Term, Term>;

/// `t` and all of its transitive subterms in pre-order, without duplicates.
std::vector<Term> subterms(const Term& t);

/// Variables of `t` in pre-order, without duplicates.
std::vector<Term> variables(const Term& t);

bool occurs(const Term& needle, const Term& haystack);

/// Simultaneous replacement of variables. Keys of `binding` must be
/// variables; throws SortMismatch when a bound term's sort is not accepted
/// by the variable's sort.
Term substitute(const Term& t, const Binding& binding);

/// Rebuilds `t` with `fn` applied bottom-up to every node.
Term transform(const Term& t, const std::function<Term(const Term&)>& fn);

}  // namespace metacp

template <>
struct std::hash<metacp::Term> {
  std::size_t operator()(const metacp::Term& t) const { return t.hash(); }
};
