#include "metacp/spec.hpp"

#include <algorithm>
#include <array>
#include <map>

namespace metacp {

namespace {

FunctionSymbol sym(std::string name, std::size_t arity) {
  return FunctionSymbol{std::move(name), arity, Visibility::Public};
}

Term v(const char* name) { return Term::var(name); }

TheoryBundle make_bundle(Bundle b) {
  TheoryBundle out{b, {}, {}};
  switch (b) {
    case Bundle::SymmetricEncryption: {
      auto senc = sym("senc", 2), sdec = sym("sdec", 2);
      out.symbols = {senc, sdec};
      out.equations.push_back(
          {Term::apply(sdec, {Term::apply(senc, {v("m"), v("k")}), v("k")}), v("m"),
           Orientation::Destructor});
      break;
    }
    case Bundle::AsymmetricEncryption: {
      auto aenc = sym("aenc", 2), adec = sym("adec", 2), pk = sym("pk", 1);
      out.symbols = {aenc, adec, pk};
      out.equations.push_back(
          {Term::apply(adec, {Term::apply(aenc, {v("m"), Term::apply(pk, {v("sk")})}), v("sk")}),
           v("m"), Orientation::Destructor});
      break;
    }
    case Bundle::Signing: {
      auto sign = sym("sign", 2), verify = sym("verify", 3), pk = sym("pk", 1), tru = sym("true", 0);
      out.symbols = {sign, verify, pk, tru};
      out.equations.push_back({Term::apply(verify, {Term::apply(sign, {v("m"), v("sk")}), v("m"),
                                                    Term::apply(pk, {v("sk")})}),
                               Term::apply(tru, {}), Orientation::Destructor});
      break;
    }
    case Bundle::Hashing:
      out.symbols = {sym("h", 1)};
      break;
    case Bundle::DiffieHellman: {
      auto exp = sym(std::string(kDhExp), 2);
      out.symbols = {exp};
      out.equations.push_back({Term::apply(exp, {Term::apply(exp, {v("b"), v("x")}), v("y")}),
                               Term::apply(exp, {Term::apply(exp, {v("b"), v("y")}), v("x")}),
                               Orientation::Unoriented});
      break;
    }
    case Bundle::Pairing:
      break;
  }
  return out;
}

bool is_constant_like(const Term& t) {
  return t.is_const() || (t.is_apply() && t.args().empty());
}

}  // namespace

std::optional<std::string> equation_problem(const Equation& eq) {
  auto lhs_vars = variables(eq.lhs);
  for (const auto& x : variables(eq.rhs)) {
    if (std::find(lhs_vars.begin(), lhs_vars.end(), x) == lhs_vars.end())
      return "variable " + x.str() + " of the right-hand side does not occur on the left";
  }
  if (eq.orientation == Orientation::Destructor) {
    if (!eq.lhs.is_apply()) return "destructor left-hand side must be a function application";
    const auto& root = eq.lhs.name();
    for (const auto& s : subterms(eq.rhs)) {
      if (s.is_apply() && s.name() == root)
        return "destructor symbol " + root + " occurs on the right-hand side";
    }
    bool rhs_is_lhs_var = eq.rhs.is_var() &&
                          std::find(lhs_vars.begin(), lhs_vars.end(), eq.rhs) != lhs_vars.end();
    if (!rhs_is_lhs_var && !is_constant_like(eq.rhs))
      return "destructor right-hand side must be a variable of the left-hand side or a constant";
  }
  return std::nullopt;
}

std::string_view bundle_name(Bundle b) {
  switch (b) {
    case Bundle::SymmetricEncryption: return "symmetric-encryption";
    case Bundle::AsymmetricEncryption: return "asymmetric-encryption";
    case Bundle::Signing: return "signing";
    case Bundle::Hashing: return "hashing";
    case Bundle::DiffieHellman: return "diffie-hellman";
    case Bundle::Pairing: return "pairing";
  }
  return "";
}

std::optional<Bundle> bundle_from_name(std::string_view name) {
  for (Bundle b : kAllBundles)
    if (bundle_name(b) == name) return b;
  return std::nullopt;
}

const TheoryBundle& theory_bundle(Bundle b) {
  static const std::array<TheoryBundle, 6> table = {
      make_bundle(Bundle::SymmetricEncryption), make_bundle(Bundle::AsymmetricEncryption),
      make_bundle(Bundle::Signing),             make_bundle(Bundle::Hashing),
      make_bundle(Bundle::DiffieHellman),       make_bundle(Bundle::Pairing),
  };
  return table[static_cast<std::size_t>(b)];
}

std::pair<Term, std::vector<Term>> exp_chain(const Term& t) {
  std::vector<Term> exps;
  Term base = t;
  while (base.is_apply() && base.name() == kDhExp && base.args().size() == 2) {
    exps.push_back(base.args()[1]);
    base = base.args()[0];
  }
  std::reverse(exps.begin(), exps.end());
  return {base, exps};
}

Term normalize(const Term& t, const BundleSet& bundles) {
  if (!bundles.contains(Bundle::DiffieHellman)) return t;
  return transform(t, [](const Term& node) {
    if (!node.is_apply() || node.name() != kDhExp || node.args().size() != 2) return node;
    // Children are already canonical, so the base of a nested chain is too.
    auto [base, exps] = exp_chain(node);
    if (exps.size() < 2) return node;
    if (std::is_sorted(exps.begin(), exps.end())) return node;
    std::sort(exps.begin(), exps.end());
    Term out = base;
    for (auto& e : exps) out = Term::apply(node.symbol(), {out, e});
    return out;
  });
}

const Role* ProtocolSpec::find_role(std::string_view role) const {
  for (const auto& r : roles)
    if (r.name == role) return &r;
  return nullptr;
}

std::optional<FunctionSymbol> ProtocolSpec::find_symbol(std::string_view fn) const {
  for (const auto& s : signature)
    if (s.name == fn) return s;
  for (Bundle b : bundles)
    for (const auto& s : theory_bundle(b).symbols)
      if (s.name == fn) return s;
  return std::nullopt;
}

std::vector<FunctionSymbol> ProtocolSpec::all_symbols() const {
  std::vector<FunctionSymbol> out = signature;
  for (Bundle b : bundles)
    for (const auto& s : theory_bundle(b).symbols)
      if (std::none_of(out.begin(), out.end(), [&](auto& o) { return o.name == s.name; }))
        out.push_back(s);
  return out;
}

std::vector<Equation> ProtocolSpec::all_equations() const {
  std::vector<Equation> out;
  for (Bundle b : bundles)
    for (const auto& e : theory_bundle(b).equations) out.push_back(e);
  out.insert(out.end(), equations.begin(), equations.end());
  return out;
}

// ---------------------------------------------------------------------------
// SpecBuilder
// ---------------------------------------------------------------------------

SpecBuilder::SpecBuilder(std::string name) { spec_.name = std::move(name); }

SpecBuilder& SpecBuilder::bundle(Bundle b) {
  spec_.bundles.insert(b);
  return *this;
}

SpecBuilder& SpecBuilder::function(FunctionSymbol symbol, std::optional<SourceLocation> at) {
  spec_.signature.push_back(std::move(symbol));
  function_sources_.push_back(at);
  return *this;
}

SpecBuilder& SpecBuilder::equation(Equation eq, std::optional<SourceLocation> at) {
  spec_.equations.push_back(std::move(eq));
  sources_.equations.push_back(at);
  return *this;
}

SpecBuilder& SpecBuilder::role(Role role, std::optional<SourceLocation> at) {
  spec_.roles.push_back(std::move(role));
  sources_.roles.push_back(at);
  return *this;
}

SpecBuilder& SpecBuilder::message(MessageStep step, std::optional<SourceLocation> at) {
  spec_.exchange.push_back(std::move(step));
  sources_.steps.push_back(at);
  return *this;
}

SpecBuilder& SpecBuilder::goal(SecurityGoal goal, std::optional<SourceLocation> at) {
  spec_.goals.push_back(std::move(goal));
  sources_.goals.push_back(at);
  return *this;
}

namespace {

class Checker {
 public:
  Checker(const ProtocolSpec& spec, std::vector<Diagnostic>& out) : spec_(spec), out_(out) {}

  void error(std::string_view code, std::string msg, std::optional<SourceLocation> at,
             std::optional<int> step = std::nullopt) {
    out_.push_back(make_error(code, std::move(msg), at, step));
  }

  // Declared symbols, sort consistency of atoms, identifier shape.
  void check_term(const Term& t, std::optional<SourceLocation> at, std::optional<int> step) {
    for (const auto& s : subterms(t)) {
      switch (s.kind()) {
        case Term::Kind::Var:
        case Term::Kind::Const: {
          if (!is_identifier(s.name())) {
            error(codes::Identifier, "invalid identifier '" + s.name() + "'", at, step);
            break;
          }
          auto& seen = s.is_var() ? var_sorts_ : const_sorts_;
          auto [it, fresh] = seen.emplace(s.name(), s.sort());
          if (!fresh && it->second != s.sort()) {
            error(codes::SortError,
                  std::string(s.is_var() ? "variable " : "constant ") + s.name() +
                      " used with sort " + std::string(to_string(s.sort())) + " but earlier with sort " +
                      std::string(to_string(it->second)),
                  at, step);
          }
          break;
        }
        case Term::Kind::Apply: {
          auto decl = spec_.find_symbol(s.name());
          if (!decl) {
            error(codes::Reference, "undeclared function '" + s.name() + "'", at, step);
          } else if (decl->arity != s.args().size()) {
            error(codes::SortError,
                  "symbol '" + s.name() + "' expects arity " + std::to_string(decl->arity) + ", got " +
                      std::to_string(s.args().size()),
                  at, step);
          } else if (decl->visibility != s.symbol().visibility) {
            error(codes::SortError, "symbol '" + s.name() + "' used with the wrong visibility", at, step);
          }
          break;
        }
        case Term::Kind::Tuple:
          break;
      }
    }
  }

 private:
  const ProtocolSpec& spec_;
  std::vector<Diagnostic>& out_;
  std::map<std::string, Sort> var_sorts_;
  std::map<std::string, Sort> const_sorts_;
};

}  // namespace

BuildResult SpecBuilder::build() const {
  std::vector<Diagnostic> diags;
  Checker check(spec_, diags);
  auto at = [](const auto& v, std::size_t i) -> std::optional<SourceLocation> {
    return i < v.size() ? v[i] : std::nullopt;
  };

  if (!is_identifier(spec_.name))
    check.error(codes::Identifier, "protocol name '" + spec_.name + "' is not an identifier", {});

  // Signature.
  std::set<std::string> bundle_symbols;
  for (Bundle b : spec_.bundles)
    for (const auto& s : theory_bundle(b).symbols) bundle_symbols.insert(s.name);
  std::set<std::string> declared;
  for (std::size_t i = 0; i < spec_.signature.size(); ++i) {
    const auto& f = spec_.signature[i];
    auto loc = at(function_sources_, i);
    if (!is_identifier(f.name)) {
      check.error(codes::Identifier, "function name '" + f.name + "' is not an identifier", loc);
    } else if (bundle_symbols.contains(f.name)) {
      check.error(codes::DuplicateSymbol, "function '" + f.name + "' redeclares a bundle symbol", loc);
    } else if (!declared.insert(f.name).second) {
      check.error(codes::DuplicateSymbol, "duplicate function '" + f.name + "'", loc);
    }
  }

  for (std::size_t i = 0; i < spec_.equations.size(); ++i) {
    const auto& eq = spec_.equations[i];
    auto loc = at(sources_.equations, i);
    std::size_t before = diags.size();
    check.check_term(eq.lhs, loc, {});
    check.check_term(eq.rhs, loc, {});
    if (diags.size() == before) {
      if (auto problem = equation_problem(eq)) check.error(codes::EquationShape, *problem, loc);
    }
  }

  // Roles.
  if (spec_.roles.empty()) check.error(codes::EmptyProtocol, "a protocol needs at least one role", {});
  std::set<std::string> role_names;
  std::map<std::string, std::string> fresh_owner;  // fresh-sorted name -> owning role
  for (const auto& r : spec_.roles) {
    for (const auto& f : r.fresh_values)
      if (f.is_var()) fresh_owner.emplace(f.name(), r.name);
    for (const auto& k : r.long_term_keys)
      if (k.key.is_var()) fresh_owner.emplace(k.key.name(), r.name);
  }
  for (std::size_t i = 0; i < spec_.roles.size(); ++i) {
    const auto& r = spec_.roles[i];
    auto loc = at(sources_.roles, i);
    if (!is_identifier(r.name)) {
      check.error(codes::Identifier, "role name '" + r.name + "' is not an identifier", loc);
    } else if (!role_names.insert(r.name).second) {
      check.error(codes::DuplicateRole, "duplicate role '" + r.name + "'", loc);
    }
    std::set<Term> known_vars;
    for (const auto& t : r.initial_knowledge) {
      check.check_term(t, loc, {});
      for (const auto& x : variables(t)) {
        known_vars.insert(x);
        if (x.sort() == Sort::Fresh) {
          auto owner = fresh_owner.find(x.name());
          if (owner != fresh_owner.end() && owner->second != r.name) {
            check.error(codes::FreshValue,
                        "role " + r.name + " initially knows " + x.str() + ", a fresh value of role " +
                            owner->second,
                        loc);
          }
        }
      }
    }
    std::set<Term> fresh;
    for (const auto& f : r.fresh_values) {
      check.check_term(f, loc, {});
      if (!f.is_var() || f.sort() != Sort::Fresh) {
        check.error(codes::SortError, "fresh value " + f.str() + " must be a fresh-sorted variable", loc);
        continue;
      }
      if (!fresh.insert(f).second)
        check.error(codes::FreshValue, "fresh value " + f.name() + " declared twice in role " + r.name, loc);
      if (known_vars.contains(f))
        check.error(codes::FreshValue,
                    "fresh value " + f.name() + " also appears in the initial knowledge of role " + r.name,
                    loc);
    }
    for (const auto& k : r.long_term_keys) {
      check.check_term(k.key, loc, {});
      if (!k.key.is_var() || k.key.sort() != Sort::Fresh)
        check.error(codes::SortError, "long-term key " + k.key.str() + " must be a fresh-sorted variable",
                    loc);
      else if (fresh.contains(k.key))
        check.error(codes::FreshValue, "long-term key " + k.key.name() + " is also a fresh value", loc);
    }
  }

  // Exchange.
  for (std::size_t i = 0; i < spec_.exchange.size(); ++i) {
    const auto& m = spec_.exchange[i];
    auto loc = at(sources_.steps, i);
    const int expected = static_cast<int>(i) + 1;
    if (m.index != expected)
      check.error(codes::MessageStep,
                  "message index " + std::to_string(m.index) + " out of sequence, expected " +
                      std::to_string(expected),
                  loc, m.index);
    if (!role_names.contains(m.from))
      check.error(codes::Reference, "undeclared role '" + m.from + "'", loc, m.index);
    if (!role_names.contains(m.to))
      check.error(codes::Reference, "undeclared role '" + m.to + "'", loc, m.index);
    if (m.from == m.to)
      check.error(codes::MessageStep, "message " + std::to_string(m.index) + " is sent by " + m.from +
                                          " to itself",
                  loc, m.index);
    check.check_term(m.payload, loc, m.index);
  }

  // Goals.
  for (std::size_t i = 0; i < spec_.goals.size(); ++i) {
    auto loc = at(sources_.goals, i);
    const std::size_t first = diags.size();
    std::visit(
        [&](const auto& g) {
          using G = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<G, SecrecyGoal>) {
            if (!role_names.contains(g.role))
              check.error(codes::Reference, "undeclared role '" + g.role + "'", loc);
            check.check_term(g.term, loc, {});
          } else {
            for (const auto* who : {&g.claimer, &g.peer})
              if (!role_names.contains(*who))
                check.error(codes::Reference, "undeclared role '" + *who + "'", loc);
            if (g.claimer == g.peer)
              check.error(codes::Reference, "agreement claimer and peer are both " + g.claimer, loc);
            if (g.terms.empty()) check.error(codes::Schema, "agreement needs at least one term", loc);
            for (const auto& t : g.terms) check.check_term(t, loc, {});
          }
        },
        spec_.goals[i]);
    for (std::size_t d = first; d < diags.size(); ++d) diags[d].goal = static_cast<int>(i) + 1;
  }

  BuildResult result;
  result.diagnostics = std::move(diags);
  if (!has_errors(result.diagnostics)) result.spec = spec_;
  return result;
}

}  // namespace metacp
