#include "metacp/analysis.hpp"

#include <algorithm>
#include <unordered_map>

namespace metacp {

// ---------------------------------------------------------------------------
// TheoryContext
// ---------------------------------------------------------------------------

TheoryContext::TheoryContext(BundleSet bundles) : bundles_(std::move(bundles)) {
  for (Bundle b : bundles_)
    for (const auto& eq : theory_bundle(b).equations) add_equation(eq, false);
}

TheoryContext::TheoryContext(const ProtocolSpec& spec) : TheoryContext(spec.bundles) {
  for (const auto& eq : spec.equations) add_equation(eq, true);
}

void TheoryContext::add_equation(const Equation& eq, bool user) {
  if (eq.orientation == Orientation::Unoriented) {
    // The bundle's DH axiom is realised by normalization.
    if (user) ignored_.push_back(eq);
    return;
  }
  if (!eq.lhs.is_apply()) return;
  const auto& args = eq.lhs.args();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (!args[i].is_var()) {
      destructors_.push_back(Destructor{eq, i});
      return;
    }
  }
  // All-variable left-hand sides only restate composition; nothing to open.
}

// ---------------------------------------------------------------------------
// Matching, saturation, derivability
// ---------------------------------------------------------------------------

bool match(const Term& pattern, const Term& t, Binding& binding) {
  switch (pattern.kind()) {
    case Term::Kind::Var: {
      auto [it, inserted] = binding.emplace(pattern, t);
      return inserted || it->second == t;
    }
    case Term::Kind::Const:
      return pattern == t;
    case Term::Kind::Apply:
      if (!t.is_apply() || t.name() != pattern.name() || t.args().size() != pattern.args().size())
        return false;
      break;
    case Term::Kind::Tuple:
      if (!t.is_tuple() || t.args().size() != pattern.args().size()) return false;
      break;
  }
  for (std::size_t i = 0; i < pattern.args().size(); ++i)
    if (!match(pattern.args()[i], t.args()[i], binding)) return false;
  return true;
}

namespace {

bool is_exp(const Term& t, const TheoryContext& ctx) {
  return ctx.bundles().contains(Bundle::DiffieHellman) && t.is_apply() && t.name() == kDhExp &&
         t.args().size() == 2;
}

/// Removes `part` from `whole` (both sorted); false if `part` is not a
/// sub-multiset.
bool multiset_minus(const std::vector<Term>& whole, std::vector<Term> part, std::vector<Term>& rest) {
  std::sort(part.begin(), part.end());
  rest.clear();
  std::size_t j = 0;
  for (const auto& w : whole) {
    if (j < part.size() && part[j] == w) {
      ++j;
    } else {
      rest.push_back(w);
    }
  }
  return j == part.size();
}

class Composer {
 public:
  Composer(const TermSet& known, const TheoryContext& ctx) : known_(known), ctx_(ctx) {}

  bool operator()(const Term& t) {
    if (known_.contains(t)) return true;
    if (auto it = memo_.find(t); it != memo_.end()) return it->second;
    memo_.emplace(t, false);  // cycles cannot occur, but keep lookups total
    bool result = compute(t);
    memo_[t] = result;
    return result;
  }

 private:
  bool compute(const Term& t) {
    switch (t.kind()) {
      case Term::Kind::Var:
      case Term::Kind::Const:
        return false;
      case Term::Kind::Tuple:
        return std::all_of(t.args().begin(), t.args().end(), [&](const Term& a) { return (*this)(a); });
      case Term::Kind::Apply:
        break;
    }
    if (t.symbol().visibility != Visibility::Public) return false;
    if (is_exp(t, ctx_) && exp_from_known(t)) return true;
    return std::all_of(t.args().begin(), t.args().end(), [&](const Term& a) { return (*this)(a); });
  }

  // Extends a known exp chain with the same base by derivable exponents.
  bool exp_from_known(const Term& t) {
    auto [base, exps] = exp_chain(t);
    std::sort(exps.begin(), exps.end());
    std::vector<Term> rest;
    for (const auto& k : known_) {
      if (!is_exp(k, ctx_)) continue;
      auto [kbase, kexps] = exp_chain(k);
      if (!(kbase == base) || kexps.size() >= exps.size()) continue;
      if (!multiset_minus(exps, kexps, rest)) continue;
      if (std::all_of(rest.begin(), rest.end(), [&](const Term& e) { return (*this)(e); })) return true;
    }
    if ((*this)(base) &&
        std::all_of(exps.begin(), exps.end(), [&](const Term& e) { return (*this)(e); }))
      return true;
    return false;
  }

  const TermSet& known_;
  const TheoryContext& ctx_;
  std::unordered_map<Term, bool, TermHash> memo_;
};

}  // namespace

bool derivable(const TermSet& known, const Term& goal, const TheoryContext& ctx) {
  Composer compose(known, ctx);
  return compose(ctx.normalize(goal));
}

std::optional<Term> missing_subterm(const TermSet& known, const Term& goal, const TheoryContext& ctx) {
  Composer compose(known, ctx);
  Term t = ctx.normalize(goal);
  if (compose(t)) return std::nullopt;
  for (;;) {
    if (t.is_apply() && t.symbol().visibility != Visibility::Public) return t;
    auto it = std::find_if(t.args().begin(), t.args().end(), [&](const Term& a) { return !compose(a); });
    if (it == t.args().end()) return t;
    t = *it;
  }
}

TermSet saturate(const TermSet& known, const TheoryContext& ctx) {
  TermSet out;
  for (const auto& t : known) out.insert(ctx.normalize(t));
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Term> snapshot(out.begin(), out.end());
    for (const auto& t : snapshot) {
      if (t.is_tuple()) {
        for (const auto& item : t.args()) changed = out.insert(item).second || changed;
      }
      for (const auto& d : ctx.destructors()) {
        const auto& lhs = d.equation.lhs;
        Binding binding;
        if (!match(lhs.args()[d.main_argument], t, binding)) continue;
        bool sides_ok = true;
        for (std::size_t j = 0; j < lhs.args().size() && sides_ok; ++j) {
          if (j == d.main_argument) continue;
          const auto& side = lhs.args()[j];
          auto vars = variables(side);
          bool bound = std::all_of(vars.begin(), vars.end(), [&](const Term& x) { return binding.contains(x); });
          if (!bound) {
            // A lone free variable accepts any derivable term; anything
            // richer would need a search we do not attempt.
            sides_ok = side.is_var();
            continue;
          }
          sides_ok = derivable(out, substitute(side, binding), ctx);
        }
        if (!sides_ok) continue;
        auto rhs_vars = variables(d.equation.rhs);
        if (!std::all_of(rhs_vars.begin(), rhs_vars.end(), [&](const Term& x) { return binding.contains(x); }))
          continue;
        changed = out.insert(ctx.normalize(substitute(d.equation.rhs, binding))).second || changed;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Executability
// ---------------------------------------------------------------------------

namespace {

void collect_public_constants(const Term& t, TermSet& out) {
  for (const auto& s : subterms(t))
    if (s.is_const() && s.sort() == Sort::Public) out.insert(s);
}

TermSet public_constants(const ProtocolSpec& spec) {
  TermSet out;
  for (const auto& r : spec.roles)
    for (const auto& t : r.initial_knowledge) collect_public_constants(t, out);
  for (const auto& m : spec.exchange) collect_public_constants(m.payload, out);
  for (const auto& g : spec.goals) {
    if (const auto* s = std::get_if<SecrecyGoal>(&g)) {
      collect_public_constants(s->term, out);
    } else {
      for (const auto& t : std::get<AgreementGoal>(g).terms) collect_public_constants(t, out);
    }
  }
  if (spec.bundles.contains(Bundle::DiffieHellman))
    out.insert(Term::constant(std::string(kDhGenerator), Sort::Public));
  return out;
}

}  // namespace

TermSet initial_knowledge(const ProtocolSpec& spec, const Role& role) {
  TermSet out(role.initial_knowledge.begin(), role.initial_knowledge.end());
  out.insert(role.fresh_values.begin(), role.fresh_values.end());
  for (const auto& k : role.long_term_keys) out.insert(k.key);
  auto pubs = public_constants(spec);
  out.insert(pubs.begin(), pubs.end());
  const bool pki = spec.bundles.contains(Bundle::AsymmetricEncryption) || spec.bundles.contains(Bundle::Signing);
  if (pki) {
    auto pk = spec.find_symbol("pk");
    for (const auto& r : spec.roles)
      for (const auto& k : r.long_term_keys)
        if (k.kind == KeyKind::AsymmetricPrivate && pk) out.insert(Term::apply(*pk, {k.key}));
  }
  return out;
}

KnowledgeTrace trace_knowledge(const ProtocolSpec& spec) {
  TheoryContext ctx(spec);
  KnowledgeTrace trace;
  std::map<std::string, TermSet> current;
  for (const auto& r : spec.roles) {
    current[r.name] = saturate(initial_knowledge(spec, r), ctx);
    trace.states[r.name].push_back(KnowledgeState{r.name, current[r.name], 0});
  }

  // Fresh values and private keys must have a single generating role.
  std::map<std::string, std::string> owner;
  for (const auto& r : spec.roles) {
    std::vector<Term> generated = r.fresh_values;
    for (const auto& k : r.long_term_keys)
      if (k.kind == KeyKind::AsymmetricPrivate) generated.push_back(k.key);
    for (const auto& f : generated) {
      auto [it, first] = owner.emplace(f.name(), r.name);
      if (first || it->second == r.name) continue;
      int step = 0;
      for (const auto& m : spec.exchange) {
        if (occurs(f, m.payload)) {
          step = m.index;
          break;
        }
      }
      trace.violations.push_back(Violation{step, r.name, std::string(codes::FreshReuse), f,
                                           "fresh value " + f.name() + " is already generated by role " +
                                               it->second});
    }
  }

  for (const auto& m : spec.exchange) {
    const Term payload = ctx.normalize(m.payload);
    auto sender = current.find(m.from);
    auto receiver = current.find(m.to);
    if (sender == current.end() || receiver == current.end()) continue;
    if (auto missing = missing_subterm(sender->second, payload, ctx)) {
      trace.violations.push_back(Violation{m.index, m.from, std::string(codes::NotDerivable), *missing,
                                           "role " + m.from + " cannot construct " + missing->str() +
                                               " when sending message " + std::to_string(m.index)});
    }
    TermSet next = receiver->second;
    next.insert(payload);
    next = saturate(next, ctx);
    if (m.delivery == Delivery::Atomic) {
      for (const auto& x : variables(payload)) {
        if (!derivable(next, x, ctx)) {
          trace.violations.push_back(Violation{
              m.index, m.to, std::string(codes::AtomicUndecomposable), x,
              "atomic delivery of message " + std::to_string(m.index) + " leaves " + x.str() +
                  " unextractable for role " + m.to});
          break;
        }
      }
    }
    receiver->second = std::move(next);
    for (const auto& r : spec.roles)
      trace.states[r.name].push_back(KnowledgeState{r.name, current[r.name], m.index});
  }

  std::stable_sort(trace.violations.begin(), trace.violations.end(),
                   [](const Violation& a, const Violation& b) { return a.step < b.step; });
  return trace;
}

ExecutabilityReport check_executability(const ProtocolSpec& spec) {
  auto trace = trace_knowledge(spec);
  ExecutabilityReport report;
  report.violations = std::move(trace.violations);
  report.ok = report.violations.empty();
  for (auto& [role, states] : trace.states) report.final_knowledge[role] = states.back();
  return report;
}

std::vector<Diagnostic> check_goals(const ProtocolSpec& spec, const ExecutabilityReport& report) {
  TheoryContext ctx(spec);
  std::vector<Diagnostic> out;
  auto require = [&](const std::string& role, const Term& t, int goal_index) {
    auto it = report.final_knowledge.find(role);
    if (it != report.final_knowledge.end() && derivable(it->second.known, t, ctx)) return;
    Diagnostic d = make_error(codes::GoalUnknown,
                              "goal term " + ctx.normalize(t).str() + " is not known to role " + role +
                                  " at the end of the exchange");
    d.goal = goal_index;
    out.push_back(std::move(d));
  };
  for (std::size_t i = 0; i < spec.goals.size(); ++i) {
    const int index = static_cast<int>(i) + 1;
    if (const auto* s = std::get_if<SecrecyGoal>(&spec.goals[i])) {
      require(s->role, s->term, index);
    } else {
      const auto& a = std::get<AgreementGoal>(spec.goals[i]);
      for (const auto& t : a.terms) require(a.claimer, t, index);
    }
  }
  return out;
}

std::vector<Diagnostic> equation_warnings(const ProtocolSpec& spec) {
  std::vector<Diagnostic> out;
  const TheoryContext ctx(spec);
  for (const auto& eq : ctx.ignored_equations()) {
    out.push_back(make_warning(codes::EquationIgnored, "unoriented equation " + eq.lhs.str() + " = " +
                                                           eq.rhs.str() + " is ignored by derivability"));
  }
  return out;
}

std::vector<Diagnostic> to_diagnostics(const ExecutabilityReport& report) {
  std::vector<Diagnostic> out;
  for (const auto& v : report.violations) {
    out.push_back(make_error(v.code, v.explanation, std::nullopt,
                             v.step > 0 ? std::optional<int>(v.step) : std::nullopt));
  }
  return out;
}

nlohmann::json to_json(const ExecutabilityReport& report) {
  nlohmann::json j;
  j["ok"] = report.ok;
  j["violations"] = nlohmann::json::array();
  for (const auto& v : report.violations) {
    nlohmann::json jv{{"step", v.step}, {"role", v.role}, {"code", v.code}, {"explanation", v.explanation}};
    jv["missing"] = v.missing ? nlohmann::json(v.missing->str()) : nlohmann::json(nullptr);
    j["violations"].push_back(std::move(jv));
  }
  j["finalKnowledge"] = nlohmann::json::object();
  for (const auto& [role, state] : report.final_knowledge) {
    auto known = nlohmann::json::array();
    for (const auto& t : state.known) known.push_back(t.str());
    j["finalKnowledge"][role] = {{"atStep", state.at_step}, {"known", std::move(known)}};
  }
  return j;
}

}  // namespace metacp
