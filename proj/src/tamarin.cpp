#include "metacp/tamarin.hpp"

#include <algorithm>
#include <map>

#include "metacp/analysis.hpp"

namespace metacp {

namespace {

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {
      "theory", "begin", "end", "rule", "lemma", "restriction", "axiom", "builtins", "functions",
      "equations", "let", "in", "All", "Ex", "not", "F", "T", "Fr", "In", "Out", "K", "KU", "KD",
      "fst", "snd", "pair", "pk", "sk", "h", "senc", "sdec", "aenc", "adec", "sign", "verify",
      "true", "exp", "inv", "one", "mult", "diff", "revealSign", "getMessage", "heuristic",
      "section", "predicates", "options", "tactic", "export", "process", "new", "out", "if",
      "then", "else", "event", "insert", "delete", "lookup", "lock", "unlock", "as"};
  return words;
}

bool ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

std::string sanitize(std::string_view s) {
  std::string out;
  bool gap = false;
  for (char c : s) {
    if (ident_char(c) && c != '_') {
      if (gap && !out.empty()) out += '_';
      gap = false;
      out += c;
    } else {
      gap = true;
    }
  }
  if (out.empty() || !is_identifier(out)) out = "t" + out;
  return out;
}

/// Plain variable token, optionally prefixed by `~` or `$`.
bool is_token(std::string_view s) {
  if (!s.empty() && (s.front() == '~' || s.front() == '$')) s.remove_prefix(1);
  return is_identifier(s);
}

/// Deterministic identifier allocation: the first request for a base name
/// keeps it, later colliding requests get a numeric suffix.
class NameTable {
 public:
  NameTable() : used_(reserved_words()) {}

  const std::string& get(const std::string& kind, const std::string& base) {
    const std::string key = kind + ":" + base;
    if (auto it = names_.find(key); it != names_.end()) return it->second;
    std::string candidate = is_identifier(base) ? base : sanitize(base);
    if (used_.contains(candidate)) {
      for (int n = 1;; ++n) {
        std::string next = candidate + "_" + std::to_string(n);
        if (!used_.contains(next)) {
          candidate = std::move(next);
          break;
        }
      }
    }
    used_.insert(candidate);
    return names_.emplace(key, std::move(candidate)).first->second;
  }

  void reserve(const std::string& name) { used_.insert(name); }

 private:
  std::map<std::string, std::string> names_;
  std::set<std::string> used_;
};

bool is_bundle_symbol(const ProtocolSpec& spec, const std::string& name) {
  for (Bundle b : spec.bundles)
    for (const auto& s : theory_bundle(b).symbols)
      if (s.name == name) return true;
  return false;
}

NameTable make_names(const ProtocolSpec& spec) {
  NameTable names;
  for (Bundle b : spec.bundles)
    for (const auto& s : theory_bundle(b).symbols) names.reserve(s.name);
  for (const auto& f : spec.signature) names.get("fun", f.name);
  for (const auto& r : spec.roles) names.get("role", r.name);
  auto vars_of = [&](const Term& t) {
    for (const auto& x : variables(t)) names.get("var", x.name());
  };
  for (const auto& r : spec.roles) {
    for (const auto& t : r.initial_knowledge) vars_of(t);
    for (const auto& t : r.fresh_values) vars_of(t);
    for (const auto& k : r.long_term_keys) vars_of(k.key);
  }
  for (const auto& m : spec.exchange) vars_of(m.payload);
  for (const auto& g : spec.goals) {
    if (const auto* s = std::get_if<SecrecyGoal>(&g)) vars_of(s->term);
    else for (const auto& t : std::get<AgreementGoal>(g).terms) vars_of(t);
  }
  return names;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string tuple_text(const std::vector<std::string>& items) {
  if (items.size() == 1) return items.front();
  return "<" + join(items, ", ") + ">";
}

bool simple_operand(const std::string& s) {
  return is_token(s) || (s.size() >= 2 && s.front() == '\'' && s.back() == '\'');
}

std::string exp_join(const std::string& base, const std::string& exponent) {
  std::string lhs = base.find('^') != std::string::npos ? "(" + base + ")" : base;
  std::string rhs = simple_operand(exponent) ? exponent : "(" + exponent + ")";
  return lhs + "^" + rhs;
}

Fact fact(std::string name, std::vector<std::string> args, bool persistent = false) {
  return Fact{std::move(name), persistent, std::move(args)};
}

// ---------------------------------------------------------------------------
// Goal labels shared by the compiler and the lemma generator
// ---------------------------------------------------------------------------

struct GoalLabel {
  std::string lemma;
  std::string secret;   // Secret_n for secrecy goals
  std::string commit;   // Commit_<claimer> for agreement goals
  std::string running;  // Running_<peer>
};

struct LabelPlan {
  std::vector<GoalLabel> goals;
  std::vector<std::string> finishing_roles;  // role tokens, declaration order
};

LabelPlan plan_labels(const ProtocolSpec& spec, NameTable& names) {
  LabelPlan plan;
  for (const auto& r : spec.roles) {
    bool participates = std::any_of(spec.exchange.begin(), spec.exchange.end(), [&](const MessageStep& m) {
      return m.from == r.name || m.to == r.name;
    });
    if (participates) plan.finishing_roles.push_back(names.get("role", r.name));
  }
  std::set<std::string> lemma_names{"executable"};
  std::set<std::string> label_names;
  auto unique = [](std::set<std::string>& used, const std::string& base) {
    std::string name = base;
    for (int n = 2; used.contains(name); ++n) name = base + "_" + std::to_string(n);
    used.insert(name);
    return name;
  };
  int secret_counter = 0;
  for (const auto& g : spec.goals) {
    GoalLabel label;
    if (const auto* s = std::get_if<SecrecyGoal>(&g)) {
      label.secret = "Secret_" + std::to_string(++secret_counter);
      label.lemma = unique(lemma_names, "secrecy_" + sanitize(s->term.str()) + "_" + names.get("role", s->role));
    } else {
      const auto& a = std::get<AgreementGoal>(g);
      const auto& claimer = names.get("role", a.claimer);
      const auto& peer = names.get("role", a.peer);
      label.commit = unique(label_names, "Commit_" + claimer);
      label.running = unique(label_names, "Running_" + peer);
      label.lemma = unique(lemma_names, "injective_agreement_" + claimer + "_" + peer);
    }
    plan.goals.push_back(std::move(label));
  }
  return plan;
}

std::vector<Lemma> lemmas_from_plan(const ProtocolSpec& spec, const LabelPlan& plan) {
  std::vector<Lemma> out;
  if (!spec.exchange.empty() && !plan.finishing_roles.empty()) {
    std::vector<std::string> times, parts;
    for (std::size_t i = 0; i < plan.finishing_roles.size(); ++i) {
      const std::string t = "#i" + std::to_string(i + 1);
      times.push_back(t);
      parts.push_back("Finish_" + plan.finishing_roles[i] + "() @ " + t);
    }
    out.push_back(Lemma{"executable", LemmaKind::ExistsTrace,
                        "Ex " + join(times, " ") + ". " + join(parts, " & ")});
  }
  for (std::size_t i = 0; i < spec.goals.size(); ++i) {
    const auto& label = plan.goals[i];
    if (std::holds_alternative<SecrecyGoal>(spec.goals[i])) {
      out.push_back(Lemma{label.lemma, LemmaKind::AllTraces,
                          "All x #i. " + label.secret + "(x) @ #i ==> not (Ex #j. K(x) @ #j)"});
    } else {
      out.push_back(Lemma{
          label.lemma, LemmaKind::AllTraces,
          "All a b t #i. " + label.commit + "(a, b, t) @ #i\n" +
              "    ==> (Ex #j. " + label.running + "(b, a, t) @ #j & #j < #i\n" +
              "         & not (Ex a2 b2 #i2. " + label.commit + "(a2, b2, t) @ #i2 & not (#i2 = #i)))"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Compiler
// ---------------------------------------------------------------------------

struct RoleView {
  const Role* role = nullptr;
  std::string token;  // mangled role name
  std::map<Term, std::string> bound;
  std::vector<std::string> state;
  std::set<Term> own_fresh;
  std::set<Term> own_keys;
};

struct Scratch {
  std::vector<Fact> premises;
  std::vector<Fact> checks;
};

struct LabelRequest {
  enum class Kind { Secret, Running, Commit } kind;
  std::size_t goal = 0;
};

class Compiler {
 public:
  Compiler(const ProtocolSpec& spec, const KnowledgeTrace& trace)
      : spec_(spec), trace_(trace), ctx_(spec), names_(make_names(spec)), plan_(plan_labels(spec, names_)) {
    for (const auto& r : spec.roles)
      for (const auto& k : r.long_term_keys)
        if (k.kind == KeyKind::AsymmetricPrivate) asym_owner_.emplace(k.key, r.name);
    pk_ = spec.find_symbol("pk");
  }

  TamarinCompileResult run();

 private:
  // Term rendering from a role's point of view.
  std::optional<std::string> render(RoleView& v, Scratch& s, const Term& t, bool pattern = false);
  bool renderable(const RoleView& v, const Term& t, bool pattern = false) const;
  std::optional<std::string> render_exp(RoleView& v, Scratch& s, const Term& t, bool pattern);
  bool exp_renderable(const RoleView& v, const Term& t, bool pattern) const;
  const std::string* usable(const RoleView& v, const Term& t, bool pattern) const;

  std::string receive_pattern(RoleView& v, Scratch& s, const Term& t, const TermSet& after);
  void receive_atomic(RoleView& v, Scratch& s, const Term& payload, const std::string& msg,
                      const TermSet& after);
  void add_signature_checks(RoleView& v, Scratch& s, const Term& t, const std::string& expr,
                            const TermSet& after);

  void bind(RoleView& v, const Term& t, const std::string& expr);
  std::string var_token(const Term& x) { return names_.get("var", x.name()); }
  std::optional<std::string> peer_of_key(const Term& key, const RoleView& v) const;
  bool is_role_const(const Term& t) const {
    return t.is_const() && t.sort() == Sort::Public && spec_.find_role(t.name()) != nullptr;
  }

  TamarinRule init_rule(RoleView& v);
  void finish_rule(RoleView& v, Scratch& s, TamarinRule& rule, const std::vector<std::string>& before,
                   std::size_t rule_index, std::size_t last_index);
  void emit_labels(RoleView& v, Scratch& s, TamarinRule& rule, std::size_t rule_index);
  std::string render_plain(const Term& t);

  void error(std::string_view code, std::string message, std::optional<int> step = std::nullopt) {
    diagnostics_.push_back(make_error(code, std::move(message), std::nullopt, step));
  }

  const ProtocolSpec& spec_;
  const KnowledgeTrace& trace_;
  TheoryContext ctx_;
  NameTable names_;
  LabelPlan plan_;
  std::map<Term, std::string> asym_owner_;
  std::optional<FunctionSymbol> pk_;
  std::map<std::string, std::map<std::size_t, std::vector<LabelRequest>>> labels_;
  std::map<std::string, std::string> shared_generator_;  // shared item token -> generating role
  bool needs_equality_ = false;
  std::vector<Diagnostic> diagnostics_;
};

void Compiler::bind(RoleView& v, const Term& t, const std::string& expr) {
  v.bound[t] = expr;
  if (is_token(expr) && std::find(v.state.begin(), v.state.end(), expr) == v.state.end())
    v.state.push_back(expr);
}

const std::string* Compiler::usable(const RoleView& v, const Term& t, bool pattern) const {
  auto it = v.bound.find(t);
  if (it == v.bound.end()) return nullptr;
  if (pattern && !is_token(it->second)) return nullptr;
  return &it->second;
}

std::optional<std::string> Compiler::peer_of_key(const Term& key, const RoleView& v) const {
  auto it = asym_owner_.find(key);
  if (it == asym_owner_.end() || it->second == v.role->name) return std::nullopt;
  return it->second;
}

bool Compiler::renderable(const RoleView& v, const Term& t, bool pattern) const {
  if (usable(v, t, pattern)) return true;
  switch (t.kind()) {
    case Term::Kind::Var:
      return v.own_fresh.contains(t) || t.sort() == Sort::Public;
    case Term::Kind::Const:
      return true;
    case Term::Kind::Tuple:
      return std::all_of(t.args().begin(), t.args().end(),
                         [&](const Term& a) { return renderable(v, a, pattern); });
    case Term::Kind::Apply:
      break;
  }
  if (t.symbol().visibility != Visibility::Public) return false;
  if (t.name() == kDhExp && spec_.bundles.contains(Bundle::DiffieHellman)) return exp_renderable(v, t, pattern);
  if (pk_ && t.name() == "pk" && t.args().size() == 1 && peer_of_key(t.args()[0], v) &&
      !renderable(v, t.args()[0], pattern))
    return true;
  return std::all_of(t.args().begin(), t.args().end(), [&](const Term& a) { return renderable(v, a, pattern); });
}

namespace {

struct ChainMatch {
  const Term* known = nullptr;
  std::vector<Term> rest;
};

bool sub_multiset(const std::vector<Term>& whole, const std::vector<Term>& part, std::vector<Term>& rest) {
  rest.clear();
  std::vector<bool> used(whole.size(), false);
  for (const auto& p : part) {
    bool found = false;
    for (std::size_t i = 0; i < whole.size(); ++i) {
      if (!used[i] && whole[i] == p) {
        used[i] = found = true;
        break;
      }
    }
    if (!found) return false;
  }
  for (std::size_t i = 0; i < whole.size(); ++i)
    if (!used[i]) rest.push_back(whole[i]);
  return true;
}

}  // namespace

bool Compiler::exp_renderable(const RoleView& v, const Term& t, bool pattern) const {
  auto [base, exps] = exp_chain(t);
  std::vector<Term> rest;
  for (const auto& [k, expr] : v.bound) {
    if (pattern && !is_token(expr)) continue;
    if (!k.is_apply() || k.name() != kDhExp) continue;
    auto [kbase, kexps] = exp_chain(k);
    if (!(kbase == base) || kexps.size() >= exps.size() || !sub_multiset(exps, kexps, rest)) continue;
    if (std::all_of(rest.begin(), rest.end(), [&](const Term& e) { return renderable(v, e, pattern); }))
      return true;
  }
  return renderable(v, base, pattern) &&
         std::all_of(exps.begin(), exps.end(), [&](const Term& e) { return renderable(v, e, pattern); });
}

std::optional<std::string> Compiler::render_exp(RoleView& v, Scratch& s, const Term& t, bool pattern) {
  auto [base, exps] = exp_chain(t);
  const Term* best = nullptr;
  std::vector<Term> best_rest, rest;
  for (const auto& [k, expr] : v.bound) {
    if (pattern && !is_token(expr)) continue;
    if (!k.is_apply() || k.name() != kDhExp) continue;
    auto [kbase, kexps] = exp_chain(k);
    if (!(kbase == base) || kexps.size() >= exps.size() || !sub_multiset(exps, kexps, rest)) continue;
    if (!std::all_of(rest.begin(), rest.end(), [&](const Term& e) { return renderable(v, e, pattern); }))
      continue;
    if (!best || rest.size() < best_rest.size()) {
      best = &k;
      best_rest = rest;
    }
  }
  std::string out;
  if (best) {
    out = v.bound.at(*best);
    exps = best_rest;
  } else {
    auto b = render(v, s, base, pattern);
    if (!b) return std::nullopt;
    out = *b;
  }
  for (const auto& e : exps) {
    auto r = render(v, s, e, pattern);
    if (!r) return std::nullopt;
    out = exp_join(out, *r);
  }
  return out;
}

std::optional<std::string> Compiler::render(RoleView& v, Scratch& s, const Term& t, bool pattern) {
  if (const auto* expr = usable(v, t, pattern)) return *expr;
  switch (t.kind()) {
    case Term::Kind::Var: {
      if (v.own_fresh.contains(t)) {
        std::string tok = "~" + var_token(t);
        s.premises.push_back(fact("Fr", {tok}));
        bind(v, t, tok);
        return tok;
      }
      if (t.sort() == Sort::Public) {
        std::string tok = "$" + var_token(t);
        bind(v, t, tok);
        return tok;
      }
      return std::nullopt;
    }
    case Term::Kind::Const: {
      if (is_role_const(t)) {
        std::string tok = "$" + names_.get("role", t.name());
        bind(v, t, tok);
        return tok;
      }
      return "'" + t.name() + "'";
    }
    case Term::Kind::Tuple: {
      std::vector<std::string> items;
      for (const auto& a : t.args()) {
        auto r = render(v, s, a, pattern);
        if (!r) return std::nullopt;
        items.push_back(*r);
      }
      return "<" + join(items, ", ") + ">";
    }
    case Term::Kind::Apply:
      break;
  }
  if (t.symbol().visibility != Visibility::Public) return std::nullopt;
  if (t.name() == kDhExp && spec_.bundles.contains(Bundle::DiffieHellman)) return render_exp(v, s, t, pattern);
  if (pk_ && t.name() == "pk" && t.args().size() == 1) {
    if (auto owner = peer_of_key(t.args()[0], v); owner && !renderable(v, t.args()[0], pattern)) {
      auto owner_tok = render(v, s, Term::constant(*owner, Sort::Public), pattern);
      std::string tok = names_.get("opaque", sanitize(t.str()));
      s.premises.push_back(fact("Pk", {*owner_tok, tok}, true));
      bind(v, t, tok);
      return tok;
    }
  }
  const std::string fn = is_bundle_symbol(spec_, t.name()) ? t.name() : names_.get("fun", t.name());
  if (t.args().empty()) return fn;
  std::vector<std::string> args;
  for (const auto& a : t.args()) {
    auto r = render(v, s, a, pattern);
    if (!r) return std::nullopt;
    args.push_back(*r);
  }
  return fn + "(" + join(args, ", ") + ")";
}

// Checks a receiver can perform on an opaque term: destructors with a
// constant result (signature verification) whose side arguments it knows.
void Compiler::add_signature_checks(RoleView& v, Scratch& s, const Term& t, const std::string& expr,
                                    const TermSet& after) {
  for (const auto& d : ctx_.destructors()) {
    const auto& lhs = d.equation.lhs;
    if (d.equation.rhs.is_var()) continue;
    Binding b;
    if (!match(lhs.args()[d.main_argument], t, b)) continue;
    std::vector<std::string> args;
    bool ok = true;
    for (std::size_t j = 0; j < lhs.args().size() && ok; ++j) {
      if (j == d.main_argument) {
        args.push_back(expr);
        continue;
      }
      auto vars = variables(lhs.args()[j]);
      ok = std::all_of(vars.begin(), vars.end(), [&](const Term& x) { return b.contains(x); });
      if (!ok) break;
      Term side = ctx_.normalize(substitute(lhs.args()[j], b));
      ok = derivable(after, side, ctx_) && renderable(v, side);
      if (ok) args.push_back(*render(v, s, side));
    }
    if (!ok) continue;
    const std::string fn = is_bundle_symbol(spec_, lhs.name()) ? lhs.name() : names_.get("fun", lhs.name());
    auto rhs = render(v, s, substitute(d.equation.rhs, b));
    if (!rhs) continue;
    s.checks.push_back(fact("Eq", {fn + "(" + join(args, ", ") + ")", *rhs}));
    needs_equality_ = true;
  }
}

std::string Compiler::receive_pattern(RoleView& v, Scratch& s, const Term& t, const TermSet& after) {
  if (renderable(v, t, true)) return *render(v, s, t, true);
  if (auto it = v.bound.find(t); it != v.bound.end()) {
    // Known only through a destructor expression; match a fresh variable
    // and check equality.
    std::string tok = names_.get("check", sanitize(t.str()) + "#" + v.role->name + std::to_string(s.checks.size()));
    s.checks.push_back(fact("Eq", {tok, it->second}));
    needs_equality_ = true;
    return tok;
  }
  if (t.is_tuple()) {
    std::vector<std::string> items;
    for (const auto& a : t.args()) items.push_back(receive_pattern(v, s, a, after));
    return "<" + join(items, ", ") + ">";
  }
  if (t.is_var()) {
    std::string tok = (t.sort() == Sort::Public ? "$" : "") + var_token(t);
    bind(v, t, tok);
    return tok;
  }
  if (t.is_apply()) {
    const bool dh = t.name() == kDhExp && spec_.bundles.contains(Bundle::DiffieHellman);
    bool opens = false;
    if (t.symbol().visibility == Visibility::Public) {
      if (dh) {
        auto [base, exps] = exp_chain(t);
        opens = std::all_of(exps.begin(), exps.end(), [&](const Term& e) { return derivable(after, e, ctx_); });
      } else {
        opens = std::all_of(t.args().begin(), t.args().end(),
                            [&](const Term& a) { return derivable(after, a, ctx_); });
      }
    }
    if (opens) {
      if (dh) {
        auto [base, exps] = exp_chain(t);
        std::string out = receive_pattern(v, s, base, after);
        for (const auto& e : exps) out = exp_join(out, receive_pattern(v, s, e, after));
        return out;
      }
      const std::string fn = is_bundle_symbol(spec_, t.name()) ? t.name() : names_.get("fun", t.name());
      if (t.args().empty()) return fn;
      std::vector<std::string> args;
      for (const auto& a : t.args()) args.push_back(receive_pattern(v, s, a, after));
      return fn + "(" + join(args, ", ") + ")";
    }
  }
  std::string tok = names_.get("opaque", sanitize(t.str()));
  bind(v, t, tok);
  add_signature_checks(v, s, t, tok, after);
  return tok;
}

void Compiler::receive_atomic(RoleView& v, Scratch& s, const Term& payload, const std::string& msg,
                              const TermSet& after) {
  struct Item {
    Term term;
    std::string expr;
  };
  std::vector<Item> work{{payload, msg}};
  bool progress = true;
  while (!work.empty() && progress) {
    progress = false;
    std::vector<Item> pending;
    for (auto& item : work) {
      const Term& t = item.term;
      if (renderable(v, t)) {
        progress = true;
        continue;
      }
      if (t.is_atom()) {
        bind(v, t, item.expr);
        progress = true;
        continue;
      }
      if (t.is_tuple()) {
        const auto n = t.args().size();
        std::string rest = item.expr;
        for (std::size_t i = 0; i < n; ++i) {
          if (i + 1 < n) {
            work.size();  // keep order stable: children appended to pending
            pending.push_back({t.args()[i], "fst(" + rest + ")"});
            rest = "snd(" + rest + ")";
          } else {
            pending.push_back({t.args()[i], rest});
          }
        }
        progress = true;
        continue;
      }
      // Apply: open with a destructor whose side arguments are available.
      bool matched = false, opened = false;
      for (const auto& d : ctx_.destructors()) {
        if (!d.equation.rhs.is_var()) continue;
        const auto& lhs = d.equation.lhs;
        Binding b;
        if (!match(lhs.args()[d.main_argument], t, b)) continue;
        std::vector<Term> sides;
        bool ok = true;
        for (std::size_t j = 0; j < lhs.args().size() && ok; ++j) {
          if (j == d.main_argument) continue;
          auto vars = variables(lhs.args()[j]);
          ok = std::all_of(vars.begin(), vars.end(), [&](const Term& x) { return b.contains(x); });
          if (ok) {
            sides.push_back(ctx_.normalize(substitute(lhs.args()[j], b)));
            ok = derivable(after, sides.back(), ctx_);
          }
        }
        if (!ok || !b.contains(d.equation.rhs)) continue;
        matched = true;
        if (!std::all_of(sides.begin(), sides.end(), [&](const Term& x) { return renderable(v, x); })) continue;
        std::vector<std::string> args;
        std::size_t side = 0;
        for (std::size_t j = 0; j < lhs.args().size(); ++j)
          args.push_back(j == d.main_argument ? item.expr : *render(v, s, sides[side++]));
        const std::string fn = is_bundle_symbol(spec_, lhs.name()) ? lhs.name() : names_.get("fun", lhs.name());
        pending.push_back({b.at(d.equation.rhs), fn + "(" + join(args, ", ") + ")"});
        opened = true;
        break;
      }
      if (opened) {
        progress = true;
      } else if (matched) {
        pending.push_back(item);  // key may arrive from a sibling
      } else {
        bind(v, t, item.expr);
        add_signature_checks(v, s, t, item.expr, after);
        progress = true;
      }
    }
    work = std::move(pending);
  }
  for (auto& item : work) {
    bind(v, item.term, item.expr);
    add_signature_checks(v, s, item.term, item.expr, after);
  }
}

std::string Compiler::render_plain(const Term& t) {
  switch (t.kind()) {
    case Term::Kind::Var:
      return std::string(t.sort() == Sort::Fresh ? "~" : t.sort() == Sort::Public ? "$" : "") + var_token(t);
    case Term::Kind::Const:
      return "'" + t.name() + "'";
    case Term::Kind::Tuple: {
      std::vector<std::string> items;
      for (const auto& a : t.args()) items.push_back(render_plain(a));
      return "<" + join(items, ", ") + ">";
    }
    case Term::Kind::Apply: {
      const std::string fn = is_bundle_symbol(spec_, t.name()) ? t.name() : names_.get("fun", t.name());
      if (t.args().empty()) return fn;
      std::vector<std::string> args;
      for (const auto& a : t.args()) args.push_back(render_plain(a));
      return fn + "(" + join(args, ", ") + ")";
    }
  }
  return {};
}

void Compiler::emit_labels(RoleView& v, Scratch& s, TamarinRule& rule, std::size_t rule_index) {
  auto role_it = labels_.find(v.role->name);
  if (role_it == labels_.end()) return;
  auto it = role_it->second.find(rule_index);
  if (it == role_it->second.end()) return;
  for (const auto& req : it->second) {
    const auto& goal = spec_.goals[req.goal];
    const auto& label = plan_.goals[req.goal];
    if (req.kind == LabelRequest::Kind::Secret) {
      const auto& g = std::get<SecrecyGoal>(goal);
      auto text = render(v, s, ctx_.normalize(g.term));
      if (!text) {
        error(codes::Unbindable, "secrecy term " + g.term.str() + " cannot be expressed by role " + g.role);
        continue;
      }
      rule.actions.push_back(fact(label.secret, {*text}));
      continue;
    }
    const auto& a = std::get<AgreementGoal>(goal);
    std::vector<std::string> terms;
    bool ok = true;
    for (const auto& t : a.terms) {
      auto text = render(v, s, ctx_.normalize(t));
      if (!text) {
        error(codes::Unbindable, "agreement term " + t.str() + " is not known to role " + v.role->name +
                                     " where its label is placed");
        ok = false;
        break;
      }
      terms.push_back(*text);
    }
    if (!ok) continue;
    const bool commit = req.kind == LabelRequest::Kind::Commit;
    const auto& self = commit ? a.claimer : a.peer;
    const auto& other = commit ? a.peer : a.claimer;
    auto self_tok = *render(v, s, Term::constant(self, Sort::Public));
    auto other_tok = *render(v, s, Term::constant(other, Sort::Public));
    rule.actions.push_back(fact(commit ? label.commit : label.running, {self_tok, other_tok, tuple_text(terms)}));
  }
}

void Compiler::finish_rule(RoleView& v, Scratch& s, TamarinRule& rule, const std::vector<std::string>& before,
                           std::size_t rule_index, std::size_t last_index) {
  emit_labels(v, s, rule, rule_index);
  if (rule_index == last_index &&
      std::find(plan_.finishing_roles.begin(), plan_.finishing_roles.end(), v.token) !=
          plan_.finishing_roles.end())
    rule.actions.push_back(fact("Finish_" + v.token, {}));
  std::vector<Fact> actions = s.checks;
  actions.insert(actions.end(), rule.actions.begin(), rule.actions.end());
  rule.actions = std::move(actions);

  std::vector<Fact> premises;
  if (rule_index > 0) premises.push_back(fact("St_" + v.token + "_" + std::to_string(rule_index - 1), before));
  premises.insert(premises.end(), rule.premises.begin(), rule.premises.end());
  premises.insert(premises.end(), s.premises.begin(), s.premises.end());
  rule.premises = std::move(premises);
  if (rule_index < last_index || rule_index == 0) {
    rule.conclusions.insert(rule.conclusions.begin(),
                            fact("St_" + v.token + "_" + std::to_string(rule_index), v.state));
  }
}

TamarinRule Compiler::init_rule(RoleView& v) {
  TamarinRule rule;
  rule.name = "Init_" + v.token;
  Scratch s;
  const std::string tid = "~" + names_.get("tid", "tid_" + v.token);
  rule.premises.push_back(fact("Fr", {tid}));
  v.state.push_back(tid);
  render(v, s, Term::constant(v.role->name, Sort::Public));

  std::size_t asym = 0;
  for (const auto& k : v.role->long_term_keys) asym += k.kind == KeyKind::AsymmetricPrivate;
  for (const auto& k : v.role->long_term_keys) {
    if (k.kind != KeyKind::AsymmetricPrivate) continue;
    const std::string tok = "~" + var_token(k.key);
    const std::string ltk = asym > 1 ? "Ltk_" + var_token(k.key) : "Ltk";
    rule.premises.push_back(fact(ltk, {"$" + v.token, tok}, true));
    bind(v, k.key, tok);
  }

  // Shared long-term material: symmetric keys and message variables of the
  // initial knowledge. The first declaring role generates, the rest read.
  std::vector<Term> shared;
  for (const auto& k : v.role->long_term_keys)
    if (k.kind == KeyKind::Symmetric) shared.push_back(k.key);
  for (const auto& t : v.role->initial_knowledge)
    for (const auto& x : variables(t))
      if (x.sort() == Sort::Message && std::find(shared.begin(), shared.end(), x) == shared.end())
        shared.push_back(x);
  for (const auto& x : shared) {
    const std::string tok = var_token(x);
    auto [it, first] = shared_generator_.emplace(tok, v.role->name);
    const std::string fact_name = "Shared_" + tok;
    if (first) {
      s.premises.push_back(fact("Fr", {"~" + tok}));
      bind(v, x, "~" + tok);
      bool others = false;
      for (const auto& r : spec_.roles) {
        if (r.name == v.role->name) continue;
        for (const auto& k : r.long_term_keys) others = others || k.key.name() == x.name();
        for (const auto& t : r.initial_knowledge)
          for (const auto& y : variables(t)) others = others || y.name() == x.name();
      }
      if (others) rule.conclusions.push_back(fact(fact_name, {"~" + tok}, true));
    } else {
      s.premises.push_back(fact(fact_name, {tok}, true));
      bind(v, x, tok);
    }
  }

  for (const auto& t : v.role->initial_knowledge) {
    if (!renderable(v, t)) {
      error(codes::Unbindable, "initial knowledge " + t.str() + " of role " + v.role->name +
                                   " cannot be bound in the init rule");
      continue;
    }
    for (const auto& a : subterms(t))
      if (a.is_atom()) render(v, s, a);
  }
  rule.premises.insert(rule.premises.end(), s.premises.begin(), s.premises.end());
  s.premises.clear();
  return rule;
}

TamarinCompileResult Compiler::run() {
  TamarinTheory theory;
  theory.name = spec_.name;

  for (Bundle b : spec_.bundles) {
    if (b != Bundle::Pairing) theory.builtins.emplace_back(bundle_name(b));
    for (const auto& sym : theory_bundle(b).symbols)
      if (sym.arity == 0) theory.nullary_functions.insert(sym.name);
  }
  for (const auto& f : spec_.signature) {
    const auto& tok = names_.get("fun", f.name);
    theory.function_decls.push_back(tok + "/" + std::to_string(f.arity) +
                                    (f.visibility == Visibility::Private ? " [private]" : ""));
    if (f.arity == 0) theory.nullary_functions.insert(tok);
  }
  for (const auto& eq : spec_.equations) {
    if (eq.orientation == Orientation::Unoriented) {
      error(codes::Unsupported, "unoriented equation " + eq.lhs.str() + " = " + eq.rhs.str() +
                                    " cannot be expressed in the target");
      continue;
    }
    theory.equation_decls.push_back(render_plain(eq.lhs) + " = " + render_plain(eq.rhs));
  }
  if (has_errors(diagnostics_)) return {std::nullopt, diagnostics_};

  // Per-role rule schedule: index 0 is the init rule, then one rule per
  // message the role sends or receives.
  std::map<std::string, std::vector<const MessageStep*>> schedule;
  for (const auto& r : spec_.roles) schedule[r.name];
  for (const auto& m : spec_.exchange) {
    schedule[m.from].push_back(&m);
    schedule[m.to].push_back(&m);
  }
  auto rule_of_step = [&](const std::string& role, int step) -> std::size_t {
    const auto& steps = schedule[role];
    for (std::size_t i = 0; i < steps.size(); ++i)
      if (steps[i]->index == step) return i + 1;
    return 0;
  };

  for (std::size_t g = 0; g < spec_.goals.size(); ++g) {
    if (const auto* sg = std::get_if<SecrecyGoal>(&spec_.goals[g])) {
      labels_[sg->role][schedule[sg->role].size()].push_back({LabelRequest::Kind::Secret, g});
      continue;
    }
    const auto& a = std::get<AgreementGoal>(spec_.goals[g]);
    const auto& claimer_steps = schedule[a.claimer];
    std::size_t commit = claimer_steps.size();
    int commit_step = claimer_steps.empty() ? 0 : claimer_steps.back()->index;
    for (std::size_t i = claimer_steps.size(); i-- > 0;) {
      if (claimer_steps[i]->to == a.claimer) {
        commit = i + 1;
        commit_step = claimer_steps[i]->index;
        break;
      }
    }
    std::size_t running = 0;
    for (const auto* m : schedule[a.peer]) {
      if (m->index > commit_step || (m->index == commit_step && m->from != a.peer)) break;
      running = rule_of_step(a.peer, m->index);
    }
    labels_[a.claimer][commit].push_back({LabelRequest::Kind::Commit, g});
    labels_[a.peer][running].push_back({LabelRequest::Kind::Running, g});
  }

  // PKI registration.
  for (const auto& r : spec_.roles) {
    std::vector<const LongTermKey*> keys;
    for (const auto& k : r.long_term_keys)
      if (k.kind == KeyKind::AsymmetricPrivate) keys.push_back(&k);
    if (keys.empty()) continue;
    if (!pk_) {
      error(codes::Unsupported, "role " + r.name +
                                    " has an asymmetric key but neither asymmetric-encryption nor signing is active");
      continue;
    }
    const std::string role_tok = names_.get("role", r.name);
    TamarinRule reg;
    reg.name = "Register_pk_" + role_tok;
    for (const auto* k : keys) {
      const std::string tok = "~" + var_token(k->key);
      const std::string suffix = keys.size() > 1 ? "_" + var_token(k->key) : "";
      reg.premises.push_back(fact("Fr", {tok}));
      reg.conclusions.push_back(fact("Ltk" + suffix, {"$" + role_tok, tok}, true));
      reg.conclusions.push_back(fact("Pk" + suffix, {"$" + role_tok, "pk(" + tok + ")"}, true));
      reg.conclusions.push_back(fact("Out", {"pk(" + tok + ")"}));
    }
    theory.rules.push_back(std::move(reg));
  }

  // Role scripts.
  for (const auto& r : spec_.roles) {
    RoleView v;
    v.role = &r;
    v.token = names_.get("role", r.name);
    v.own_fresh.insert(r.fresh_values.begin(), r.fresh_values.end());
    const auto& steps = schedule[r.name];
    const std::size_t last = steps.size();

    // Fresh values never mentioned by this role's rules are drawn at init.
    TamarinRule init = init_rule(v);
    Scratch init_scratch;
    std::set<Term> mentioned;
    for (const auto* m : steps)
      for (const auto& x : variables(m->payload)) mentioned.insert(x);
    for (const auto& [idx, reqs] : labels_[r.name]) {
      for (const auto& req : reqs) {
        const auto& goal = spec_.goals[req.goal];
        if (const auto* sg = std::get_if<SecrecyGoal>(&goal)) {
          for (const auto& x : variables(sg->term)) mentioned.insert(x);
        } else {
          for (const auto& t : std::get<AgreementGoal>(goal).terms)
            for (const auto& x : variables(t)) mentioned.insert(x);
        }
      }
    }
    for (const auto& f : r.fresh_values)
      if (!mentioned.contains(f)) render(v, init_scratch, f);
    finish_rule(v, init_scratch, init, {}, 0, last);
    theory.rules.push_back(std::move(init));

    for (std::size_t i = 0; i < steps.size(); ++i) {
      const MessageStep& m = *steps[i];
      const std::size_t index = i + 1;
      const std::vector<std::string> before = v.state;
      TamarinRule rule;
      Scratch s;
      const Term payload = ctx_.normalize(m.payload);
      if (m.from == r.name) {
        rule.name = v.token + "_send_" + std::to_string(m.index);
        auto text = render(v, s, payload);
        if (!text) {
          error(codes::Internal, "role " + r.name + " cannot render message " + std::to_string(m.index), m.index);
          continue;
        }
        finish_rule(v, s, rule, before, index, last);
        rule.conclusions.push_back(fact("Out", {*text}));
      } else {
        rule.name = v.token + "_recv_" + std::to_string(m.index);
        const auto& after = trace_.states.at(r.name).at(static_cast<std::size_t>(m.index)).known;
        if (m.delivery == Delivery::Atomic) {
          const std::string msg = names_.get("msg", "msg" + std::to_string(m.index));
          rule.premises.push_back(fact("In", {msg}));
          bind(v, Term::var("#msg" + std::to_string(m.index)), msg);
          receive_atomic(v, s, payload, msg, after);
        } else {
          rule.premises.push_back(fact("In", {receive_pattern(v, s, payload, after)}));
        }
        finish_rule(v, s, rule, before, index, last);
      }
      theory.rules.push_back(std::move(rule));
    }
  }

  // Unique rule names.
  std::set<std::string> rule_names;
  for (auto& rule : theory.rules) {
    std::string name = rule.name;
    for (int n = 2; rule_names.contains(name); ++n) name = rule.name + "_" + std::to_string(n);
    rule.name = name;
    rule_names.insert(name);
  }

  for (const auto& rule : theory.rules) {
    auto unbound = unbound_variables(rule, theory.nullary_functions);
    if (!unbound.empty()) {
      std::vector<std::string> list(unbound.begin(), unbound.end());
      error(codes::Internal, "rule " + rule.name + " leaves " + join(list, ", ") + " unbound");
    }
  }

  if (needs_equality_) theory.restrictions.push_back(Restriction{"Eq", "All x y #i. Eq(x, y) @ #i ==> x = y"});
  theory.lemmas = lemmas_from_plan(spec_, plan_);
  if (has_errors(diagnostics_)) return {std::nullopt, diagnostics_};
  return {std::move(theory), diagnostics_};
}

}  // namespace

TamarinCompileResult compile_tamarin(const ProtocolSpec& input, const CompileOptions& options) {
  ProtocolSpec spec = input;
  if (options.delivery)
    for (auto& m : spec.exchange) m.delivery = *options.delivery;
  auto trace = trace_knowledge(spec);
  if (!trace.violations.empty()) {
    ExecutabilityReport report;
    report.ok = false;
    report.violations = trace.violations;
    return {std::nullopt, to_diagnostics(report)};
  }
  Compiler compiler(spec, trace);
  return compiler.run();
}

std::vector<Lemma> gen_lemmas(const ProtocolSpec& spec) {
  NameTable names = make_names(spec);
  return lemmas_from_plan(spec, plan_labels(spec, names));
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string render_fact(const Fact& f) {
  return (f.persistent ? "!" : "") + f.name + "(" + join(f.args, ", ") + ")";
}

namespace {

void render_fact_block(std::string& out, const std::vector<Fact>& facts) {
  if (facts.empty()) {
    out += "    [ ]\n";
    return;
  }
  if (facts.size() == 1) {
    out += "    [ " + render_fact(facts.front()) + " ]\n";
    return;
  }
  for (std::size_t i = 0; i < facts.size(); ++i) out += std::string(i ? "    , " : "    [ ") + render_fact(facts[i]) + "\n";
  out += "    ]\n";
}

}  // namespace

std::string render_theory(const TamarinTheory& t) {
  std::string out = "theory " + t.name + "\nbegin\n\n";
  if (!t.builtins.empty()) out += "builtins: " + join(t.builtins, ", ") + "\n\n";
  if (!t.function_decls.empty()) out += "functions: " + join(t.function_decls, ", ") + "\n\n";
  if (!t.equation_decls.empty()) out += "equations: " + join(t.equation_decls, ", ") + "\n\n";
  for (const auto& rule : t.rules) {
    out += "rule " + rule.name + ":\n";
    render_fact_block(out, rule.premises);
    if (rule.actions.empty()) {
      out += "  -->\n";
    } else {
      std::vector<std::string> acts;
      for (const auto& a : rule.actions) acts.push_back(render_fact(a));
      out += "  --[ " + join(acts, ", ") + " ]->\n";
    }
    render_fact_block(out, rule.conclusions);
    out += "\n";
  }
  for (const auto& r : t.restrictions) out += "restriction " + r.name + ":\n  \"" + r.formula + "\"\n\n";
  for (const auto& l : t.lemmas) {
    out += "lemma " + l.name + ":\n  " + (l.kind == LemmaKind::ExistsTrace ? "exists-trace" : "all-traces") +
           "\n  \"" + l.formula + "\"\n\n";
  }
  out += "end\n";
  return out;
}

std::set<std::string> fact_variables(const std::vector<Fact>& facts, const std::set<std::string>& nullary) {
  std::set<std::string> out;
  for (const auto& f : facts) {
    for (const auto& arg : f.args) {
      std::size_t i = 0;
      while (i < arg.size()) {
        const char c = arg[i];
        if (c == '\'') {
          const auto close = arg.find('\'', i + 1);
          i = close == std::string::npos ? arg.size() : close + 1;
          continue;
        }
        if (c == '~' || c == '$' || ident_char(c)) {
          std::size_t j = (c == '~' || c == '$') ? i + 1 : i;
          while (j < arg.size() && ident_char(arg[j])) ++j;
          std::string word = arg.substr(i, j - i);
          const bool call = j < arg.size() && arg[j] == '(';
          const bool number = !word.empty() && word.front() >= '0' && word.front() <= '9';
          if (!call && !number && !nullary.contains(word) && word != "~" && word != "$") out.insert(word);
          i = j;
          continue;
        }
        ++i;
      }
    }
  }
  return out;
}

std::set<std::string> unbound_variables(const TamarinRule& rule, const std::set<std::string>& nullary) {
  auto bound = fact_variables(rule.premises, nullary);
  std::set<std::string> used = fact_variables(rule.conclusions, nullary);
  auto acts = fact_variables(rule.actions, nullary);
  used.insert(acts.begin(), acts.end());
  std::set<std::string> out;
  for (const auto& x : used)
    if (x.front() != '$' && !bound.contains(x)) out.insert(x);
  return out;
}

}  // namespace metacp
