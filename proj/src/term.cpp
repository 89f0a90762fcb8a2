#include "metacp/term.hpp"

#include <algorithm>
#include <unordered_set>

namespace metacp {

std::string_view to_string(Sort sort) {
  switch (sort) {
    case Sort::Message: return "msg";
    case Sort::Fresh: return "fresh";
    case Sort::Public: return "pub";
  }
  return "msg";
}

bool sort_accepts(Sort expected, Sort actual) {
  return expected == Sort::Message || expected == actual;
}

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(name.front())) return false;
  return std::all_of(name.begin(), name.end(),
                     [&](char c) { return alpha(c) || digit(c) || c == '_'; });
}

struct Term::Node {
  Kind kind;
  std::string name;
  Sort sort = Sort::Message;
  FunctionSymbol symbol;
  std::vector<Term> args;
  std::string printed;
  std::size_t hash = 0;
  std::size_t size = 1;
  std::size_t depth = 1;
};

namespace {

std::string print_node(Term::Kind kind, const std::string& name, Sort sort,
                       const std::vector<Term>& args) {
  std::string out;
  switch (kind) {
    case Term::Kind::Var:
      if (sort == Sort::Fresh) out += '~';
      if (sort == Sort::Public) out += '$';
      out += name;
      break;
    case Term::Kind::Const: {
      const char quote = sort == Sort::Public ? '\'' : '"';
      out += quote;
      out += name;
      out += quote;
      break;
    }
    case Term::Kind::Apply:
      out += name;
      out += '(';
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ',';
        out += args[i].str();
      }
      out += ')';
      break;
    case Term::Kind::Tuple:
      out += '<';
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ',';
        out += args[i].str();
      }
      out += '>';
      break;
  }
  return out;
}

}  // namespace

Term Term::var(std::string name, Sort sort) {
  auto node = std::make_shared<Node>();
  node->kind = Kind::Var;
  node->name = std::move(name);
  node->sort = sort;
  node->printed = print_node(node->kind, node->name, sort, node->args);
  node->hash = std::hash<std::string>{}(node->printed);
  return Term(std::move(node));
}

Term Term::constant(std::string name, Sort sort) {
  if (sort == Sort::Fresh) throw SortMismatch("constants cannot have sort fresh");
  auto node = std::make_shared<Node>();
  node->kind = Kind::Const;
  node->name = std::move(name);
  node->sort = sort;
  node->printed = print_node(node->kind, node->name, sort, node->args);
  node->hash = std::hash<std::string>{}(node->printed);
  return Term(std::move(node));
}

Term Term::apply(FunctionSymbol symbol, std::vector<Term> args) {
  if (args.size() != symbol.arity) {
    throw std::invalid_argument("symbol " + symbol.name + " expects " +
                                std::to_string(symbol.arity) + " arguments, got " +
                                std::to_string(args.size()));
  }
  auto node = std::make_shared<Node>();
  node->kind = Kind::Apply;
  node->name = symbol.name;
  node->symbol = std::move(symbol);
  node->args = std::move(args);
  for (const auto& a : node->args) {
    node->size += a.size();
    node->depth = std::max(node->depth, a.depth() + 1);
  }
  node->printed = print_node(node->kind, node->name, node->sort, node->args);
  node->hash = std::hash<std::string>{}(node->printed);
  return Term(std::move(node));
}

Term Term::tuple(std::vector<Term> items) {
  if (items.size() < 2) throw std::invalid_argument("tuples need at least two items");
  auto node = std::make_shared<Node>();
  node->kind = Kind::Tuple;
  node->args = std::move(items);
  for (const auto& a : node->args) {
    node->size += a.size();
    node->depth = std::max(node->depth, a.depth() + 1);
  }
  node->printed = print_node(node->kind, node->name, node->sort, node->args);
  node->hash = std::hash<std::string>{}(node->printed);
  return Term(std::move(node));
}

Term::Kind Term::kind() const { return node_->kind; }
const std::string& Term::name() const { return node_->name; }
Sort Term::sort() const { return node_->sort; }
const FunctionSymbol& Term::symbol() const { return node_->symbol; }
const std::vector<Term>& Term::args() const { return node_->args; }
const std::string& Term::str() const { return node_->printed; }
std::size_t Term::size() const { return node_->size; }
std::size_t Term::depth() const { return node_->depth; }
std::size_t Term::hash() const { return node_->hash; }

bool operator==(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return true;
  return a.node_->hash == b.node_->hash && a.node_->printed == b.node_->printed;
}

std::strong_ordering operator<=>(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return std::strong_ordering::equal;
  const int c = a.node_->printed.compare(b.node_->printed);
  if (c < 0) return std::strong_ordering::less;
  if (c > 0) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::vector<Term> subterms(const Term& t) {
  std::vector<Term> out;
  std::unordered_set<Term, TermHash> seen;
  std::vector<Term> stack{t};
  while (!stack.empty()) {
    Term cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    out.push_back(cur);
    const auto& kids = cur.args();
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<Term> variables(const Term& t) {
  std::vector<Term> out;
  for (auto& s : subterms(t))
    if (s.is_var()) out.push_back(s);
  return out;
}

bool occurs(const Term& needle, const Term& haystack) {
  if (needle == haystack) return true;
  if (needle.size() >= haystack.size()) return false;
  for (const auto& a : haystack.args())
    if (occurs(needle, a)) return true;
  return false;
}

Term transform(const Term& t, const std::function<Term(const Term&)>& fn) {
  switch (t.kind()) {
    case Term::Kind::Var:
    case Term::Kind::Const:
      return fn(t);
    case Term::Kind::Apply:
    case Term::Kind::Tuple: {
      std::vector<Term> kids;
      kids.reserve(t.args().size());
      bool changed = false;
      for (const auto& a : t.args()) {
        kids.push_back(transform(a, fn));
        changed = changed || !(kids.back() == a);
      }
      if (!changed) return fn(t);
      return fn(t.is_apply() ? Term::apply(t.symbol(), std::move(kids))
                             : Term::tuple(std::move(kids)));
    }
  }
  return t;
}

Term substitute(const Term& t, const Binding& binding) {
  for (const auto& [var, value] : binding) {
    if (!var.is_var()) throw std::invalid_argument("binding key " + var.str() + " is not a variable");
    if (!sort_accepts(var.sort(), value.sort())) {
      throw SortMismatch("cannot bind " + var.str() + " (sort " + std::string(to_string(var.sort())) +
                         ") to " + value.str() + " (sort " + std::string(to_string(value.sort())) + ")");
    }
  }
  if (binding.empty()) return t;
  return transform(t, [&](const Term& node) {
    if (!node.is_var()) return node;
    auto it = binding.find(node);
    return it == binding.end() ? node : it->second;
  });
}

}  // namespace metacp
