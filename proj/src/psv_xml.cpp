#include "metacp/psv_xml.hpp"

#include <expat.h>

#include <charconv>
#include <memory>
#include <set>

namespace metacp {

namespace {

// ---------------------------------------------------------------------------
// Minimal DOM on top of expat
// ---------------------------------------------------------------------------

struct XmlElement {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::unique_ptr<XmlElement>> children;
  SourceLocation location;
  std::optional<SourceLocation> stray_text;

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return &v;
    return nullptr;
  }
};

struct DomBuilder {
  XML_Parser parser = nullptr;
  std::unique_ptr<XmlElement> root;
  std::vector<XmlElement*> open;
  std::optional<Diagnostic> abort_reason;

  SourceLocation here() const {
    return SourceLocation{static_cast<int>(XML_GetCurrentLineNumber(parser)),
                          static_cast<int>(XML_GetCurrentColumnNumber(parser)) + 1};
  }

  void abort(std::string message) {
    if (!abort_reason) abort_reason = make_error(codes::Dtd, std::move(message), here());
    XML_StopParser(parser, XML_FALSE);
  }

  static void on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
    auto* self = static_cast<DomBuilder*>(data);
    auto element = std::make_unique<XmlElement>();
    element->name = name;
    element->location = self->here();
    for (std::size_t i = 0; attrs[i]; i += 2) element->attributes.emplace_back(attrs[i], attrs[i + 1]);
    XmlElement* raw = element.get();
    if (self->open.empty()) {
      self->root = std::move(element);
    } else {
      self->open.back()->children.push_back(std::move(element));
    }
    self->open.push_back(raw);
  }

  static void on_end(void* data, const XML_Char*) {
    auto* self = static_cast<DomBuilder*>(data);
    if (!self->open.empty()) self->open.pop_back();
  }

  static void on_text(void* data, const XML_Char* s, int len) {
    auto* self = static_cast<DomBuilder*>(data);
    if (self->open.empty()) return;
    for (int i = 0; i < len; ++i) {
      const char c = s[i];
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') {
        if (!self->open.back()->stray_text) self->open.back()->stray_text = self->here();
        return;
      }
    }
  }

  static void on_doctype(void* data, const XML_Char*, const XML_Char*, const XML_Char*, int) {
    static_cast<DomBuilder*>(data)->abort("document type declarations are not allowed");
  }

  static void on_entity(void* data, const XML_Char*, int, const XML_Char*, int, const XML_Char*,
                        const XML_Char*, const XML_Char*, const XML_Char*) {
    static_cast<DomBuilder*>(data)->abort("entity declarations are not allowed");
  }
};

struct ParserDeleter {
  void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

std::unique_ptr<XmlElement> read_dom(std::string_view input, std::vector<Diagnostic>& diags) {
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) {
    diags.push_back(make_error(codes::XmlSyntax, "cannot allocate XML parser"));
    return nullptr;
  }
  DomBuilder dom;
  dom.parser = parser.get();
  XML_SetUserData(parser.get(), &dom);
  XML_SetElementHandler(parser.get(), &DomBuilder::on_start, &DomBuilder::on_end);
  XML_SetCharacterDataHandler(parser.get(), &DomBuilder::on_text);
  XML_SetStartDoctypeDeclHandler(parser.get(), &DomBuilder::on_doctype);
  XML_SetEntityDeclHandler(parser.get(), &DomBuilder::on_entity);
  XML_SetParamEntityParsing(parser.get(), XML_PARAM_ENTITY_PARSING_NEVER);

  const auto status = XML_Parse(parser.get(), input.data(), static_cast<int>(input.size()), XML_TRUE);
  if (dom.abort_reason) {
    diags.push_back(*dom.abort_reason);
    return nullptr;
  }
  if (status != XML_STATUS_OK) {
    const auto code = XML_GetErrorCode(parser.get());
    diags.push_back(make_error(
        codes::XmlSyntax, std::string("malformed XML: ") + XML_ErrorString(code),
        SourceLocation{static_cast<int>(XML_GetCurrentLineNumber(parser.get())),
                       static_cast<int>(XML_GetCurrentColumnNumber(parser.get())) + 1}));
    return nullptr;
  }
  return std::move(dom.root);
}

// ---------------------------------------------------------------------------
// Schema layer
// ---------------------------------------------------------------------------

class SchemaReader {
 public:
  explicit SchemaReader(std::vector<Diagnostic>& diags) : diags_(diags) {}

  std::optional<PsvDocument> read(const XmlElement& root);

 private:
  void error(std::string_view code, std::string message, const XmlElement& at) {
    diags_.push_back(make_error(code, std::move(message), at.location, current_step_));
  }

  bool check_attributes(const XmlElement& e, std::initializer_list<std::string_view> allowed) {
    bool ok = true;
    for (const auto& [k, v] : e.attributes) {
      bool known = false;
      for (auto a : allowed) known = known || a == k;
      if (!known) {
        error(codes::Schema, "unknown attribute '" + k + "' on <" + e.name + ">", e);
        ok = false;
      }
    }
    if (e.stray_text) {
      diags_.push_back(make_error(codes::Schema, "unexpected text inside <" + e.name + ">",
                                  e.stray_text, current_step_));
      ok = false;
    }
    return ok;
  }

  const std::string* required(const XmlElement& e, std::string_view key) {
    const auto* v = e.attribute(key);
    if (!v) error(codes::Schema, "<" + e.name + "> is missing attribute '" + std::string(key) + "'", e);
    return v;
  }

  bool no_children(const XmlElement& e) {
    if (e.children.empty()) return true;
    error(codes::Schema, "<" + e.name + "> must be empty", *e.children.front());
    return false;
  }

  std::optional<int> integer(const XmlElement& e, std::string_view key) {
    const auto* v = required(e, key);
    if (!v) return std::nullopt;
    int out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size() || out < 0 || v->empty()) {
      error(codes::Schema, "attribute '" + std::string(key) + "' of <" + e.name +
                               "> must be a non-negative integer",
            e);
      return std::nullopt;
    }
    return out;
  }

  std::optional<Term> term(const XmlElement& e);
  std::optional<Term> single_term(const XmlElement& holder);

  void read_declarations(const XmlElement& e);
  void read_roles(const XmlElement& e);
  void read_exchange(const XmlElement& e);
  void read_goals(const XmlElement& e);

  std::vector<Diagnostic>& diags_;
  std::optional<int> current_step_;
  BundleSet bundles_;
  std::vector<FunctionSymbol> functions_;
  std::optional<SpecBuilder> builder_;

  std::optional<FunctionSymbol> lookup(std::string_view fn) const {
    for (const auto& f : functions_)
      if (f.name == fn) return f;
    for (Bundle b : bundles_)
      for (const auto& s : theory_bundle(b).symbols)
        if (s.name == fn) return s;
    return std::nullopt;
  }
};

std::optional<Term> SchemaReader::term(const XmlElement& e) {
  if (e.name == "var" || e.name == "const") {
    const bool is_var = e.name == "var";
    bool ok = check_attributes(e, {"name", "sort"});
    const auto* name = required(e, "name");
    ok = no_children(e) && ok;
    Sort sort = is_var ? Sort::Message : Sort::Public;
    if (const auto* s = e.attribute("sort")) {
      if (*s == "msg") {
        sort = Sort::Message;
      } else if (*s == "pub") {
        sort = Sort::Public;
      } else if (*s == "fresh" && is_var) {
        sort = Sort::Fresh;
      } else {
        error(codes::SortError, "invalid sort '" + *s + "' on <" + e.name + ">", e);
        ok = false;
      }
    }
    if (!ok || !name) return std::nullopt;
    return is_var ? Term::var(*name, sort) : Term::constant(*name, sort);
  }
  if (e.name == "apply") {
    bool ok = check_attributes(e, {"fun"});
    const auto* fun = required(e, "fun");
    std::vector<Term> args;
    for (const auto& c : e.children) {
      auto t = term(*c);
      if (t) args.push_back(*t);
      else ok = false;
    }
    if (!ok || !fun) return std::nullopt;
    auto symbol = lookup(*fun);
    if (!symbol) {
      error(codes::Reference, "undeclared function '" + *fun + "'", e);
      return std::nullopt;
    }
    if (symbol->arity != args.size()) {
      error(codes::SortError,
            "symbol '" + *fun + "' expects arity " + std::to_string(symbol->arity) + ", got " +
                std::to_string(args.size()),
            e);
      return std::nullopt;
    }
    return Term::apply(*symbol, std::move(args));
  }
  if (e.name == "tuple") {
    bool ok = check_attributes(e, {});
    std::vector<Term> items;
    for (const auto& c : e.children) {
      auto t = term(*c);
      if (t) items.push_back(*t);
      else ok = false;
    }
    if (!ok) return std::nullopt;
    if (items.size() < 2) {
      error(codes::Schema, "<tuple> needs at least two terms", e);
      return std::nullopt;
    }
    return Term::tuple(std::move(items));
  }
  error(codes::Schema, "unknown term element <" + e.name + ">", e);
  return std::nullopt;
}

std::optional<Term> SchemaReader::single_term(const XmlElement& holder) {
  if (holder.children.size() != 1) {
    error(codes::Schema, "<" + holder.name + "> must contain exactly one term", holder);
    for (const auto& c : holder.children) (void)term(*c);
    return std::nullopt;
  }
  return term(*holder.children.front());
}

void SchemaReader::read_declarations(const XmlElement& e) {
  check_attributes(e, {});
  // bundle* function* equation*
  int stage = 0;
  for (const auto& child : e.children) {
    const auto& c = *child;
    int want = c.name == "bundle" ? 0 : c.name == "function" ? 1 : c.name == "equation" ? 2 : -1;
    if (want < 0) {
      error(codes::Schema, "unknown element <" + c.name + "> in <declarations>", c);
      continue;
    }
    if (want < stage) {
      error(codes::Schema, "<" + c.name + "> out of order in <declarations>", c);
      continue;
    }
    stage = want;
    if (want == 0) {
      if (!check_attributes(c, {"name"}) || !no_children(c)) continue;
      const auto* name = required(c, "name");
      if (!name) continue;
      auto b = bundle_from_name(*name);
      if (!b) {
        error(codes::Schema, "unknown bundle '" + *name + "'", c);
      } else if (!bundles_.insert(*b).second) {
        error(codes::Schema, "bundle '" + *name + "' listed twice", c);
      } else {
        builder_->bundle(*b);
      }
    } else if (want == 1) {
      bool ok = check_attributes(c, {"name", "arity", "visibility"}) && no_children(c);
      const auto* name = required(c, "name");
      auto arity = integer(c, "arity");
      Visibility vis = Visibility::Public;
      if (const auto* v = c.attribute("visibility")) {
        if (*v == "private") vis = Visibility::Private;
        else if (*v != "public") {
          error(codes::Schema, "invalid visibility '" + *v + "'", c);
          ok = false;
        }
      }
      if (!ok || !name || !arity) continue;
      FunctionSymbol f{*name, static_cast<std::size_t>(*arity), vis};
      functions_.push_back(f);
      builder_->function(f, c.location);
    } else {
      bool ok = check_attributes(c, {"orientation"});
      const auto* o = required(c, "orientation");
      Orientation orientation = Orientation::Destructor;
      if (o && *o == "unoriented") orientation = Orientation::Unoriented;
      else if (o && *o != "destructor") {
        error(codes::Schema, "invalid orientation '" + *o + "'", c);
        ok = false;
      }
      if (c.children.size() != 2 || c.children[0]->name != "lhs" || c.children[1]->name != "rhs") {
        error(codes::Schema, "<equation> must contain <lhs> followed by <rhs>", c);
        continue;
      }
      ok = check_attributes(*c.children[0], {}) && ok;
      ok = check_attributes(*c.children[1], {}) && ok;
      auto lhs = single_term(*c.children[0]);
      auto rhs = single_term(*c.children[1]);
      if (!ok || !o || !lhs || !rhs) continue;
      builder_->equation(Equation{*lhs, *rhs, orientation}, c.location);
    }
  }
}

void SchemaReader::read_roles(const XmlElement& e) {
  check_attributes(e, {});
  if (e.children.empty()) error(codes::EmptyProtocol, "<roles> needs at least one <role>", e);
  for (const auto& child : e.children) {
    const auto& r = *child;
    if (r.name != "role") {
      error(codes::Schema, "unknown element <" + r.name + "> in <roles>", r);
      continue;
    }
    bool ok = check_attributes(r, {"name"});
    const auto* name = required(r, "name");
    Role role;
    if (name) role.name = *name;
    int stage = 0;
    for (const auto& item : r.children) {
      const auto& c = *item;
      int want = c.name == "knows" ? 0 : c.name == "fresh" ? 1 : c.name == "ltk" ? 2 : -1;
      if (want < 0) {
        error(codes::Schema, "unknown element <" + c.name + "> in <role>", c);
        ok = false;
        continue;
      }
      if (want < stage) {
        error(codes::Schema, "<" + c.name + "> out of order in <role>", c);
        ok = false;
        continue;
      }
      stage = want;
      if (want == 0) {
        ok = check_attributes(c, {}) && ok;
        auto t = single_term(c);
        if (t) role.initial_knowledge.push_back(*t);
        else ok = false;
      } else if (want == 1) {
        const auto* fresh = required(c, "name");
        ok = check_attributes(c, {"name"}) && no_children(c) && fresh && ok;
        if (fresh) role.fresh_values.push_back(Term::var(*fresh, Sort::Fresh));
      } else {
        const auto* key = required(c, "name");
        const auto* kind = required(c, "kind");
        ok = check_attributes(c, {"name", "kind"}) && no_children(c) && key && kind && ok;
        KeyKind k = KeyKind::AsymmetricPrivate;
        if (kind && *kind == "symmetric") k = KeyKind::Symmetric;
        else if (kind && *kind != "asymmetric") {
          error(codes::Schema, "invalid key kind '" + *kind + "'", c);
          ok = false;
        }
        if (key) role.long_term_keys.push_back(LongTermKey{Term::var(*key, Sort::Fresh), k});
      }
    }
    if (ok && name) builder_->role(std::move(role), r.location);
  }
}

void SchemaReader::read_exchange(const XmlElement& e) {
  check_attributes(e, {});
  int position = 0;
  for (const auto& child : e.children) {
    const auto& m = *child;
    ++position;
    current_step_ = position;
    if (m.name != "message") {
      error(codes::Schema, "unknown element <" + m.name + "> in <exchange>", m);
      continue;
    }
    bool ok = check_attributes(m, {"index", "from", "to", "delivery"});
    auto index = integer(m, "index");
    if (index) current_step_ = *index;
    const auto* from = required(m, "from");
    const auto* to = required(m, "to");
    Delivery delivery = Delivery::Decompose;
    if (const auto* d = m.attribute("delivery")) {
      if (*d == "atomic") delivery = Delivery::Atomic;
      else if (*d != "decompose") {
        error(codes::Schema, "invalid delivery '" + *d + "'", m);
        ok = false;
      }
    }
    auto payload = single_term(m);
    if (ok && index && from && to && payload)
      builder_->message(MessageStep{*index, *from, *to, *payload, delivery}, m.location);
  }
  current_step_.reset();
}

void SchemaReader::read_goals(const XmlElement& e) {
  check_attributes(e, {});
  for (const auto& child : e.children) {
    const auto& g = *child;
    if (g.name == "secrecy") {
      bool ok = check_attributes(g, {"role"});
      const auto* role = required(g, "role");
      auto t = single_term(g);
      if (ok && role && t) builder_->goal(SecrecyGoal{*t, *role}, g.location);
    } else if (g.name == "agreement") {
      bool ok = check_attributes(g, {"claimer", "peer"});
      const auto* claimer = required(g, "claimer");
      const auto* peer = required(g, "peer");
      std::vector<Term> terms;
      for (const auto& on : g.children) {
        if (on->name != "on") {
          error(codes::Schema, "unknown element <" + on->name + "> in <agreement>", *on);
          ok = false;
          continue;
        }
        ok = check_attributes(*on, {}) && ok;
        auto t = single_term(*on);
        if (t) terms.push_back(*t);
        else ok = false;
      }
      if (terms.empty() && ok) {
        error(codes::Schema, "<agreement> needs at least one <on>", g);
        ok = false;
      }
      if (ok && claimer && peer) builder_->goal(AgreementGoal{*claimer, *peer, terms}, g.location);
    } else {
      error(codes::Schema, "unknown element <" + g.name + "> in <goals>", g);
    }
  }
}

std::optional<PsvDocument> SchemaReader::read(const XmlElement& root) {
  if (root.name != "protocol") {
    error(codes::Schema, "root element must be <protocol>, found <" + root.name + ">", root);
    return std::nullopt;
  }
  check_attributes(root, {"name", "format"});
  const auto* name = required(root, "name");
  const auto* format = required(root, "format");
  if (format && *format != kPsvFormatVersion) {
    error(codes::Version, "unsupported format version '" + *format + "', expected '" +
                              std::string(kPsvFormatVersion) + "'",
          root);
    return std::nullopt;
  }
  builder_.emplace(name ? *name : std::string());

  static const char* const order[] = {"declarations", "roles", "exchange", "goals"};
  int next = 0;
  bool saw_roles = false;
  for (const auto& child : root.children) {
    const auto& c = *child;
    int slot = -1;
    for (int i = 0; i < 4; ++i)
      if (c.name == order[i]) slot = i;
    if (slot < 0) {
      error(codes::Schema, "unknown element <" + c.name + "> in <protocol>", c);
      continue;
    }
    if (slot < next) {
      error(codes::Schema, "<" + c.name + "> is duplicated or out of order", c);
      continue;
    }
    next = slot + 1;
    switch (slot) {
      case 0: read_declarations(c); break;
      case 1: read_roles(c); saw_roles = true; break;
      case 2: read_exchange(c); break;
      case 3: read_goals(c); break;
    }
  }
  if (!saw_roles) error(codes::Schema, "<protocol> is missing <roles>", root);
  if (has_errors(diags_)) return std::nullopt;

  auto built = builder_->build();
  diags_.insert(diags_.end(), built.diagnostics.begin(), built.diagnostics.end());
  if (!built.spec) return std::nullopt;
  PsvDocument doc;
  doc.spec = std::move(*built.spec);
  doc.sources = builder_->source_map();
  return doc;
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

class Writer {
 public:
  std::string take() { return std::move(out_); }

  void line(int depth, std::string_view text) {
    out_.append(static_cast<std::size_t>(depth) * 2, ' ');
    out_ += text;
    out_ += '\n';
  }

  static std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
      }
    }
    return out;
  }

  // Attributes must already be in alphabetical order.
  static std::string tag(std::string_view name,
                         std::initializer_list<std::pair<std::string_view, std::string>> attrs) {
    std::string out = "<" + std::string(name);
    for (const auto& [k, v] : attrs) {
      out += ' ';
      out += k;
      out += "=\"";
      out += escape(v);
      out += '"';
    }
    return out;
  }

  void term(int depth, const Term& t) {
    switch (t.kind()) {
      case Term::Kind::Var:
        if (t.sort() == Sort::Message) line(depth, tag("var", {{"name", t.name()}}) + "/>");
        else line(depth, tag("var", {{"name", t.name()}, {"sort", std::string(to_string(t.sort()))}}) + "/>");
        break;
      case Term::Kind::Const:
        if (t.sort() == Sort::Public) line(depth, tag("const", {{"name", t.name()}}) + "/>");
        else line(depth, tag("const", {{"name", t.name()}, {"sort", std::string(to_string(t.sort()))}}) + "/>");
        break;
      case Term::Kind::Apply:
        if (t.args().empty()) {
          line(depth, tag("apply", {{"fun", t.name()}}) + "/>");
        } else {
          line(depth, tag("apply", {{"fun", t.name()}}) + ">");
          for (const auto& a : t.args()) term(depth + 1, a);
          line(depth, "</apply>");
        }
        break;
      case Term::Kind::Tuple:
        line(depth, "<tuple>");
        for (const auto& a : t.args()) term(depth + 1, a);
        line(depth, "</tuple>");
        break;
    }
  }

  void wrapped(int depth, const std::string& open, std::string_view close, const Term& t) {
    line(depth, open + ">");
    term(depth + 1, t);
    line(depth, close);
  }

 private:
  std::string out_;
};

}  // namespace

ParseResult parse_psv(std::string_view input, const ParseOptions& options) {
  ParseResult result;
  if (input.size() > options.max_bytes) {
    result.diagnostics.push_back(make_error(
        codes::SizeLimit, "document is " + std::to_string(input.size()) + " bytes, limit is " +
                              std::to_string(options.max_bytes)));
    return result;
  }
  auto root = read_dom(input, result.diagnostics);
  if (!root) return result;
  SchemaReader reader(result.diagnostics);
  result.document = reader.read(*root);
  return result;
}

std::vector<Diagnostic> validate_schema(std::string_view input, const ParseOptions& options) {
  return parse_psv(input, options).diagnostics;
}

std::string serialize_psv(const ProtocolSpec& spec) {
  PsvDocument doc;
  doc.spec = spec;
  return serialize_psv(doc);
}

std::string serialize_psv(const PsvDocument& doc) {
  const auto& spec = doc.spec;
  Writer w;
  w.line(0, "<?xml version=\"" + doc.xml_version + "\" encoding=\"UTF-8\"?>");
  w.line(0, Writer::tag("protocol", {{"format", doc.format_version}, {"name", spec.name}}) + ">");

  if (spec.bundles.empty() && spec.signature.empty() && spec.equations.empty()) {
    w.line(1, "<declarations/>");
  } else {
    w.line(1, "<declarations>");
    for (Bundle b : spec.bundles) w.line(2, Writer::tag("bundle", {{"name", std::string(bundle_name(b))}}) + "/>");
    for (const auto& f : spec.signature) {
      w.line(2, Writer::tag("function", {{"arity", std::to_string(f.arity)},
                                         {"name", f.name},
                                         {"visibility", f.visibility == Visibility::Public ? "public" : "private"}}) +
                    "/>");
    }
    for (const auto& eq : spec.equations) {
      w.line(2, Writer::tag("equation", {{"orientation", eq.orientation == Orientation::Destructor
                                                             ? "destructor"
                                                             : "unoriented"}}) +
                    ">");
      w.wrapped(3, "<lhs", "</lhs>", eq.lhs);
      w.wrapped(3, "<rhs", "</rhs>", eq.rhs);
      w.line(2, "</equation>");
    }
    w.line(1, "</declarations>");
  }

  w.line(1, "<roles>");
  for (const auto& r : spec.roles) {
    if (r.initial_knowledge.empty() && r.fresh_values.empty() && r.long_term_keys.empty()) {
      w.line(2, Writer::tag("role", {{"name", r.name}}) + "/>");
      continue;
    }
    w.line(2, Writer::tag("role", {{"name", r.name}}) + ">");
    for (const auto& t : r.initial_knowledge) w.wrapped(3, "<knows", "</knows>", t);
    for (const auto& f : r.fresh_values) w.line(3, Writer::tag("fresh", {{"name", f.name()}}) + "/>");
    for (const auto& k : r.long_term_keys) {
      w.line(3, Writer::tag("ltk", {{"kind", k.kind == KeyKind::Symmetric ? "symmetric" : "asymmetric"},
                                    {"name", k.key.name()}}) +
                    "/>");
    }
    w.line(2, "</role>");
  }
  w.line(1, "</roles>");

  if (spec.exchange.empty()) {
    w.line(1, "<exchange/>");
  } else {
    w.line(1, "<exchange>");
    for (const auto& m : spec.exchange) {
      std::string open =
          m.delivery == Delivery::Atomic
              ? Writer::tag("message", {{"delivery", "atomic"},
                                        {"from", m.from},
                                        {"index", std::to_string(m.index)},
                                        {"to", m.to}})
              : Writer::tag("message", {{"from", m.from}, {"index", std::to_string(m.index)}, {"to", m.to}});
      w.wrapped(2, open, "</message>", m.payload);
    }
    w.line(1, "</exchange>");
  }

  if (spec.goals.empty()) {
    w.line(1, "<goals/>");
  } else {
    w.line(1, "<goals>");
    for (const auto& g : spec.goals) {
      if (const auto* s = std::get_if<SecrecyGoal>(&g)) {
        w.wrapped(2, Writer::tag("secrecy", {{"role", s->role}}), "</secrecy>", s->term);
      } else {
        const auto& a = std::get<AgreementGoal>(g);
        w.line(2, Writer::tag("agreement", {{"claimer", a.claimer}, {"peer", a.peer}}) + ">");
        for (const auto& t : a.terms) w.wrapped(3, "<on", "</on>", t);
        w.line(2, "</agreement>");
      }
    }
    w.line(1, "</goals>");
  }
  w.line(0, "</protocol>");
  return w.take();
}

}  // namespace metacp
