// Acceptance suite: one PASS/FAIL/SKIP line per criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "digest.hpp"
#include "metacp/analysis.hpp"
#include "metacp/fixtures.hpp"
#include "metacp/psv_xml.hpp"
#include "metacp/tamarin.hpp"
#include "mutations.hpp"
#include "oracle.hpp"
#include "random_spec.hpp"
#include "temp_dir.hpp"

using namespace metacp;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kRandomSeed = 20240611;
constexpr int kRandomSpecs = 500;
constexpr double kRoundTripBudgetSeconds = 10.0;
constexpr double kOracleBudgetSeconds = 60.0;
constexpr int kDeterminismRuns = 100;
constexpr double kSizeTolerance = 0.5;
constexpr double kProverTimeFactor = 10.0;

enum class Outcome { Pass, Fail, Skip };

struct Line {
  Outcome outcome;
  std::string criterion;
  std::string detail;
};

std::vector<Line> lines;

void report(Outcome o, std::string criterion, std::string detail) {
  static const char* tags[] = {"PASS", "FAIL", "SKIP"};
  std::cout << tags[static_cast<int>(o)] << "  " << criterion << ": " << detail << "\n" << std::flush;
  lines.push_back({o, std::move(criterion), std::move(detail)});
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_seconds(double s) {
  std::ostringstream ss;
  ss.precision(2);
  ss << std::fixed << s << " s";
  return ss.str();
}

ProtocolSpec fixture_spec(std::string_view name) { return parse_psv(*find_fixture(name)).document->spec; }

std::vector<ProtocolSpec> random_specs() {
  testing::RandomSpecGenerator gen(kRandomSeed);
  std::vector<ProtocolSpec> specs;
  for (int i = 0; i < kRandomSpecs; ++i) specs.push_back(gen.next());
  return specs;
}

void round_trip(const std::vector<ProtocolSpec>& specs, double generation_seconds) {
  const auto start = Clock::now();
  int failures = 0;
  std::string first_failure;
  for (const auto& f : bundled_fixtures()) {
    auto parsed = parse_psv(f.text);
    if (!parsed.ok() || serialize_psv(*parsed.document) != f.text) {
      ++failures;
      if (first_failure.empty()) first_failure = std::string(f.name);
    }
  }
  for (const auto& spec : specs) {
    const std::string text = serialize_psv(spec);
    auto parsed = parse_psv(text);
    if (!parsed.ok() || !(parsed.document->spec == spec) || serialize_psv(*parsed.document) != text) {
      ++failures;
      if (first_failure.empty()) first_failure = spec.name;
    }
  }
  const double elapsed = seconds_since(start) + generation_seconds;
  const bool ok = failures == 0 && elapsed < kRoundTripBudgetSeconds;
  report(ok ? Outcome::Pass : Outcome::Fail, "round-trip",
         std::to_string(bundled_fixtures().size()) + " fixtures + " + std::to_string(specs.size()) +
             " random specs, " + std::to_string(failures) + " mismatches (tolerance 0)" +
             (first_failure.empty() ? "" : ", first " + first_failure) + ", " + fmt_seconds(elapsed) +
             " including generation (budget " + fmt_seconds(kRoundTripBudgetSeconds) + ")");
}

void oracle_equivalence() {
  const auto start = Clock::now();
  const FunctionSymbol senc{"senc", 2, Visibility::Public};
  const Term a = Term::var("a"), b = Term::var("b"), k1 = Term::var("k1"), k2 = Term::var("k2");
  auto enc = [&](const Term& m, const Term& k) { return Term::apply(senc, {m, k}); };
  auto pair = [](const Term& x, const Term& y) { return Term::tuple({x, y}); };
  const std::vector<Term> pool = {
      a, b, k1, k2,
      pair(a, b),
      enc(a, k1),
      enc(b, k2),
      enc(k2, k1),
      enc(pair(a, b), k2),
      pair(k1, enc(a, k2)),
      enc(enc(a, k1), k2),
      pair(enc(b, k1), k2),
  };
  const auto goals = testing::enumerate_terms({a, b, k1, k2}, senc, 3);

  std::vector<Term> seeds = pool;
  seeds.insert(seeds.end(), goals.begin(), goals.end());
  const testing::ClosureOracle oracle(seeds);
  const TheoryContext ctx(BundleSet{Bundle::SymmetricEncryption, Bundle::Pairing});

  std::vector<std::vector<Term>> sets{{}};
  for (std::size_t size = 1; size <= 4; ++size) {
    std::vector<std::size_t> idx(size);
    std::function<void(std::size_t, std::size_t)> choose = [&](std::size_t pos, std::size_t from) {
      if (pos == size) {
        std::vector<Term> s;
        for (auto i : idx) s.push_back(pool[i]);
        sets.push_back(std::move(s));
        return;
      }
      for (std::size_t i = from; i < pool.size(); ++i) {
        idx[pos] = i;
        choose(pos + 1, i + 1);
      }
    };
    choose(0, 0);
  }

  long comparisons = 0, disagreements = 0;
  int max_rounds = 0;
  std::string example;
  for (const auto& set : sets) {
    const auto closure = oracle.close(set);
    max_rounds = std::max(max_rounds, closure.rounds);
    const TermSet saturated = saturate(TermSet(set.begin(), set.end()), ctx);
    for (const auto& goal : goals) {
      ++comparisons;
      const bool lib = derivable(saturated, goal, ctx);
      const bool ref = closure.terms.contains(goal);
      if (lib != ref) {
        ++disagreements;
        if (example.empty()) {
          example = "goal " + goal.str() + " from {";
          for (const auto& t : set) example += t.str() + " ";
          example += "}";
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  const bool ok = disagreements == 0 && elapsed < kOracleBudgetSeconds;
  report(ok ? Outcome::Pass : Outcome::Fail, "derivability oracle equivalence",
         std::to_string(sets.size()) + " knowledge sets x " + std::to_string(goals.size()) + " goals = " +
             std::to_string(comparisons) + " comparisons, " + std::to_string(disagreements) +
             " disagreements (tolerance 0), oracle fixpoint within " + std::to_string(max_rounds) + " rounds, " +
             fmt_seconds(elapsed) + " (budget " + fmt_seconds(kOracleBudgetSeconds) + ")" +
             (example.empty() ? "" : ", e.g. " + example));
}

void executability() {
  std::vector<std::string> problems;
  for (const auto& f : bundled_fixtures())
    if (!check_executability(fixture_spec(f.name)).ok) problems.push_back(std::string(f.name) + " not executable");
  for (const auto& m : testing::documented_mutations()) {
    auto outcome = testing::run_mutation(m);
    if (!outcome.ok)
      problems.push_back(m.name + ": expected " + m.expected_code + "@" + std::to_string(m.expected_step) +
                         ", got " + outcome.observed);
  }
  std::string detail = "3 fixtures ok=true; " + std::to_string(testing::documented_mutations().size()) +
                       " mutations matched on code and step (exact)";
  for (const auto& m : testing::documented_mutations())
    detail += "; " + m.name + " -> " + m.expected_code + "@" + std::to_string(m.expected_step);
  if (!problems.empty()) {
    detail = "";
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
  }
  report(problems.empty() ? Outcome::Pass : Outcome::Fail, "executability", detail);
}

void golden_files() {
  std::vector<std::string> problems;
  std::string digests;
  for (const auto& f : bundled_fixtures()) {
    const auto spec = fixture_spec(f.name);
    std::set<std::string> seen;
    std::string text;
    for (int i = 0; i < kDeterminismRuns; ++i) {
      auto result = compile_tamarin(spec);
      if (!result.theory) {
        problems.push_back(std::string(f.name) + " does not compile");
        break;
      }
      text = render_theory(*result.theory);
      seen.insert(testing::sha256_hex(text));
    }
    if (text != testing::read_golden(std::string(f.name) + ".spthy"))
      problems.push_back(std::string(f.name) + " differs from golden");
    if (seen.size() != 1) problems.push_back(std::string(f.name) + " has " + std::to_string(seen.size()) + " digests");
    digests += (digests.empty() ? "" : ", ") + std::string(f.name) + " " + (seen.empty() ? "-" : seen.begin()->substr(0, 12));
  }
  std::string detail = "byte-identical to goldens; " + std::to_string(kDeterminismRuns) +
                       " compilations per fixture, 1 digest each (" + digests + ")";
  if (!problems.empty()) {
    detail.clear();
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
  }
  report(problems.empty() ? Outcome::Pass : Outcome::Fail, "golden spthy files", detail);
}

void well_formedness(const std::vector<ProtocolSpec>& specs) {
  std::vector<ProtocolSpec> all;
  for (const auto& f : bundled_fixtures()) all.push_back(fixture_spec(f.name));
  all.insert(all.end(), specs.begin(), specs.end());
  long rules = 0, unbound = 0, count_mismatches = 0, failed = 0;
  std::string example;
  for (const auto& spec : all) {
    auto result = compile_tamarin(spec);
    if (!result.theory) {
      ++failed;
      if (example.empty())
        example = spec.name + " failed: " + (result.diagnostics.empty() ? "?" : result.diagnostics[0].message);
      continue;
    }
    std::size_t asym = 0;
    for (const auto& r : spec.roles)
      asym += std::any_of(r.long_term_keys.begin(), r.long_term_keys.end(),
                          [](const LongTermKey& k) { return k.kind == KeyKind::AsymmetricPrivate; });
    const auto& t = *result.theory;
    if (t.rules.size() != 2 * spec.exchange.size() + spec.roles.size() + asym) {
      ++count_mismatches;
      if (example.empty()) example = spec.name + " has " + std::to_string(t.rules.size()) + " rules";
    }
    for (const auto& rule : t.rules) {
      ++rules;
      auto free = unbound_variables(rule, t.nullary_functions);
      unbound += static_cast<long>(free.size());
      if (!free.empty() && example.empty()) example = spec.name + "/" + rule.name + " leaves " + *free.begin();
    }
  }
  const bool ok = unbound == 0 && count_mismatches == 0 && failed == 0;
  report(ok ? Outcome::Pass : Outcome::Fail, "generated-rule well-formedness",
         std::to_string(all.size()) + " theories, " + std::to_string(rules) + " rules scanned, " +
             std::to_string(unbound) + " unbound conclusion/action variables (tolerance 0), " +
             std::to_string(count_mismatches) + " rule-count mismatches against 2|exchange|+|roles|+|asym roles| (tolerance 0), " +
             std::to_string(failed) + " compile failures" + (example.empty() ? "" : ", e.g. " + example));
}

void size_sanity() {
  const std::array<std::pair<const char*, int>, 3> refs{{{"dhke", 85}, {"nsp", 118}, {"nslp", 90}}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, ref] : refs) {
    auto result = compile_tamarin(fixture_spec(name));
    const std::string text = result.theory ? render_theory(*result.theory) : "";
    const long n = std::count(text.begin(), text.end(), '\n');
    const double lo = ref * (1 - kSizeTolerance), hi = ref * (1 + kSizeTolerance);
    const bool in = n >= lo && n <= hi;
    ok = ok && in;
    std::ostringstream ss;
    ss << name << " " << n << " lines (reference " << ref << ", allowed " << lo << ".." << hi << ")";
    detail += (detail.empty() ? "" : "; ") + ss.str();
  }
  report(ok ? Outcome::Pass : Outcome::Fail, "size sanity", detail);
}

// ---------------------------------------------------------------------------
// Optional prover integration
// ---------------------------------------------------------------------------

std::optional<std::string> find_prover() {
  if (const char* env = std::getenv("TAMARIN_PROVER"); env && *env) return std::string(env);
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::stringstream ss(path);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    const auto candidate = std::filesystem::path(dir) / "tamarin-prover";
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec)) return candidate.string();
  }
  return std::nullopt;
}

struct ProverRun {
  bool ran = false;
  double seconds = 0;
  std::string output;
  std::map<std::string, std::string> verdicts;  // lemma -> verified / falsified / ...
  bool wellformed = true;
};

ProverRun run_prover(const std::string& prover, const std::string& theory_text) {
  testing::TempDir dir;
  const auto file = dir / "theory.spthy";
  testing::write_text(file, theory_text);
  const std::string cmd = "'" + prover + "' --prove '" + file.string() + "' 2>&1";
  ProverRun run;
  const auto start = Clock::now();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return run;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) run.output += buf.data();
  const int status = ::pclose(pipe);
  run.seconds = seconds_since(start);
  run.ran = WIFEXITED(status) && WEXITSTATUS(status) == 0;
  run.wellformed = run.output.find("WARNING") == std::string::npos ||
                   run.output.find("wellformedness") == std::string::npos;
  std::stringstream lines_in(run.output);
  std::string line;
  while (std::getline(lines_in, line)) {
    const auto colon = line.find(" (");
    const auto tail = line.find("): ");
    if (colon == std::string::npos || tail == std::string::npos) continue;
    std::string name = line.substr(0, colon);
    name.erase(0, name.find_first_not_of(' '));
    std::string verdict = line.substr(tail + 3);
    verdict = verdict.substr(0, verdict.find(' '));
    run.verdicts[name] = verdict;
  }
  return run;
}

void prover_integration(const std::optional<std::string>& prover) {
  const char* name = "prover integration";
  if (!prover) {
    report(Outcome::Skip, name, "tamarin-prover not found on PATH (set TAMARIN_PROVER to enable)");
    return;
  }
  struct Case {
    const char* fixture;
    double reference_seconds;
  };
  const Case cases[] = {{"dhke", 0.23}, {"nsp", 1.78}, {"nslp", 1.42}};
  std::vector<std::string> problems;
  std::string detail;
  std::map<std::string, ProverRun> runs;
  for (const auto& c : cases) {
    auto result = compile_tamarin(fixture_spec(c.fixture));
    auto run = run_prover(*prover, render_theory(*result.theory));
    runs[c.fixture] = run;
    if (!run.ran) problems.push_back(std::string(c.fixture) + ": prover failed");
    if (!run.wellformed) problems.push_back(std::string(c.fixture) + ": well-formedness warnings");
    if (run.seconds > kProverTimeFactor * c.reference_seconds)
      problems.push_back(std::string(c.fixture) + " took " + fmt_seconds(run.seconds) + " > " +
                         fmt_seconds(kProverTimeFactor * c.reference_seconds));
    detail += std::string(detail.empty() ? "" : "; ") + c.fixture + " " + fmt_seconds(run.seconds);
  }
  auto verdict = [&](const char* fixture, const char* lemma) {
    auto it = runs[fixture].verdicts.find(lemma);
    return it == runs[fixture].verdicts.end() ? std::string("missing") : it->second;
  };
  for (const char* f : {"dhke", "nslp"})
    if (verdict(f, "executable") != "verified") problems.push_back(std::string(f) + " executable: " + verdict(f, "executable"));
  if (verdict("nsp", "secrecy_nb_B") != "falsified")
    problems.push_back("nsp secrecy_nb_B: " + verdict("nsp", "secrecy_nb_B") + ", expected falsified");
  if (verdict("nslp", "secrecy_nb_B") != "verified")
    problems.push_back("nslp secrecy_nb_B: " + verdict("nslp", "secrecy_nb_B") + ", expected verified");
  if (!problems.empty()) {
    detail.clear();
    for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
  }
  report(problems.empty() ? Outcome::Pass : Outcome::Fail, name, detail);
}

void decomposition_speedup(const std::optional<std::string>& prover) {
  const char* name = "decomposition speedup";
  if (!prover) {
    report(Outcome::Skip, name, "tamarin-prover not found on PATH (set TAMARIN_PROVER to enable)");
    return;
  }
  const auto spec = fixture_spec("nsp");
  CompileOptions atomic;
  atomic.delivery = Delivery::Atomic;
  auto fast = run_prover(*prover, render_theory(*compile_tamarin(spec).theory));
  auto slow = run_prover(*prover, render_theory(*compile_tamarin(spec, atomic).theory));
  const bool ok = fast.ran && slow.ran && fast.seconds < slow.seconds;
  report(ok ? Outcome::Pass : Outcome::Fail, name,
         "nsp decompose " + fmt_seconds(fast.seconds) + " vs atomic " + fmt_seconds(slow.seconds) +
             " (required: decompose strictly faster)");
}

}  // namespace

int main() {
  const auto gen_start = Clock::now();
  const auto specs = random_specs();
  const double generation = seconds_since(gen_start);

  round_trip(specs, generation);
  oracle_equivalence();
  executability();
  golden_files();
  well_formedness(specs);
  size_sanity();
  const auto prover = find_prover();
  prover_integration(prover);
  decomposition_speedup(prover);

  const auto failed = std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.outcome == Outcome::Fail; });
  const auto skipped = std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.outcome == Outcome::Skip; });
  std::cout << "\n" << lines.size() - failed - skipped << " passed, " << failed << " failed, " << skipped << " skipped\n";
  return failed == 0 ? 0 : 1;
}
