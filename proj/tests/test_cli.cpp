#include <doctest.h>

#include <csignal>
#include <cstdio>
#include <sstream>

#include <httplib.h>
#include <sys/wait.h>

#include "digest.hpp"
#include "metacp/cli.hpp"
#include "metacp/fixtures.hpp"
#include "metacp/pipeline.hpp"
#include "metacp/service.hpp"
#include "temp_dir.hpp"

using namespace metacp;
using metacp::testing::read_text;
using metacp::testing::TempDir;
using metacp::testing::write_text;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "metacp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fixture(std::string_view name) { return std::string(*find_fixture(name)); }

std::string broken_nsp() {
  std::string text = fixture("nsp");
  const std::string from = "<message from=\"A\" index=\"1\" to=\"B\">";
  text.replace(text.find(from), from.size(), "<message from=\"C\" index=\"1\" to=\"B\">");
  return text;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate") {
    TempDir dir;
    write_text(dir / "dhke.psv.xml", fixture("dhke"));
    write_text(dir / "broken.psv.xml", broken_nsp());

    auto ok = cli({"validate", (dir / "dhke.psv.xml").string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.empty());
    CHECK(ok.err.empty());

    auto bad = cli({"validate", (dir / "broken.psv.xml").string()});
    CHECK(bad.code == 1);
    CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);
    CHECK(bad.err == (dir / "broken.psv.xml").string() + ":26:5: error PSV003 undeclared role 'C'\n");

    auto json = cli({"validate", "--json", (dir / "broken.psv.xml").string()});
    CHECK(json.code == 1);
    auto body = nlohmann::json::parse(json.out);
    CHECK(body["ok"] == false);
    CHECK(body["diagnostics"][0]["code"] == "PSV003");
    CHECK(body["diagnostics"][0]["step"] == 1);

    CHECK(cli({"validate", (dir / "missing.psv.xml").string()}).code == 3);
  }

  TEST_CASE("compile") {
    TempDir dir;
    write_text(dir / "nsp.psv.xml", fixture("nsp"));
    write_text(dir / "dhke.psv.xml", fixture("dhke"));
    write_text(dir / "broken.psv.xml", broken_nsp());

    auto ok = cli({"compile", (dir / "nsp.psv.xml").string(), "--backend", "tamarin"});
    CHECK(ok.code == 0);
    CHECK(read_text(dir / "nsp.spthy") == testing::read_golden("nsp.spthy"));

    auto unknown = cli({"compile", (dir / "nsp.psv.xml").string(), "--backend", "proverif"});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("available backends: tamarin") != std::string::npos);

    auto stdout_run = cli({"compile", (dir / "dhke.psv.xml").string(), "-o", "-"});
    CHECK(stdout_run.code == 0);
    CHECK(stdout_run.out == testing::read_golden("dhke.spthy"));

    auto explicit_out = cli({"compile", (dir / "dhke.psv.xml").string(), "--out", (dir / "x.spthy").string()});
    CHECK(explicit_out.code == 0);
    CHECK(read_text(dir / "x.spthy") == testing::read_golden("dhke.spthy"));

    auto refused = cli({"compile", (dir / "broken.psv.xml").string()});
    CHECK(refused.code == 1);
    CHECK_FALSE(std::filesystem::exists(dir / "broken.spthy"));

    auto atomic = cli({"compile", (dir / "nsp.psv.xml").string(), "--delivery", "atomic", "-o", "-"});
    CHECK(atomic.code == 0);
    CHECK(atomic.out.find("In(msg1)") != std::string::npos);

    CHECK(cli({"compile", (dir / "nsp.psv.xml").string(), "--delivery", "slow"}).code == 2);
    CHECK(cli({"compile", (dir / "none.psv.xml").string()}).code == 3);
  }

  TEST_CASE("compile output does not depend on the working directory") {
    TempDir dir;
    write_text(dir / "nslp.psv.xml", fixture("nslp"));
    const auto cwd = std::filesystem::current_path();
    std::filesystem::current_path(dir.path());
    auto relative = cli({"compile", "nslp.psv.xml", "-o", "-"});
    std::filesystem::current_path(cwd);
    auto absolute = cli({"compile", (dir / "nslp.psv.xml").string(), "-o", "-"});
    CHECK(relative.code == 0);
    CHECK(relative.out == absolute.out);
  }

  TEST_CASE("fmt") {
    TempDir dir;
    write_text(dir / "dhke.psv.xml", fixture("dhke"));
    CHECK(cli({"fmt", "--check", (dir / "dhke.psv.xml").string()}).code == 0);

    std::string messy = fixture("dhke");
    for (std::size_t pos = 0; (pos = messy.find("\n  ", pos)) != std::string::npos;) messy.replace(pos, 3, "\n\t");
    write_text(dir / "messy.psv.xml", messy);
    auto check = cli({"fmt", "--check", (dir / "messy.psv.xml").string()});
    CHECK(check.code == 1);
    CHECK(read_text(dir / "messy.psv.xml") == messy);
    CHECK(cli({"fmt", (dir / "messy.psv.xml").string()}).code == 0);
    CHECK(read_text(dir / "messy.psv.xml") == fixture("dhke"));
    CHECK(cli({"fmt", (dir / "messy.psv.xml").string()}).code == 0);
    CHECK(read_text(dir / "messy.psv.xml") == fixture("dhke"));

    write_text(dir / "bad.psv.xml", "<protocol>");
    CHECK(cli({"fmt", (dir / "bad.psv.xml").string()}).code == 1);
    CHECK(read_text(dir / "bad.psv.xml") == "<protocol>");
  }

  TEST_CASE("analyze") {
    TempDir dir;
    write_text(dir / "dhke.psv.xml", fixture("dhke"));
    auto run = cli({"analyze", (dir / "dhke.psv.xml").string()});
    CHECK(run.code == 0);
    auto body = nlohmann::json::parse(run.out);
    CHECK(body["ok"] == true);
    CHECK(body["finalKnowledge"]["B"]["atStep"] == 2);
  }

  TEST_CASE("usage errors") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"explode"}).code == 2);
    CHECK(cli({"validate"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
  }

  TEST_CASE("library calls reproduce the command output") {
    TempDir dir;
    write_text(dir / "broken.psv.xml", broken_nsp());
    auto run = cli({"validate", (dir / "broken.psv.xml").string()});
    std::string expected;
    for (const auto& d : validate_psv(broken_nsp()).diagnostics)
      expected += format_diagnostic((dir / "broken.psv.xml").string(), d) + "\n";
    CHECK(run.err == expected);
  }

  TEST_CASE("default output path") {
    CHECK(default_output_path("a/nsp.psv.xml", ".spthy") == std::filesystem::path("a/nsp.spthy"));
    CHECK(default_output_path("b.xml", ".spthy") == std::filesystem::path("b.spthy"));
  }

  TEST_CASE("serve binds an ephemeral port and honours the store variable") {
    TempDir dir;
    int pipe_fds[2];
    REQUIRE(::pipe(pipe_fds) == 0);
    const pid_t pid = ::fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
      ::dup2(pipe_fds[1], STDOUT_FILENO);
      ::close(pipe_fds[0]);
      ::setenv("METACP_STORE", (dir / "env-store").c_str(), 1);
      const char* argv[] = {METACP_CLI_PATH, "serve", "--port", "0", "--root", (dir / "flag-store").c_str(), nullptr};
      ::execv(METACP_CLI_PATH, const_cast<char* const*>(argv));
      ::_exit(127);
    }
    ::close(pipe_fds[1]);
    std::string line;
    char c;
    while (::read(pipe_fds[0], &c, 1) == 1 && c != '\n') line += c;
    ::close(pipe_fds[0]);
    REQUIRE(line.starts_with("listening on http://127.0.0.1:"));
    const int port = std::stoi(line.substr(line.rfind(':') + 1));
    CHECK(port > 0);

    httplib::Client client("127.0.0.1", port);
    auto put = client.Put("/api/protocols/dhke", fixture("dhke"), "application/xml");
    REQUIRE(put);
    CHECK(put->status == 201);
    CHECK(std::filesystem::exists(dir / "env-store" / "dhke.psv.xml"));
    CHECK_FALSE(std::filesystem::exists(dir / "flag-store"));

    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
  }

  TEST_CASE("serve reports a port in use") {
    TempDir dir;
    ServiceConfig config;
    config.root = dir / "a";
    DesignerService holder(config);
    auto port = holder.bind(0);
    REQUIRE(port);
    ServeOptions options;
    options.root = dir / "b";
    options.port = *port;
    ::unsetenv("METACP_STORE");
    std::ostringstream out, err;
    CHECK(cmd_serve(options, out, err) == 3);
    CHECK(err.str().find("cannot bind") != std::string::npos);
  }
}
