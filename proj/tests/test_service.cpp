#include <doctest.h>

#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "digest.hpp"
#include "metacp/fixtures.hpp"
#include "metacp/service.hpp"
#include "temp_dir.hpp"

using namespace metacp;
using metacp::testing::TempDir;

namespace {

std::string fixture(std::string_view name) { return std::string(*find_fixture(name)); }

/// A service on an ephemeral loopback port for the lifetime of the object.
class RunningService {
 public:
  explicit RunningService(const std::filesystem::path& root, std::ostream* log = nullptr)
      : service_(ServiceConfig{root, "127.0.0.1", std::nullopt, log}) {
    auto port = service_.bind(0);
    REQUIRE(port);
    port_ = *port;
    thread_ = std::thread([this] { service_.listen(); });
    service_.wait_until_ready();
  }
  ~RunningService() {
    service_.stop();
    thread_.join();
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  DesignerService service_;
  int port_ = 0;
  std::thread thread_;
};

nlohmann::json json_of(const httplib::Result& r) { return nlohmann::json::parse(r->body); }

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("validate") {
    TempDir dir;
    RunningService svc(dir.path());
    auto client = svc.client();
    auto ok = client.Post("/api/validate", fixture("dhke"), "application/xml");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(ok->body == R"({"ok":true,"diagnostics":[]})");

    auto bad = client.Post("/api/validate", "<protocol", "application/xml");
    REQUIRE(bad);
    CHECK(bad->status == 200);
    auto body = json_of(bad);
    CHECK(body["ok"] == false);
    CHECK(body["diagnostics"][0]["code"] == "PSV001");
  }

  TEST_CASE("compile") {
    TempDir dir;
    RunningService svc(dir.path());
    auto client = svc.client();
    auto ok = client.Post("/api/compile?backend=tamarin", fixture("nsp"), "application/xml");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(ok->get_header_value("Content-Type").starts_with("text/plain"));
    CHECK(ok->body == testing::read_golden("nsp.spthy"));

    std::string broken = fixture("nsp");
    broken.replace(broken.find("from=\"B\" index=\"2\" to=\"A\""), 25, "from=\"A\" index=\"2\" to=\"B\"");
    auto bad = client.Post("/api/compile", broken, "application/xml");
    REQUIRE(bad);
    CHECK(bad->status == 422);
    CHECK(json_of(bad)["diagnostics"][0]["code"] == "EXE001");

    auto unknown = client.Post("/api/compile?backend=proverif", fixture("nsp"), "application/xml");
    REQUIRE(unknown);
    CHECK(unknown->status == 400);
    CHECK(json_of(unknown)["error"]["code"] == "unknown_backend");

    auto atomic = client.Post("/api/compile?delivery=atomic", fixture("nsp"), "application/xml");
    REQUIRE(atomic);
    CHECK(atomic->status == 200);
    CHECK(atomic->body.find("In(msg1)") != std::string::npos);
  }

  TEST_CASE("catalogue endpoints") {
    TempDir dir;
    RunningService svc(dir.path());
    auto client = svc.client();
    auto backends = client.Get("/api/backends");
    REQUIRE(backends);
    CHECK(json_of(backends) == nlohmann::json::array({"tamarin"}));
    auto examples = client.Get("/api/examples");
    REQUIRE(examples);
    CHECK(json_of(examples) == nlohmann::json::array({"dhke", "nslp", "nsp"}));
    auto one = client.Get("/api/examples/nslp");
    REQUIRE(one);
    CHECK(one->body == fixture("nslp"));
    auto none = client.Get("/api/examples/tls");
    REQUIRE(none);
    CHECK(none->status == 404);
    CHECK(json_of(none)["error"]["code"] == "not_found");
  }

  TEST_CASE("protocol store") {
    TempDir dir;
    std::ostringstream log;
    {
      RunningService svc(dir.path(), &log);
      auto client = svc.client();
      auto empty = client.Get("/api/protocols");
      REQUIRE(empty);
      CHECK(json_of(empty) == nlohmann::json::array());

      auto created = client.Put("/api/protocols/draft", fixture("dhke"), "application/xml");
      REQUIRE(created);
      CHECK(created->status == 201);
      auto replaced = client.Put("/api/protocols/draft", fixture("nsp"), "application/xml");
      REQUIRE(replaced);
      CHECK(replaced->status == 200);

      // Drafts need only be schema-valid.
      std::string unfinished = fixture("nsp");
      unfinished.replace(unfinished.find("from=\"B\" index=\"2\" to=\"A\""), 25, "from=\"A\" index=\"2\" to=\"B\"");
      auto draft = client.Put("/api/protocols/wip", unfinished, "application/xml");
      REQUIRE(draft);
      CHECK(draft->status == 201);

      auto invalid = client.Put("/api/protocols/junk", "<protocol/>", "application/xml");
      REQUIRE(invalid);
      CHECK(invalid->status == 422);
      CHECK_FALSE(std::filesystem::exists(dir / "junk.psv.xml"));

      auto bad_name = client.Put("/api/protocols/bad%20name", fixture("dhke"), "application/xml");
      REQUIRE(bad_name);
      CHECK(bad_name->status == 400);
      CHECK(nlohmann::json::parse(bad_name->body)["error"]["code"] == "invalid_name");

      auto escape = client.Put("/api/protocols/..%2Fescape", fixture("dhke"), "application/xml");
      REQUIRE(escape);
      CHECK(escape->status >= 400);
      CHECK_FALSE(std::filesystem::exists(dir.path().parent_path() / "escape.psv.xml"));

      auto list = client.Get("/api/protocols");
      REQUIRE(list);
      CHECK(json_of(list) == nlohmann::json::array({"draft", "wip"}));

      auto got = client.Get("/api/protocols/draft");
      REQUIRE(got);
      CHECK(got->body == fixture("nsp"));
      CHECK(testing::read_text(dir / "draft.psv.xml") == fixture("nsp"));

      auto removed = client.Delete("/api/protocols/draft");
      REQUIRE(removed);
      CHECK(removed->status == 204);
      auto gone = client.Get("/api/protocols/draft");
      REQUIRE(gone);
      CHECK(gone->status == 404);
      auto again = client.Delete("/api/protocols/draft");
      REQUIRE(again);
      CHECK(again->status == 404);
    }
    CHECK(log.str().find("PUT /api/protocols/draft 201\n") != std::string::npos);
    CHECK(log.str().find("DELETE /api/protocols/draft 404\n") != std::string::npos);
  }

  TEST_CASE("layout sidecar") {
    TempDir dir;
    RunningService svc(dir.path());
    auto client = svc.client();
    auto orphan = client.Put("/api/protocols/p/layout", R"({"role:A":{"x":1,"y":2}})", "application/json");
    REQUIRE(orphan);
    CHECK(orphan->status == 404);

    REQUIRE(client.Put("/api/protocols/p", fixture("dhke"), "application/xml"));
    auto missing = client.Get("/api/protocols/p/layout");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    const std::string layout = R"({"role:A":{"x":10,"y":20},"step:1":{"x":5,"y":60}})";
    auto put = client.Put("/api/protocols/p/layout", layout, "application/json");
    REQUIRE(put);
    CHECK(put->status == 204);
    auto got = client.Get("/api/protocols/p/layout");
    REQUIRE(got);
    CHECK(got->status == 200);
    CHECK(got->body == layout);

    auto not_json = client.Put("/api/protocols/p/layout", "{x", "application/json");
    REQUIRE(not_json);
    CHECK(not_json->status == 400);

    // The sidecar does not change the stored protocol.
    auto text = client.Get("/api/protocols/p");
    REQUIRE(text);
    CHECK(text->body == fixture("dhke"));
    REQUIRE(client.Delete("/api/protocols/p"));
    CHECK_FALSE(std::filesystem::exists(dir / "p.layout.json"));
  }

  TEST_CASE("concurrent writers leave one complete document") {
    TempDir dir;
    RunningService svc(dir.path());
    std::vector<std::thread> writers;
    for (int i = 0; i < 8; ++i) {
      writers.emplace_back([&svc, i] {
        auto client = svc.client();
        for (int j = 0; j < 10; ++j)
          client.Put("/api/protocols/shared", fixture(i % 2 ? "nsp" : "nslp"), "application/xml");
      });
    }
    for (auto& w : writers) w.join();
    const std::string stored = testing::read_text(dir / "shared.psv.xml");
    CHECK((stored == fixture("nsp") || stored == fixture("nslp")));
    std::size_t leftovers = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path()))
      leftovers += e.path().filename().string().starts_with(".");
    CHECK(leftovers == 0);
  }

  TEST_CASE("stored protocols compile like their files") {
    TempDir dir;
    RunningService svc(dir.path());
    auto client = svc.client();
    REQUIRE(client.Put("/api/protocols/nslp", fixture("nslp"), "application/xml"));
    auto stored = client.Get("/api/protocols/nslp");
    REQUIRE(stored);
    auto compiled = client.Post("/api/compile", stored->body, "application/xml");
    REQUIRE(compiled);
    CHECK(compiled->body == testing::read_golden("nslp.spthy"));
  }
}
