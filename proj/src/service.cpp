#include "metacp/service.hpp"

#include <httplib.h>

#include <mutex>
#include <nlohmann/json.hpp>

#include "metacp/fixtures.hpp"
#include "metacp/pipeline.hpp"
#include "metacp/plugin.hpp"
#include "metacp/psv_xml.hpp"
#include "metacp/store.hpp"

namespace metacp {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kJson = "application/json";
constexpr const char* kXml = "application/xml";

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, ordered_json{{"error", {{"code", code}, {"message", message}}}});
}

ordered_json diagnostics_body(bool ok, const std::vector<Diagnostic>& diags) {
  return ordered_json{{"ok", ok}, {"diagnostics", ordered_json::parse(to_json(diags).dump())}};
}

ordered_json string_list(const std::vector<std::string>& items) {
  ordered_json out = ordered_json::array();
  for (const auto& s : items) out.push_back(s);
  return out;
}

}  // namespace

struct DesignerService::Impl {
  explicit Impl(ServiceConfig c) : config(std::move(c)), store(config.root) { routes(); }

  void log(const httplib::Request& req, const httplib::Response& res) {
    if (!config.log) return;
    std::lock_guard guard(log_mutex);
    *config.log << req.method << " " << req.path << " " << res.status << "\n" << std::flush;
  }

  template <typename Fn>
  auto guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const InvalidProtocolName& e) {
        send_error(res, 400, "invalid_name", e.what());
      } catch (const StoreError& e) {
        send_error(res, 500, "io_error", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    server.set_payload_max_length(2 * kDefaultSizeCap);
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server.set_logger([this](const httplib::Request& req, const httplib::Response& res) { log(req, res); });
    if (config.static_dir) server.set_mount_point("/", config.static_dir->string());

    server.Post("/api/validate", guarded([](const httplib::Request& req, httplib::Response& res) {
      auto result = validate_psv(req.body);
      send_json(res, 200, diagnostics_body(result.ok(), result.diagnostics));
    }));

    server.Post("/api/compile", guarded([](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.has_param("backend") ? req.get_param_value("backend") : "tamarin";
      const BackendPlugin* backend = nullptr;
      try {
        backend = &get_plugin(id);
      } catch (const PluginNotFound& e) {
        std::string available;
        for (const auto& p : list_plugins()) available += (available.empty() ? "" : ", ") + p;
        send_error(res, 400, "unknown_backend", std::string(e.what()) + "; available: " + available);
        return;
      }
      std::optional<Delivery> delivery;
      if (req.has_param("delivery")) {
        const auto value = req.get_param_value("delivery");
        if (value == "atomic") delivery = Delivery::Atomic;
        else if (value == "decompose") delivery = Delivery::Decompose;
        else return send_error(res, 400, "bad_request", "delivery must be 'atomic' or 'decompose'");
      }
      auto outcome = compile_psv(req.body, *backend, delivery);
      if (!outcome.text) return send_json(res, 422, diagnostics_body(false, outcome.diagnostics));
      res.status = 200;
      res.set_content(*outcome.text, "text/plain; charset=utf-8");
    }));

    server.Get("/api/backends", guarded([](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, string_list(list_plugins()));
    }));

    server.Get("/api/examples", guarded([](const httplib::Request&, httplib::Response& res) {
      std::vector<std::string> names;
      for (const auto& f : bundled_fixtures()) names.emplace_back(f.name);
      send_json(res, 200, string_list(names));
    }));

    server.Get(R"(/api/examples/([^/]+))", guarded([](const httplib::Request& req, httplib::Response& res) {
      auto text = find_fixture(req.matches[1].str());
      if (!text) return send_error(res, 404, "not_found", "no example named '" + req.matches[1].str() + "'");
      res.status = 200;
      res.set_content(std::string(*text), kXml);
    }));

    server.Get("/api/protocols", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, string_list(store.list()));
    }));

    server.Get(R"(/api/protocols/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto name = req.matches[1].str();
      auto text = store.get(name);
      if (!text) return send_error(res, 404, "not_found", "no protocol named '" + name + "'");
      res.status = 200;
      res.set_content(*text, kXml);
    }));

    server.Put(R"(/api/protocols/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto name = req.matches[1].str();
      if (!ProtocolStore::valid_name(name))
        return send_error(res, 400, "invalid_name", "invalid protocol name '" + name + "'");
      auto diags = validate_schema(req.body);
      if (has_errors(diags)) return send_json(res, 422, diagnostics_body(false, diags));
      const bool created = store.put(name, req.body);
      send_json(res, created ? 201 : 200, diagnostics_body(true, diags));
    }));

    server.Delete(R"(/api/protocols/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto name = req.matches[1].str();
      if (!store.remove(name)) return send_error(res, 404, "not_found", "no protocol named '" + name + "'");
      res.status = 204;
    }));

    server.Get(R"(/api/protocols/([^/]+)/layout)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto name = req.matches[1].str();
                 auto layout = store.get_layout(name);
                 if (!layout) return send_error(res, 404, "not_found", "no layout for '" + name + "'");
                 res.status = 200;
                 res.set_content(*layout, kJson);
               }));

    server.Put(R"(/api/protocols/([^/]+)/layout)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto name = req.matches[1].str();
                 if (!ProtocolStore::valid_name(name))
                   return send_error(res, 400, "invalid_name", "invalid protocol name '" + name + "'");
                 if (!nlohmann::json::accept(req.body))
                   return send_error(res, 400, "bad_request", "layout body is not JSON");
                 if (!store.get(name)) return send_error(res, 404, "not_found", "no protocol named '" + name + "'");
                 store.put_layout(name, req.body);
                 res.status = 204;
               }));
  }

  ServiceConfig config;
  ProtocolStore store;
  httplib::Server server;
  std::mutex log_mutex;
  int port = -1;
};

DesignerService::DesignerService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

DesignerService::~DesignerService() { stop(); }

std::optional<int> DesignerService::bind(int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(impl_->config.host);
    if (bound <= 0) return std::nullopt;
    impl_->port = bound;
  } else {
    if (!impl_->server.bind_to_port(impl_->config.host, port)) return std::nullopt;
    impl_->port = port;
  }
  return impl_->port;
}

bool DesignerService::listen() { return impl_->server.listen_after_bind(); }

void DesignerService::stop() {
  if (impl_) impl_->server.stop();
}

void DesignerService::wait_until_ready() const { impl_->server.wait_until_ready(); }

std::string DesignerService::address() const {
  return "http://" + impl_->config.host + ":" + std::to_string(impl_->port);
}

}  // namespace metacp
