#include "metacp/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "metacp/pipeline.hpp"
#include "metacp/plugin.hpp"
#include "metacp/service.hpp"
#include "metacp/store.hpp"

namespace metacp {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> read_file(const fs::path& path, std::ostream& err) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    err << path.string() << ": cannot read file\n";
    return std::nullopt;
  }
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in && !in.eof()) {
    err << path.string() << ": cannot read file\n";
    return std::nullopt;
  }
  return ss.str();
}

bool write_file(const fs::path& path, std::string_view text, std::ostream& err) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out.flush()) {
      err << path.string() << ": cannot write file\n";
      return false;
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    err << path.string() << ": cannot write file\n";
    return false;
  }
  return true;
}

void print_diagnostics(const fs::path& path, const std::vector<Diagnostic>& diags, std::ostream& err) {
  for (const auto& d : diags) err << format_diagnostic(path.string(), d) << "\n";
}

std::string joined_backends() {
  std::string s;
  for (const auto& id : list_plugins()) s += (s.empty() ? "" : ", ") + id;
  return s;
}

DesignerService* active_service = nullptr;

extern "C" void handle_interrupt(int) {
  if (active_service) active_service->stop();
}

}  // namespace

fs::path default_output_path(const fs::path& input, const std::string& extension) {
  std::string name = input.filename().string();
  if (name.ends_with(kProtocolSuffix)) name.resize(name.size() - kProtocolSuffix.size());
  else if (input.has_extension()) name = input.stem().string();
  return input.parent_path() / (name + extension);
}

int cmd_validate(const fs::path& path, bool json, std::ostream& out, std::ostream& err) {
  auto text = read_file(path, err);
  if (!text) return kExitIo;
  auto result = validate_psv(*text);
  if (json) {
    nlohmann::ordered_json body{{"ok", result.ok()},
                                {"diagnostics", nlohmann::ordered_json::parse(to_json(result.diagnostics).dump())}};
    out << body.dump(2) << "\n";
  } else {
    print_diagnostics(path, result.diagnostics, err);
  }
  return result.ok() ? kExitOk : kExitDiagnostics;
}

int cmd_compile(const fs::path& path, const std::string& backend_id, const std::optional<std::string>& out_path,
                std::optional<Delivery> delivery, std::ostream& out, std::ostream& err) {
  const BackendPlugin* backend = nullptr;
  try {
    backend = &get_plugin(backend_id);
  } catch (const PluginNotFound& e) {
    err << e.what() << "; available backends: " << joined_backends() << "\n";
    return kExitUsage;
  }
  auto text = read_file(path, err);
  if (!text) return kExitIo;
  auto outcome = compile_psv(*text, *backend, delivery);
  print_diagnostics(path, outcome.diagnostics, err);
  if (!outcome.text) return kExitDiagnostics;
  if (out_path && *out_path == "-") {
    out << *outcome.text;
    return kExitOk;
  }
  const fs::path target = out_path ? fs::path(*out_path) : default_output_path(path, backend->extension());
  return write_file(target, *outcome.text, err) ? kExitOk : kExitIo;
}

int cmd_fmt(const fs::path& path, bool check, std::ostream& out, std::ostream& err) {
  auto text = read_file(path, err);
  if (!text) return kExitIo;
  auto parsed = parse_psv(*text);
  print_diagnostics(path, parsed.diagnostics, err);
  if (!parsed.document) return kExitDiagnostics;
  const std::string canonical = serialize_psv(*parsed.document);
  if (canonical == *text) return kExitOk;
  if (check) {
    out << path.string() << ": not in canonical form\n";
    return kExitDiagnostics;
  }
  return write_file(path, canonical, err) ? kExitOk : kExitIo;
}

int cmd_analyze(const fs::path& path, std::ostream& out, std::ostream& err) {
  auto text = read_file(path, err);
  if (!text) return kExitIo;
  auto result = validate_psv(*text);
  if (!result.report) {
    print_diagnostics(path, result.diagnostics, err);
    return kExitDiagnostics;
  }
  out << to_json(*result.report).dump(2) << "\n";
  return result.report->ok ? kExitOk : kExitDiagnostics;
}

int cmd_serve(ServeOptions options, std::ostream& out, std::ostream& err) {
  if (const char* env = std::getenv("METACP_STORE"); env && *env) options.root = env;
  std::optional<DesignerService> service;
  try {
    service.emplace(ServiceConfig{options.root, options.host, options.static_dir, &err});
  } catch (const StoreError& e) {
    err << e.what() << "\n";
    return kExitIo;
  }
  auto port = service->bind(options.port);
  if (!port) {
    err << "cannot bind " << options.host << ":" << options.port << "\n";
    return kExitIo;
  }
  out << "listening on " << service->address() << "\n" << std::flush;
  active_service = &*service;
  auto previous_int = std::signal(SIGINT, handle_interrupt);
  auto previous_term = std::signal(SIGTERM, handle_interrupt);
  const bool ok = service->listen();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  active_service = nullptr;
  return ok ? kExitOk : kExitIo;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Protocol specification toolchain: validate, analyze and compile PSV documents", "metacp"};
  app.require_subcommand(1);

  std::string path;
  bool json = false, check = false;
  std::string backend = "tamarin";
  std::optional<std::string> out_path;
  std::string delivery;
  ServeOptions serve;
  std::string static_dir;

  auto* validate = app.add_subcommand("validate", "Check schema, executability and goals");
  validate->add_option("file", path, "PSV document")->required();
  validate->add_flag("--json", json, "Print diagnostics as JSON on standard output");

  auto* compile = app.add_subcommand("compile", "Compile to a verifier's input language");
  compile->add_option("file", path, "PSV document")->required();
  compile->add_option("--backend,-b", backend, "Backend id")->capture_default_str();
  compile->add_option("--out,-o", out_path, "Output file, '-' for standard output");
  compile->add_option("--delivery", delivery, "Override message delivery")
      ->check(CLI::IsMember({"decompose", "atomic"}));

  auto* fmt = app.add_subcommand("fmt", "Rewrite a PSV document in canonical form");
  fmt->add_option("file", path, "PSV document")->required();
  fmt->add_flag("--check", check, "Only report whether the file is canonical");

  auto* analyze = app.add_subcommand("analyze", "Print the executability report as JSON");
  analyze->add_option("file", path, "PSV document")->required();

  auto* serve_cmd = app.add_subcommand("serve", "Run the designer service");
  serve_cmd->add_option("--root", serve.root, "Protocol store directory")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "Port, 0 for an ephemeral one")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host, "Listen address")->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "Directory of designer assets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  if (*validate) return cmd_validate(path, json, out, err);
  if (*compile) {
    std::optional<Delivery> d;
    if (delivery == "atomic") d = Delivery::Atomic;
    else if (delivery == "decompose") d = Delivery::Decompose;
    return cmd_compile(path, backend, out_path, d, out, err);
  }
  if (*fmt) return cmd_fmt(path, check, out, err);
  if (*analyze) return cmd_analyze(path, out, err);
  if (!static_dir.empty()) serve.static_dir = static_dir;
  return cmd_serve(serve, out, err);
}

}  // namespace metacp
