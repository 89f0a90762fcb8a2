#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "metacp/spec.hpp"

namespace metacp {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitDiagnostics = 1,
  kExitUsage = 2,
  kExitIo = 3,
};

/// `nsp.psv.xml` + `.spthy` -> `nsp.spthy`, next to the input.
std::filesystem::path default_output_path(const std::filesystem::path& input, const std::string& extension);

/// Diagnostics go to `err` as `file:line:col: severity code message`, or to
/// `out` as `{ok, diagnostics}` when `json` is set.
int cmd_validate(const std::filesystem::path& path, bool json, std::ostream& out, std::ostream& err);

/// Writes the backend output to `out_path` ("-" for `out`), or next to the
/// input by default. Nothing is written when validation fails.
int cmd_compile(const std::filesystem::path& path, const std::string& backend,
                const std::optional<std::string>& out_path, std::optional<Delivery> delivery, std::ostream& out,
                std::ostream& err);

/// Rewrites the file in canonical form; with `check`, only reports.
int cmd_fmt(const std::filesystem::path& path, bool check, std::ostream& out, std::ostream& err);

/// Executability report as JSON on `out`.
int cmd_analyze(const std::filesystem::path& path, std::ostream& out, std::ostream& err);

struct ServeOptions {
  std::filesystem::path root = "protocol-store";
  int port = 8080;
  std::string host = "127.0.0.1";
  std::optional<std::filesystem::path> static_dir;
};

/// Serves until interrupted. `METACP_STORE` overrides the root directory.
int cmd_serve(ServeOptions options, std::ostream& out, std::ostream& err);

/// Argument parsing and dispatch for the `metacp` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metacp
