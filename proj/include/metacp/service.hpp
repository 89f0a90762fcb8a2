#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

namespace metacp {

struct ServiceConfig {
  std::filesystem::path root;
  std::string host = "127.0.0.1";
  /// Directory with the designer's static assets, served at `/` when set.
  std::optional<std::filesystem::path> static_dir;
  /// Receives one line per request; nothing is logged when null.
  std::ostream* log = nullptr;
};

/// HTTP front end of the pipeline and the protocol store.
///
///   POST   /api/validate                  PSV body -> {ok, diagnostics}
///   POST   /api/compile?backend=ID        PSV body -> text, or 422 {ok, diagnostics}
///   GET    /api/backends                  plugin ids
///   GET    /api/examples[/{name}]         bundled fixture names or text
///   GET    /api/protocols                 stored names
///   GET    /api/protocols/{name}          PSV text
///   PUT    /api/protocols/{name}          schema-checked store
///   DELETE /api/protocols/{name}
///   GET    /api/protocols/{name}/layout   opaque JSON sidecar
///   PUT    /api/protocols/{name}/layout
///
/// Errors are `{"error": {"code", "message"}}`.
class DesignerService {
 public:
  /// Throws StoreError when the root directory is unusable.
  explicit DesignerService(ServiceConfig config);
  ~DesignerService();
  DesignerService(const DesignerService&) = delete;
  DesignerService& operator=(const DesignerService&) = delete;

  /// Binds `port` (0 picks an ephemeral one). Returns the bound port, or
  /// nullopt when the address is unavailable.
  std::optional<int> bind(int port);
  /// Serves until stop(); requires a successful bind().
  bool listen();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

  std::string address() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace metacp
