#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "metacp/diagnostic.hpp"
#include "metacp/spec.hpp"

namespace metacp {

struct BackendOutput {
  std::optional<std::string> text;
  std::vector<Diagnostic> diagnostics;
};

/// A translator from a protocol specification to a verifier's input language.
class BackendPlugin {
 public:
  virtual ~BackendPlugin() = default;
  virtual std::string id() const = 0;
  /// File extension of the output, including the dot.
  virtual std::string extension() const = 0;
  /// Pure and deterministic.
  virtual BackendOutput compile(const ProtocolSpec& spec) const = 0;
};

class PluginNotFound : public std::runtime_error {
 public:
  explicit PluginNotFound(std::string id);
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

/// Registered plugin ids, sorted.
std::vector<std::string> list_plugins();

/// Throws PluginNotFound for an unknown id.
const BackendPlugin& get_plugin(std::string_view id);

}  // namespace metacp
