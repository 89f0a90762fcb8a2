#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metacp {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidProtocolName : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Protocols persisted as one `<name>.psv.xml` file each under a root
/// directory, with an optional `<name>.layout.json` sidecar. Writes go
/// through a temporary file and a rename; writers of the same name are
/// serialized.
class ProtocolStore {
 public:
  /// Creates `root` if needed. Throws StoreError when that fails.
  explicit ProtocolStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// True iff `name` matches `[A-Za-z0-9_-]+` (at most 128 characters).
  static bool valid_name(std::string_view name);

  /// Stored protocol names, sorted.
  std::vector<std::string> list() const;
  std::optional<std::string> get(std::string_view name) const;
  /// Returns true when the entry did not exist before.
  bool put(std::string_view name, std::string_view text);
  /// Removes the protocol and its layout; false when absent.
  bool remove(std::string_view name);

  std::optional<std::string> get_layout(std::string_view name) const;
  void put_layout(std::string_view name, std::string_view json);

 private:
  std::filesystem::path path_for(std::string_view name, std::string_view suffix) const;
  void write_atomic(const std::filesystem::path& target, std::string_view text);
  std::mutex& lock_for(std::string_view name);

  std::filesystem::path root_;
  std::mutex locks_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>, std::less<>> locks_;
};

inline constexpr std::string_view kProtocolSuffix = ".psv.xml";
inline constexpr std::string_view kLayoutSuffix = ".layout.json";

}  // namespace metacp
