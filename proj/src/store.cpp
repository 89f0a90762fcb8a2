#include "metacp/store.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

namespace metacp {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw StoreError("cannot read " + path.string());
  return ss.str();
}

}  // namespace

ProtocolStore::ProtocolStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_)) throw StoreError("cannot use store directory " + root_.string());
}

bool ProtocolStore::valid_name(std::string_view name) {
  if (name.empty() || name.size() > 128) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

fs::path ProtocolStore::path_for(std::string_view name, std::string_view suffix) const {
  if (!valid_name(name)) throw InvalidProtocolName("invalid protocol name '" + std::string(name) + "'");
  return root_ / (std::string(name) + std::string(suffix));
}

std::mutex& ProtocolStore::lock_for(std::string_view name) {
  std::lock_guard guard(locks_guard_);
  auto it = locks_.find(name);
  if (it == locks_.end()) it = locks_.emplace(std::string(name), std::make_unique<std::mutex>()).first;
  return *it->second;
}

void ProtocolStore::write_atomic(const fs::path& target, std::string_view text) {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream tmp_name;
  tmp_name << "." << target.filename().string() << ".tmp-" << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << "-" << counter++;
  const fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw StoreError("cannot write " + target.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw StoreError("cannot replace " + target.string());
  }
}

std::vector<std::string> ProtocolStore::list() const {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_, ec)) {
    const std::string file = entry.path().filename().string();
    if (file.size() <= kProtocolSuffix.size() || !file.ends_with(kProtocolSuffix)) continue;
    std::string name = file.substr(0, file.size() - kProtocolSuffix.size());
    if (valid_name(name) && entry.is_regular_file()) names.push_back(std::move(name));
  }
  if (ec) throw StoreError("cannot list " + root_.string());
  std::sort(names.begin(), names.end());
  return names;
}

std::optional<std::string> ProtocolStore::get(std::string_view name) const {
  return read_file(path_for(name, kProtocolSuffix));
}

bool ProtocolStore::put(std::string_view name, std::string_view text) {
  const auto path = path_for(name, kProtocolSuffix);
  std::lock_guard guard(lock_for(name));
  const bool created = !fs::exists(path);
  write_atomic(path, text);
  return created;
}

bool ProtocolStore::remove(std::string_view name) {
  const auto path = path_for(name, kProtocolSuffix);
  const auto layout = path_for(name, kLayoutSuffix);
  std::lock_guard guard(lock_for(name));
  std::error_code ec;
  const bool removed = fs::remove(path, ec);
  if (ec) throw StoreError("cannot remove " + path.string());
  fs::remove(layout, ec);
  return removed;
}

std::optional<std::string> ProtocolStore::get_layout(std::string_view name) const {
  return read_file(path_for(name, kLayoutSuffix));
}

void ProtocolStore::put_layout(std::string_view name, std::string_view json) {
  const auto path = path_for(name, kLayoutSuffix);
  std::lock_guard guard(lock_for(name));
  write_atomic(path, json);
}

}  // namespace metacp
