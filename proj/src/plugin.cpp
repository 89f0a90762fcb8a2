#include "metacp/plugin.hpp"

#include <algorithm>

#include "metacp/tamarin.hpp"

namespace metacp {

namespace {

class TamarinPlugin final : public BackendPlugin {
 public:
  std::string id() const override { return "tamarin"; }
  std::string extension() const override { return ".spthy"; }
  BackendOutput compile(const ProtocolSpec& spec) const override {
    auto result = compile_tamarin(spec);
    BackendOutput out;
    out.diagnostics = std::move(result.diagnostics);
    if (result.theory) out.text = render_theory(*result.theory);
    return out;
  }
};

const std::vector<std::unique_ptr<BackendPlugin>>& registry() {
  static const auto plugins = [] {
    std::vector<std::unique_ptr<BackendPlugin>> v;
    v.push_back(std::make_unique<TamarinPlugin>());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a->id() < b->id(); });
    return v;
  }();
  return plugins;
}

}  // namespace

PluginNotFound::PluginNotFound(std::string id)
    : std::runtime_error("unknown backend '" + id + "'"), id_(std::move(id)) {}

std::vector<std::string> list_plugins() {
  std::vector<std::string> ids;
  for (const auto& p : registry()) ids.push_back(p->id());
  return ids;
}

const BackendPlugin& get_plugin(std::string_view id) {
  for (const auto& p : registry())
    if (p->id() == id) return *p;
  throw PluginNotFound(std::string(id));
}

}  // namespace metacp
