#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "spur/errors.hpp"
#include "spur/harness.hpp"

namespace spur::harness {

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

OutputDir::OutputDir(std::filesystem::path root, std::string config_hash)
    : root_(std::move(root)), config_hash_(std::move(config_hash)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw ConfigError("cannot create output directory " + root_.string() + ": " + ec.message());
}

void OutputDir::write_text(const std::string& name, const std::string& content, double wall_seconds) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("failed writing " + p.string());
  };
  write(root_ / name, content);
  nlohmann::json manifest{{"file", name},
                          {"config_hash", config_hash_},
                          {"tool_version", kToolVersion},
                          {"wall_time_seconds", wall_seconds}};
  write(root_ / (name + ".manifest.json"), manifest.dump(2) + "\n");
  written_.push_back(name);
}

void OutputDir::write_json(const std::string& name, const nlohmann::json& doc, double wall_seconds) {
  write_text(name, doc.dump(2) + "\n", wall_seconds);
}

}  // namespace spur::harness
