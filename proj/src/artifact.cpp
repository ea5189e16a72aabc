/* Copyright 2026 The SpoofScope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "spoofscope/artifact.hpp"

#include <cstdio>
#include <fstream>

#include "spoofscope/errors.hpp"

namespace spoofscope::artifact {

std::string tool_version() { return SPOOFSCOPE_VERSION; }

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json Meta::to_json() const {
  return {{"tool", "spoofscope"}, {"version", version}, {"seed", seed}, {"config_hash", config_hash}};
}

std::string Meta::line() const {
  return "spoofscope " + version + " seed=" + std::to_string(seed) + " config=" + config_hash;
}

Meta make_meta(std::uint64_t seed, const nlohmann::json& config) {
  return {tool_version(), seed, config_hash(config)};
}

std::string csv_comment(const Meta& m) { return "# " + m.line() + "\n"; }

std::string markdown_comment(const Meta& m) { return "<!-- " + m.line() + " -->\n"; }

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, nlohmann::json doc, const Meta& m) {
  doc["meta"] = m.to_json();
  write_text(path, doc.dump(2) + "\n");
}

}  // namespace spoofscope::artifact
