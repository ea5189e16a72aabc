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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace spoofscope::artifact {

std::string tool_version();

// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

struct Meta {
  std::string version;
  std::uint64_t seed = 0;
  std::string config_hash;

  nlohmann::json to_json() const;
  std::string line() const;  // "spoofscope <version> seed=<seed> config=<hash>"
};

Meta make_meta(std::uint64_t seed, const nlohmann::json& config);

std::string csv_comment(const Meta& m);       // "# ...\n"
std::string markdown_comment(const Meta& m);  // "<!-- ... -->\n"

// Creates parent directories. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& content);

// JSON document with "meta" set, written with two-space indentation.
void write_json(const std::filesystem::path& path, nlohmann::json doc, const Meta& m);

}  // namespace spoofscope::artifact
