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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace spoofscope::bench {

enum class Split { train, eval };

Split parse_split(const std::string& s);
std::string to_string(Split s);

// 0 = bonafide, 1 = spoof.
int parse_label(const std::string& s);
std::string label_name(int label);

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest's directory
  int label = 0;
  std::string attack;
  Split split = Split::train;
  std::size_t line = 0;
};

struct DatasetManifest {
  std::string dataset_name;
  std::vector<ManifestEntry> entries;

  std::size_t count(Split split, int label) const;
  std::string summary() const;
};

// CSV with the header "path,label,attack,split". Blank lines and lines
// starting with '#' are ignored. Relative paths resolve against base_dir.
// Throws ManifestError (with line number) on malformed rows, SplitOverlap
// when a path appears in both splits and, if check_files is set, PathError
// naming every missing file.
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& dataset_name, bool check_files = true);

// dataset_name is the file stem. A missing manifest raises PathError.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);

// Paths are written relative to the manifest's directory when possible.
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace spoofscope::bench
