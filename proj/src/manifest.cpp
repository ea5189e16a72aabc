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

#include "spoofscope/manifest.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "spoofscope/errors.hpp"

namespace spoofscope::bench {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "eval") return Split::eval;
  throw InputError("unknown split: " + s);
}

std::string to_string(Split s) { return s == Split::train ? "train" : "eval"; }

int parse_label(const std::string& s) {
  if (s == "bonafide") return 0;
  if (s == "spoof") return 1;
  throw InputError("unknown label: " + s);
}

std::string label_name(int label) { return label == 1 ? "spoof" : "bonafide"; }

std::size_t DatasetManifest::count(Split split, int label) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += (e.split == split && e.label == label) ? 1 : 0;
  return n;
}

std::string DatasetManifest::summary() const {
  std::ostringstream out;
  out << dataset_name << ": train " << count(Split::train, 0) << " bonafide / " << count(Split::train, 1)
      << " spoof, eval " << count(Split::eval, 0) << " bonafide / " << count(Split::eval, 1) << " spoof";
  return out.str();
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& dataset_name, bool check_files) {
  DatasetManifest m;
  m.dataset_name = dataset_name;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<std::string, std::pair<Split, std::size_t>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split_fields(t);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"path", "label", "attack", "split"}) {
        throw ManifestError("manifest header must be path,label,attack,split", line_no);
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4) {
      throw ManifestError("expected 4 fields, got " + std::to_string(fields.size()), line_no);
    }
    if (fields[0].empty()) throw ManifestError("empty path", line_no);
    ManifestEntry e;
    e.line = line_no;
    try {
      e.label = parse_label(fields[1]);
      e.split = parse_split(fields[3]);
    } catch (const InputError& err) {
      throw ManifestError(std::string(err.what()) + " (expected bonafide|spoof and train|eval)", line_no);
    }
    e.attack = fields[2];
    const std::filesystem::path p(fields[0]);
    e.path = (p.is_absolute() ? p : base_dir / p).lexically_normal();
    const auto [it, inserted] = seen.emplace(e.path.string(), std::make_pair(e.split, line_no));
    if (!inserted) {
      if (it->second.first != e.split) {
        throw SplitOverlap(e.path.string() + " appears in both splits (lines " + std::to_string(it->second.second) +
                           " and " + std::to_string(line_no) + ")");
      }
      throw ManifestError("duplicate path " + fields[0], line_no);
    }
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw ManifestError("manifest is empty", line_no);
  if (check_files) {
    std::vector<std::string> missing;
    for (const auto& e : m.entries) {
      if (!std::filesystem::is_regular_file(e.path)) missing.push_back(e.path.string());
    }
    if (!missing.empty()) {
      std::string msg = std::to_string(missing.size()) + " manifest file(s) not found:";
      for (const auto& p : missing) msg += "\n  " + p;
      throw PathError(msg);
    }
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open manifest: " + path.string());
  return parse_manifest(in, path.parent_path(), path.stem().string(), check_files);
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << "path,label,attack,split\n";
  const auto base = path.parent_path();
  for (const auto& e : m.entries) {
    auto rel = e.path.lexically_relative(base.empty() ? std::filesystem::path(".") : base);
    if (rel.empty() || *rel.begin() == "..") rel = e.path;
    out << rel.generic_string() << ',' << label_name(e.label) << ',' << e.attack << ',' << to_string(e.split)
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace spoofscope::bench
