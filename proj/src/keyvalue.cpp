/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The tvbf Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "tvbf/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tvbf/error.hpp"

namespace tvbf {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig,
            "line " + std::to_string(number) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorKind::kConfig,
            "line " + std::to_string(number) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot read config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string KeyValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorKind::kConfig, "missing key: " + key);
  return it->second;
}

std::string KeyValues::get(const std::string& key,
                           const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kConfig, "key " + key + ": not a number: '" + text + "'");
}

std::size_t to_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  require(ec == std::errc() && ptr == end, ErrorKind::kConfig,
          "key " + key + ": not a non-negative integer: '" + text + "'");
  return v;
}

}  // namespace

double KeyValues::get_double(const std::string& key) const {
  return to_double(key, get(key));
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::size_t KeyValues::get_size(const std::string& key) const {
  return to_size(key, get(key));
}

std::size_t KeyValues::get_size(const std::string& key,
                                std::size_t fallback) const {
  return has(key) ? get_size(key) : fallback;
}

std::vector<std::size_t> KeyValues::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  if (!has(key)) return out;
  for (const auto& item : split(get(key), ',')) out.push_back(to_size(key, item));
  return out;
}

std::vector<double> KeyValues::get_doubles(const std::string& key) const {
  std::vector<double> out;
  if (!has(key)) return out;
  for (const auto& item : split(get(key), ',')) out.push_back(to_double(key, item));
  return out;
}

}  // namespace tvbf
