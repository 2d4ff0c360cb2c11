// Copyright 2026 The Pitchlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pitchlab/common.h"

#include <fstream>
#include <sstream>

namespace pitchlab {
namespace {

std::string Trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KeyValues ParseKeyValues(std::string_view text) {
  KeyValues out;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key=value, got '" + trimmed + "'", line_no);
    }
    std::string key = Trim(std::string_view(trimmed).substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    out[key] = Trim(std::string_view(trimmed).substr(eq + 1));
  }
  return out;
}

KeyValues ReadKeyValueFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseKeyValues(ss.str());
}

bool ParseBool(const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") {
    return true;
  }
  if (value == "0" || value == "false" || value == "no" || value == "off") {
    return false;
  }
  throw ConfigError("not a boolean: '" + value + "'");
}

double ParseDouble(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ConfigError("bad number for '" + key + "': '" + value + "'");
  }
  return v;
}

long long ParseInt(const std::string& key, const std::string& value) {
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ConfigError("bad integer for '" + key + "': '" + value + "'");
  }
  return v;
}

KeyValues Section(const KeyValues& kv, std::string_view prefix) {
  KeyValues out;
  for (const auto& [k, v] : kv) {
    if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) {
      out[k.substr(prefix.size())] = v;
    }
  }
  return out;
}

}  // namespace pitchlab
