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

#ifndef PITCHLAB_COMMON_H_
#define PITCHLAB_COMMON_H_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pitchlab {

// Raised for bad configuration values or arguments that violate a
// precondition. The CLI maps it to exit code 3.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a text artifact (replay, policy, config) cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " +
                                          what
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Counter-based randomness. Every stochastic decision in the environment is
// a pure function of (seed, step, kind, index), so parallel rollouts and
// replays are reproducible regardless of evaluation order.
inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t HashCombine(uint64_t a, uint64_t b) {
  return SplitMix64(a ^ (SplitMix64(b) + 0x632be59bd9b4e019ULL));
}

inline double CounterUniform(uint64_t seed, uint64_t step, uint64_t kind,
                             uint64_t index) {
  uint64_t h = HashCombine(HashCombine(HashCombine(seed, step), kind), index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Derives a child seed, e.g. for (task seed, worker index, episode ordinal).
inline uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  return HashCombine(HashCombine(seed, a), b);
}

// FNV-1a, used for config fingerprints.
inline uint64_t Fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// key=value text, '#' starts a comment, blank lines ignored.
using KeyValues = std::map<std::string, std::string>;
KeyValues ParseKeyValues(std::string_view text);
KeyValues ReadKeyValueFile(const std::string& path);

bool ParseBool(const std::string& value);
// Strict numeric parsing; the key is only used in the error message.
double ParseDouble(const std::string& key, const std::string& value);
long long ParseInt(const std::string& key, const std::string& value);
// Keys starting with `prefix`, with the prefix stripped.
KeyValues Section(const KeyValues& kv, std::string_view prefix);

}  // namespace pitchlab

#endif  // PITCHLAB_COMMON_H_
