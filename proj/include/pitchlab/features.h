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

// Observation encoders (simple and complex layouts) and per-agent action
// masks. Everything here is a pure function of its inputs.

#ifndef PITCHLAB_FEATURES_H_
#define PITCHLAB_FEATURES_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pitchlab/game.h"

namespace pitchlab {

struct FeatureBlock {
  std::string name;
  int offset = 0;
  int length = 0;
  std::vector<std::string> fields;  // one label per element
};

struct FeatureLayout {
  std::vector<FeatureBlock> blocks;

  int size() const;
  const FeatureBlock& block(std::string_view name) const;
  // One line per block: "<name> <offset> <length> <field,field,...>".
  std::string ToSchemaText() const;
  static FeatureLayout FromSchemaText(std::string_view text);
};

struct FeatureVector {
  std::vector<double> values;
  const FeatureLayout* layout = nullptr;  // points at a cached layout

  std::span<const double> block(std::string_view name) const {
    const FeatureBlock& b = layout->block(name);
    return std::span<const double>(values).subspan(b.offset, b.length);
  }
};

struct ActionMask {
  std::array<bool, kActionCount> allowed{};

  bool operator[](int action) const { return allowed[action]; }
  int count() const;
  uint32_t bits() const;
  static ActionMask FromBits(uint32_t bits);
  static ActionMask All();
};

// Layouts depend only on the team size and are built once per size.
inline constexpr int kMaxPlayersPerTeam = 11;
const FeatureLayout& SimpleLayout(int n_per_team);
const FeatureLayout& ComplexLayout(int n_per_team);

// `obs` may be in any frame; the encoders present it from `team`'s side.
// `agent` indexes that team's field players.
FeatureVector EncodeSimple(const RawObservation& obs, TeamId team, int agent);
FeatureVector EncodeComplex(const RawObservation& obs, TeamId team, int agent);
ActionMask ComputeActionMask(const RawObservation& obs, TeamId team, int agent);

// Normalisations shared with the tabular discretiser.
double NormalizeX(int x, int width);
double NormalizeY(int y, int height);
double DistanceScale(int width, int height);

}  // namespace pitchlab

#endif  // PITCHLAB_FEATURES_H_
