#ifndef POMMER_ENCODER_HPP_
#define POMMER_ENCODER_HPP_

#include <array>
#include <cstdint>
#include <stdexcept>

#include "pommer/observation.hpp"

namespace pommer {

inline constexpr int kNumChannels = 19;
inline constexpr int kPlaneSize = kNumCells;
inline constexpr int kTensorSize = kNumChannels * kPlaneSize;

/// Channel layout of ObservationTensor.
namespace channel {
inline constexpr int kPassage = 0;
inline constexpr int kRigidWall = 1;
inline constexpr int kWoodenWall = 2;
inline constexpr int kBomb = 3;
inline constexpr int kFlames = 4;
inline constexpr int kFog = 5;
inline constexpr int kExtraBombItem = 6;
inline constexpr int kRangeItem = 7;
inline constexpr int kKickItem = 8;
inline constexpr int kSelf = 9;
inline constexpr int kTeammate = 10;
inline constexpr int kEnemy1 = 11;
inline constexpr int kEnemy2 = 12;
inline constexpr int kAmmo = 13;
inline constexpr int kBlastStrength = 14;
inline constexpr int kCanKick = 15;
inline constexpr int kBombStrength = 16;
inline constexpr int kBombLife = 17;
inline constexpr int kDesirability = 18;
}  // namespace channel

/// Desirability codes, most to least dangerous: Flames 8, Bombs 7,
/// Teammate 6, Rigid 5, Enemies 4, Fog 3, Passage 2, Wood 1, Powerups 0.
namespace desirability {
inline constexpr std::uint8_t kPowerup = 0;
inline constexpr std::uint8_t kWoodenWall = 1;
inline constexpr std::uint8_t kPassage = 2;
inline constexpr std::uint8_t kFog = 3;
inline constexpr std::uint8_t kEnemy = 4;
inline constexpr std::uint8_t kRigidWall = 5;
inline constexpr std::uint8_t kTeammate = 6;
inline constexpr std::uint8_t kBomb = 7;
inline constexpr std::uint8_t kFlames = 8;
}  // namespace desirability

using DesirabilityPlane = std::array<std::uint8_t, kNumCells>;

/// 19 x 11 x 11, channel-major.
struct ObservationTensor {
  std::array<float, kTensorSize> data{};

  float& at(int ch, int row, int col) {
    return data[ch * kPlaneSize + row * kBoardSize + col];
  }
  float at(int ch, int row, int col) const {
    return data[ch * kPlaneSize + row * kBoardSize + col];
  }
  float& at(int ch, Position p) { return at(ch, p.row, p.col); }
  float at(int ch, Position p) const { return at(ch, p.row, p.col); }

  bool operator==(const ObservationTensor&) const = default;
};

/// Per-cell desirability code. When several things share a cell the most
/// dangerous wins: flames, then bombs, then agents, then items, then terrain.
inline DesirabilityPlane desirability_map(const RawObservation& obs) {
  DesirabilityPlane plane{};
  for (int i = 0; i < kNumCells; ++i) {
    switch (obs.board[i]) {
      case Cell::Passage: plane[i] = desirability::kPassage; break;
      case Cell::RigidWall: plane[i] = desirability::kRigidWall; break;
      case Cell::WoodenWall: plane[i] = desirability::kWoodenWall; break;
      case Cell::Fog: plane[i] = desirability::kFog; break;
    }
    if (obs.board[i] == Cell::Fog) continue;
    if (obs.items[i] != Powerup::None) plane[i] = desirability::kPowerup;
  }
  for (const int e : obs.enemies) {
    if (obs.agent_positions[e]) plane[obs.agent_positions[e]->index()] = desirability::kEnemy;
  }
  if (obs.agent_positions[obs.teammate]) {
    plane[obs.agent_positions[obs.teammate]->index()] = desirability::kTeammate;
  }
  for (const Bomb& b : obs.bombs) plane[b.position.index()] = desirability::kBomb;
  for (int i = 0; i < kNumCells; ++i) {
    if (obs.flames[i] > 0) plane[i] = desirability::kFlames;
  }
  return plane;
}

inline void validate(const RawObservation& obs) {
  if (!obs.position.in_bounds() || obs.board[obs.position.index()] == Cell::Fog) {
    throw std::invalid_argument("observation: agent position outside its own view");
  }
  if (obs.self_id < 0 || obs.self_id >= kNumAgents) {
    throw std::invalid_argument("observation: bad agent id");
  }
  for (const Bomb& b : obs.bombs) {
    if (!b.position.in_bounds()) {
      throw std::invalid_argument("observation: bomb outside the 11x11 grid");
    }
  }
  for (const auto& p : obs.agent_positions) {
    if (p && !p->in_bounds()) {
      throw std::invalid_argument("observation: agent outside the 11x11 grid");
    }
  }
}

inline ObservationTensor encode(const RawObservation& obs) {
  validate(obs);
  ObservationTensor t;
  for (int i = 0; i < kNumCells; ++i) {
    int board_channel = channel::kPassage;
    switch (obs.board[i]) {
      case Cell::Passage: board_channel = channel::kPassage; break;
      case Cell::RigidWall: board_channel = channel::kRigidWall; break;
      case Cell::WoodenWall: board_channel = channel::kWoodenWall; break;
      case Cell::Fog: board_channel = channel::kFog; break;
    }
    // Passage cells are refined into the entity occupying them.
    if (obs.board[i] == Cell::Passage) {
      switch (obs.items[i]) {
        case Powerup::ExtraBomb: board_channel = channel::kExtraBombItem; break;
        case Powerup::IncrRange: board_channel = channel::kRangeItem; break;
        case Powerup::Kick: board_channel = channel::kKickItem; break;
        case Powerup::None: break;
      }
      if (obs.flames[i] > 0) board_channel = channel::kFlames;
    }
    t.data[board_channel * kPlaneSize + i] = 1.0f;
  }
  for (const Bomb& b : obs.bombs) {
    const int i = b.position.index();
    // A bomb outranks the item or flame marker underneath it.
    for (int ch = 0; ch <= channel::kKickItem; ++ch) t.data[ch * kPlaneSize + i] = 0.0f;
    t.data[channel::kBomb * kPlaneSize + i] = 1.0f;
    t.data[channel::kBombStrength * kPlaneSize + i] = static_cast<float>(b.blast_strength);
    t.data[channel::kBombLife * kPlaneSize + i] = static_cast<float>(b.life);
  }

  t.at(channel::kSelf, obs.position) = 1.0f;
  if (obs.agent_positions[obs.teammate]) {
    t.at(channel::kTeammate, *obs.agent_positions[obs.teammate]) = 1.0f;
  }
  if (obs.agent_positions[obs.enemies[0]]) {
    t.at(channel::kEnemy1, *obs.agent_positions[obs.enemies[0]]) = 1.0f;
  }
  if (obs.agent_positions[obs.enemies[1]]) {
    t.at(channel::kEnemy2, *obs.agent_positions[obs.enemies[1]]) = 1.0f;
  }

  const float ammo = static_cast<float>(obs.ammo);
  const float strength = static_cast<float>(obs.blast_strength);
  const float kick = obs.can_kick ? 1.0f : 0.0f;
  const DesirabilityPlane desire = desirability_map(obs);
  for (int i = 0; i < kNumCells; ++i) {
    t.data[channel::kAmmo * kPlaneSize + i] = ammo;
    t.data[channel::kBlastStrength * kPlaneSize + i] = strength;
    t.data[channel::kCanKick * kPlaneSize + i] = kick;
    t.data[channel::kDesirability * kPlaneSize + i] = static_cast<float>(desire[i]);
  }
  return t;
}

}  // namespace pommer

#endif  // POMMER_ENCODER_HPP_
