#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "pommer/dataset.hpp"
#include "pommer/encoder.hpp"
#include "test_util.hpp"

namespace pommer {
namespace {

using testing::open_board;
using testing::random_actions;

TEST(Encode, FreshGameBroadcastAndPosition) {
  const GameState s = generate_board(17);
  const ObservationTensor t = encode(observe(s, 0));
  for (int r = 0; r < kBoardSize; ++r) {
    for (int c = 0; c < kBoardSize; ++c) {
      EXPECT_EQ(t.at(channel::kAmmo, r, c), 1.0f);
      EXPECT_EQ(t.at(channel::kBlastStrength, r, c), 3.0f);
      EXPECT_EQ(t.at(channel::kCanKick, r, c), 0.0f);
      EXPECT_EQ(t.at(channel::kSelf, r, c), (r == 0 && c == 0) ? 1.0f : 0.0f);
    }
  }
}

TEST(Encode, VisibleBombStrengthAndLife) {
  GameState s = open_board();
  s.bombs.push_back(Bomb{{2, 3}, 7, 3, 1, Action::Stop});
  const ObservationTensor t = encode(observe(s, 0));
  EXPECT_EQ(t.at(channel::kBombStrength, 2, 3), 3.0f);
  EXPECT_EQ(t.at(channel::kBombLife, 2, 3), 7.0f);
  EXPECT_EQ(t.at(channel::kBomb, 2, 3), 1.0f);
  EXPECT_EQ(t.at(channel::kPassage, 2, 3), 0.0f);
  EXPECT_EQ(t.at(channel::kBombLife, 2, 4), 0.0f);
  EXPECT_EQ(t.at(channel::kDesirability, 2, 3), 7.0f);
}

TEST(Encode, PositionsOfTeammateAndEnemies) {
  GameState s = open_board();
  s.agents[0].position = {5, 5};
  const ObservationTensor t = encode(observe(s, 0));
  EXPECT_EQ(t.at(channel::kTeammate, 10, 10), 1.0f);
  EXPECT_EQ(t.at(channel::kEnemy1, 0, 10), 1.0f);  // agent 1
  EXPECT_EQ(t.at(channel::kEnemy2, 10, 0), 1.0f);  // agent 3

  // From the corner nobody else is visible.
  const ObservationTensor corner = encode(observe(open_board(), 0));
  for (int ch : {channel::kTeammate, channel::kEnemy1, channel::kEnemy2}) {
    float sum = 0;
    for (int i = 0; i < kPlaneSize; ++i) sum += corner.data[ch * kPlaneSize + i];
    EXPECT_EQ(sum, 0.0f);
  }
}

TEST(Encode, FogZeroesBombChannels) {
  GameState s = open_board();
  s.bombs.push_back(Bomb{{9, 9}, 4, 3, 2, Action::Stop});
  const ObservationTensor t = encode(observe(s, 0));
  EXPECT_EQ(t.at(channel::kFog, 9, 9), 1.0f);
  EXPECT_EQ(t.at(channel::kBomb, 9, 9), 0.0f);
  EXPECT_EQ(t.at(channel::kBombStrength, 9, 9), 0.0f);
  EXPECT_EQ(t.at(channel::kBombLife, 9, 9), 0.0f);
  EXPECT_EQ(t.at(channel::kDesirability, 9, 9), 3.0f);
}

TEST(Encode, RejectsMalformed) {
  RawObservation o = observe(open_board(), 0);
  o.position = {12, 0};
  EXPECT_THROW(encode(o), std::invalid_argument);
  o = observe(open_board(), 0);
  o.board[o.position.index()] = Cell::Fog;
  EXPECT_THROW(encode(o), std::invalid_argument);
}

TEST(Desirability, QuotedCodes) {
  GameState s = open_board();
  s.agents[0].position = {5, 5};
  s.items[Position{5, 6}.index()] = Powerup::Kick;
  s.board[Position{4, 4}.index()] = Cell::WoodenWall;
  s.board[Position{6, 6}.index()] = Cell::RigidWall;
  s.agents[1].position = {3, 3};
  s.agents[2].position = {7, 7};
  s.bombs.push_back(Bomb{{5, 8}, 5, 2, 0, Action::Stop});
  s.flames[Position{2, 2}.index()] = 1;
  const DesirabilityPlane d = desirability_map(observe(s, 0));
  EXPECT_EQ(d[5 * kBoardSize + 6], 0);
  EXPECT_EQ(d[4 * kBoardSize + 4], 1);
  EXPECT_EQ(d[5 * kBoardSize + 4], 2);
  EXPECT_EQ(d[3 * kBoardSize + 3], 4);
  EXPECT_EQ(d[6 * kBoardSize + 6], 5);
  EXPECT_EQ(d[7 * kBoardSize + 7], 6);
  EXPECT_EQ(d[5 * kBoardSize + 8], 7);
  EXPECT_EQ(d[2 * kBoardSize + 2], 8);

  const DesirabilityPlane corner = desirability_map(observe(open_board(), 0));
  EXPECT_EQ(corner[10 * kBoardSize + 10], 3);
}

TEST(Desirability, Precedence) {
  RawObservation o = observe(open_board(), 0);
  o.agent_positions[1] = Position{2, 2};  // enemy on passage
  o.bombs.push_back(Bomb{{3, 3}, 1, 2, -1, Action::Stop});
  o.flames[3 * kBoardSize + 3] = 1;  // flame over bomb
  o.items[2 * kBoardSize + 2] = Powerup::IncrRange;
  const DesirabilityPlane d = desirability_map(o);
  EXPECT_EQ(d[2 * kBoardSize + 2], desirability::kEnemy);
  EXPECT_EQ(d[3 * kBoardSize + 3], desirability::kFlames);
}

// One-hot partition and value ranges over states reached by random play.
TEST(Properties, OneHotPartitionFuzz) {
  Rng rng(77);
  int checked = 0;
  while (checked < 10000) {
    GameState s = generate_board(rng());
    while (!terminal_status(s) && checked < 10000) {
      for (int id = 0; id < kNumAgents; ++id) {
        if (!s.agents[id].alive) continue;
        const RawObservation o = observe(s, id);
        const ObservationTensor t = encode(o);
        ASSERT_EQ(t, encode(o));
        for (int i = 0; i < kPlaneSize; ++i) {
          float sum = 0;
          for (int ch = 0; ch <= channel::kKickItem; ++ch) {
            const float v = t.data[ch * kPlaneSize + i];
            ASSERT_TRUE(v == 0.0f || v == 1.0f);
            sum += v;
          }
          ASSERT_EQ(sum, 1.0f) << "cell " << i;
          const float d = t.data[channel::kDesirability * kPlaneSize + i];
          ASSERT_GE(d, 0.0f);
          ASSERT_LE(d, 8.0f);
        }
        for (int ch = channel::kSelf; ch <= channel::kEnemy2; ++ch) {
          float sum = 0;
          for (int i = 0; i < kPlaneSize; ++i) sum += t.data[ch * kPlaneSize + i];
          ASSERT_LE(sum, 1.0f);
        }
        ++checked;
      }
      step_in_place(s, random_actions(rng));
    }
  }
}

class DatasetFileTest : public ::testing::Test {
 protected:
  std::filesystem::path dir_ = std::filesystem::temp_directory_path() /
                               ("pommer_ds_" + std::to_string(::getpid()));
  void SetUp() override { std::filesystem::create_directories(dir_); }
  void TearDown() override { std::filesystem::remove_all(dir_); }
};

TEST_F(DatasetFileTest, WriteLoadRoundTrip) {
  const auto path = dir_ / "d.bin";
  std::vector<ObservationTensor> written;
  {
    DatasetWriter w(path, 1234);
    Rng rng(5);
    for (int g = 0; g < 3; ++g) {
      w.begin_game();
      GameState s = generate_board(g);
      for (int k = 0; k < 4 + g; ++k) {
        written.push_back(encode(observe(s, 0)));
        w.append(written.back(), static_cast<Action>(k % kNumActions));
      }
    }
    w.finish();
  }
  EXPECT_EQ(std::filesystem::file_size(path),
            kDatasetHeaderBytes + written.size() * kDatasetRecordBytes + 3 * 8);
  const CompactDataset ds = CompactDataset::load(path);
  EXPECT_EQ(ds.size(), written.size());
  EXPECT_EQ(ds.games(), 3u);
  EXPECT_EQ(ds.config_hash(), 1234u);
  EXPECT_EQ(ds.game_size(2), 6u);
  EXPECT_EQ(ds.game_offset(2), 9u);
  std::vector<float> buf(kTensorSize);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    ds.copy_tensor(r, std::span(buf));
    EXPECT_TRUE(std::equal(buf.begin(), buf.end(), written[r].data.begin()));
  }
}

TEST_F(DatasetFileTest, UnfinishedWriterLeavesNothing) {
  const auto path = dir_ / "partial.bin";
  {
    DatasetWriter w(path, 1);
    w.append(ObservationTensor{}, Action::Stop);
  }
  EXPECT_FALSE(std::filesystem::exists(path));
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}

TEST_F(DatasetFileTest, CorruptFilesRejected) {
  const auto path = dir_ / "bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE and some more bytes to pass the header length check";
  }
  EXPECT_THROW(CompactDataset::load(path), FileFormatError);
  {
    DatasetWriter w(path, 1);
    w.append(ObservationTensor{}, Action::Stop);
    w.finish();
  }
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(CompactDataset::load(path), FileFormatError);
}

}  // namespace
}  // namespace pommer
