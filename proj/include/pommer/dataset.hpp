#ifndef POMMER_DATASET_HPP_
#define POMMER_DATASET_HPP_

// Imitation dataset file.
//
//   header  : "PMDS" | u32 version | u64 config_hash | u64 records | u64 games
//   records : records x (19*11*11 f32, channel-major | u8 action)
//   trailer : games x u64 record count per game, in play order
//
// All integers and floats little-endian.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pommer/binary_io.hpp"
#include "pommer/encoder.hpp"

namespace pommer {

inline constexpr std::array<char, 4> kDatasetMagic = {'P', 'M', 'D', 'S'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 4 + 4 + 8 + 8 + 8;
inline constexpr std::size_t kDatasetRecordBytes = kTensorSize * sizeof(float) + 1;

/// Streams records to `<path>.tmp` and renames on finish(); an unfinished
/// writer removes its temporary file.
class DatasetWriter {
 public:
  DatasetWriter(std::filesystem::path path, std::uint64_t config_hash)
      : path_(std::move(path)), tmp_(path_.string() + ".tmp"), hash_(config_hash) {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + tmp_.string());
    write_header();
  }
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;
  ~DatasetWriter() {
    if (!finished_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  void begin_game() { game_counts_.push_back(0); }

  void append(const ObservationTensor& t, Action a) {
    if (game_counts_.empty()) begin_game();
    out_.write(reinterpret_cast<const char*>(t.data.data()), sizeof(float) * kTensorSize);
    io::put(out_, static_cast<std::uint8_t>(a));
    if (!out_) throw std::runtime_error("write failed: " + tmp_.string());
    ++game_counts_.back();
    ++records_;
  }

  void finish() {
    for (const std::uint64_t c : game_counts_) io::put(out_, c);
    out_.seekp(0);
    write_header();
    out_.close();
    if (!out_) throw std::runtime_error("write failed: " + tmp_.string());
    std::filesystem::rename(tmp_, path_);
    finished_ = true;
  }

  std::uint64_t records() const { return records_; }
  const std::vector<std::uint64_t>& game_counts() const { return game_counts_; }

 private:
  void write_header() {
    out_.write(kDatasetMagic.data(), 4);
    io::put(out_, kDatasetVersion);
    io::put(out_, hash_);
    io::put(out_, records_);
    io::put(out_, static_cast<std::uint64_t>(game_counts_.size()));
  }

  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::uint64_t hash_;
  std::ofstream out_;
  std::uint64_t records_ = 0;
  std::vector<std::uint64_t> game_counts_;
  bool finished_ = false;
};

struct DatasetHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t records = 0;
  std::vector<std::uint64_t> game_counts;
};

inline DatasetHeader read_dataset_header(std::istream& in, std::uint64_t file_size) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kDatasetMagic) throw FileFormatError("not a dataset file");
  if (io::get<std::uint32_t>(in) != kDatasetVersion) {
    throw FileFormatError("unsupported dataset version");
  }
  DatasetHeader h;
  h.config_hash = io::get<std::uint64_t>(in);
  h.records = io::get<std::uint64_t>(in);
  const auto games = io::get<std::uint64_t>(in);
  const std::uint64_t expected =
      kDatasetHeaderBytes + h.records * kDatasetRecordBytes + games * 8;
  if (expected != file_size) throw FileFormatError("dataset size mismatch");
  in.seekg(static_cast<std::streamoff>(kDatasetHeaderBytes + h.records * kDatasetRecordBytes));
  h.game_counts.resize(games);
  std::uint64_t total = 0;
  for (auto& c : h.game_counts) {
    c = io::get<std::uint64_t>(in);
    total += c;
  }
  if (total != h.records) throw FileFormatError("dataset game table mismatch");
  return h;
}

/// Dataset held in memory with one byte per tensor value. Every encoded
/// value is a small non-negative integer, so this is lossless; loading
/// rejects anything else.
class CompactDataset {
 public:
  static CompactDataset load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CompactDataset ds;
    ds.header_ = read_dataset_header(in, std::filesystem::file_size(path));
    ds.values_.resize(ds.header_.records * kTensorSize);
    ds.actions_.resize(ds.header_.records);
    in.seekg(static_cast<std::streamoff>(kDatasetHeaderBytes));
    std::vector<float> buf(kTensorSize);
    for (std::uint64_t r = 0; r < ds.header_.records; ++r) {
      in.read(reinterpret_cast<char*>(buf.data()), sizeof(float) * kTensorSize);
      const auto action = io::get<std::uint8_t>(in);
      if (action >= kNumActions) throw FileFormatError("action byte out of range");
      ds.actions_[r] = action;
      std::uint8_t* dst = ds.values_.data() + r * kTensorSize;
      for (int i = 0; i < kTensorSize; ++i) {
        const float v = buf[i];
        if (!(v >= 0.0f && v <= 255.0f) || v != std::floor(v)) {
          throw FileFormatError("dataset value not representable compactly");
        }
        dst[i] = static_cast<std::uint8_t>(v);
      }
    }
    std::uint64_t offset = 0;
    for (const std::uint64_t c : ds.header_.game_counts) {
      ds.game_offsets_.push_back(offset);
      offset += c;
    }
    return ds;
  }

  std::size_t size() const { return actions_.size(); }
  std::size_t games() const { return header_.game_counts.size(); }
  std::uint64_t config_hash() const { return header_.config_hash; }
  std::uint64_t game_offset(std::size_t g) const { return game_offsets_[g]; }
  std::uint64_t game_size(std::size_t g) const { return header_.game_counts[g]; }

  Action action(std::size_t r) const { return static_cast<Action>(actions_[r]); }

  template <typename T>
  void copy_tensor(std::size_t r, std::span<T> out) const {
    const std::uint8_t* src = values_.data() + r * kTensorSize;
    for (int i = 0; i < kTensorSize; ++i) out[i] = static_cast<T>(src[i]);
  }

 private:
  DatasetHeader header_;
  std::vector<std::uint8_t> values_;
  std::vector<std::uint8_t> actions_;
  std::vector<std::uint64_t> game_offsets_;
};

}  // namespace pommer

#endif  // POMMER_DATASET_HPP_
