#ifndef POMMER_NN_CHECKPOINT_HPP_
#define POMMER_NN_CHECKPOINT_HPP_

// Network checkpoint file.
//
//   "PMNN" | u32 version | spec | u8 mode | u64 config_hash | u64 count
//   | count x f32 parameters in layer order
//
// spec = i32 in_c, i32 h, i32 w, u32 n, n x (i32 filters, u8 pool),
//        u32 m, m x i32 units, i32 outputs, f64 dropout

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "pommer/binary_io.hpp"
#include "pommer/nn/network.hpp"
#include "pommer/random.hpp"

namespace pommer::nn {

inline constexpr std::array<char, 4> kCheckpointMagic = {'P', 'M', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Network<float> net;
  Mode mode = Mode::Eval;
  std::uint64_t config_hash = 0;
};

inline void write_spec(std::ostream& out, const NetSpec& s) {
  io::put<std::int32_t>(out, s.in_channels);
  io::put<std::int32_t>(out, s.height);
  io::put<std::int32_t>(out, s.width);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.conv_filters.size()));
  for (std::size_t i = 0; i < s.conv_filters.size(); ++i) {
    io::put<std::int32_t>(out, s.conv_filters[i]);
    io::put<std::uint8_t>(out, s.pool_after[i] ? 1 : 0);
  }
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.dense_units.size()));
  for (int u : s.dense_units) io::put<std::int32_t>(out, u);
  io::put<std::int32_t>(out, s.outputs);
  io::put<double>(out, s.dropout);
}

inline NetSpec read_spec(std::istream& in) {
  NetSpec s;
  s.in_channels = io::get<std::int32_t>(in);
  s.height = io::get<std::int32_t>(in);
  s.width = io::get<std::int32_t>(in);
  const auto n = io::get<std::uint32_t>(in);
  if (n > 64) throw FileFormatError("checkpoint: implausible layer count");
  s.conv_filters.resize(n);
  s.pool_after.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    s.conv_filters[i] = io::get<std::int32_t>(in);
    s.pool_after[i] = io::get<std::uint8_t>(in);
  }
  const auto m = io::get<std::uint32_t>(in);
  if (m > 64) throw FileFormatError("checkpoint: implausible layer count");
  s.dense_units.resize(m);
  for (auto& u : s.dense_units) u = io::get<std::int32_t>(in);
  s.outputs = io::get<std::int32_t>(in);
  s.dropout = io::get<double>(in);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw FileFormatError(std::string("checkpoint: ") + e.what());
  }
  return s;
}

/// Written to a temporary file and renamed into place.
inline void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                            Mode mode, std::uint64_t config_hash) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(kCheckpointMagic.data(), 4);
    io::put(out, kCheckpointVersion);
    write_spec(out, net.spec());
    io::put<std::uint8_t>(out, static_cast<std::uint8_t>(mode));
    io::put(out, config_hash);
    io::put<std::uint64_t>(out, net.num_params());
    io::put_span(out, net.params());
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kCheckpointMagic) throw FileFormatError("not a checkpoint file");
  if (io::get<std::uint32_t>(in) != kCheckpointVersion) {
    throw FileFormatError("unsupported checkpoint version");
  }
  Checkpoint ck{Network<float>(read_spec(in))};
  const auto mode = io::get<std::uint8_t>(in);
  if (mode > 1) throw FileFormatError("checkpoint: bad mode");
  ck.mode = static_cast<Mode>(mode);
  ck.config_hash = io::get<std::uint64_t>(in);
  if (io::get<std::uint64_t>(in) != ck.net.num_params()) {
    throw FileFormatError("checkpoint: parameter count does not match its layer spec");
  }
  io::get_span(in, ck.net.params());
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw FileFormatError("checkpoint: trailing bytes");
  }
  for (const float v : ck.net.params()) {
    if (!std::isfinite(v)) throw FileFormatError("checkpoint: non-finite parameter");
  }
  return ck;
}

/// FNV-1a over the raw parameter bytes.
template <typename T>
std::uint64_t params_hash(const Network<T>& net) {
  const auto p = net.params();
  return fnv1a(std::string_view(reinterpret_cast<const char*>(p.data()),
                                p.size() * sizeof(T)));
}

}  // namespace pommer::nn

#endif  // POMMER_NN_CHECKPOINT_HPP_
