#ifndef POMMER_BINARY_IO_HPP_
#define POMMER_BINARY_IO_HPP_

#include <bit>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>

namespace pommer {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class FileFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FileFormatError("unexpected end of file");
  return v;
}

template <typename T>
void put_span(std::ostream& out, std::span<const T> v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void get_span(std::istream& in, std::span<T> v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  if (!in) throw FileFormatError("unexpected end of file");
}

}  // namespace io

}  // namespace pommer

#endif  // POMMER_BINARY_IO_HPP_
