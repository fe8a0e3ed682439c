#pragma once

#include <bit>
#include <cstdint>
#include <string_view>
#include <type_traits>

namespace mamgrid::util {

// 64-bit FNV-1a over a byte stream; stable across runs and platforms with
// the same endianness.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ULL;
    }
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void add(T value) {
    if constexpr (std::is_floating_point_v<T>) {
      const auto bits = std::bit_cast<std::uint64_t>(static_cast<double>(value));
      add_bytes(&bits, sizeof bits);
    } else {
      const auto wide = static_cast<std::int64_t>(value);
      add_bytes(&wide, sizeof wide);
    }
  }

  void add(std::string_view text) {
    add(text.size());
    add_bytes(text.data(), text.size());
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace mamgrid::util
