#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace kinsdf {

/// 64-bit FNV-1a, incremental.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size);
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update_double(double v) { update(&v, sizeof v); }
  void update_u64(std::uint64_t v) { update(&v, sizeof v); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace kinsdf
