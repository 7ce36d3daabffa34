#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace daan {

// ---------------------------------------------------------------------------
// Error taxonomy. Every module throws one of these; messages carry the
// offending values so failures are diagnosable from the what() string alone.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

// Raised by the dataset readers. Carries the byte offset at which the file
// stopped making sense.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::uint64_t offset)
      : Error(msg + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class MiningError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Seeding helpers. All randomness in the project flows through named streams
// derived from a root seed, so parallel and serial execution draw identical
// values and every run is replayable from its config.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fold_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t fold_seed(std::uint64_t seed, std::uint64_t head, Rest... rest) {
  return fold_seed(splitmix64(seed ^ (head + 0x9e3779b97f4a7c15ULL)), rest...);
}

// Stable 64-bit tag for a stream name ("noise", "shuffle", ...).
inline std::uint64_t stream_tag(const char* name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* p = name; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename... Parts>
std::mt19937_64 stream_rng(std::uint64_t seed, const char* name, Parts... parts) {
  return std::mt19937_64(fold_seed(seed, stream_tag(name), static_cast<std::uint64_t>(parts)...));
}

// FNV-1a over raw bytes; used for split hashing and trajectory comparison.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string format_shape(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  if (shape.empty()) os << "scalar";
  return os.str();
}

}  // namespace daan
