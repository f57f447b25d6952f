#include "swag/random.hpp"

#include <limits>
#include <string>

#include "swag/error.hpp"
#include "swag/hashing.hpp"

namespace swag {

SeedBuilder::SeedBuilder(std::uint64_t root) { add(root); }

SeedBuilder& SeedBuilder::add(std::string_view part) {
  material_ += 's';
  material_ += std::to_string(part.size());
  material_ += ':';
  material_.append(part);
  return *this;
}

SeedBuilder& SeedBuilder::add(std::uint64_t part) {
  material_ += 'u';
  material_ += std::to_string(part);
  material_ += ';';
  return *this;
}

std::uint64_t SeedBuilder::seed() const { return sha256_u64(material_); }

std::size_t uniform_index(Engine& engine, std::size_t n) {
  if (n == 0) throw Error(Errc::invalid_argument, "uniform_index over an empty range");
  const std::uint64_t range = n;
  // Largest multiple of range that fits; draws at or above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x = engine();
  while (x >= limit) x = engine();
  return static_cast<std::size_t>(x % range);
}

}  // namespace swag
