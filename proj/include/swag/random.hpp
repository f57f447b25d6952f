#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace swag {

/// Engine used for every seeded draw. mt19937_64's output sequence is fixed by
/// the standard; distributions are done by hand below so results do not depend
/// on the standard library implementation.
using Engine = std::mt19937_64;

/// Derives an engine seed from a run seed plus any number of string/integer
/// components, e.g. (run_seed, prompt id, iteration). Components are
/// length-prefixed before hashing so ("ab","c") and ("a","bc") differ.
class SeedBuilder {
 public:
  explicit SeedBuilder(std::uint64_t root);
  SeedBuilder& add(std::string_view part);
  SeedBuilder& add(std::uint64_t part);
  [[nodiscard]] std::uint64_t seed() const;
  [[nodiscard]] Engine engine() const { return Engine(seed()); }

 private:
  std::string material_;
};

/// Uniform integer in [0, n) by rejection sampling. n must be > 0.
std::size_t uniform_index(Engine& engine, std::size_t n);

/// Fisher-Yates shuffle using uniform_index.
template <typename T>
void seeded_shuffle(std::vector<T>& items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(engine, i)]);
  }
}

}  // namespace swag
