#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <span>
#include <vector>

#include "error.hpp"
#include "state_space.hpp"

namespace ruelle {

/// Non-owning view of the point (x_1, ..., x_m, pad, pad, ...) of M^N.
/// Coordinates are addressed 0-based: view[0] is x_1.
struct ConfigView {
  std::span<const Index> prefix;
  Index pad = 0;

  Index operator[](std::size_t k) const noexcept { return k < prefix.size() ? prefix[k] : pad; }
  std::size_t prefix_size() const noexcept { return prefix.size(); }

  /// The view of sigma^k of this point.
  ConfigView shifted(std::size_t k) const noexcept {
    if (k >= prefix.size()) return {{}, pad};
    return {prefix.subspan(k), pad};
  }
};

/// An eventually constant point of M^N: a finite prefix followed by a
/// repeated pad letter.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::vector<Index> prefix, Index pad = 0)
      : prefix_(std::move(prefix)), pad_(pad) {}

  static Configuration pure_pad(Index pad) { return Configuration({}, pad); }

  const std::vector<Index>& prefix() const noexcept { return prefix_; }
  Index pad() const noexcept { return pad_; }
  Index operator[](std::size_t k) const noexcept { return k < prefix_.size() ? prefix_[k] : pad_; }
  ConfigView view() const noexcept { return {prefix_, pad_}; }

  /// Whether every index (prefix and pad) is a point of `space`.
  bool valid_for(const StateSpace& space) const noexcept {
    return space.contains(pad_) &&
           std::all_of(prefix_.begin(), prefix_.end(), [&](Index a) { return space.contains(a); });
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;

 private:
  std::vector<Index> prefix_;
  Index pad_ = 0;
};

inline void require_valid(const Configuration& x, const StateSpace& space, const char* where) {
  if (!x.valid_for(space))
    throw Error(std::string(where) + ": configuration has an index outside the alphabet of size " +
                std::to_string(space.size()));
}

/// Materializes the first `length` coordinates of a view followed by its pad.
inline Configuration materialize(ConfigView x, std::size_t length) {
  std::vector<Index> prefix(length);
  for (std::size_t k = 0; k < length; ++k) prefix[k] = x[k];
  return Configuration(std::move(prefix), x.pad);
}

/// sigma(x_1, x_2, ...) = (x_2, x_3, ...).
inline Configuration shift(const Configuration& x) {
  if (x.prefix().empty()) return x;
  return Configuration({x.prefix().begin() + 1, x.prefix().end()}, x.pad());
}

inline Configuration shift(const Configuration& x, std::size_t times) {
  if (times >= x.prefix().size()) return Configuration::pure_pad(x.pad());
  return Configuration({x.prefix().begin() + static_cast<std::ptrdiff_t>(times), x.prefix().end()},
                       x.pad());
}

/// ax = (a, x_1, x_2, ...).
inline Configuration prepend(Index a, const Configuration& x, const StateSpace& space) {
  if (!space.contains(a))
    throw Error("prepend: index " + std::to_string(a) + " outside alphabet of size " +
                std::to_string(space.size()));
  std::vector<Index> prefix;
  prefix.reserve(x.prefix().size() + 1);
  prefix.push_back(a);
  prefix.insert(prefix.end(), x.prefix().begin(), x.prefix().end());
  return Configuration(std::move(prefix), x.pad());
}

/// Concatenates a finite word in front of a configuration.
inline Configuration concat(std::span<const Index> word, const Configuration& x) {
  std::vector<Index> prefix(word.begin(), word.end());
  prefix.insert(prefix.end(), x.prefix().begin(), x.prefix().end());
  return Configuration(std::move(prefix), x.pad());
}

struct DistanceEstimate {
  double partial = 0.0;     ///< sum over n <= depth of 2^-n d(x_n, y_n)
  double tail_bound = 0.0;  ///< 2^-depth * diam(M), bound on the neglected tail
  double exact = 0.0;       ///< full series; both tails are pads beyond depth
};

/// d(x, y) = sum_n 2^-n d(x_n, y_n) for the product metric.
inline DistanceEstimate product_distance(const StateSpace& space, const Configuration& x,
                                         const Configuration& y, std::size_t depth) {
  require_valid(x, space, "product_distance");
  require_valid(y, space, "product_distance");
  if (depth < std::max(x.prefix().size(), y.prefix().size()))
    throw Error("product_distance: depth must cover both prefixes");
  DistanceEstimate out;
  double scale = 0.5;
  for (std::size_t n = 0; n < depth; ++n, scale *= 0.5) out.partial += scale * space.distance(x[n], y[n]);
  const double tail = std::ldexp(1.0, -static_cast<int>(depth));
  out.tail_bound = tail * space.diameter();
  out.exact = out.partial + tail * space.distance(x.pad(), y.pad());
  return out;
}

inline constexpr std::size_t kDefaultEnumerationCap = 10'000'000;

/// N^n, or an overflow-safe sentinel above `limit`.
inline std::size_t checked_power(std::size_t base, std::size_t exponent, std::size_t limit) {
  std::size_t result = 1;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (base != 0 && result > limit / base) return limit + 1;
    result *= base;
  }
  return result;
}

/// Lexicographic enumeration of M^n (first coordinate most significant).
/// Restartable; `word(i)` gives random access for range partitioning.
class WordRange {
 public:
  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = std::vector<Index>;
    using difference_type = std::ptrdiff_t;
    using pointer = const std::vector<Index>*;
    using reference = const std::vector<Index>&;

    iterator() = default;
    iterator(std::size_t alphabet, std::size_t length, std::size_t position, std::size_t end)
        : alphabet_(alphabet), word_(length, 0), position_(position) {
      if (position < end) word_ = decode(position, alphabet, length);
    }

    const std::vector<Index>& operator*() const noexcept { return word_; }
    const std::vector<Index>* operator->() const noexcept { return &word_; }
    iterator& operator++() {
      ++position_;
      for (std::size_t k = word_.size(); k-- > 0;) {
        if (++word_[k] < alphabet_) break;
        word_[k] = 0;
      }
      return *this;
    }
    iterator operator++(int) {
      iterator old = *this;
      ++*this;
      return old;
    }
    bool operator==(const iterator& o) const noexcept { return position_ == o.position_; }

   private:
    std::size_t alphabet_ = 0;
    std::vector<Index> word_;
    std::size_t position_ = 0;
  };

  WordRange(std::size_t alphabet, std::size_t length, std::size_t count)
      : alphabet_(alphabet), length_(length), count_(count) {}

  std::size_t size() const noexcept { return count_; }
  std::size_t length() const noexcept { return length_; }
  iterator begin() const { return {alphabet_, length_, 0, count_}; }
  iterator end() const { return {alphabet_, length_, count_, count_}; }
  std::vector<Index> word(std::size_t i) const { return decode(i, alphabet_, length_); }

  static std::vector<Index> decode(std::size_t i, std::size_t alphabet, std::size_t length) {
    std::vector<Index> w(length);
    for (std::size_t k = length; k-- > 0;) {
      w[k] = static_cast<Index>(i % alphabet);
      i /= alphabet;
    }
    return w;
  }

 private:
  std::size_t alphabet_;
  std::size_t length_;
  std::size_t count_;
};

inline WordRange enumerate_words(const StateSpace& space, std::size_t n,
                                 std::size_t cap = kDefaultEnumerationCap) {
  const std::size_t count = checked_power(space.size(), n, cap);
  if (count > cap)
    throw CapExceeded("enumerate_words: " + std::to_string(space.size()) + "^" + std::to_string(n) +
                      " words exceed the enumeration cap " + std::to_string(cap) +
                      "; use a sampling estimator instead");
  return WordRange(space.size(), n, count);
}

/// Lexicographic index of the first m coordinates of x.
inline std::size_t word_index(ConfigView x, std::size_t alphabet, std::size_t m) {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < m; ++k) idx = idx * alphabet + x[k];
  return idx;
}

inline std::size_t word_index(std::span<const Index> w, std::size_t alphabet) {
  std::size_t idx = 0;
  for (Index a : w) idx = idx * alphabet + a;
  return idx;
}

}  // namespace ruelle
