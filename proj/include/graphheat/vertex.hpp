#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>

#include "graphheat/common.hpp"

namespace graphheat {

enum class VertexKind : std::uint8_t { lattice, radial, custom };

/// Opaque vertex identifier.
///
/// Lattice vertices carry an integer tuple of the lattice dimension, radial
/// vertices (trees, anti-trees, shell chains) carry (shell, ordinal within
/// shell), custom vertices carry a single integer id. Ordering is
/// lexicographic within a kind, which is the deterministic region order.
class VertexId {
 public:
  static constexpr std::size_t kMaxDim = 8;

  VertexId() = default;

  static VertexId lattice(std::span<const std::int64_t> coords) {
    if (coords.empty() || coords.size() > kMaxDim)
      throw PreconditionError("lattice vertex dimension must be in [1, " +
                              std::to_string(kMaxDim) + "]");
    VertexId v;
    v.kind_ = VertexKind::lattice;
    v.size_ = static_cast<std::uint8_t>(coords.size());
    std::copy(coords.begin(), coords.end(), v.c_.begin());
    return v;
  }
  static VertexId lattice(std::initializer_list<std::int64_t> coords) {
    return lattice(std::span<const std::int64_t>(coords.begin(), coords.size()));
  }
  static VertexId radial(std::int64_t shell, std::int64_t ordinal) {
    VertexId v;
    v.kind_ = VertexKind::radial;
    v.size_ = 2;
    v.c_[0] = shell;
    v.c_[1] = ordinal;
    return v;
  }
  static VertexId custom(std::int64_t id) {
    VertexId v;
    v.kind_ = VertexKind::custom;
    v.size_ = 1;
    v.c_[0] = id;
    return v;
  }

  VertexKind kind() const { return kind_; }
  std::size_t dim() const { return size_; }
  std::span<const std::int64_t> coords() const { return {c_.data(), size_}; }
  std::int64_t coord(std::size_t k) const { return c_[k]; }
  std::int64_t shell() const { return c_[0]; }
  std::int64_t ordinal() const { return c_[1]; }
  std::int64_t id() const { return c_[0]; }

  /// Copy with coordinate k shifted by delta (lattice moves).
  VertexId shifted(std::size_t k, std::int64_t delta) const {
    VertexId v = *this;
    v.c_[k] += delta;
    return v;
  }

  friend bool operator==(const VertexId& a, const VertexId& b) {
    return a.kind_ == b.kind_ && a.size_ == b.size_ &&
           std::equal(a.c_.begin(), a.c_.begin() + a.size_, b.c_.begin());
  }
  friend std::strong_ordering operator<=>(const VertexId& a, const VertexId& b) {
    if (auto k = a.kind_ <=> b.kind_; k != 0) return k;
    if (auto s = a.size_ <=> b.size_; s != 0) return s;
    for (std::size_t i = 0; i < a.size_; ++i)
      if (auto c = a.c_[i] <=> b.c_[i]; c != 0) return c;
    return std::strong_ordering::equal;
  }

  std::size_t hash() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ (static_cast<std::uint64_t>(kind_) << 8) ^ size_;
    for (std::size_t i = 0; i < size_; ++i) {
      std::uint64_t x = static_cast<std::uint64_t>(c_[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      // splitmix64 finalizer
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      h ^= x ^ (x >> 31);
    }
    return static_cast<std::size_t>(h);
  }

  /// "(1,-2)" for lattices, "3:7" for radial vertices, "#5" for custom ids.
  std::string to_string() const {
    std::string s;
    switch (kind_) {
      case VertexKind::lattice:
        s = "(";
        for (std::size_t i = 0; i < size_; ++i) {
          if (i) s += ',';
          s += std::to_string(c_[i]);
        }
        s += ')';
        break;
      case VertexKind::radial:
        s = std::to_string(c_[0]) + ":" + std::to_string(c_[1]);
        break;
      case VertexKind::custom:
        s = "#" + std::to_string(c_[0]);
        break;
    }
    return s;
  }

 private:
  VertexKind kind_ = VertexKind::custom;
  std::uint8_t size_ = 1;
  std::array<std::int64_t, kMaxDim> c_{};
};

struct VertexHash {
  std::size_t operator()(const VertexId& v) const { return v.hash(); }
};

}  // namespace graphheat

template <>
struct std::hash<graphheat::VertexId> {
  std::size_t operator()(const graphheat::VertexId& v) const { return v.hash(); }
};
