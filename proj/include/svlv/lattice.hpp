#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace svlv {

inline constexpr int kMaxDim = 4;

/// Integer point of Z^d. Coordinates past the lattice dimension are zero.
using Site = std::array<std::int32_t, kMaxDim>;
/// Offsets live in the same integer space as sites.
using Offset = Site;
/// Packed site coordinates; numeric order equals lexicographic order.
using SiteKey = std::uint64_t;

Site operator+(const Site& a, const Site& b);
Site operator-(const Site& a, const Site& b);
Site operator-(const Site& a);
bool is_origin(const Site& a);
std::string to_string(const Site& s, int dim);

/// Packs Z^d points into 64-bit keys with per-coordinate bias so that
/// translating a key by a precomputed delta is plain integer addition.
class Lattice {
 public:
  explicit Lattice(int dim);

  int dim() const { return dim_; }
  int bits() const { return bits_; }
  /// Largest absolute coordinate representable.
  std::int64_t coordinate_limit() const { return bias_ - 1; }

  SiteKey encode(const Site& s) const;
  Site decode(SiteKey k) const;
  /// Signed displacement such that encode(s + o) == encode(s) + delta(o).
  std::int64_t delta(const Offset& o) const;
  static SiteKey shift(SiteKey k, std::int64_t d) { return k + static_cast<std::uint64_t>(d); }

  /// True when every coordinate of s lies within +-limit.
  bool within(const Site& s, std::int64_t limit) const;
  bool operator==(const Lattice& o) const { return dim_ == o.dim_; }

 private:
  int dim_;
  int bits_;
  std::int64_t bias_;
};

/// Axis-aligned box [lo, hi] (inclusive) in Z^d.
struct Box {
  Site lo{};
  Site hi{};
  bool contains(const Site& s, int dim) const;
  std::int64_t volume(int dim) const;
  /// Every site of the box in lexicographic order.
  std::vector<Site> sites(int dim) const;
};

class LatticeRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svlv
