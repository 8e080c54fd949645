#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "svlv/lattice.hpp"

namespace svlv {

/// Finite set of occupied sites (the 1's of a {0,1} configuration).
///
/// Sites are kept in a dense vector with an index map so that uniform
/// selection of an occupied site and removal are both O(1). Vector order
/// depends on the insertion/removal history, which is deterministic.
class Configuration {
 public:
  explicit Configuration(int dim) : lattice_(dim) {}
  Configuration(const Lattice& lattice) : lattice_(lattice) {}

  const Lattice& lattice() const { return lattice_; }
  int dim() const { return lattice_.dim(); }

  bool contains(SiteKey k) const { return index_.contains(k); }
  bool contains(const Site& s) const { return contains(lattice_.encode(s)); }
  bool occupied(SiteKey k) const { return contains(k); }

  /// Returns false when already present.
  bool insert(SiteKey k);
  bool insert(const Site& s) { return insert(lattice_.encode(s)); }
  /// Returns false when absent.
  bool erase(SiteKey k);
  bool erase(const Site& s) { return erase(lattice_.encode(s)); }
  /// Toggles k; returns the new value.
  bool flip(SiteKey k);

  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  std::span<const SiteKey> keys() const { return sites_; }
  SiteKey key_at(std::size_t i) const { return sites_[i]; }

  std::vector<Site> sites() const;
  /// Keys in increasing (lexicographic) order.
  std::vector<SiteKey> sorted_keys() const;
  /// Order-independent 64-bit digest of the occupied set.
  std::uint64_t fingerprint() const;

  bool same_sites(const Configuration& other) const;
  /// True when every occupied site of *this is occupied in other.
  bool subset_of(const Configuration& other) const;

 private:
  Lattice lattice_;
  std::vector<SiteKey> sites_;
  absl::flat_hash_map<SiteKey, std::uint32_t> index_;
};

}  // namespace svlv
