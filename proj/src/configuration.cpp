#include "svlv/configuration.hpp"

#include <algorithm>

#include "svlv/rng.hpp"

namespace svlv {

bool Configuration::insert(SiteKey k) {
  auto [it, fresh] = index_.try_emplace(k, static_cast<std::uint32_t>(sites_.size()));
  if (!fresh) return false;
  sites_.push_back(k);
  return true;
}

bool Configuration::erase(SiteKey k) {
  auto it = index_.find(k);
  if (it == index_.end()) return false;
  const std::uint32_t slot = it->second;
  index_.erase(it);
  const SiteKey last = sites_.back();
  sites_.pop_back();
  if (slot < sites_.size()) {
    sites_[slot] = last;
    index_[last] = slot;
  }
  return true;
}

bool Configuration::flip(SiteKey k) {
  if (erase(k)) return false;
  insert(k);
  return true;
}

std::vector<Site> Configuration::sites() const {
  std::vector<Site> out;
  out.reserve(sites_.size());
  for (auto k : sorted_keys()) out.push_back(lattice_.decode(k));
  return out;
}

std::vector<SiteKey> Configuration::sorted_keys() const {
  std::vector<SiteKey> out(sites_.begin(), sites_.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t Configuration::fingerprint() const {
  std::uint64_t h = splitmix64(sites_.size());
  for (auto k : sites_) h += splitmix64(k ^ 0x5bd1e995ULL);
  return h;
}

bool Configuration::same_sites(const Configuration& other) const {
  return size() == other.size() && subset_of(other);
}

bool Configuration::subset_of(const Configuration& other) const {
  for (auto k : sites_)
    if (!other.contains(k)) return false;
  return true;
}

}  // namespace svlv
