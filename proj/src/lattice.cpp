#include "svlv/lattice.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace svlv {

Site operator+(const Site& a, const Site& b) {
  Site r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] + b[i];
  return r;
}

Site operator-(const Site& a, const Site& b) {
  Site r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] - b[i];
  return r;
}

Site operator-(const Site& a) {
  Site r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = -a[i];
  return r;
}

bool is_origin(const Site& a) {
  for (auto c : a)
    if (c != 0) return false;
  return true;
}

std::string to_string(const Site& s, int dim) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim; ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

Lattice::Lattice(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim)
    throw std::invalid_argument("lattice dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  bits_ = dim == 1 ? 62 : (dim == 2 ? 31 : (dim == 3 ? 21 : 16));
  bias_ = std::int64_t{1} << (bits_ - 1);
}

SiteKey Lattice::encode(const Site& s) const {
  SiteKey k = 0;
  for (int i = 0; i < dim_; ++i) {
    std::int64_t c = s[i];
    if (c <= -bias_ || c >= bias_)
      throw LatticeRangeError("site coordinate " + std::to_string(c) + " exceeds packed lattice range");
    k = (k << bits_) | static_cast<SiteKey>(c + bias_);
  }
  return k;
}

Site Lattice::decode(SiteKey k) const {
  Site s{};
  const SiteKey mask = (SiteKey{1} << bits_) - 1;
  for (int i = dim_ - 1; i >= 0; --i) {
    s[i] = static_cast<std::int32_t>(static_cast<std::int64_t>(k & mask) - bias_);
    k >>= bits_;
  }
  return s;
}

std::int64_t Lattice::delta(const Offset& o) const {
  std::int64_t d = 0;
  for (int i = 0; i < dim_; ++i) {
    d += static_cast<std::int64_t>(o[i]) * (std::int64_t{1} << (bits_ * (dim_ - 1 - i)));
  }
  return d;
}

bool Lattice::within(const Site& s, std::int64_t limit) const {
  for (int i = 0; i < dim_; ++i)
    if (std::llabs(s[i]) > limit) return false;
  return true;
}

bool Box::contains(const Site& s, int dim) const {
  for (int i = 0; i < dim; ++i)
    if (s[i] < lo[i] || s[i] > hi[i]) return false;
  return true;
}

std::int64_t Box::volume(int dim) const {
  std::int64_t v = 1;
  for (int i = 0; i < dim; ++i) v *= std::max<std::int64_t>(0, std::int64_t{hi[i]} - lo[i] + 1);
  return v;
}

std::vector<Site> Box::sites(int dim) const {
  std::vector<Site> out;
  if (volume(dim) == 0) return out;
  out.reserve(static_cast<std::size_t>(volume(dim)));
  Site cur = lo;
  for (int i = dim; i < kMaxDim; ++i) cur[i] = 0;
  while (true) {
    out.push_back(cur);
    int i = dim - 1;
    while (i >= 0) {
      if (cur[i] < hi[i]) {
        ++cur[i];
        break;
      }
      cur[i] = lo[i];
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

}  // namespace svlv
