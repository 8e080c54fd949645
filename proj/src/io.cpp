#include "svlv/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "svlv/rng.hpp"

namespace svlv {

ParsedProb parse_probability(const json& j) {
  ParsedProb out;
  if (j.is_number()) {
    out.value = j.get<double>();
  } else if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    try {
      std::size_t used = 0;
      if (slash == std::string::npos) {
        out.value = std::stod(s, &used);
        if (used != s.size()) throw ConfigError(s);
      } else {
        const auto num = std::stoll(s.substr(0, slash), &used);
        if (used != slash) throw ConfigError(s);
        const auto rest = s.substr(slash + 1);
        const auto den = std::stoll(rest, &used);
        if (used != rest.size() || den <= 0 || num < 0) throw ConfigError(s);
        const std::int64_t g = std::gcd(num, den);
        out.exact = Rational{num / g, den / g};
        out.value = out.exact->value();
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad probability '" + s + "'");
    }
  } else {
    throw ConfigError("probability must be a number or a string");
  }
  if (!(out.value >= 0.0 && out.value <= 1.0)) throw ConfigError("probability out of [0, 1]: " + j.dump());
  return out;
}

Site site_from_json(const json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ConfigError("expected a coordinate list of length " + std::to_string(dim) + ", got " + j.dump());
  Site s{};
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_number_integer()) throw ConfigError("coordinates must be integers: " + j.dump());
    s[i] = j[i].get<std::int32_t>();
  }
  return s;
}

json site_to_json(const Site& s, int dim) {
  json j = json::array();
  for (int i = 0; i < dim; ++i) j.push_back(s[i]);
  return j;
}

namespace {

int read_dim(const json& j) {
  if (!j.contains("d")) throw ConfigError("kernel needs \"d\"");
  const int d = j.at("d").get<int>();
  if (d < 1 || d > kMaxDim) throw ConfigError("dimension must be in 1.." + std::to_string(kMaxDim));
  return d;
}

struct RawTable {
  std::vector<std::pair<Offset, double>> values;
  std::vector<std::pair<Offset, Rational>> exact;
  bool all_exact = true;
};

RawTable read_table(const json& t, int dim) {
  if (!t.is_array()) throw ConfigError("\"table\" must be a list of [offset, probability] pairs");
  RawTable raw;
  for (const auto& e : t) {
    if (!e.is_array() || e.size() != 2) throw ConfigError("table entry must be [offset, probability]: " + e.dump());
    const Site o = site_from_json(e[0], dim);
    const auto p = parse_probability(e[1]);
    raw.values.emplace_back(o, p.value);
    if (p.exact)
      raw.exact.emplace_back(o, *p.exact);
    else
      raw.all_exact = false;
  }
  double sum = 0.0;
  for (const auto& [o, p] : raw.values) sum += p;
  if (!raw.all_exact && std::abs(sum - 1.0) <= 1e-9 && sum > 0.0)
    for (auto& [o, p] : raw.values) p /= sum;
  return raw;
}

}  // namespace

KernelSpec kernel_from_json(const json& j) {
  const int d = read_dim(j);
  const auto variant = j.value("variant", std::string("fixed"));
  if (variant == "long_range") {
    if (!j.contains("M_N")) throw ConfigError("long_range kernel needs \"M_N\"");
    return build_long_range_kernel(d, j.at("M_N").get<std::int64_t>());
  }
  if (variant == "nearest_neighbor") return nearest_neighbor_kernel(d);
  if (variant != "fixed") throw ConfigError("unknown kernel variant '" + variant + "'");
  if (!j.contains("table")) throw ConfigError("fixed kernel needs \"table\"");
  auto raw = read_table(j.at("table"), d);
  if (raw.all_exact) return build_fixed_kernel_exact(d, std::move(raw.exact));
  return build_fixed_kernel(d, std::move(raw.values));
}

json kernel_to_json(const KernelSpec& k) {
  json j;
  j["d"] = k.dim();
  if (k.variant() == KernelVariant::LongRange) {
    j["variant"] = "long_range";
    j["M_N"] = k.range();
    return j;
  }
  j["variant"] = "fixed";
  json t = json::array();
  for (std::size_t i = 0; i < k.support().size(); ++i) {
    const auto ex = k.exact_prob(k.support()[i]);
    if (ex)
      t.push_back({site_to_json(k.support()[i], k.dim()), std::to_string(ex->num) + "/" + std::to_string(ex->den)});
    else
      t.push_back({site_to_json(k.support()[i], k.dim()), k.probs()[i]});
  }
  j["table"] = t;
  return j;
}

OffsetLaw law_from_json(const json& j, int dim) {
  if (!j.contains("table")) throw ConfigError("law needs \"table\"");
  auto raw = read_table(j.at("table"), dim);
  return OffsetLaw(dim, std::move(raw.values));
}

PerturbationTable table_from_json(const json& j, int dim) {
  PerturbationTable t(dim);
  if (!j.contains("entries")) throw ConfigError("table needs \"entries\"");
  for (const auto& e : j.at("entries")) {
    OffsetSet A;
    for (const auto& o : e.at("A")) A.push_back(site_from_json(o, dim));
    t.add(std::move(A), e.value("beta", 0.0), e.value("delta", 0.0));
  }
  return t;
}

json table_to_json(const PerturbationTable& t) {
  json entries = json::array();
  for (const auto& [A, r] : t.entries()) {
    json a = json::array();
    for (const auto& o : A) a.push_back(site_to_json(o, t.dim()));
    entries.push_back({{"A", a}, {"beta", r.beta}, {"delta", r.delta}});
  }
  return {{"entries", entries}};
}

Configuration initial_from_json(const json& j, int dim, double N, double ell, std::uint64_t seed) {
  Configuration c(dim);
  const auto kind = j.value("kind", std::string());
  auto box_from = [&](const json& lo, const json& hi) {
    Box b{site_from_json(lo, dim), site_from_json(hi, dim)};
    for (int i = 0; i < dim; ++i)
      if (b.lo[i] > b.hi[i]) throw ConfigError("box needs lo <= hi");
    return b;
  };
  if (kind == "sites") {
    for (const auto& s : j.at("sites")) c.insert(site_from_json(s, dim));
  } else if (kind == "box") {
    for (const auto& s : box_from(j.at("lo"), j.at("hi")).sites(dim)) c.insert(s);
  } else if (kind == "ball") {
    const auto r = j.at("radius").get<std::int32_t>();
    Box b{};
    for (int i = 0; i < dim; ++i) {
      b.lo[i] = -r;
      b.hi[i] = r;
    }
    for (const auto& s : b.sites(dim)) {
      std::int64_t n2 = 0;
      for (int i = 0; i < dim; ++i) n2 += std::int64_t{s[i]} * s[i];
      if (n2 <= std::int64_t{r} * r) c.insert(s);
    }
  } else if (kind == "bernoulli") {
    const double q = j.at("density").get<double>();
    if (q < 0.0 || q > 1.0) throw ConfigError("density must be in [0, 1]");
    Rng rng(seed);
    for (const auto& s : box_from(j.at("lo"), j.at("hi")).sites(dim))
      if (rng.uniform() < q) c.insert(s);
  } else if (kind == "mass") {
    const double m = j.at("mass").get<double>();
    const double r = j.at("radius").get<double>();
    const auto layout = j.value("layout", std::string("random"));
    if (m < 0.0 || r <= 0.0) throw ConfigError("mass layout needs mass >= 0 and radius > 0");
    const auto count = static_cast<std::size_t>(std::llround(m * N));
    const auto R = static_cast<std::int32_t>(std::floor(r * ell));
    Box b{};
    for (int i = 0; i < dim; ++i) {
      b.lo[i] = -R;
      b.hi[i] = R;
    }
    if (static_cast<std::size_t>(b.volume(dim)) < count)
      throw ConfigError("mass layout: box of rescaled radius " + std::to_string(r) + " has fewer than " +
                        std::to_string(count) + " sites");
    auto sites = b.sites(dim);
    if (layout == "central") {
      auto norm2 = [&](const Site& s) {
        std::int64_t n = 0;
        for (int i = 0; i < dim; ++i) n += std::int64_t{s[i]} * s[i];
        return n;
      };
      std::stable_sort(sites.begin(), sites.end(), [&](const Site& a, const Site& b2) { return norm2(a) < norm2(b2); });
      for (std::size_t i = 0; i < count; ++i) c.insert(sites[i]);
    } else if (layout == "random") {
      Rng rng(seed);
      for (std::size_t i = 0; i < count; ++i) {
        const auto k = i + rng.index(sites.size() - i);
        std::swap(sites[i], sites[k]);
        c.insert(sites[i]);
      }
    } else {
      throw ConfigError("unknown mass layout '" + layout + "'");
    }
  } else {
    throw ConfigError("unknown initial configuration kind '" + kind + "'");
  }
  return c;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace svlv
