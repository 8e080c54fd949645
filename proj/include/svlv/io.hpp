#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "svlv/configuration.hpp"
#include "svlv/kernel.hpp"
#include "svlv/perturbation.hpp"

namespace svlv {

using json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Probability given as a JSON number, a decimal string or "num/den".
struct ParsedProb {
  double value = 0.0;
  std::optional<Rational> exact;
};
ParsedProb parse_probability(const json& j);

Site site_from_json(const json& j, int dim);
json site_to_json(const Site& s, int dim);

/// {"d":3,"variant":"fixed","table":[[[1,0,0],"1/6"],...]},
/// {"d":2,"variant":"long_range","M_N":8} or {"d":3,"variant":"nearest_neighbor"}.
/// Float tables whose sum is within 1e-9 of 1 are renormalized; exact
/// rational tables are used as given.
KernelSpec kernel_from_json(const json& j);
json kernel_to_json(const KernelSpec& k);

/// {"table":[[offset, prob], ...]} for competition and bias laws.
OffsetLaw law_from_json(const json& j, int dim);

/// {"entries":[{"A":[[1,0,0]],"beta":0.1,"delta":0.0}, ...]}.
PerturbationTable table_from_json(const json& j, int dim);
json table_to_json(const PerturbationTable& t);

/// Initial configurations:
///   {"kind":"sites","sites":[[0,0,0],...]}
///   {"kind":"box","lo":[..],"hi":[..]}
///   {"kind":"ball","radius":r}                  Euclidean ball at the origin
///   {"kind":"bernoulli","lo":[..],"hi":[..],"density":q}
///   {"kind":"mass","mass":m,"radius":r,"layout":"random"|"central"}
///     round(m N) sites in the rescaled box [-r, r]^d, either uniform
///     without replacement or the sites closest to the origin.
Configuration initial_from_json(const json& j, int dim, double N, double ell, std::uint64_t seed);

/// Reads a JSON file; throws ConfigError with the path on failure.
json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

/// "%.17g".
std::string format_double(double x);

}  // namespace svlv
