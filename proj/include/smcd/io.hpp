#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smcd/finite_hmm.hpp"
#include "smcd/gaussian_models.hpp"

namespace smcd {

inline constexpr std::string_view kVersion = "smcderiv 0.1.0";

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
std::string format_list(std::span<const double> vs);
std::vector<double> parse_list(std::string_view text);

/// `key = value` lines; `#` starts a comment; blank lines ignored.
/// Keys are unique and serialized in sorted order.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);
  std::string serialize() const;

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  void set(const std::string& key, std::string value);
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  bool operator==(const KeyValueConfig&) const = default;

 private:
  std::map<std::string, std::string> entries_;
};

enum class ModelKind { finite_hmm, lgssm, sv };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Keys: model (hmm | lgssm | sv), states, symbols, theta (comma list), seed.
struct ModelConfig {
  ModelKind kind = ModelKind::finite_hmm;
  std::size_t states = 3;
  std::size_t symbols = 3;
  std::vector<double> theta;
  std::uint64_t seed = 1;

  static ModelConfig from(const KeyValueConfig& kv);
  void store(KeyValueConfig& kv) const;
  bool operator==(const ModelConfig&) const = default;
};

using AnyModel = std::variant<FiniteHmm, LinearGaussianModel, StochasticVolatilityModel>;

AnyModel make_model(ModelKind kind, const std::vector<double>& theta, std::size_t states = 3,
                    std::size_t symbols = 3);
inline AnyModel make_model(const ModelConfig& c) { return make_model(c.kind, c.theta, c.states, c.symbols); }

/// Single-column observation file: `#` metadata lines, a header line, then one
/// value per line.
struct ObservationFile {
  std::vector<std::string> metadata;  // comment lines without the leading "# "
  std::string column = "y";
  std::vector<double> values;
};

ObservationFile read_observations(const std::filesystem::path& path);
ObservationFile parse_observations(std::string_view text);
void write_observations(std::ostream& os, const ObservationFile& file);

/// Converts stored values to the observation type of a model.
std::vector<int> to_symbols(std::span<const double> values, std::size_t alphabet);

/// CSV writer: metadata lines prefixed by "# ", a header, then rows.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void meta(std::string_view line);
  void header(const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& os_;
};

}  // namespace smcd
