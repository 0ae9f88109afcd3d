#include "smcd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "smcd/errors.hpp"

namespace smcd {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw std::invalid_argument("not an unsigned integer: '" + std::string(text) + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_list(std::span<const double> vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) out += (i ? "," : "") + format_double(vs[i]);
  return out;
}

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_double(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.has(key)) throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key " + key);
    cfg.entries_[key] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) { return parse(slurp(path)); }

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw std::invalid_argument("missing config key '" + key + "'");
  return it->second;
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void KeyValueConfig::set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::finite_hmm: return "hmm";
    case ModelKind::lgssm: return "lgssm";
    case ModelKind::sv: return "sv";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "hmm") return ModelKind::finite_hmm;
  if (text == "lgssm") return ModelKind::lgssm;
  if (text == "sv") return ModelKind::sv;
  throw std::invalid_argument("unknown model '" + std::string(text) + "' (expected hmm, lgssm or sv)");
}

ModelConfig ModelConfig::from(const KeyValueConfig& kv) {
  ModelConfig c;
  c.kind = parse_model_kind(kv.get("model"));
  if (auto v = kv.find("states")) c.states = parse_u64(*v);
  if (auto v = kv.find("symbols")) c.symbols = parse_u64(*v);
  c.theta = parse_list(kv.get("theta"));
  if (auto v = kv.find("seed")) c.seed = parse_u64(*v);
  return c;
}

void ModelConfig::store(KeyValueConfig& kv) const {
  kv.set("model", std::string(to_string(kind)));
  kv.set("states", std::to_string(states));
  kv.set("symbols", std::to_string(symbols));
  kv.set("theta", format_list(theta));
  kv.set("seed", std::to_string(seed));
}

AnyModel make_model(ModelKind kind, const std::vector<double>& theta, std::size_t states, std::size_t symbols) {
  switch (kind) {
    case ModelKind::finite_hmm: return make_finite_hmm(states, Theta(theta, {}), symbols);
    case ModelKind::lgssm: return make_lgssm(Theta(theta, {}));
    case ModelKind::sv: return make_sv(Theta(theta, {}));
  }
  throw std::invalid_argument("unknown model kind");
}

ObservationFile parse_observations(std::string_view text) {
  ObservationFile f;
  bool have_header = false;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      line.remove_prefix(1);
      f.metadata.emplace_back(trim(line));
      continue;
    }
    if (line.find(',') != std::string_view::npos)
      throw std::invalid_argument("observation file line " + std::to_string(lineno) +
                                  ": only scalar (single-column) observations are supported");
    if (!have_header) {
      f.column = std::string(line);
      have_header = true;
      continue;
    }
    f.values.push_back(parse_double(line));
  }
  if (!have_header) throw std::invalid_argument("observation file has no header line");
  return f;
}

ObservationFile read_observations(const std::filesystem::path& path) { return parse_observations(slurp(path)); }

void write_observations(std::ostream& os, const ObservationFile& file) {
  CsvWriter w(os);
  for (const auto& m : file.metadata) w.meta(m);
  w.header({file.column});
  for (double v : file.values) w.row({format_double(v)});
}

std::vector<int> to_symbols(std::span<const double> values, std::size_t alphabet) {
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values) {
    if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(alphabet))
      throw std::invalid_argument("observation " + format_double(v) + " is not a symbol in 0.." +
                                  std::to_string(alphabet - 1));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void CsvWriter::meta(std::string_view line) { os_ << "# " << line << '\n'; }

void CsvWriter::header(const std::vector<std::string>& columns) { row(columns); }

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
  os_ << '\n';
}

}  // namespace smcd
