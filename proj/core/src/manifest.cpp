#include "cautious/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cautious/io.hpp"
#include "cautious/rng.hpp"

namespace cautious {

namespace {

std::string trim(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t");
  return text.substr(begin, end - begin + 1);
}

}  // namespace

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

Manifest Manifest::parse(const std::string& text) {
  Manifest manifest;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line.resize(comment);
    const std::string entry = trim(line);
    if (entry.empty()) continue;
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(entry.substr(0, eq));
    const std::string value = trim(entry.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("manifest line " + std::to_string(line_no) + ": empty key");
    }
    manifest.values_[key] = value;
  }
  return manifest;
}

void Manifest::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool Manifest::has(const std::string& key) const { return values_.count(key) > 0; }

std::optional<std::string> Manifest::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Manifest::get_string(const std::string& key, const std::string& fallback) const {
  const auto value = find(key);
  return value ? *value : fallback;
}

double Manifest::get_double(const std::string& key, double fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  try {
    return parse_double(*value);
  } catch (const std::exception&) {
    throw ConfigError("manifest key '" + key + "': expected a number, got '" + *value + "'");
  }
}

std::size_t Manifest::get_count(const std::string& key, std::size_t fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  std::size_t out = 0;
  const char* first = value->data();
  const char* last = first + value->size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("manifest key '" + key + "': expected a non-negative integer, got '" +
                      *value + "'");
  }
  return out;
}

std::uint64_t Manifest::get_uint64(const std::string& key, std::uint64_t fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  std::uint64_t out = 0;
  const char* first = value->data();
  const char* last = first + value->size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("manifest key '" + key + "': expected an unsigned integer, got '" + *value +
                      "'");
  }
  return out;
}

bool Manifest::get_bool(const std::string& key, bool fallback) const {
  const auto value = find(key);
  if (!value) return fallback;
  if (*value == "true" || *value == "1" || *value == "yes") return true;
  if (*value == "false" || *value == "0" || *value == "no") return false;
  throw ConfigError("manifest key '" + key + "': expected a boolean, got '" + *value + "'");
}

std::string Manifest::require_string(const std::string& key) const {
  const auto value = find(key);
  if (!value || value->empty()) throw ConfigError("manifest key '" + key + "' is required");
  return *value;
}

double Manifest::require_double(const std::string& key) const {
  if (!has(key)) throw ConfigError("manifest key '" + key + "' is required");
  return get_double(key, 0.0);
}

std::size_t Manifest::require_count(const std::string& key) const {
  if (!has(key)) throw ConfigError("manifest key '" + key + "' is required");
  return get_count(key, 0);
}

std::string Manifest::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : values_) {  // std::map iterates sorted
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t Manifest::hash() const { return fnv1a64(canonical_text()); }

std::string Cell::csv() const {
  switch (kind_) {
    case Kind::kText: return text_;
    case Kind::kNumber: return format_double(number_);
    case Kind::kInteger: return std::to_string(integer_);
  }
  return "";
}

OutputFormat parse_output_format(const std::string& name) {
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "json") return OutputFormat::kJson;
  throw ConfigError("unknown output format '" + name + "' (expected csv or json)");
}

namespace {

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace

std::string render_table(const OutputTable& table, OutputFormat format,
                         std::uint64_t manifest_hash, std::uint64_t seed) {
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw std::invalid_argument("render_table: row width does not match header");
    }
  }
  if (format == OutputFormat::kCsv) {
    std::string out = "# manifest=" + hex64(manifest_hash) + " seed=" + std::to_string(seed) + "\n";
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (i) out += ',';
      out += table.columns[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += row[i].csv();
      }
      out += '\n';
    }
    return out;
  }

  nlohmann::json doc;
  doc["manifest"] = hex64(manifest_hash);
  doc["seed"] = seed;
  doc["columns"] = table.columns;
  doc["rows"] = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json jrow = nlohmann::json::array();
    for (const auto& cell : row) {
      switch (cell.kind()) {
        case Cell::Kind::kText: jrow.push_back(cell.text()); break;
        case Cell::Kind::kNumber: jrow.push_back(cell.number()); break;
        case Cell::Kind::kInteger: jrow.push_back(cell.integer()); break;
      }
    }
    doc["rows"].push_back(std::move(jrow));
  }
  return doc.dump(2) + "\n";
}

void write_table(const std::filesystem::path& path, const OutputTable& table, OutputFormat format,
                 std::uint64_t manifest_hash, std::uint64_t seed) {
  atomic_write_text(path, render_table(table, format, manifest_hash, seed));
}

}  // namespace cautious
