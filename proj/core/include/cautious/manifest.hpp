#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cautious {

/// Bad user input (missing keys, malformed values, impossible settings).
/// Commands map this to the usage exit code; other exceptions mean a runtime
/// failure.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run configuration as `key = value` lines; '#' starts a comment. Flags on
/// the command line land in the same map, overriding file entries, so every
/// command sees one flat view.
class Manifest {
 public:
  Manifest() = default;
  static Manifest load(const std::filesystem::path& path);
  static Manifest parse(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::string require_string(const std::string& key) const;
  double require_double(const std::string& key) const;
  std::size_t require_count(const std::string& key) const;

  /// Sorted `key=value` lines; the provenance hash is FNV-1a over this.
  std::string canonical_text() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

/// One output cell; keeps its native type so JSON output stays typed while
/// CSV uses shortest round-trip formatting.
class Cell {
 public:
  Cell(std::string text) : kind_(Kind::kText), text_(std::move(text)) {}
  Cell(const char* text) : kind_(Kind::kText), text_(text) {}
  Cell(double number) : kind_(Kind::kNumber), number_(number) {}
  Cell(std::int64_t value) : kind_(Kind::kInteger), integer_(value) {}
  Cell(std::size_t value) : kind_(Kind::kInteger), integer_(static_cast<std::int64_t>(value)) {}
  Cell(int value) : kind_(Kind::kInteger), integer_(value) {}

  std::string csv() const;
  // Appends this cell to a JSON array under construction (manifest.cpp).
  enum class Kind { kText, kNumber, kInteger };
  Kind kind() const { return kind_; }
  const std::string& text() const { return text_; }
  double number() const { return number_; }
  std::int64_t integer() const { return integer_; }

 private:
  Kind kind_;
  std::string text_;
  double number_ = 0.0;
  std::int64_t integer_ = 0;
};

struct OutputTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

enum class OutputFormat { kCsv, kJson };
OutputFormat parse_output_format(const std::string& name);

/// CSV: provenance comment line (manifest hash + seed), header row, data
/// rows. JSON: object with the same provenance fields plus columns/rows.
std::string render_table(const OutputTable& table, OutputFormat format,
                         std::uint64_t manifest_hash, std::uint64_t seed);
void write_table(const std::filesystem::path& path, const OutputTable& table, OutputFormat format,
                 std::uint64_t manifest_hash, std::uint64_t seed);

}  // namespace cautious
