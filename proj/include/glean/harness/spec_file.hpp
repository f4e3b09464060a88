#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace glean::harness {

/// Flat `key = value` text grouped under `[section]` headers. `#` starts a comment;
/// blank lines are ignored. Keys before the first header belong to section "".
class SpecFile {
 public:
  /// Throws FormatError (with the line number) on malformed lines or repeated keys.
  static SpecFile parse(const std::string& text);
  /// Throws ConfigError when the file cannot be read.
  static SpecFile load(const std::filesystem::path& path);

  const std::string& text() const { return text_; }
  const std::vector<std::string>& sections() const { return order_; }
  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  std::vector<std::string> keys(const std::string& section) const;

  /// Accessors throw ConfigError for a missing key or a value of the wrong type.
  std::string text(const std::string& section, const std::string& key) const;
  std::string text(const std::string& section, const std::string& key,
                   const std::string& fallback) const;
  double real(const std::string& section, const std::string& key) const;
  double real(const std::string& section, const std::string& key, double fallback) const;
  long long integer(const std::string& section, const std::string& key) const;
  long long integer(const std::string& section, const std::string& key,
                    long long fallback) const;
  std::uint64_t seed(const std::string& section, const std::string& key) const;
  std::uint64_t seed(const std::string& section, const std::string& key,
                     std::uint64_t fallback) const;
  /// Comma-separated list, entries trimmed; empty value gives an empty list.
  std::vector<std::string> list(const std::string& section, const std::string& key) const;
  std::vector<std::string> list(const std::string& section, const std::string& key,
                                const std::vector<std::string>& fallback) const;

  /// Canonical text of the current values: sections in first-seen order, keys sorted.
  std::string dump() const;

  /// Sets or adds a value (used for command-line overrides).
  void set(const std::string& section, const std::string& key, const std::string& value);

 private:
  std::string text_;
  std::vector<std::string> order_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace glean::harness
