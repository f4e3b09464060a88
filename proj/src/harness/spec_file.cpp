#include "glean/harness/spec_file.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "glean/error.hpp"

namespace glean::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : "[" + section + "] " + key;
}

}  // namespace

SpecFile SpecFile::parse(const std::string& text) {
  SpecFile spec;
  spec.text_ = text;
  std::istringstream in(text);
  std::string line, section;
  std::size_t n = 0;
  spec.order_.push_back("");
  spec.values_[""];
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError(n, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw FormatError(n, "empty section name");
      if (spec.values_.count(section)) throw FormatError(n, "repeated section [" + section + "]");
      spec.order_.push_back(section);
      spec.values_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(n, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError(n, "missing key");
    auto& sec = spec.values_[section];
    if (sec.count(key)) throw FormatError(n, "repeated key '" + key + "'");
    sec[key] = trim(line.substr(eq + 1));
  }
  return spec;
}

SpecFile SpecFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool SpecFile::has_section(const std::string& section) const {
  return values_.count(section) > 0;
}

bool SpecFile::has(const std::string& section, const std::string& key) const {
  const auto it = values_.find(section);
  return it != values_.end() && it->second.count(key) > 0;
}

std::vector<std::string> SpecFile::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto it = values_.find(section);
  if (it == values_.end()) return out;
  for (const auto& [k, v] : it->second) out.push_back(k);
  return out;
}

std::string SpecFile::text(const std::string& section, const std::string& key) const {
  if (!has(section, key)) throw ConfigError("spec: missing " + where(section, key));
  return values_.at(section).at(key);
}

std::string SpecFile::text(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  return has(section, key) ? values_.at(section).at(key) : fallback;
}

double SpecFile::real(const std::string& section, const std::string& key) const {
  const std::string s = text(section, key);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') {
    throw ConfigError("spec: " + where(section, key) + " is not a number: '" + s + "'");
  }
  return v;
}

double SpecFile::real(const std::string& section, const std::string& key,
                      double fallback) const {
  return has(section, key) ? real(section, key) : fallback;
}

long long SpecFile::integer(const std::string& section, const std::string& key) const {
  const std::string s = text(section, key);
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') {
    throw ConfigError("spec: " + where(section, key) + " is not an integer: '" + s + "'");
  }
  return v;
}

long long SpecFile::integer(const std::string& section, const std::string& key,
                            long long fallback) const {
  return has(section, key) ? integer(section, key) : fallback;
}

std::uint64_t SpecFile::seed(const std::string& section, const std::string& key) const {
  const std::string s = text(section, key);
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s.front() == '-' || *end != '\0') {
    throw ConfigError("spec: " + where(section, key) + " is not a seed: '" + s + "'");
  }
  return v;
}

std::uint64_t SpecFile::seed(const std::string& section, const std::string& key,
                             std::uint64_t fallback) const {
  return has(section, key) ? seed(section, key) : fallback;
}

std::vector<std::string> SpecFile::list(const std::string& section,
                                        const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(text(section, key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> SpecFile::list(const std::string& section, const std::string& key,
                                        const std::vector<std::string>& fallback) const {
  return has(section, key) ? list(section, key) : fallback;
}

std::string SpecFile::dump() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& section : order_) {
    const auto& kv = values_.at(section);
    if (kv.empty()) continue;
    if (!section.empty()) out << (first ? "" : "\n") << '[' << section << "]\n";
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
    first = false;
  }
  return out.str();
}

void SpecFile::set(const std::string& section, const std::string& key,
                   const std::string& value) {
  if (!values_.count(section)) order_.push_back(section);
  values_[section][key] = value;
}

}  // namespace glean::harness
