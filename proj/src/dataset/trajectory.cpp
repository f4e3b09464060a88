#include "glean/dataset/trajectory.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "glean/error.hpp"

namespace glean::dataset {

std::string label_name(GoalLabel label) {
  switch (label) {
    case GoalLabel::Left:
      return "left";
    case GoalLabel::Right:
      return "right";
    case GoalLabel::Center:
      return "center";
  }
  return "unknown";
}

GoalLabel parse_label(const std::string& name) {
  if (name == "left") return GoalLabel::Left;
  if (name == "right") return GoalLabel::Right;
  if (name == "center") return GoalLabel::Center;
  throw std::invalid_argument("unknown goal label '" + name + "'");
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<Matrix> positions_of(std::span<const Trajectory> trajectories) {
  std::vector<Matrix> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(t.positions);
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
  T value{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw FormatError(line, std::string("invalid ") + what + " '" + s + "'");
  }
  return value;
}

double parse_double(const std::string& s, std::size_t line) {
  // std::from_chars for double is not available on every toolchain we target.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw FormatError(line, "invalid coordinate '" + s + "'");
  }
  return v;
}

std::string header_value(const std::string& header, const std::string& key, std::size_t line) {
  const std::string needle = " " + key + "=";
  const auto pos = header.find(needle);
  if (pos == std::string::npos) throw FormatError(line, "header is missing '" + key + "'");
  const auto start = pos + needle.size();
  const auto stop = header.find(' ', start);
  return header.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
}

}  // namespace

void save_trajectories(const std::filesystem::path& path,
                       std::span<const Trajectory> trajectories) {
  const int T = trajectories.empty() ? 0 : trajectories.front().steps();
  const int dims = trajectories.empty() ? 2 : static_cast<int>(trajectories.front().positions.cols());
  for (const auto& tr : trajectories) {
    if (tr.steps() != T || static_cast<int>(tr.positions.cols()) != dims) {
      throw DimensionError("save_trajectories: all trajectories must share T and dims");
    }
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# glean-trajectories version=1 T=" << T << " dims=" << dims
      << " count=" << trajectories.size() << "\n";
  char buf[64];
  for (std::size_t id = 0; id < trajectories.size(); ++id) {
    const auto& tr = trajectories[id];
    const std::string label = label_name(tr.label);
    for (int t = 0; t < T; ++t) {
      out << id << ',' << (t + 1);
      for (int k = 0; k < dims; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g",
                      tr.positions(static_cast<std::size_t>(t), static_cast<std::size_t>(k)));
        out << ',' << buf;
      }
      out << ',' << label << ',' << tr.seed << '\n';
    }
  }
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw FormatError(1, "empty file");
  ++lineno;
  if (line.rfind("# glean-trajectories", 0) != 0) throw FormatError(1, "missing header");
  if (header_value(line, "version", 1) != "1") throw FormatError(1, "unsupported version");
  const int T = parse_number<int>(header_value(line, "T", 1), 1, "T");
  const int dims = parse_number<int>(header_value(line, "dims", 1), 1, "dims");
  const auto count = parse_number<std::size_t>(header_value(line, "count", 1), 1, "count");
  if (T < 1 || dims < 1) throw FormatError(1, "T and dims must be positive");

  std::vector<Trajectory> out(count);
  for (auto& tr : out) tr.positions = Matrix(static_cast<std::size_t>(T), static_cast<std::size_t>(dims));
  const std::size_t expected_cols = static_cast<std::size_t>(dims) + 4;

  for (std::size_t id = 0; id < count; ++id) {
    for (int t = 0; t < T; ++t) {
      if (!std::getline(in, line)) {
        throw FormatError(lineno + 1, "truncated file: expected row for trajectory " +
                                          std::to_string(id) + " t=" + std::to_string(t + 1));
      }
      ++lineno;
      const auto cols = split(line, ',');
      if (cols.size() != expected_cols) {
        throw FormatError(lineno, "expected " + std::to_string(expected_cols) + " columns, got " +
                                      std::to_string(cols.size()));
      }
      if (parse_number<std::size_t>(cols[0], lineno, "id") != id ||
          parse_number<int>(cols[1], lineno, "t") != t + 1) {
        throw FormatError(lineno, "rows out of order");
      }
      for (int k = 0; k < dims; ++k) {
        out[id].positions(static_cast<std::size_t>(t), static_cast<std::size_t>(k)) =
            parse_double(cols[2 + static_cast<std::size_t>(k)], lineno);
      }
      const auto& label = cols[2 + static_cast<std::size_t>(dims)];
      const auto seed = parse_number<std::uint64_t>(cols[3 + static_cast<std::size_t>(dims)], lineno, "seed");
      GoalLabel parsed{};
      try {
        parsed = parse_label(label);
      } catch (const std::invalid_argument& e) {
        throw FormatError(lineno, e.what());
      }
      if (t == 0) {
        out[id].label = parsed;
        out[id].seed = seed;
      } else if (parsed != out[id].label || seed != out[id].seed) {
        throw FormatError(lineno, "label/seed changes within a trajectory");
      }
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty()) throw FormatError(lineno, "unexpected trailing data");
  }
  return out;
}

}  // namespace glean::dataset
