#include "glean/harness/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "glean/error.hpp"

namespace glean::harness {

std::string kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::PVRNN:
      return "PVRNN";
    case ModelKind::FM:
      return "FM";
    case ModelKind::SI:
      return "SI";
  }
  return "?";
}

ModelKind parse_kind(const std::string& name) {
  if (name == "PVRNN") return ModelKind::PVRNN;
  if (name == "FM") return ModelKind::FM;
  if (name == "SI") return ModelKind::SI;
  throw ConfigError("unknown model kind '" + name + "'");
}

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void write_block(std::ostream& out, const std::string& name, std::span<const double> values) {
  out << "block " << name << ' ' << values.size() << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ' ';
    out << hex(values[i]);
  }
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::istringstream next() {
    std::string line;
    if (!std::getline(in_, line)) throw FormatError(line_ + 1, "unexpected end of checkpoint");
    ++line_;
    return std::istringstream(line);
  }

  std::string expect_key(std::istringstream& ls, const std::string& key) {
    std::string k;
    ls >> k;
    if (k != key) fail("expected '" + key + "', found '" + k + "'");
    std::string v;
    if (!(ls >> v)) fail("missing value for '" + key + "'");
    return v;
  }

  std::string value(const std::string& key) {
    auto ls = next();
    return expect_key(ls, key);
  }

  double real(const std::string& key) { return parse_real(value(key)); }

  long long integer(const std::string& key) { return parse_int(value(key)); }

  double parse_real(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') fail("invalid number '" + s + "'");
    return v;
  }

  long long parse_int(const std::string& s) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') fail("invalid integer '" + s + "'");
    return v;
  }

  void read_block(const std::string& name, std::span<double> dest) {
    auto ls = next();
    std::string tag, got;
    std::size_t count = 0;
    ls >> tag >> got >> count;
    if (tag != "block" || got != name) fail("expected block '" + name + "', found '" + got + "'");
    if (count != dest.size()) {
      fail("block '" + name + "' has " + std::to_string(count) + " values, expected " +
           std::to_string(dest.size()));
    }
    auto vs = next();
    std::string tok;
    for (std::size_t i = 0; i < count; ++i) {
      if (!(vs >> tok)) fail("block '" + name + "' is truncated");
      dest[i] = parse_real(tok);
    }
    if (vs >> tok) fail("block '" + name + "' has trailing values");
  }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(line_, what); }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  const auto& c = ck.config;
  out << "glean-checkpoint 1\n";
  out << "kind " << kind_name(ck.kind) << '\n';
  out << "seed " << c.seed << '\n';
  out << "w_init " << hex(c.w_init) << '\n';
  out << "output_dim " << c.output_dim << '\n';
  out << "seq_len " << c.seq_len << '\n';
  out << "lr " << hex(c.lr) << '\n';
  out << "epochs " << c.epochs << '\n';
  out << "error_dropout " << hex(c.error_dropout) << '\n';
  out << "sigma_floor " << hex(c.sigma_floor) << '\n';
  out << "layers " << c.layers.size() << '\n';
  for (const auto& L : c.layers) {
    out << "layer " << L.d_size << ' ' << L.z_size << ' ' << hex(L.tau) << ' ' << hex(L.w) << '\n';
  }
  auto put = [&](const std::string& name, std::span<const double> v) { write_block(out, name, v); };
  switch (ck.kind) {
    case ModelKind::PVRNN:
      ck.pvrnn.for_each_block(put);
      out << "sequences " << ck.adaptation.size() << '\n';
      for (std::size_t i = 0; i < ck.adaptation.size(); ++i) {
        put("A_mu[" + std::to_string(i) + "]", ck.adaptation[i].mu.values());
        put("A_sigma[" + std::to_string(i) + "]", ck.adaptation[i].sigma.values());
      }
      break;
    case ModelKind::FM:
      ck.fm.for_each_block(put);
      out << "sequences 0\n";
      break;
    case ModelKind::SI:
      ck.si.for_each_block(put);
      out << "sequences " << ck.initial.size() << '\n';
      for (std::size_t i = 0; i < ck.initial.size(); ++i) {
        put("A1_mu[" + std::to_string(i) + "]", ck.initial[i].mu);
        put("A1_sigma[" + std::to_string(i) + "]", ck.initial[i].sigma);
      }
      break;
  }
  out << "end\n";
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  Reader r(in);
  Checkpoint ck;
  if (r.value("glean-checkpoint") != "1") r.fail("unsupported checkpoint version");
  try {
    ck.kind = parse_kind(r.value("kind"));
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  auto& c = ck.config;
  {
    const std::string s = r.value("seed");
    char* end = nullptr;
    c.seed = std::strtoull(s.c_str(), &end, 10);
    if (*end != '\0') r.fail("invalid seed");
  }
  c.w_init = r.real("w_init");
  c.output_dim = static_cast<int>(r.integer("output_dim"));
  c.seq_len = static_cast<int>(r.integer("seq_len"));
  c.lr = r.real("lr");
  c.epochs = static_cast<int>(r.integer("epochs"));
  c.error_dropout = r.real("error_dropout");
  c.sigma_floor = r.real("sigma_floor");
  const long long L = r.integer("layers");
  if (L < 1 || L > 64) r.fail("implausible layer count");
  for (long long l = 0; l < L; ++l) {
    auto ls = r.next();
    std::string tag, d, z, tau, w;
    ls >> tag >> d >> z >> tau >> w;
    if (tag != "layer" || w.empty()) r.fail("expected 'layer <d> <z> <tau> <w>'");
    c.layers.push_back({static_cast<int>(r.parse_int(d)), static_cast<int>(r.parse_int(z)),
                        r.parse_real(tau), r.parse_real(w)});
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }

  auto get = [&](const std::string& name, std::span<double> v) { r.read_block(name, v); };
  switch (ck.kind) {
    case ModelKind::PVRNN:
      ck.pvrnn = pvrnn::NetworkParams::zeros(c);
      ck.pvrnn.for_each_block(get);
      break;
    case ModelKind::FM:
      ck.fm = baselines::FmParams::zeros(c);
      ck.fm.for_each_block(get);
      break;
    case ModelKind::SI:
      ck.si = baselines::SiParams::zeros(c);
      ck.si.for_each_block(get);
      break;
  }
  const long long n = r.integer("sequences");
  if (n < 0) r.fail("negative sequence count");
  for (long long i = 0; i < n; ++i) {
    const std::string idx = "[" + std::to_string(i) + "]";
    if (ck.kind == ModelKind::PVRNN) {
      auto a = pvrnn::AdaptationVars::zeros(c, c.seq_len);
      r.read_block("A_mu" + idx, a.mu.values());
      r.read_block("A_sigma" + idx, a.sigma.values());
      ck.adaptation.push_back(std::move(a));
    } else if (ck.kind == ModelKind::SI) {
      auto a = baselines::InitialState::zeros(c);
      r.read_block("A1_mu" + idx, a.mu);
      r.read_block("A1_sigma" + idx, a.sigma);
      ck.initial.push_back(std::move(a));
    } else {
      r.fail("FM checkpoints carry no per-sequence values");
    }
  }
  auto last = r.next();
  std::string tag;
  last >> tag;
  if (tag != "end") r.fail("expected 'end'");
  return ck;
}

}  // namespace glean::harness
