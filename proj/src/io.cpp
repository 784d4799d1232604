#include "hmax/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hmax {

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw std::invalid_argument("field file: " + why);
}

void put_bytes(std::ostream& os, const std::vector<double>& values) {
  std::vector<char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u;
    std::memcpy(&u, &values[i], 8);
    for (int b = 0; b < 8; ++b)
      buf[i * 8 + static_cast<std::size_t>(b)] =
          static_cast<char>((u >> (8 * b)) & 0xff);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void get_bytes(std::istream& is, std::vector<double>& values) {
  std::vector<char> buf(values.size() * 8);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size())
    malformed("truncated value block");
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b)
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(
               buf[i * 8 + static_cast<std::size_t>(b)]))
           << (8 * b);
    std::memcpy(&values[i], &u, 8);
  }
}

// Header fields in declaration order; optional tokens may be absent.
struct Header {
  int n = 0;
  Coords lo, hi;
  bool have_alpha = false;
  double alpha = 0.0;
  bool have_mu = false;
  Coord mu = 0;
  bool have_mode = false;
  EvalMode mode = EvalMode::exact;
};

Header parse_header(const std::string& line) {
  std::istringstream ss(line);
  std::string tok;
  if (!(ss >> tok) || tok != "HMAXFIELD") malformed("missing HMAXFIELD magic");
  if (!(ss >> tok) || tok != "v1") malformed("unsupported version");

  Header h;
  auto int_after = [&](const std::string& t, const char* key) {
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(t, &used);
    } catch (const std::exception&) {
      malformed(std::string("bad ") + key + " value \"" + t + "\"");
    }
    if (used != t.size())
      malformed(std::string("bad ") + key + " value \"" + t + "\"");
    return static_cast<Coord>(x);
  };
  auto coords_after = [&](std::string first, const char* key) {
    Coords c;
    c.push_back(int_after(first, key));
    const int d = 2 * h.n + 1;
    for (int i = 1; i < d; ++i) {
      if (!(ss >> first)) malformed(std::string("short ") + key + " list");
      c.push_back(int_after(first, key));
    }
    return c;
  };

  if (!(ss >> tok) || tok.rfind("n=", 0) != 0) malformed("missing n=");
  h.n = static_cast<int>(int_after(tok.substr(2), "n"));
  if (h.n < 1) malformed("n must be positive");
  if (!(ss >> tok) || tok.rfind("lo=", 0) != 0) malformed("missing lo=");
  h.lo = coords_after(tok.substr(3), "lo");
  if (!(ss >> tok) || tok.rfind("hi=", 0) != 0) malformed("missing hi=");
  h.hi = coords_after(tok.substr(3), "hi");
  if (!(ss >> tok) || tok != "dtype=f64") malformed("missing dtype=f64");

  while (ss >> tok) {
    if (tok.rfind("alpha=", 0) == 0) {
      char* end = nullptr;
      const std::string v = tok.substr(6);
      h.alpha = std::strtod(v.c_str(), &end);
      if (end != v.c_str() + v.size()) malformed("bad alpha value");
      h.have_alpha = true;
    } else if (tok.rfind("mu=", 0) == 0) {
      h.mu = int_after(tok.substr(3), "mu");
      h.have_mu = true;
    } else if (tok.rfind("mode=", 0) == 0) {
      h.mode = parse_eval_mode(tok.substr(5));
      h.have_mode = true;
    }
    // Unknown tokens pass through so plain readers accept extended
    // headers.
  }
  return h;
}

std::string header_prefix(const ScalarField& f) {
  const int d = f.window.dims();
  if (d < 3 || d % 2 == 0)
    throw std::invalid_argument("field file: dimension is not 2n+1");
  std::string line = "HMAXFIELD v1 n=" + std::to_string((d - 1) / 2);
  line += " lo=";
  for (int i = 0; i < d; ++i) {
    if (i) line += ' ';
    line += std::to_string(f.window.lo[i]);
  }
  line += " hi=";
  for (int i = 0; i < d; ++i) {
    if (i) line += ' ';
    line += std::to_string(f.window.hi[i]);
  }
  line += " dtype=f64";
  return line;
}

ScalarField field_of(const Header& h, std::istream& is) {
  if (static_cast<int>(h.lo.size()) != 2 * h.n + 1)
    malformed("lo/hi length disagrees with n");
  ScalarField f{Rect(h.lo, h.hi)};
  get_bytes(is, f.values);
  return f;
}

}  // namespace

void write_field(std::ostream& os, const ScalarField& f) {
  os << header_prefix(f) << '\n';
  put_bytes(os, f.values);
  if (!os) throw std::runtime_error("field file: write failed");
}

ScalarField read_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) malformed("missing header line");
  return field_of(parse_header(line), is);
}

void write_maximal_field(std::ostream& os, const MaximalField& m) {
  char abuf[40];
  std::snprintf(abuf, sizeof abuf, "%a", m.alpha);
  os << header_prefix(m.base) << " alpha=" << abuf << " mu=" << m.params.mu
     << " mode=" << to_string(m.mode) << '\n';
  put_bytes(os, m.base.values);
  if (!os) throw std::runtime_error("field file: write failed");
}

MaximalField read_maximal_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) malformed("missing header line");
  const Header h = parse_header(line);
  if (!h.have_alpha || !h.have_mu || !h.have_mode)
    malformed("maximal header needs alpha=, mu=, mode=");
  ScalarField base = field_of(h, is);
  return MaximalField{std::move(base), h.alpha, h.mode, GroupParams(h.n, h.mu)};
}

void write_rects(std::ostream& os, std::span<const Rect> rects) {
  for (const Rect& r : rects) {
    for (int i = 0; i < r.dims(); ++i) os << r.lo[i] << ' ';
    for (int i = 0; i < r.dims(); ++i) {
      os << r.hi[i];
      os << (i + 1 < r.dims() ? ' ' : '\n');
    }
  }
  if (!os) throw std::runtime_error("rect file: write failed");
}

std::vector<Rect> read_rects(std::istream& is) {
  std::vector<Rect> out;
  std::string line;
  std::size_t lineno = 0;
  int d = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<Coord> vals;
    Coord x;
    while (ss >> x) vals.push_back(x);
    ss.clear();
    std::string rest;
    if (ss >> rest)
      throw std::invalid_argument("rect file line " + std::to_string(lineno) +
                                  ": non-integer token \"" + rest + "\"");
    if (vals.empty()) continue;
    if (vals.size() % 2 != 0)
      throw std::invalid_argument("rect file line " + std::to_string(lineno) +
                                  ": odd coordinate count");
    const int dl = static_cast<int>(vals.size() / 2);
    if (d == 0) d = dl;
    if (dl != d)
      throw std::invalid_argument("rect file line " + std::to_string(lineno) +
                                  ": dimension mismatch");
    try {
      out.emplace_back(Coords(vals.begin(), vals.begin() + d),
                       Coords(vals.begin() + d, vals.end()));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("rect file line " + std::to_string(lineno) +
                                  ": " + e.what());
    }
  }
  return out;
}

namespace {

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream is(path, mode);
  if (!is) throw std::invalid_argument("cannot open " + path);
  return is;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream os(path, mode);
  if (!os) throw std::invalid_argument("cannot open " + path);
  return os;
}

}  // namespace

ScalarField read_field_file(const std::string& path) {
  auto is = open_in(path, std::ios::binary);
  return read_field(is);
}

void write_field_file(const std::string& path, const ScalarField& f) {
  auto os = open_out(path, std::ios::binary);
  write_field(os, f);
}

MaximalField read_maximal_field_file(const std::string& path) {
  auto is = open_in(path, std::ios::binary);
  return read_maximal_field(is);
}

void write_maximal_field_file(const std::string& path, const MaximalField& m) {
  auto os = open_out(path, std::ios::binary);
  write_maximal_field(os, m);
}

std::vector<Rect> read_rects_file(const std::string& path) {
  auto is = open_in(path, std::ios::in);
  return read_rects(is);
}

}  // namespace hmax
