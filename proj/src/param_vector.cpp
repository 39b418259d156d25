#include "fedforget/param_vector.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedforget/common.hpp"

namespace fedforget {

namespace {

std::string describe(const std::vector<Shape>& shapes) {
  std::ostringstream os;
  os << '[';
  for (std::size_t t = 0; t < shapes.size(); ++t) {
    if (t) os << ", ";
    os << '(';
    for (std::size_t d = 0; d < shapes[t].size(); ++d) {
      if (d) os << 'x';
      os << shapes[t][d];
    }
    os << ')';
  }
  os << ']';
  return os.str();
}

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) put_u8(out, static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::istream& in, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      throw ArgumentError("truncated parameter stream");
    }
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

std::size_t ParamVector::count_for(const std::vector<Shape>& shapes) {
  std::size_t total = 0;
  for (const auto& s : shapes) {
    total += std::accumulate(s.begin(), s.end(), std::size_t{1},
                             std::multiplies<>());
  }
  return total;
}

ParamVector::ParamVector(std::vector<Shape> shapes)
    : shapes_(std::move(shapes)), values_(count_for(shapes_), 0.0) {}

ParamVector::ParamVector(std::vector<Shape> shapes, std::vector<double> values)
    : shapes_(std::move(shapes)), values_(std::move(values)) {
  if (values_.size() != count_for(shapes_)) {
    throw ShapeError("value count " + std::to_string(values_.size()) +
                     " does not match shapes " + describe(shapes_));
  }
}

std::size_t ParamVector::offset_of(std::size_t t) const {
  if (t >= shapes_.size()) throw ShapeError("tensor index out of range");
  std::size_t off = 0;
  for (std::size_t i = 0; i < t; ++i) {
    off += count_for({shapes_[i]});
  }
  return off;
}

void ParamVector::require_layout(const ParamVector& other, const char* op) const {
  if (!same_layout(other)) {
    throw ShapeError(std::string(op) + ": layout mismatch " + describe(shapes_) +
                     " vs " + describe(other.shapes_));
  }
}

void ParamVector::require_finite(const char* what) const {
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(what) + ": non-finite parameter value");
    }
  }
}

ParamVector& ParamVector::operator+=(const ParamVector& rhs) {
  require_layout(rhs, "add");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += rhs.values_[i];
  require_finite("add");
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& rhs) {
  require_layout(rhs, "sub");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= rhs.values_[i];
  require_finite("sub");
  return *this;
}

ParamVector& ParamVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  require_finite("scale");
  return *this;
}

ParamVector& ParamVector::axpy(double s, const ParamVector& x) {
  require_layout(x, "axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * x.values_[i];
  require_finite("axpy");
  return *this;
}

ParamVector operator+(ParamVector lhs, const ParamVector& rhs) { return lhs += rhs; }
ParamVector operator-(ParamVector lhs, const ParamVector& rhs) { return lhs -= rhs; }
ParamVector operator*(double s, ParamVector v) { return v *= s; }

ParamVector hadamard(const ParamVector& a, const ParamVector& b) {
  a.require_layout(b, "hadamard");
  ParamVector out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  out.require_finite("hadamard");
  return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
  a.require_layout(b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l1_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v.values()) s += std::abs(x);
  return s;
}

double l2_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v.values()) s += x * x;
  return std::sqrt(s);
}

double l2_distance(const ParamVector& a, const ParamVector& b) {
  a.require_layout(b, "l2_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void write_params(std::ostream& out, const ParamVector& v) {
  put_u8(out, kParamFormatVersion);
  put_le(out, v.shapes().size(), 4);
  for (const auto& s : v.shapes()) {
    put_le(out, s.size(), 4);
    for (std::size_t d : s) put_le(out, d, 8);
  }
  for (double x : v.values()) put_le(out, std::bit_cast<std::uint64_t>(x), 8);
}

ParamVector read_params(std::istream& in) {
  const auto version = static_cast<std::uint8_t>(get_le(in, 1));
  if (version != kParamFormatVersion) {
    throw ArgumentError("unsupported parameter format version " +
                        std::to_string(version));
  }
  const auto count = get_le(in, 4);
  std::vector<Shape> shapes(count);
  for (auto& s : shapes) {
    s.resize(get_le(in, 4));
    for (auto& d : s) d = get_le(in, 8);
  }
  std::vector<double> values(ParamVector::count_for(shapes));
  for (double& x : values) x = std::bit_cast<double>(get_le(in, 8));
  ParamVector v(std::move(shapes), std::move(values));
  v.require_finite("read_params");
  return v;
}

std::vector<std::uint8_t> encode_params(const ParamVector& v) {
  std::ostringstream os(std::ios::binary);
  write_params(os, v);
  const std::string s = os.str();
  return {s.begin(), s.end()};
}

ParamVector decode_params(std::span<const std::uint8_t> bytes) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  return read_params(is);
}

}  // namespace fedforget
