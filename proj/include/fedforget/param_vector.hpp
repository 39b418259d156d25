#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fedforget {

using Shape = std::vector<std::size_t>;

/// Flat model parameters plus the per-tensor layout they came from.
///
/// Every arithmetic helper checks layouts and rejects non-finite results, so a
/// ParamVector that escapes a public operation is always finite.
class ParamVector {
 public:
  ParamVector() = default;
  /// Zero-filled vector with the given tensor shapes.
  explicit ParamVector(std::vector<Shape> shapes);
  /// Throws ShapeError if the value count does not match the shapes.
  ParamVector(std::vector<Shape> shapes, std::vector<double> values);

  static std::size_t count_for(const std::vector<Shape>& shapes);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Offset of tensor `t` inside the flat vector.
  std::size_t offset_of(std::size_t t) const;

  bool same_layout(const ParamVector& other) const noexcept {
    return shapes_ == other.shapes_;
  }
  /// Throws ShapeError unless layouts are identical.
  void require_layout(const ParamVector& other, const char* op) const;
  /// Throws NumericError if any entry is NaN/Inf.
  void require_finite(const char* what) const;

  ParamVector& operator+=(const ParamVector& rhs);
  ParamVector& operator-=(const ParamVector& rhs);
  ParamVector& operator*=(double s);
  /// this += s * x
  ParamVector& axpy(double s, const ParamVector& x);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<Shape> shapes_;
  std::vector<double> values_;
};

ParamVector operator+(ParamVector lhs, const ParamVector& rhs);
ParamVector operator-(ParamVector lhs, const ParamVector& rhs);
ParamVector operator*(double s, ParamVector v);
ParamVector hadamard(const ParamVector& a, const ParamVector& b);

double dot(const ParamVector& a, const ParamVector& b);
double l1_norm(const ParamVector& v);
double l2_norm(const ParamVector& v);
/// ||a - b||_2 without materialising the difference.
double l2_distance(const ParamVector& a, const ParamVector& b);

// Checkpoint encoding: version byte, u32 tensor count, per tensor u32 rank and
// u64 dims, then every value as a little-endian IEEE-754 binary64.
inline constexpr std::uint8_t kParamFormatVersion = 1;

void write_params(std::ostream& out, const ParamVector& v);
ParamVector read_params(std::istream& in);
std::vector<std::uint8_t> encode_params(const ParamVector& v);
ParamVector decode_params(std::span<const std::uint8_t> bytes);

}  // namespace fedforget
