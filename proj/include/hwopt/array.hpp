#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hwopt {

// Dense rank-1 or rank-2 array of doubles, row-major. A "scalar" is any array
// with exactly one element.
struct Shape {
  int rank = 1;
  int d0 = 0;  // rank 1: length; rank 2: rows
  int d1 = 0;  // rank 2: cols

  static Shape vec(int n) { return Shape{1, n, 0}; }
  static Shape mat(int r, int c) { return Shape{2, r, c}; }

  std::int64_t numel() const {
    return rank == 1 ? d0 : static_cast<std::int64_t>(d0) * d1;
  }
  int rows() const { return rank == 1 ? 1 : d0; }
  int cols() const { return rank == 1 ? d0 : d1; }
  bool operator==(const Shape& o) const {
    return rank == o.rank && d0 == o.d0 && (rank == 1 || d1 == o.d1);
  }
  std::string str() const;
};

struct Array {
  Shape shape;
  std::vector<double> v;

  Array() : shape(Shape::vec(0)) {}
  explicit Array(Shape s) : shape(s), v(static_cast<size_t>(s.numel()), 0.0) {}
  Array(Shape s, std::vector<double> data) : shape(s), v(std::move(data)) {}

  static Array zeros(Shape s) { return Array(s); }
  static Array scalar(double x) { return Array(Shape::vec(1), {x}); }
  static Array vec(std::vector<double> data) {
    Shape s = Shape::vec(static_cast<int>(data.size()));
    return Array(s, std::move(data));
  }
  static Array full(Shape s, double x) {
    Array a(s);
    for (auto& e : a.v) e = x;
    return a;
  }
  static Array mat(int r, int c, std::vector<double> data) {
    return Array(Shape::mat(r, c), std::move(data));
  }

  std::int64_t numel() const { return shape.numel(); }
  double& at(int i) { return v[static_cast<size_t>(i)]; }
  double at(int i) const { return v[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return v[static_cast<size_t>(i) * shape.cols() + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * shape.cols() + j]; }
  std::span<const double> data() const { return v; }
  std::span<double> data() { return v; }
};

bool all_finite(const Array& a);

}  // namespace hwopt
