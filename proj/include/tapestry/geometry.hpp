#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace tapestry {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct Resolution {
  int width = 0;
  int height = 0;

  bool operator==(const Resolution&) const = default;
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool valid() const { return width > 0 && height > 0; }
};

/// Dense row-major 2D raster. Row 0 is the top of the image.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(Resolution res, const T& fill = T{})
      : res_(res), data_(res.pixel_count(), fill) {}

  Resolution resolution() const { return res_; }
  int width() const { return res_.width; }
  int height() const { return res_.height; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[index(x, y)];
  }
  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[index(x, y)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < res_.width && y < res_.height;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(res_.width) +
           static_cast<std::size_t>(x);
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid& other) const {
    return res_ == other.res_ && data_ == other.data_;
  }

 private:
  Resolution res_;
  std::vector<T> data_;
};

using ImageRgb = Grid<Vec3f>;
using ImageGray = Grid<float>;
using Mask = Grid<std::uint8_t>;

inline double luma601(const Vec3f& c) {
  return 0.299 * c.x() + 0.587 * c.y() + 0.114 * c.z();
}

} // namespace tapestry
