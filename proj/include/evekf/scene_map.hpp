#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "evekf/geometry.hpp"

namespace evekf {

/// Dense planar photometric map. The grid stores natural-log intensity;
/// texel (row i, col j) sits at plane coordinates
/// origin + (j * texel_size, i * texel_size), and bilinear sampling is
/// defined on the rectangle spanned by the outermost texel centers.
class DenseMap {
 public:
  DenseMap(Eigen::MatrixXd log_grid, double texel_size, const Vec2& origin);

  const Eigen::MatrixXd& grid() const { return grid_; }
  double texel_size() const { return texel_size_; }
  const Vec2& origin() const { return origin_; }
  int rows() const { return static_cast<int>(grid_.rows()); }
  int cols() const { return static_cast<int>(grid_.cols()); }

  MapDomain domain() const;

  /// Bilinear sample at plane point p (meters). Throws OutsideMap.
  double sample(const Vec2& p) const;
  std::optional<double> sample_opt(const Vec2& p) const;

 private:
  Eigen::MatrixXd grid_;
  double texel_size_;
  Vec2 origin_;
};

/// Builds a map from a gray-level image: grid = log(max(image, floor)).
/// If origin is not given the texture is centered on the plane origin.
/// Throws EmptyImage for grids smaller than 2x2.
DenseMap build_map(const Eigen::MatrixXd& image, double texel_size, double floor,
                   std::optional<Vec2> origin = std::nullopt);

/// Gaussian blur of the log-intensity grid with a normalized kernel and
/// reflective (edge-inclusive) boundary handling; sigma is in texels and
/// sigma = 0 returns the map unchanged.
DenseMap smooth_map(const DenseMap& map, double sigma);

double sample_log_intensity(const DenseMap& map, const Vec2& p);

/// Builds a scene whose domain is the map's bilinear-sampling rectangle.
PlanarScene make_scene(const Pose& plane_pose, std::shared_ptr<const DenseMap> map);

/// Pixel region of interest in sensor coordinates.
struct PixelRoi {
  int x0 = 0, y0 = 0, width = 0, height = 0;
};

/// The map as seen from one camera pose: per-pixel log intensity, depth and
/// a validity mask, over the full sensor or a clipped region of interest.
struct RenderedView {
  int x0 = 0, y0 = 0;
  double fx = 0, fy = 0;  // for converting pixel gradients to normalized units
  Eigen::MatrixXd log_intensity;   // (height, width), row = y - y0
  Eigen::MatrixXd depth;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;

  int width() const { return static_cast<int>(log_intensity.cols()); }
  int height() const { return static_cast<int>(log_intensity.rows()); }
  bool contains(int x, int y) const {
    return x >= x0 && x < x0 + width() && y >= y0 && y < y0 + height();
  }
  bool valid(int x, int y) const {
    return contains(x, y) && mask(y - y0, x - x0) != 0;
  }
  double log_at(int x, int y) const { return log_intensity(y - y0, x - x0); }
  double depth_at(int x, int y) const { return depth(y - y0, x - x0); }
};

/// Renders the scene from `pose` by casting one ray per pixel. Pixels whose
/// ray misses the textured extent (or exits behind the camera) are masked
/// out; throws NoVisiblePixels when nothing lands on the map.
RenderedView render(const PlanarScene& scene, const Pose& pose,
                    const CameraIntrinsics& k,
                    std::optional<PixelRoi> roi = std::nullopt);

/// Spatial log-intensity gradient at a pixel of a rendered view, by central
/// differences, expressed per normalized-image unit. Requires a fully valid
/// 3x3 neighborhood (InsufficientSupport otherwise).
Vec2 gradient_at(const RenderedView& view, int x, int y);

/// Binary (P5) PGM input, 8- or 16-bit, returned as gray levels.
Eigen::MatrixXd read_pgm(const std::string& path);

/// Binary (P5) PGM output; values are clamped to [0, maxval] and rounded.
void write_pgm(const std::string& path, const Eigen::MatrixXd& image, int maxval = 255);

}  // namespace evekf
