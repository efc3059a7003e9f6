#include "evekf/scene_map.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>
#include <vector>

namespace evekf {

DenseMap::DenseMap(Eigen::MatrixXd log_grid, double texel_size, const Vec2& origin)
    : grid_(std::move(log_grid)), texel_size_(texel_size), origin_(origin) {
  if (grid_.rows() < 2 || grid_.cols() < 2) {
    throw EmptyImage("DenseMap: grid must be at least 2x2");
  }
  if (!(texel_size_ > 0)) {
    throw Error("DenseMap: texel size must be positive");
  }
  if (!grid_.allFinite()) {
    throw Error("DenseMap: non-finite log intensity");
  }
}

MapDomain DenseMap::domain() const {
  MapDomain d;
  d.x_min = origin_.x();
  d.y_min = origin_.y();
  d.x_max = origin_.x() + (cols() - 1) * texel_size_;
  d.y_max = origin_.y() + (rows() - 1) * texel_size_;
  return d;
}

std::optional<double> DenseMap::sample_opt(const Vec2& p) const {
  const double gx = (p.x() - origin_.x()) / texel_size_;
  const double gy = (p.y() - origin_.y()) / texel_size_;
  if (gx < 0 || gy < 0 || gx > cols() - 1 || gy > rows() - 1) {
    return std::nullopt;
  }
  const int j0 = std::min(static_cast<int>(std::floor(gx)), cols() - 2);
  const int i0 = std::min(static_cast<int>(std::floor(gy)), rows() - 2);
  const double fx = gx - j0;
  const double fy = gy - i0;
  return (1 - fy) * ((1 - fx) * grid_(i0, j0) + fx * grid_(i0, j0 + 1)) +
         fy * ((1 - fx) * grid_(i0 + 1, j0) + fx * grid_(i0 + 1, j0 + 1));
}

double DenseMap::sample(const Vec2& p) const {
  const auto v = sample_opt(p);
  if (!v) {
    throw OutsideMap("DenseMap::sample: point outside the texture");
  }
  return *v;
}

DenseMap build_map(const Eigen::MatrixXd& image, double texel_size, double floor,
                   std::optional<Vec2> origin) {
  if (image.rows() < 2 || image.cols() < 2) {
    throw EmptyImage("build_map: image must be at least 2x2");
  }
  if (!(floor > 0)) {
    throw Error("build_map: intensity floor must be positive");
  }
  if (image.minCoeff() < 0) {
    throw Error("build_map: negative gray levels");
  }
  Eigen::MatrixXd grid = image.cwiseMax(floor).array().log().matrix();
  Vec2 o;
  if (origin) {
    o = *origin;
  } else {
    o = Vec2(-0.5 * (image.cols() - 1) * texel_size,
             -0.5 * (image.rows() - 1) * texel_size);
  }
  return DenseMap(std::move(grid), texel_size, o);
}

namespace {

// Edge-inclusive reflection, so a symmetric normalized kernel conserves the
// total mass of the grid.
int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

DenseMap smooth_map(const DenseMap& map, double sigma) {
  if (sigma < 0) {
    throw Error("smooth_map: sigma must be non-negative");
  }
  if (sigma == 0) {
    return map;
  }
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const auto& g = map.grid();
  const int rows = map.rows();
  const int cols = map.cols();

  Eigen::MatrixXd tmp(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * g(i, reflect_index(j + k, cols));
      }
      tmp(i, j) = acc;
    }
  }
  Eigen::MatrixXd out(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp(reflect_index(i + k, rows), j);
      }
      out(i, j) = acc;
    }
  }
  return DenseMap(std::move(out), map.texel_size(), map.origin());
}

double sample_log_intensity(const DenseMap& map, const Vec2& p) {
  return map.sample(p);
}

PlanarScene make_scene(const Pose& plane_pose, std::shared_ptr<const DenseMap> map) {
  if (!map) {
    throw Error("make_scene: null map");
  }
  PlanarScene scene;
  scene.plane_pose = plane_pose;
  scene.domain = map->domain();
  scene.map = std::move(map);
  return scene;
}

RenderedView render(const PlanarScene& scene, const Pose& pose,
                    const CameraIntrinsics& k, std::optional<PixelRoi> roi) {
  if (!scene.map) {
    throw Error("render: scene has no texture");
  }
  PixelRoi r = roi.value_or(PixelRoi{0, 0, k.width, k.height});
  const int x0 = std::max(0, r.x0);
  const int y0 = std::max(0, r.y0);
  const int x1 = std::min(k.width, r.x0 + r.width);
  const int y1 = std::min(k.height, r.y0 + r.height);
  if (x1 <= x0 || y1 <= y0) {
    throw Error("render: empty region of interest");
  }
  const int w = x1 - x0;
  const int h = y1 - y0;

  RenderedView view;
  view.x0 = x0;
  view.y0 = y0;
  view.fx = k.fx;
  view.fy = k.fy;
  view.log_intensity = Eigen::MatrixXd::Zero(h, w);
  view.depth = Eigen::MatrixXd::Zero(h, w);
  view.mask.setZero(h, w);

  const detail::CastFrame frame(pose, scene);
  bool any = false;
  RayHit hit;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (detail::cast_ray_impl(Vec2(x, y), frame, k, scene.domain, &hit) !=
          detail::RayStatus::Hit) {
        continue;
      }
      const auto value = scene.map->sample_opt(hit.plane_uv);
      if (!value) {
        continue;
      }
      view.log_intensity(y - y0, x - x0) = *value;
      view.depth(y - y0, x - x0) = hit.depth;
      view.mask(y - y0, x - x0) = 1;
      any = true;
    }
  }
  if (!any) {
    throw NoVisiblePixels("render: no pixel ray lands on the map");
  }
  return view;
}

Vec2 gradient_at(const RenderedView& view, int x, int y) {
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (!view.valid(x + dx, y + dy)) {
        throw InsufficientSupport("gradient_at: 3x3 neighborhood not rendered");
      }
    }
  }
  const double gx = 0.5 * (view.log_at(x + 1, y) - view.log_at(x - 1, y));
  const double gy = 0.5 * (view.log_at(x, y + 1) - view.log_at(x, y - 1));
  // central differences are per pixel; rescale to per normalized unit
  return Vec2(gx * view.fx, gy * view.fy);
}

namespace {

int next_pgm_token(std::istream& in, std::string* token) {
  token->clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    token->push_back(static_cast<char>(c));
    c = in.get();
  }
  return token->empty() ? EOF : 0;
}

}  // namespace

Eigen::MatrixXd read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("read_pgm: cannot open " + path);
  }
  std::string tok;
  if (next_pgm_token(in, &tok) == EOF || tok != "P5") {
    throw DataError("read_pgm: not a binary PGM (P5): " + path);
  }
  long dims[3];
  for (long& d : dims) {
    if (next_pgm_token(in, &tok) == EOF) {
      throw DataError("read_pgm: truncated header: " + path);
    }
    try {
      d = std::stol(tok);
    } catch (const std::exception&) {
      throw DataError("read_pgm: malformed header token '" + tok + "': " + path);
    }
  }
  const long width = dims[0], height = dims[1], maxval = dims[2];
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw DataError("read_pgm: invalid dimensions or maxval: " + path);
  }
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw DataError("read_pgm: truncated pixel data: " + path);
  }
  Eigen::MatrixXd img(height, width);
  std::size_t idx = 0;
  for (long i = 0; i < height; ++i) {
    for (long j = 0; j < width; ++j) {
      if (bytes == 1) {
        img(i, j) = raw[idx++];
      } else {
        const int hi = raw[idx++];
        const int lo = raw[idx++];
        img(i, j) = hi * 256 + lo;  // big-endian per the format
      }
    }
  }
  return img;
}

void write_pgm(const std::string& path, const Eigen::MatrixXd& image, int maxval) {
  if (maxval <= 0 || maxval > 65535) {
    throw Error("write_pgm: maxval out of range");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("write_pgm: cannot open " + path);
  }
  char header[64];
  std::snprintf(header, sizeof(header), "P5\n%ld %ld\n%d\n",
                static_cast<long>(image.cols()), static_cast<long>(image.rows()),
                maxval);
  out << header;
  const int bytes = maxval > 255 ? 2 : 1;
  for (Eigen::Index i = 0; i < image.rows(); ++i) {
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      long v = std::lround(std::min(static_cast<double>(maxval),
                                    std::max(0.0, image(i, j))));
      if (bytes == 1) {
        out.put(static_cast<char>(v));
      } else {
        out.put(static_cast<char>(v / 256));
        out.put(static_cast<char>(v % 256));
      }
    }
  }
}

}  // namespace evekf
