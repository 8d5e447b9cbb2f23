#include "crop/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crop {

long CropWindow::effective_side() const { return std::lround(side * scale_factor); }

namespace {

CropGeometry make_geometry(int photo_w, int photo_h, const CropWindow& window, int out_side) {
  if (out_side < 2) throw std::invalid_argument("crop_resize: out_side must be >= 2");
  const long eside = window.effective_side();
  if (eside < 2) throw std::invalid_argument("crop_resize: effective window side must be >= 2");
  CropGeometry g;
  g.window_side = eside;
  g.out_side = out_side;
  g.x0 = window.center_x - eside / 2.0;
  g.y0 = window.center_y - eside / 2.0;
  if (g.x0 + eside <= 0 || g.x0 >= photo_w || g.y0 + eside <= 0 || g.y0 >= photo_h)
    throw std::invalid_argument("crop_resize: window lies entirely outside the photo");
  return g;
}

}  // namespace

CropResult crop_resize(const RasterImage& photo, const CropWindow& window, int out_side) {
  CropGeometry g = make_geometry(photo.width, photo.height, window, out_side);
  CropResult res{RasterImage(out_side, out_side), g};
  const double step = static_cast<double>(g.window_side) / out_side;
  const int W = photo.width, H = photo.height;
  for (int oy = 0; oy < out_side; ++oy) {
    // Sample positions are pixel centers pushed through the affine map, then
    // shifted by 0.5 into index space for interpolation.
    const double sy = g.y0 + (oy + 0.5) * step - 0.5;
    const int y_lo = static_cast<int>(std::floor(sy));
    const float fy = static_cast<float>(sy - y_lo);
    const int y0c = std::clamp(y_lo, 0, H - 1);
    const int y1c = std::clamp(y_lo + 1, 0, H - 1);
    for (int ox = 0; ox < out_side; ++ox) {
      const double sx = g.x0 + (ox + 0.5) * step - 0.5;
      const int x_lo = static_cast<int>(std::floor(sx));
      const float fx = static_cast<float>(sx - x_lo);
      const int x0c = std::clamp(x_lo, 0, W - 1);
      const int x1c = std::clamp(x_lo + 1, 0, W - 1);
      for (int c = 0; c < 3; ++c) {
        const float v00 = photo.at(c, y0c, x0c), v01 = photo.at(c, y0c, x1c);
        const float v10 = photo.at(c, y1c, x0c), v11 = photo.at(c, y1c, x1c);
        const float top = v00 + (v01 - v00) * fx;
        const float bot = v10 + (v11 - v10) * fx;
        res.image.at(c, oy, ox) = top + (bot - top) * fy;
      }
    }
  }
  return res;
}

BinaryMask crop_resize_mask(const BinaryMask& mask, const CropWindow& window, int out_side) {
  CropGeometry g = make_geometry(mask.width, mask.height, window, out_side);
  BinaryMask out(out_side, out_side);
  const double step = static_cast<double>(g.window_side) / out_side;
  for (int oy = 0; oy < out_side; ++oy) {
    const double sy = g.y0 + (oy + 0.5) * step - 0.5;
    const int yn = std::clamp(static_cast<int>(std::lround(sy)), 0, mask.height - 1);
    for (int ox = 0; ox < out_side; ++ox) {
      const double sx = g.x0 + (ox + 0.5) * step - 0.5;
      const int xn = std::clamp(static_cast<int>(std::lround(sx)), 0, mask.width - 1);
      out.at(oy, ox) = mask.at(yn, xn);
    }
  }
  return out;
}

}  // namespace crop
