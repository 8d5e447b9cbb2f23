#pragma once

#include <utility>

#include "crop/image.hpp"

namespace crop {

/// Square sampling window in source-photo coordinates, origin top-left.
struct CropWindow {
  double center_x = 0;
  double center_y = 0;
  double side = 0;           // window side in source pixels before scaling
  double scale_factor = 1.0;  // in (0,1]

  long effective_side() const;  // round(side * scale_factor)
};

/// Exact affine geometry of a performed crop, kept for inverse mapping.
struct CropGeometry {
  double x0 = 0;      // source x of the window's left edge
  double y0 = 0;      // source y of the window's top edge
  long window_side = 0;
  int out_side = 0;

  // Maps continuous output coordinates (origin top-left of the crop) back to
  // source-photo coordinates.
  std::pair<double, double> to_source(double ox, double oy) const {
    const double s = static_cast<double>(window_side) / out_side;
    return {x0 + ox * s, y0 + oy * s};
  }
  std::pair<double, double> to_output(double sx, double sy) const {
    const double s = static_cast<double>(out_side) / window_side;
    return {(sx - x0) * s, (sy - y0) * s};
  }
};

struct CropResult {
  RasterImage image;
  CropGeometry geometry;
};

// Cuts the window out of the photo and resizes it to out_side x out_side by
// bilinear interpolation. Samples falling outside the photo replicate the
// nearest edge pixel. Throws if the window does not intersect the photo or the
// effective side is < 2.
CropResult crop_resize(const RasterImage& photo, const CropWindow& window, int out_side);

// Same geometry with nearest-neighbor sampling; keeps labels binary.
BinaryMask crop_resize_mask(const BinaryMask& mask, const CropWindow& window, int out_side);

}  // namespace crop
