#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crop/image.hpp"

namespace crop {

/// Polygon ground truth in image coordinates (origin top-left, units pixels).
struct PolygonAnnotation {
  std::vector<std::pair<double, double>> points;  // >= 3 vertices, clipped to bounds
  std::string label;
  int image_width = 0;
  int image_height = 0;
};

struct AnnotationFile {
  std::string image_path;  // relative path as stored in the file
  PolygonAnnotation polygon;
};

// Reads a labelme-style JSON annotation. The first polygon shape carrying
// `central_label` (or the first polygon at all when `central_label` is empty)
// becomes the central object; other shapes are skipped with a warning on stderr.
// Unknown extra fields are ignored.
AnnotationFile load_annotation(const std::string& path, const std::string& central_label = "");

void write_annotation(const AnnotationFile& ann, const std::string& path);

// Fills pixels whose centers (x+0.5, y+0.5) lie inside the polygon, even-odd rule.
// Self-intersecting polygons rasterize by the same rule with a warning; a
// zero-area polygon yields an all-zero mask with a warning.
BinaryMask rasterize_polygon(const PolygonAnnotation& ann);

// Even-odd point-in-polygon test shared with the rasterizer.
bool point_in_polygon(double px, double py, const std::vector<std::pair<double, double>>& poly);

}  // namespace crop
