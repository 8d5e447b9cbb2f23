#include "crop/annotation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

namespace crop {

using nlohmann::json;

namespace {

const json& require_field(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key))
    throw std::runtime_error("annotation " + path + ": missing field '" + key + "'");
  return j.at(key);
}

double shoelace_area(const std::vector<std::pair<double, double>>& pts) {
  double a = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto& [x1, y1] = pts[i];
    const auto& [x2, y2] = pts[(i + 1) % pts.size()];
    a += x1 * y2 - x2 * y1;
  }
  return 0.5 * a;
}

bool segments_cross(std::pair<double, double> a, std::pair<double, double> b,
                    std::pair<double, double> c, std::pair<double, double> d) {
  auto orient = [](auto p, auto q, auto r) {
    double v = (q.first - p.first) * (r.second - p.second) -
               (q.second - p.second) * (r.first - p.first);
    return v > 0 ? 1 : (v < 0 ? -1 : 0);
  };
  return orient(a, b, c) * orient(a, b, d) < 0 && orient(c, d, a) * orient(c, d, b) < 0;
}

bool is_self_intersecting(const std::vector<std::pair<double, double>>& pts) {
  const size_t n = pts.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // shared endpoint with closing edge
      if (segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n])) return true;
    }
  return false;
}

}  // namespace

AnnotationFile load_annotation(const std::string& path, const std::string& central_label) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotation: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("annotation " + path + ": " + e.what());
  }

  AnnotationFile out;
  auto& poly = out.polygon;
  if (!require_field(j, "imageWidth", path).is_number())
    throw std::runtime_error("annotation " + path + ": field 'imageWidth' is not a number");
  if (!require_field(j, "imageHeight", path).is_number())
    throw std::runtime_error("annotation " + path + ": field 'imageHeight' is not a number");
  poly.image_width = j.at("imageWidth").get<int>();
  poly.image_height = j.at("imageHeight").get<int>();
  out.image_path = j.value("imagePath", "");

  const json& shapes = require_field(j, "shapes", path);
  if (!shapes.is_array())
    throw std::runtime_error("annotation " + path + ": field 'shapes' is not an array");

  bool found = false;
  for (const auto& shape : shapes) {
    const std::string label = shape.value("label", "");
    const std::string type = shape.value("shape_type", "polygon");
    if (type != "polygon") {
      std::cerr << "warning: " << path << ": skipping non-polygon shape '" << label << "'\n";
      continue;
    }
    if (!central_label.empty() && label != central_label) {
      std::cerr << "warning: " << path << ": ignoring shape with label '" << label << "'\n";
      continue;
    }
    if (found) {
      std::cerr << "warning: " << path << ": ignoring extra polygon '" << label << "'\n";
      continue;
    }
    const json& pts = require_field(shape, "points", path);
    if (!pts.is_array())
      throw std::runtime_error("annotation " + path + ": field 'points' is not an array");
    for (const auto& p : pts) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        throw std::runtime_error("annotation " + path + ": field 'points' has a malformed vertex");
      double x = std::clamp(p[0].get<double>(), 0.0, static_cast<double>(poly.image_width));
      double y = std::clamp(p[1].get<double>(), 0.0, static_cast<double>(poly.image_height));
      poly.points.emplace_back(x, y);
    }
    poly.label = label;
    found = true;
  }
  if (!found) throw std::runtime_error("annotation " + path + ": no matching polygon shape");
  if (poly.points.size() < 3)
    throw std::runtime_error("annotation " + path + ": polygon needs >= 3 vertices, got " +
                             std::to_string(poly.points.size()));
  return out;
}

void write_annotation(const AnnotationFile& ann, const std::string& path) {
  json pts = json::array();
  for (const auto& [x, y] : ann.polygon.points) pts.push_back({x, y});
  json j = {
      {"imageWidth", ann.polygon.image_width},
      {"imageHeight", ann.polygon.image_height},
      {"imagePath", ann.image_path},
      {"shapes",
       json::array({{{"label", ann.polygon.label}, {"points", pts}, {"shape_type", "polygon"}}})},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write annotation: " + path);
  out << j.dump(2) << "\n";
}

bool point_in_polygon(double px, double py, const std::vector<std::pair<double, double>>& poly) {
  // Even-odd rule, ray cast to the left, half-open edges in y.
  int crossings = 0;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    auto [x1, y1] = poly[i];
    auto [x2, y2] = poly[(i + 1) % n];
    if ((y1 <= py && py < y2) || (y2 <= py && py < y1)) {
      double xc = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
      if (xc < px) ++crossings;
    }
  }
  return crossings % 2 == 1;
}

BinaryMask rasterize_polygon(const PolygonAnnotation& ann) {
  if (ann.points.size() < 3) throw std::invalid_argument("rasterize_polygon: < 3 vertices");
  BinaryMask mask(ann.image_width, ann.image_height);
  if (std::abs(shoelace_area(ann.points)) == 0.0) {
    std::cerr << "warning: rasterize_polygon: zero-area polygon, mask is empty\n";
    return mask;
  }
  if (is_self_intersecting(ann.points))
    std::cerr << "warning: rasterize_polygon: self-intersecting polygon, even-odd fill applied\n";

  // Scanline even-odd fill over pixel centers.
  std::vector<double> xs;
  for (int y = 0; y < ann.image_height; ++y) {
    const double py = y + 0.5;
    xs.clear();
    const size_t n = ann.points.size();
    for (size_t i = 0; i < n; ++i) {
      auto [x1, y1] = ann.points[i];
      auto [x2, y2] = ann.points[(i + 1) % n];
      if ((y1 <= py && py < y2) || (y2 <= py && py < y1))
        xs.push_back(x1 + (py - y1) * (x2 - x1) / (y2 - y1));
    }
    std::sort(xs.begin(), xs.end());
    for (size_t i = 0; i + 1 < xs.size(); i += 2) {
      int lo = std::max(0, static_cast<int>(std::floor(xs[i] - 1.0)));
      int hi = std::min(ann.image_width - 1, static_cast<int>(std::ceil(xs[i + 1])));
      for (int x = lo; x <= hi; ++x) {
        const double px = x + 0.5;
        if (px > xs[i] && px <= xs[i + 1]) mask.at(y, x) = 1;
      }
    }
  }
  return mask;
}

}  // namespace crop
