#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "crop/annotation.hpp"
#include "crop/augment.hpp"
#include "crop/dataset.hpp"
#include "crop/geometry.hpp"
#include "crop/losses.hpp"
#include "crop/synthetic.hpp"

using namespace crop;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int n = 0;
  fs::path p = fs::temp_directory_path() / ("crop_imagery_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(n++));
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Test-local even-odd point-in-polygon (leftward ray), the brute-force oracle
// used against the scanline rasterizer.
bool evenodd_inside(double px, double py, const std::vector<std::pair<double, double>>& poly) {
  int crossings = 0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const auto [x1, y1] = poly[i];
    const auto [x2, y2] = poly[(i + 1) % poly.size()];
    if ((y1 <= py && py < y2) || (y2 <= py && py < y1)) {
      if (x1 + (py - y1) * (x2 - x1) / (y2 - y1) < px) ++crossings;
    }
  }
  return crossings % 2 == 1;
}

size_t brute_force_count(const PolygonAnnotation& ann) {
  size_t count = 0;
  for (int y = 0; y < ann.image_height; ++y)
    for (int x = 0; x < ann.image_width; ++x)
      if (evenodd_inside(x + 0.5, y + 0.5, ann.points)) ++count;
  return count;
}

RasterImage random_image(std::mt19937_64& rng, int w, int h) {
  RasterImage img(w, h);
  std::uniform_real_distribution<float> d(0.f, 1.f);
  for (auto& v : img.data) v = d(rng);
  return img;
}

const std::string kSquareAnnotation = R"({
  "imageWidth": 32, "imageHeight": 32, "imagePath": "img.png",
  "version": "5.0.1", "flags": {},
  "shapes": [
    {"label": "pear", "points": [[10,10],[10,20],[20,20],[20,10]], "shape_type": "polygon",
     "group_id": null}
  ]
})";

}  // namespace

TEST_CASE("load_annotation parses the labelme schema") {
  const fs::path dir = temp_dir();
  write_file(dir / "a.json", kSquareAnnotation);
  AnnotationFile ann = load_annotation((dir / "a.json").string(), "pear");
  CHECK(ann.polygon.points.size() == 4);
  CHECK(ann.polygon.label == "pear");
  CHECK(ann.polygon.image_width == 32);
  CHECK(ann.polygon.points[0] == std::pair<double, double>{10, 10});
  CHECK(ann.image_path == "img.png");
}

TEST_CASE("load_annotation rejects degenerate or malformed files") {
  const fs::path dir = temp_dir();
  write_file(dir / "two.json",
             R"({"imageWidth":8,"imageHeight":8,"shapes":[{"label":"x","points":[[1,1],[2,2]],"shape_type":"polygon"}]})");
  CHECK_THROWS_WITH_AS(load_annotation((dir / "two.json").string()),
                       doctest::Contains("3 vertices"), std::runtime_error);

  write_file(dir / "missing.json", R"({"imageHeight":8,"shapes":[]})");
  CHECK_THROWS_WITH_AS(load_annotation((dir / "missing.json").string()),
                       doctest::Contains("imageWidth"), std::runtime_error);

  write_file(dir / "broken.json", "{ not json");
  CHECK_THROWS(load_annotation((dir / "broken.json").string()));
}

TEST_CASE("annotation write/load round-trip reproduces the point list exactly") {
  const fs::path dir = temp_dir();
  AnnotationFile ann;
  ann.image_path = "photo.png";
  ann.polygon.label = "fruit";
  ann.polygon.image_width = 100;
  ann.polygon.image_height = 80;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 80.0);
  for (int i = 0; i < 9; ++i) ann.polygon.points.emplace_back(d(rng), d(rng));
  write_annotation(ann, (dir / "rt.json").string());
  AnnotationFile back = load_annotation((dir / "rt.json").string());
  REQUIRE(back.polygon.points.size() == ann.polygon.points.size());
  for (size_t i = 0; i < ann.polygon.points.size(); ++i) {
    CHECK(back.polygon.points[i].first == ann.polygon.points[i].first);
    CHECK(back.polygon.points[i].second == ann.polygon.points[i].second);
  }
}

TEST_CASE("rasterize_polygon fills the axis-aligned rectangle exactly") {
  PolygonAnnotation poly;
  poly.image_width = poly.image_height = 32;
  poly.points = {{10, 10}, {10, 20}, {20, 20}, {20, 10}};
  BinaryMask mask = rasterize_polygon(poly);
  CHECK(mask.count() == 100);  // pixel centers 10.5 .. 19.5 in both axes
  CHECK(mask.at(10, 10) == 1);
  CHECK(mask.at(9, 10) == 0);
  CHECK(mask.at(19, 19) == 1);
  CHECK(mask.at(20, 20) == 0);
}

TEST_CASE("rasterize_polygon covers the whole image for a full-frame polygon") {
  PolygonAnnotation poly;
  poly.image_width = 16;
  poly.image_height = 12;
  poly.points = {{0, 0}, {16, 0}, {16, 12}, {0, 12}};
  CHECK(rasterize_polygon(poly).count() == 16u * 12u);
}

TEST_CASE("rasterize_polygon matches brute-force point-in-polygon") {
  PolygonAnnotation tri;
  tri.image_width = tri.image_height = 32;
  tri.points = {{0, 0}, {0, 10}, {10, 0}};
  CHECK(rasterize_polygon(tri).count() == brute_force_count(tri));

  // random convex polygons
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> side(8, 64), angle(0, 2 * 3.14159265358979);
  for (int trial = 0; trial < 1000; ++trial) {
    PolygonAnnotation poly;
    poly.image_width = poly.image_height = 8 + static_cast<int>(trial % 57);
    const double cx = poly.image_width / 2.0, cy = poly.image_height / 2.0;
    const double r = 0.25 * poly.image_width + 0.2 * poly.image_width *
                     std::uniform_real_distribution<double>(0, 1)(rng);
    const int n = 3 + static_cast<int>(trial % 6);
    std::vector<double> angles(n);
    for (auto& a : angles) a = angle(rng);
    std::sort(angles.begin(), angles.end());
    for (double a : angles) poly.points.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a));
    BinaryMask mask = rasterize_polygon(poly);
    REQUIRE(mask.count() == brute_force_count(poly));
  }
}

TEST_CASE("rasterize_polygon handles degenerate polygons with warnings") {
  PolygonAnnotation zero;
  zero.image_width = zero.image_height = 8;
  zero.points = {{2, 2}, {2, 2}, {2, 2}};
  CHECK(rasterize_polygon(zero).count() == 0);

  PolygonAnnotation bowtie;  // self-intersecting, even-odd leaves two triangles
  bowtie.image_width = bowtie.image_height = 16;
  bowtie.points = {{0, 0}, {10, 10}, {10, 0}, {0, 10}};
  BinaryMask mask = rasterize_polygon(bowtie);
  CHECK(mask.count() == brute_force_count(bowtie));
  CHECK(mask.count() > 0);
}

TEST_CASE("crop_resize with identity geometry returns the photo unchanged") {
  std::mt19937_64 rng(3);
  RasterImage photo = random_image(rng, 64, 64);
  CropWindow window{32, 32, 64, 1.0};
  CropResult res = crop_resize(photo, window, 64);
  CHECK(res.image.data == photo.data);
  CHECK(res.geometry.window_side == 64);
}

TEST_CASE("crop_resize inverse mapping reproduces the window center") {
  std::mt19937_64 rng(5);
  RasterImage photo = random_image(rng, 256, 256);
  CropWindow window{137.25, 81.5, 1024, 1.0};
  CropResult res = crop_resize(photo, window, 512);
  auto [sx, sy] = res.geometry.to_source(256.0, 256.0);  // output center
  CHECK(sx == doctest::Approx(137.25).epsilon(1e-12));
  CHECK(sy == doctest::Approx(81.5).epsilon(1e-12));

  // each output pixel center maps through the analytic affine map
  const double step = 1024.0 / 512.0;
  for (int u : {0, 17, 255, 511}) {
    auto [mx, my] = res.geometry.to_source(u + 0.5, u + 0.5);
    CHECK(mx == doctest::Approx(window.center_x - 512 + (u + 0.5) * step).epsilon(1e-12));
    CHECK(my == doctest::Approx(window.center_y - 512 + (u + 0.5) * step).epsilon(1e-12));
  }
}

TEST_CASE("crop_resize pads out-of-bounds samples by edge replication") {
  std::mt19937_64 rng(7);
  RasterImage photo = random_image(rng, 48, 48);
  // reference sampler: same affine map, bilinear with clamped indices
  auto reference = [&photo](const CropGeometry& g, int out_side) {
    RasterImage out(out_side, out_side);
    const double step = double(g.window_side) / out_side;
    for (int oy = 0; oy < out_side; ++oy)
      for (int ox = 0; ox < out_side; ++ox) {
        const double sx = g.x0 + (ox + 0.5) * step - 0.5;
        const double sy = g.y0 + (oy + 0.5) * step - 0.5;
        const int x0 = (int)std::floor(sx), y0 = (int)std::floor(sy);
        const double fx = sx - x0, fy = sy - y0;
        auto cl = [](int v, int hi) { return std::min(std::max(v, 0), hi); };
        for (int c = 0; c < 3; ++c) {
          const double v00 = photo.at(c, cl(y0, 47), cl(x0, 47));
          const double v01 = photo.at(c, cl(y0, 47), cl(x0 + 1, 47));
          const double v10 = photo.at(c, cl(y0 + 1, 47), cl(x0, 47));
          const double v11 = photo.at(c, cl(y0 + 1, 47), cl(x0 + 1, 47));
          out.at(c, oy, ox) =
              float(v00 * (1 - fx) * (1 - fy) + v01 * fx * (1 - fy) + v10 * (1 - fx) * fy +
                    v11 * fx * fy);
        }
      }
    return out;
  };
  CropWindow corner{2, 3, 32, 1.0};  // window hangs off the top-left corner
  CropResult res = crop_resize(photo, corner, 32);
  RasterImage ref = reference(res.geometry, 32);
  for (size_t i = 0; i < ref.data.size(); ++i)
    REQUIRE(res.image.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-5));

  CropWindow outside{-100, -100, 32, 1.0};
  CHECK_THROWS(crop_resize(photo, outside, 32));
  CropWindow tiny{10, 10, 4, 0.1};  // effective side < 2
  CHECK_THROWS(crop_resize(photo, tiny, 32));
}

TEST_CASE("augment with identity configuration is a no-op") {
  std::mt19937_64 scene_rng(11), draw(1);
  AnnotatedSample s;
  s.image = random_image(scene_rng, 32, 32);
  s.mask = BinaryMask(32, 32);
  s.mask.at(10, 12) = 1;
  AnnotatedSample out = augment(s, AugmentationConfig::identity(), draw);
  CHECK(out.image.data == s.image.data);
  CHECK(out.mask == s.mask);
}

TEST_CASE("augment applies the identical geometric transform to image and mask") {
  std::mt19937_64 scene_rng(13);
  AnnotatedSample s;
  s.image = random_image(scene_rng, 32, 32);
  s.mask = BinaryMask(32, 32);
  for (int y = 4; y < 12; ++y)
    for (int x = 6; x < 20; ++x) s.mask.at(y, x) = 1;

  AugmentationConfig rot_only = AugmentationConfig::identity();
  rot_only.rotation_choices = {90};
  std::mt19937_64 draw(2);
  AnnotatedSample r = augment(s, rot_only, draw);
  CHECK(r.mask == rotate90(s.mask, 1));
  CHECK(r.image.data == rotate90(s.image, 1).data);
  CHECK(iou(r.mask, rotate90(s.mask, 1)) == 1.0);

  AugmentationConfig flip_rot = AugmentationConfig::identity();
  flip_rot.flip_probability = 1.0;
  flip_rot.rotation_choices = {180};
  std::mt19937_64 draw2(3);
  AnnotatedSample fr = augment(s, flip_rot, draw2);
  CHECK(fr.mask == rotate90(hflip(s.mask), 2));
}

TEST_CASE("augment scale jitter keeps the mask binary and scales its area") {
  AnnotatedSample s;
  s.image = RasterImage(64, 64, 0.2f);
  s.mask = BinaryMask(64, 64);
  for (int y = 24; y < 40; ++y)
    for (int x = 24; x < 40; ++x) s.mask.at(y, x) = 1;  // 16x16 square

  AugmentationConfig zoom = AugmentationConfig::identity();
  zoom.scale_jitter = {1.25, 1.25};
  std::mt19937_64 draw(4);
  AnnotatedSample z = augment(s, zoom, draw);
  for (uint8_t v : z.mask.data) CHECK((v == 0 || v == 1));
  const double ratio = double(z.mask.count()) / double(s.mask.count());
  CHECK(ratio == doctest::Approx(1.25 * 1.25).epsilon(0.1));
}

TEST_CASE("augment is deterministic under a fixed seed") {
  std::mt19937_64 scene_rng(17);
  AnnotatedSample s;
  s.image = random_image(scene_rng, 32, 32);
  s.mask = BinaryMask(32, 32);
  s.mask.at(16, 16) = 1;
  AugmentationConfig cfg;  // defaults: flips, rotations, jitter, blur
  cfg.seed = 99;

  auto run = [&]() {
    std::mt19937_64 draw(cfg.seed);
    std::vector<AnnotatedSample> outs;
    for (int i = 0; i < 100; ++i) outs.push_back(augment(s, cfg, draw));
    return outs;
  };
  const auto a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image.data == b[i].image.data);
    CHECK(a[i].mask == b[i].mask);
  }
}

TEST_CASE("split_dataset reproduces the published 80/20 split sizes") {
  auto make = [](int n) {
    std::vector<AnnotatedSample> v(n);
    for (int i = 0; i < n; ++i) v[i].source_id = std::to_string(i);
    return v;
  };
  auto [tr172, va172] = split_dataset(make(172), 0.8, 1);
  CHECK(tr172.size() == 137);
  CHECK(va172.size() == 35);
  auto [tr86, va86] = split_dataset(make(86), 0.8, 1);
  CHECK(tr86.size() == 68);
  CHECK(va86.size() == 18);
  auto [all, none] = split_dataset(make(10), 1.0, 1);
  CHECK(all.size() == 10);
  CHECK(none.empty());
  CHECK_THROWS(split_dataset({}, 0.8, 1));
}

TEST_CASE("split_dataset is a deterministic partition") {
  std::vector<AnnotatedSample> v(57);
  for (int i = 0; i < 57; ++i) v[i].source_id = std::to_string(i);
  auto [tr, va] = split_dataset(v, 0.6, 42);
  auto [tr2, va2] = split_dataset(v, 0.6, 42);
  std::multiset<std::string> whole, parts;
  for (const auto& s : v) whole.insert(s.source_id);
  for (const auto& s : tr) parts.insert(s.source_id);
  for (const auto& s : va) parts.insert(s.source_id);
  CHECK(whole == parts);
  REQUIRE(tr.size() == tr2.size());
  for (size_t i = 0; i < tr.size(); ++i) CHECK(tr[i].source_id == tr2[i].source_id);
}

TEST_CASE("synthetic disk scene has the analytic area and centroid") {
  SceneSpec spec;
  spec.canvas_side = 512;
  spec.radius_min = spec.radius_max = 50;
  spec.center_jitter = 0;
  spec.wobble = 0;
  spec.distractor_count = 0;
  spec.clutter = 0;
  SyntheticScene scene = generate_synthetic_scene(spec, 7);
  CHECK(scene.true_area == doctest::Approx(3.14159265358979 * 50 * 50).epsilon(0.01));
  CHECK(scene.true_cx == doctest::Approx(256.0).epsilon(1e-9));
  CHECK(scene.true_cy == doctest::Approx(256.0).epsilon(1e-9));

  // mask equals the brute-force disk rasterization
  size_t inside = 0;
  for (int y = 0; y < 512; ++y)
    for (int x = 0; x < 512; ++x) {
      const bool in = std::hypot(x + 0.5 - 256.0, y + 0.5 - 256.0) <= 50.0;
      inside += in;
      REQUIRE(scene.mask.at(y, x) == (in ? 1 : 0));
    }
  CHECK(scene.true_area == double(inside));
}

TEST_CASE("synthetic scenes are deterministic and validate their spec") {
  SceneSpec spec = scene_preset_basic(96);
  SyntheticScene a = generate_synthetic_scene(spec, 123);
  SyntheticScene b = generate_synthetic_scene(spec, 123);
  CHECK(a.image.data == b.image.data);
  CHECK(a.mask == b.mask);
  SyntheticScene c = generate_synthetic_scene(spec, 124);
  CHECK(a.image.data != c.image.data);

  SceneSpec bad = spec;
  bad.radius_min = bad.radius_max = 90;  // cannot fit a 180-pixel blob in 96
  CHECK_THROWS(generate_synthetic_scene(bad, 1));
}

TEST_CASE("pair datasets round-trip through the filesystem") {
  const fs::path dir = temp_dir();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  SceneSpec spec = scene_preset_basic(64);
  for (int i = 0; i < 3; ++i) {
    SyntheticScene s = generate_synthetic_scene(spec, 100 + i);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d", i);
    save_image(s.image, (dir / "images" / (std::string(name) + ".png")).string());
    save_mask(s.mask, (dir / "masks" / (std::string(name) + ".png")).string());
  }
  auto samples = load_pair_dataset(dir.string());
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].image.width == 64);
  CHECK(samples[0].mask.count() > 0);
  CHECK(samples[0].source_id == "scene_000");
}
