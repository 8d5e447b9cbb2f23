#include "crop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "crop/augment.hpp"

namespace crop {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
  float r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(h);
  const double f = h - i;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i % 6) {
    case 0: return {float(v), float(t), float(p)};
    case 1: return {float(q), float(v), float(p)};
    case 2: return {float(p), float(v), float(t)};
    case 3: return {float(p), float(q), float(v)};
    case 4: return {float(t), float(p), float(v)};
    default: return {float(v), float(p), float(q)};
  }
}

// Star-convex wobbly disk: r(theta) = R * (1 + sum a_k cos(k theta + phi_k)).
struct Blob {
  double cx, cy, radius;
  double amp[3];    // harmonics k = 2,3,4
  double phase[3];
  Rgb color;
  double light_dx, light_dy;  // shading direction, unit

  double boundary(double theta) const {
    double r = 1.0;
    for (int k = 0; k < 3; ++k) r += amp[k] * std::cos((k + 2) * theta + phase[k]);
    return radius * r;
  }
  double max_radius() const {
    return radius * (1.0 + std::abs(amp[0]) + std::abs(amp[1]) + std::abs(amp[2]));
  }
  bool contains(double px, double py) const {
    const double dx = px - cx, dy = py - cy;
    const double d = std::hypot(dx, dy);
    if (d == 0) return true;
    return d <= boundary(std::atan2(dy, dx));
  }
};

Blob make_blob(std::mt19937_64& rng, double cx, double cy, double radius, double wobble) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Blob b;
  b.cx = cx;
  b.cy = cy;
  b.radius = radius;
  for (int k = 0; k < 3; ++k) {
    b.amp[k] = wobble * (0.3 + 0.7 * unit(rng)) / (k + 2);
    b.phase[k] = 2 * kPi * unit(rng);
  }
  b.color = hsv_to_rgb(unit(rng), 0.45 + 0.4 * unit(rng), 0.55 + 0.4 * unit(rng));
  const double a = 2 * kPi * unit(rng);
  b.light_dx = std::cos(a);
  b.light_dy = std::sin(a);
  return b;
}

// Paints the blob with radial shading and a one-pixel feathered edge. The
// ground-truth mask is computed separately from pixel centers and stays exact.
void paint_blob(RasterImage& img, const Blob& b) {
  const double rmax = b.max_radius() + 1.5;
  const int x_lo = std::max(0, static_cast<int>(std::floor(b.cx - rmax)));
  const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(b.cx + rmax)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(b.cy - rmax)));
  const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(b.cy + rmax)));
  for (int y = y_lo; y <= y_hi; ++y)
    for (int x = x_lo; x <= x_hi; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double dx = px - b.cx, dy = py - b.cy;
      const double d = std::hypot(dx, dy);
      const double rb = d == 0 ? b.boundary(0) : b.boundary(std::atan2(dy, dx));
      const double alpha = std::clamp(rb - d + 0.5, 0.0, 1.0);
      if (alpha <= 0) continue;
      const double rel = d / rb;
      double shade = 1.0 - 0.35 * rel * rel;
      if (d > 0) shade += 0.18 * (dx * b.light_dx + dy * b.light_dy) / d * (1.0 - rel);
      const float a = static_cast<float>(alpha);
      auto mix = [&](int c, float base) {
        float v = std::clamp(base * static_cast<float>(shade), 0.f, 1.f);
        img.at(c, y, x) = (1 - a) * img.at(c, y, x) + a * v;
      };
      mix(0, b.color.r);
      mix(1, b.color.g);
      mix(2, b.color.b);
    }
}

}  // namespace

void SceneSpec::validate() const {
  if (canvas_side < 8) throw std::invalid_argument("scene: canvas too small");
  if (radius_min <= 0 || radius_max < radius_min)
    throw std::invalid_argument("scene: bad radius range");
  if (distractor_count < 0) throw std::invalid_argument("scene: negative distractor count");
  if (clutter < 0 || clutter > 1) throw std::invalid_argument("scene: clutter must be in [0,1]");
}

SyntheticScene generate_synthetic_scene(const SceneSpec& spec, uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int S = spec.canvas_side;

  const double jitter_px = spec.center_jitter * S;
  if ((spec.radius_max * (1.0 + spec.wobble) + jitter_px) * 2.0 > S - 4)
    throw std::invalid_argument("scene: radius too large for canvas");

  SyntheticScene scene;
  scene.image = RasterImage(S, S);

  // Background: linear gradient between two muted colors plus low-frequency
  // waves and per-pixel noise controlled by clutter.
  const Rgb bg0 = hsv_to_rgb(unit(rng), 0.15 + 0.25 * unit(rng), 0.2 + 0.35 * unit(rng));
  const Rgb bg1 = hsv_to_rgb(unit(rng), 0.15 + 0.25 * unit(rng), 0.2 + 0.35 * unit(rng));
  const double ga = 2 * kPi * unit(rng);
  const double gx = std::cos(ga) / S, gy = std::sin(ga) / S;
  double wf[3], wp[3];
  for (int k = 0; k < 3; ++k) {
    wf[k] = (1.0 + 3.0 * unit(rng)) * 2 * kPi / S;
    wp[k] = 2 * kPi * unit(rng);
  }
  std::uniform_real_distribution<float> noise(-0.5f, 0.5f);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double t = std::clamp(0.5 + (x - S / 2.0) * gx + (y - S / 2.0) * gy, 0.0, 1.0);
      const double wave = spec.clutter * 0.12 *
                          (std::sin(wf[0] * x + wp[0]) + std::sin(wf[1] * y + wp[1]) +
                           std::sin(wf[2] * (x + y) + wp[2])) / 3.0;
      const float n = spec.clutter > 0 ? 0.10f * static_cast<float>(spec.clutter) * noise(rng) : 0.f;
      const float base[3] = {bg0.r + float(t) * (bg1.r - bg0.r), bg0.g + float(t) * (bg1.g - bg0.g),
                             bg0.b + float(t) * (bg1.b - bg0.b)};
      for (int c = 0; c < 3; ++c)
        scene.image.at(c, y, x) = std::clamp(base[c] + static_cast<float>(wave) + n, 0.f, 1.f);
    }

  // Central blob parameters are drawn before distractors so that the target is
  // identical across specs that differ only in clutter.
  std::uniform_real_distribution<double> rad(spec.radius_min, spec.radius_max);
  const double R = rad(rng);
  const double cx = S / 2.0 + (2 * unit(rng) - 1) * jitter_px;
  const double cy = S / 2.0 + (2 * unit(rng) - 1) * jitter_px;
  Blob target = make_blob(rng, cx, cy, R, spec.wobble);

  // Distractors keep clear of the target so its ground truth stays exact.
  for (int i = 0; i < spec.distractor_count; ++i) {
    const double rd = R * (0.35 + 0.55 * unit(rng));
    bool placed = false;
    for (int tries = 0; tries < 100 && !placed; ++tries) {
      const double dx = unit(rng) * S, dy = unit(rng) * S;
      const double min_gap = target.max_radius() + rd * (1 + spec.wobble) + 3.0;
      if (std::hypot(dx - cx, dy - cy) < min_gap) continue;
      Blob d = make_blob(rng, dx, dy, rd, spec.wobble);
      paint_blob(scene.image, d);
      placed = true;
    }
  }

  // Clutter speckles, painted before the target so they never cover it.
  const int speckles = static_cast<int>(spec.clutter * 30);
  for (int i = 0; i < speckles; ++i) {
    const double sx = unit(rng) * S, sy = unit(rng) * S, sr = 1.0 + 2.5 * unit(rng);
    Blob sp = make_blob(rng, sx, sy, sr, 0.0);
    if (std::hypot(sx - cx, sy - cy) < target.max_radius() + sr + 2.0) continue;
    paint_blob(scene.image, sp);
  }

  paint_blob(scene.image, target);

  scene.mask = BinaryMask(S, S);
  double sum_x = 0, sum_y = 0;
  size_t count = 0;
  const double rmax = target.max_radius() + 1.0;
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      if (std::abs(px - cx) > rmax || std::abs(py - cy) > rmax) continue;
      if (target.contains(px, py)) {
        scene.mask.at(y, x) = 1;
        sum_x += px;
        sum_y += py;
        ++count;
      }
    }
  scene.true_area = static_cast<double>(count);
  scene.true_cx = count ? sum_x / count : cx;
  scene.true_cy = count ? sum_y / count : cy;

  if (spec.blur_sigma > 0) scene.image = gaussian_blur(scene.image, spec.blur_sigma);
  if (spec.brightness != 1.0)
    for (float& v : scene.image.data)
      v = std::clamp(v * static_cast<float>(spec.brightness), 0.f, 1.f);
  return scene;
}

std::vector<AnnotatedSample> generate_scene_dataset(const SceneSpec& spec, int count,
                                                    uint64_t seed) {
  std::vector<AnnotatedSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SyntheticScene s = generate_synthetic_scene(spec, seed * 1000003ull + i);
    AnnotatedSample a;
    a.image = std::move(s.image);
    a.mask = std::move(s.mask);
    a.source_id = "scene_" + std::to_string(i);
    out.push_back(std::move(a));
  }
  return out;
}

SceneSpec scene_preset_basic(int side) {
  SceneSpec s;
  s.canvas_side = side;
  s.radius_min = 0.12 * side;
  s.radius_max = 0.30 * side;
  s.distractor_count = 2;
  s.clutter = 0.3;
  return s;
}

SceneSpec scene_preset_hard(int side) {
  SceneSpec s;
  s.canvas_side = side;
  s.radius_min = 0.10 * side;
  s.radius_max = 0.26 * side;
  s.wobble = 0.10;
  s.distractor_count = 4;
  s.clutter = 0.7;
  return s;
}

SceneSpec scene_preset_bright(int side) {
  SceneSpec s = scene_preset_basic(side);
  s.clutter = 0.15;
  s.brightness = 1.1;
  return s;
}

SceneSpec scene_preset_blurred(int side) {
  SceneSpec s = scene_preset_basic(side);
  s.clutter = 0.45;
  s.blur_sigma = 2.2;
  s.brightness = 0.7;
  return s;
}

}  // namespace crop
