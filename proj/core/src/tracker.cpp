#include "crop/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>

#include "crop/csvio.hpp"
#include "crop/plot.hpp"

namespace crop {

namespace fs = std::filesystem;

const std::array<double, kMeasureScales>& measure_scales() {
  static const std::array<double, kMeasureScales> scales = [] {
    std::array<double, kMeasureScales> s{};
    for (int i = 0; i < kMeasureScales; ++i) s[i] = 1.0 - 0.05 * i;
    return s;
  }();
  return scales;
}

Measurement multiscale_measure(const Segmenter& segmenter, const RasterImage& photo,
                               double center_x, double center_y, double base_window,
                               double threshold) {
  if (base_window < 2) throw std::invalid_argument("multiscale_measure: base_window must be >= 2");
  if (center_x < 0 || center_x >= photo.width || center_y < 0 || center_y >= photo.height)
    throw std::invalid_argument("multiscale_measure: center outside photo");
  const int S = segmenter.input_side();

  Measurement m;
  m.scale_factors = measure_scales();
  m.all_masks.resize(kMeasureScales);
  std::vector<CropGeometry> geometries(kMeasureScales);
  std::vector<RasterImage> crops(kMeasureScales);
  for (int i = 0; i < kMeasureScales; ++i) {
    CropWindow window{center_x, center_y, base_window, m.scale_factors[i]};
    CropResult crop = crop_resize(photo, window, S);
    ProbMap prob = segmenter.predict(crop.image);
    BinaryMask mask = binarize(prob, threshold);
    m.raw_counts[i] = static_cast<long>(mask.count());
    const double ratio = static_cast<double>(crop.geometry.window_side) / S;
    m.rescaled_counts[i] = m.raw_counts[i] * ratio * ratio;
    m.all_masks[i] = std::move(mask);
    geometries[i] = crop.geometry;
    crops[i] = std::move(crop.image);
  }

  // Median of the 11 rescaled values; order by (value, index) so duplicate
  // values resolve toward the lower scale index.
  std::array<int, kMeasureScales> idx{};
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&m](int a, int b) {
    if (m.rescaled_counts[a] != m.rescaled_counts[b])
      return m.rescaled_counts[a] < m.rescaled_counts[b];
    return a < b;
  });
  m.median_index = idx[kMeasureScales / 2];
  m.chosen_mask = m.all_masks[m.median_index];
  m.crop_geometry = geometries[m.median_index];
  m.median_crop = std::move(crops[m.median_index]);
  if (m.chosen_mask.count() == 0) {
    m.low_confidence = true;
    m.chosen_area = 0;
  } else {
    m.chosen_area = m.rescaled_counts[m.median_index];
  }
  return m;
}

std::pair<double, double> center_of_mass(const BinaryMask& mask, const CropGeometry& geometry) {
  double sx = 0, sy = 0;
  size_t count = 0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x)) {
        sx += x + 0.5;
        sy += y + 0.5;
        ++count;
      }
  if (count == 0) throw std::domain_error("center_of_mass: empty mask");
  return geometry.to_source(sx / count, sy / count);
}

double derive_base_window(const Segmenter& segmenter, const RasterImage& photo, double cx,
                          double cy) {
  const double probe_side =
      std::min({static_cast<double>(photo.width), static_cast<double>(photo.height),
                2.0 * std::min({cx, cy, photo.width - cx, photo.height - cy})});
  CropWindow window{cx, cy, probe_side, 1.0};
  CropResult crop = crop_resize(photo, window, segmenter.input_side());
  BinaryMask mask = binarize(segmenter.predict(crop.image), 0.5);
  int x_lo = mask.width, x_hi = -1, y_lo = mask.height, y_hi = -1;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x)) {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
  if (x_hi < 0) return probe_side;
  const int bound_side = std::max(x_hi - x_lo + 1, y_hi - y_lo + 1);
  const double src_side = bound_side * static_cast<double>(crop.geometry.window_side) /
                          crop.geometry.out_side;
  return std::max(2.0, 1.2 * src_side);
}

namespace {

std::string photo_file_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "photo_%06d.png", id);
  return buf;
}

// Shared sequential loop; frames arrive through a pull callback so the
// file-based variant can hold one decoded photo at a time.
TrackSeries track_impl(const Segmenter& segmenter,
                       const std::function<std::optional<PhotoRef>(RasterImage&)>& next,
                       size_t frame_count_hint, double initial_cx, double initial_cy,
                       const TrackConfig& config) {
  TrackSeries series;
  series.threshold = config.threshold;
  series.records.reserve(frame_count_hint);

  const bool emit = !config.out_dir.empty();
  if (emit) {
    fs::create_directories(fs::path(config.out_dir));
    if (config.save_overlays) fs::create_directories(fs::path(config.out_dir) / "overlays");
    if (config.save_thumbnails) fs::create_directories(fs::path(config.out_dir) / "thumbs");
  }

  double cx = initial_cx, cy = initial_cy;
  double base_window = config.base_window;
  bool first = true;
  RasterImage storage;
  while (true) {
    std::optional<PhotoRef> ref = next(storage);
    if (!ref) break;
    TrackRecord rec;
    rec.photo_id = ref->id;
    rec.timestamp = ref->timestamp;
    if (!ref->image) {  // unreadable frame: carry the center forward
      rec.cx = cx;
      rec.cy = cy;
      rec.area = 0;
      rec.low_confidence = true;
      series.records.push_back(rec);
      continue;
    }
    const RasterImage& photo = *ref->image;
    if (first) {
      if (initial_cx < 0 || initial_cx >= photo.width || initial_cy < 0 ||
          initial_cy >= photo.height)
        throw std::invalid_argument("track: initial center outside the first photo");
      if (base_window <= 0) base_window = derive_base_window(segmenter, photo, cx, cy);
      series.base_window = base_window;
      first = false;
    }

    Measurement m = multiscale_measure(segmenter, photo, cx, cy, base_window, config.threshold);
    rec.rescaled_counts = m.rescaled_counts;
    if (m.low_confidence) {
      rec.low_confidence = true;
      rec.area = 0;
      rec.cx = cx;  // previous center carried forward
      rec.cy = cy;
    } else {
      auto [mx, my] = center_of_mass(m.chosen_mask, m.crop_geometry);
      mx = std::clamp(mx, 0.0, photo.width - 1.0);
      my = std::clamp(my, 0.0, photo.height - 1.0);
      rec.cx = mx;
      rec.cy = my;
      rec.area = m.chosen_area;
      cx = mx;
      cy = my;
    }
    series.records.push_back(rec);

    if (emit && config.save_overlays)
      save_image(render_overlay(m.median_crop, m.chosen_mask),
                 (fs::path(config.out_dir) / "overlays" / photo_file_name(rec.photo_id)).string());
    if (emit && config.save_thumbnails)
      save_image(thumbnail_grid(m.all_masks),
                 (fs::path(config.out_dir) / "thumbs" / photo_file_name(rec.photo_id)).string());
  }
  if (series.records.empty()) throw std::invalid_argument("track: no photos");

  if (emit) write_track_csv(series, (fs::path(config.out_dir) / "raw.csv").string());
  return series;
}

}  // namespace

TrackSeries track(const Segmenter& segmenter, const std::vector<PhotoRef>& photos,
                  double initial_cx, double initial_cy, const TrackConfig& config) {
  for (size_t i = 1; i < photos.size(); ++i)
    if (photos[i].id <= photos[i - 1].id)
      throw std::invalid_argument("track: photo ids must increase strictly");
  size_t pos = 0;
  TrackSeries series = track_impl(
      segmenter,
      [&photos, &pos](RasterImage&) -> std::optional<PhotoRef> {
        if (pos >= photos.size()) return std::nullopt;
        return photos[pos++];
      },
      photos.size(), initial_cx, initial_cy, config);
  return series;
}

TrackSeries track_files(const Segmenter& segmenter, const std::vector<ManifestEntry>& manifest,
                        double initial_cx, double initial_cy, const TrackConfig& config) {
  for (size_t i = 1; i < manifest.size(); ++i)
    if (manifest[i].id <= manifest[i - 1].id)
      throw std::invalid_argument("track: photo ids must increase strictly");
  size_t pos = 0;
  TrackSeries series = track_impl(
      segmenter,
      [&manifest, &pos](RasterImage& storage) -> std::optional<PhotoRef> {
        if (pos >= manifest.size()) return std::nullopt;
        const ManifestEntry& e = manifest[pos++];
        PhotoRef ref{e.id, nullptr, e.timestamp};
        try {
          storage = load_image(e.path);
          ref.image = &storage;
        } catch (const std::exception& ex) {
          std::cerr << "warning: skipping unreadable photo " << e.path << ": " << ex.what()
                    << "\n";
        }
        return ref;
      },
      manifest.size(), initial_cx, initial_cy, config);
  series.photo_manifest.reserve(manifest.size());
  for (const auto& e : manifest) series.photo_manifest.push_back(e.path);
  return series;
}

std::vector<ManifestEntry> read_photo_manifest(const std::string& path) {
  std::vector<ManifestEntry> entries;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (!e.is_regular_file()) continue;
      const std::string ext = e.path().extension().string();
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG" || ext == ".JPG")
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    int id = 0;
    for (const auto& f : files) entries.push_back({id++, f.string(), ""});
  } else {
    CsvTable t = read_csv(path);
    const int id_col = t.column("photo_id"), path_col = t.column("path");
    const int ts_col = t.column("timestamp");
    if (id_col < 0 || path_col < 0)
      throw std::runtime_error("manifest csv needs photo_id and path columns: " + path);
    const fs::path base = fs::path(path).parent_path();
    for (const auto& row : t.rows) {
      ManifestEntry e;
      e.id = static_cast<int>(parse_double(row.at(id_col)));
      fs::path p = row.at(path_col);
      e.path = p.is_absolute() ? p.string() : (base / p).string();
      if (ts_col >= 0 && static_cast<size_t>(ts_col) < row.size()) e.timestamp = row[ts_col];
      entries.push_back(std::move(e));
    }
  }
  for (size_t i = 1; i < entries.size(); ++i)
    if (entries[i].id <= entries[i - 1].id)
      throw std::runtime_error("manifest: photo ids must increase strictly");
  if (entries.empty()) throw std::runtime_error("manifest: no photos found in " + path);
  return entries;
}

TrackSeries clamp_outliers(const TrackSeries& series, double cap) {
  if (cap <= 0) throw std::invalid_argument("clamp_outliers: cap must be > 0");
  TrackSeries out = series;
  for (auto& rec : out.records)
    if (rec.area > cap) {
      rec.area = cap;
      rec.clamped = true;
    }
  return out;
}

void report(const TrackSeries& series, const std::string& out_dir, const ReportOptions& options) {
  if (series.records.empty()) throw std::invalid_argument("report: empty series");
  const fs::path plots = fs::path(out_dir) / "plots";
  const fs::path summary = fs::path(out_dir) / "summary";
  fs::create_directories(plots);
  fs::create_directories(summary);

  std::vector<double> ids, areas, cxs, cys;
  for (const auto& r : series.records) {
    ids.push_back(r.photo_id);
    areas.push_back(r.area);
    cxs.push_back(r.cx);
    cys.push_back(r.cy);
  }

  PlotOptions timeline;
  timeline.title = "target size over time";
  timeline.xlabel = "photo id";
  timeline.ylabel = "pixels";
  timeline.highlight_x = options.highlight_spans;
  timeline.dark_x = options.dark_spans;
  timeline.draw_points = true;
  plot_lines({Series{"area", ids, areas}}, timeline, (plots / "area_timeline.png").string());

  std::vector<std::vector<double>> groups;
  for (const auto& r : series.records)
    groups.emplace_back(r.rescaled_counts.begin(), r.rescaled_counts.end());
  PlotOptions boxes;
  boxes.title = "eleven measurements per photo";
  boxes.xlabel = "photo id";
  boxes.ylabel = "pixels";
  boxes.dark_x = options.dark_spans;
  plot_boxes(ids, groups, boxes, (plots / "measurements_box.png").string());

  PlotOptions pos;
  pos.title = "target position (darker = later)";
  pos.xlabel = "x (pixels from top-left)";
  pos.ylabel = "y (pixels from top-left)";
  plot_scatter_time(cxs, cys, /*trace_line=*/true, pos, (plots / "positions.png").string());

  CsvTable timeline_csv;
  timeline_csv.header = {"photo_id", "area"};
  for (const auto& r : series.records)
    timeline_csv.rows.push_back({std::to_string(r.photo_id), format_double(r.area)});
  write_csv(timeline_csv, (summary / "timeline.csv").string());

  CsvTable pos_csv;
  pos_csv.header = {"photo_id", "cx", "cy"};
  for (const auto& r : series.records)
    pos_csv.rows.push_back(
        {std::to_string(r.photo_id), format_double(r.cx), format_double(r.cy)});
  write_csv(pos_csv, (summary / "positions.csv").string());

  CsvTable box_csv;
  box_csv.header = {"photo_id", "q1", "median", "q3", "whisker_lo", "whisker_hi", "outliers"};
  for (size_t i = 0; i < series.records.size(); ++i) {
    BoxStats b = box_stats(groups[i]);
    box_csv.rows.push_back({std::to_string(series.records[i].photo_id), format_double(b.q1),
                            format_double(b.median), format_double(b.q3),
                            format_double(b.whisker_lo), format_double(b.whisker_hi),
                            std::to_string(b.outliers.size())});
  }
  write_csv(box_csv, (summary / "boxstats.csv").string());
}

void write_track_csv(const TrackSeries& series, const std::string& path) {
  CsvTable t;
  t.header = {"photo_id", "cx", "cy", "area", "clamped", "low_confidence"};
  for (int i = 0; i < kMeasureScales; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "count_s%03d", static_cast<int>(std::lround(
                                       measure_scales()[i] * 100)));
    t.header.push_back(buf);
  }
  for (const auto& r : series.records) {
    std::vector<std::string> row = {std::to_string(r.photo_id), format_double(r.cx),
                                    format_double(r.cy),        format_double(r.area),
                                    r.clamped ? "1" : "0",      r.low_confidence ? "1" : "0"};
    for (double c : r.rescaled_counts) row.push_back(format_double(c));
    t.rows.push_back(std::move(row));
  }
  write_csv(t, path);
}

TrackSeries read_track_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  if (t.header.size() != 6 + kMeasureScales)
    throw std::runtime_error("track csv: unexpected column count in " + path);
  TrackSeries series;
  for (const auto& row : t.rows) {
    TrackRecord r;
    r.photo_id = static_cast<int>(parse_double(row.at(0)));
    r.cx = parse_double(row.at(1));
    r.cy = parse_double(row.at(2));
    r.area = parse_double(row.at(3));
    r.clamped = row.at(4) == "1";
    r.low_confidence = row.at(5) == "1";
    for (int i = 0; i < kMeasureScales; ++i) r.rescaled_counts[i] = parse_double(row.at(6 + i));
    series.records.push_back(r);
  }
  return series;
}

RasterImage thumbnail_grid(const std::vector<BinaryMask>& masks, int columns) {
  if (masks.empty()) throw std::invalid_argument("thumbnail_grid: no masks");
  const int S = masks[0].width;
  const int rows = (static_cast<int>(masks.size()) + columns - 1) / columns;
  const int gap = 2;
  RasterImage grid(columns * S + (columns + 1) * gap, rows * S + (rows + 1) * gap, 0.25f);
  for (size_t i = 0; i < masks.size(); ++i) {
    const int rr = static_cast<int>(i) / columns, cc = static_cast<int>(i) % columns;
    const int ox = gap + cc * (S + gap), oy = gap + rr * (S + gap);
    for (int y = 0; y < masks[i].height; ++y)
      for (int x = 0; x < masks[i].width; ++x) {
        const float v = masks[i].at(y, x) ? 1.f : 0.f;
        for (int c = 0; c < 3; ++c) grid.at(c, oy + y, ox + x) = v;
      }
  }
  return grid;
}

}  // namespace crop
