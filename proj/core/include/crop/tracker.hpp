#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "crop/geometry.hpp"
#include "crop/image.hpp"
#include "crop/predictor.hpp"

namespace crop {

inline constexpr int kMeasureScales = 11;

// The fixed measurement ladder: x1.00 down to x0.50 in steps of 0.05.
const std::array<double, kMeasureScales>& measure_scales();

/// One photo's eleven scale-indexed size estimates and the chosen median.
struct Measurement {
  int photo_id = 0;
  std::array<double, kMeasureScales> scale_factors{};
  std::array<long, kMeasureScales> raw_counts{};       // pixels at network scale
  std::array<double, kMeasureScales> rescaled_counts{}; // original-photo pixels
  int median_index = 0;
  double chosen_area = 0;   // == rescaled_counts[median_index], 0 when empty
  bool low_confidence = false;
  BinaryMask chosen_mask;   // network scale
  CropGeometry crop_geometry;  // geometry of the median measurement
  std::vector<BinaryMask> all_masks;  // the 11 masks, for thumbnails
  RasterImage median_crop;  // the cropped input at the median scale
};

// Runs the segmenter on the 11 nested windows around `center`, rescales each
// foreground count back to original-photo pixels by (effective_side / S)^2 and
// picks the measurement whose rescaled count is the median (ties resolved
// toward the lowest scale index). Throws when every window misses the photo.
Measurement multiscale_measure(const Segmenter& segmenter, const RasterImage& photo,
                               double center_x, double center_y, double base_window,
                               double threshold = 0.5);

// Unweighted mean of foreground pixel centers, mapped through the inverse crop
// geometry into original-photo coordinates (origin top-left). Throws on an
// empty mask.
std::pair<double, double> center_of_mass(const BinaryMask& mask, const CropGeometry& geometry);

struct TrackRecord {
  int photo_id = 0;
  std::string timestamp;  // optional, not part of the raw CSV schema
  double cx = 0, cy = 0;
  double area = 0;
  std::array<double, kMeasureScales> rescaled_counts{};
  bool clamped = false;
  bool low_confidence = false;

  bool operator==(const TrackRecord&) const = default;
};

struct TrackConfig {
  double base_window = 0;  // 0: derive as 1.2x the first frame's bounding square
  double threshold = 0.5;
  std::string out_dir;     // when set: raw CSV rows, overlays, thumbnail grids
  bool save_overlays = true;
  bool save_thumbnails = true;
};

struct TrackSeries {
  std::vector<TrackRecord> records;
  std::vector<std::string> photo_manifest;
  double base_window = 0;
  double threshold = 0.5;
};

struct PhotoRef {
  int id = 0;
  const RasterImage* image = nullptr;
  std::string timestamp;
};

struct ManifestEntry {
  int id = 0;
  std::string path;
  std::string timestamp;
};

// Sequential tracking: each photo is measured at the running center, then the
// center of mass of the chosen mask becomes the next center. Frames whose
// median mask is empty keep the previous center and are flagged.
TrackSeries track(const Segmenter& segmenter, const std::vector<PhotoRef>& photos,
                  double initial_cx, double initial_cy, const TrackConfig& config);

// File-based variant; unreadable photos yield a flagged record and the center
// is carried forward.
TrackSeries track_files(const Segmenter& segmenter, const std::vector<ManifestEntry>& manifest,
                        double initial_cx, double initial_cy, const TrackConfig& config);

// A directory of chronologically sortable photo files, or a CSV
// `photo_id,path[,timestamp]`. Ids must increase strictly.
std::vector<ManifestEntry> read_photo_manifest(const std::string& path);

// Records with area > cap are clamped to cap and flagged; the input series is
// left untouched (callers keep the raw CSV).
TrackSeries clamp_outliers(const TrackSeries& series, double cap);

// 1.2x the bounding square of the segmenter's response to a centered probe
// window; falls back to the probe side when nothing is detected.
double derive_base_window(const Segmenter& segmenter, const RasterImage& photo, double cx,
                          double cy);

struct ReportOptions {
  std::vector<std::pair<double, double>> highlight_spans;  // photo-id ranges
  std::vector<std::pair<double, double>> dark_spans;       // e.g. evening hours
};

// Emits the three plots (area timeline, per-photo box plot of the 11 counts,
// position scatter with chronological trace) and their numeric CSVs under
// out_dir/plots and out_dir/summary.
void report(const TrackSeries& series, const std::string& out_dir,
            const ReportOptions& options = {});

// Raw CSV schema:
// photo_id,cx,cy,area,clamped,low_confidence,count_s100,...,count_s050
void write_track_csv(const TrackSeries& series, const std::string& path);
TrackSeries read_track_csv(const std::string& path);

// 11-mask contact sheet mirroring the per-photo measurement tiles.
RasterImage thumbnail_grid(const std::vector<BinaryMask>& masks, int columns = 4);

}  // namespace crop
