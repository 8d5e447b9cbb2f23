#include "crop/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/core.hpp>

#include <algorithm>
#include <numeric>

namespace crop {

size_t BinaryMask::count() const {
  return std::accumulate(data.begin(), data.end(), size_t{0});
}

RasterImage load_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot read image: " + path);
  RasterImage img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(0, y, x) = row[x][2] / 255.f;
      img.at(1, y, x) = row[x][1] / 255.f;
      img.at(2, y, x) = row[x][0] / 255.f;
    }
  }
  return img;
}

void save_image(const RasterImage& img, const std::string& path) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      auto to8 = [](float v) {
        return static_cast<uint8_t>(std::clamp(std::lround(v * 255.f), 0L, 255L));
      };
      row[x] = {to8(img.at(2, y, x)), to8(img.at(1, y, x)), to8(img.at(0, y, x))};
    }
  }
  if (!cv::imwrite(path, bgr)) throw std::runtime_error("cannot write image: " + path);
}

BinaryMask load_mask(const std::string& path) {
  cv::Mat g = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (g.empty()) throw std::runtime_error("cannot read mask: " + path);
  BinaryMask m(g.cols, g.rows);
  for (int y = 0; y < g.rows; ++y)
    for (int x = 0; x < g.cols; ++x) m.at(y, x) = g.at<uint8_t>(y, x) >= 128 ? 1 : 0;
  return m;
}

void save_mask(const BinaryMask& mask, const std::string& path) {
  cv::Mat g(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) g.at<uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
  if (!cv::imwrite(path, g)) throw std::runtime_error("cannot write mask: " + path);
}

ProbMap load_probmap(const std::string& path) {
  cv::Mat g = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (g.empty()) throw std::runtime_error("cannot read probability map: " + path);
  if (g.type() != CV_16UC1) throw std::runtime_error("probability map must be 16-bit grayscale: " + path);
  ProbMap m(g.cols, g.rows);
  for (int y = 0; y < g.rows; ++y)
    for (int x = 0; x < g.cols; ++x) m.at(y, x) = g.at<uint16_t>(y, x) / 65535.f;
  return m;
}

void save_probmap(const ProbMap& map, const std::string& path) {
  cv::Mat g(map.height, map.width, CV_16UC1);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      float v = std::clamp(map.at(y, x), 0.f, 1.f);
      g.at<uint16_t>(y, x) = static_cast<uint16_t>(std::lround(v * 65535.f));
    }
  if (!cv::imwrite(path, g)) throw std::runtime_error("cannot write probability map: " + path);
}

}  // namespace crop
