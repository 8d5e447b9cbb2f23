#pragma once

#include <memory>

#include "crop/image.hpp"
#include "crop/network.hpp"

namespace crop {

/// Element of the dihedral group of the square: a horizontal reflection
/// applied first (when `reflected`), then `rotation` quarter turns CCW.
struct D4Element {
  int rotation = 0;  // 0..3
  bool reflected = false;

  bool operator==(const D4Element&) const = default;
};

// All 8 group elements, identity first.
const std::array<D4Element, 8>& d4_elements();
D4Element d4_compose(const D4Element& a, const D4Element& b);  // apply b, then a
D4Element d4_inverse(const D4Element& g);

// Exact pixel permutations; inputs must be square.
RasterImage apply_d4(const RasterImage& img, const D4Element& g);
ProbMap apply_d4(const ProbMap& map, const D4Element& g);
BinaryMask apply_d4(const BinaryMask& mask, const D4Element& g);

enum class AveragingSpace { probability, logit };

// Dihedral-averaged inference: feeds the 8 transformed copies as one batch,
// inverse-transforms the 8 predictions and averages them (in probability
// space by default). With use_d4 = false this is a single sigmoid forward.
ProbMap predict_averaged(const Network& net, const RasterImage& image, bool use_d4 = true,
                         AveragingSpace space = AveragingSpace::probability);

// mask = 1 where p >= threshold.
BinaryMask binarize(const ProbMap& p, double threshold = 0.5);

// Alpha-blends red over foreground and yellow over background.
RasterImage render_overlay(const RasterImage& image, const BinaryMask& mask, double alpha = 0.4);

/// Image -> probability map seam; lets the tracking and evaluation code run
/// against oracle stubs in tests.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual int input_side() const = 0;
  virtual ProbMap predict(const RasterImage& image) const = 0;
};

class NetworkSegmenter final : public Segmenter {
 public:
  NetworkSegmenter(const Network& net, bool use_d4 = true,
                   AveragingSpace space = AveragingSpace::probability)
      : net_(net), use_d4_(use_d4), space_(space) {}
  int input_side() const override { return net_.config().input_side; }
  ProbMap predict(const RasterImage& image) const override {
    ++forward_batches_;
    return predict_averaged(net_, image, use_d4_, space_);
  }
  long forward_batches() const { return forward_batches_; }

 private:
  const Network& net_;
  bool use_d4_;
  AveragingSpace space_;
  mutable long forward_batches_ = 0;
};

// RasterImage <-> Tensor bridges shared by inference and training.
Tensor to_tensor(const RasterImage& image);
void copy_image_into(const RasterImage& image, Tensor& batch, int item);
RasterImage image_from_tensor(const Tensor& batch, int item);

}  // namespace crop
