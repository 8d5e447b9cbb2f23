#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crop/layers.hpp"

namespace crop {

/// Architecture recipe. depth = number of resolution halvings; base_width =
/// stem output channels. The channel count doubles at every encoder level and
/// mirrors back up through the decoder.
struct NetworkConfig {
  int depth = 7;
  int base_width = 16;
  int input_side = 512;
  bool use_batch_norm = true;
  bool batch_norm_affine = false;

  void validate() const;  // throws when input_side is not divisible by 2^depth
  bool operator==(const NetworkConfig&) const = default;
};

enum class NetMode { training, evaluation };

/// One convolution with optional batch norm and ReLU.
struct ConvBlock {
  bool transposed = false;
  Conv2d conv;
  ConvTranspose2d tconv;
  BatchNorm2d bn;  // channels == 0 -> disabled
  bool relu = true;

  struct Cache {
    ConvCache conv;
    BnCache bn;
    std::vector<uint8_t> relu_mask;
  };

  Tensor forward_eval(const Tensor& x) const;
  Tensor forward_train(const Tensor& x, Cache& cache);
  // Accumulates parameter gradients into the vectors registered for this block.
  Tensor backward(const Tensor& gy, const Cache& cache,
                  const std::function<std::vector<float>&(int)>& grad_of) const;

  int out_channels() const { return transposed ? tconv.out_ch : conv.out_ch; }
  // Trainable vectors in enumeration order: w, b [, gamma, beta when affine].
  int param_vectors() const { return (bn.channels > 0 && bn.affine) ? 4 : 2; }
};

struct ShapeTrace {
  struct Entry {
    std::string name;
    int c, h, w;
  };
  std::vector<Entry> entries;
};

/// Parameter gradients, one vector per trainable parameter vector of the
/// network, in the network's enumeration order.
struct GradStore {
  std::vector<std::vector<float>> g;
  void zero();
};

class Network;

/// Per-training-step activation caches; owned by the training loop so that an
/// evaluation-mode network stays immutable and shareable.
struct Workspace {
  ConvBlock::Cache stem1, stem2;
  std::vector<std::array<ConvBlock::Cache, 3>> enc;  // down, c1, c2
  std::vector<std::array<ConvBlock::Cache, 3>> dec;  // up, c1, c2
  ConvBlock::Cache head1, head2, head3;
};

class Network {
 public:
  Network() = default;
  Network(const NetworkConfig& config, uint64_t init_seed);

  const NetworkConfig& config() const { return cfg_; }
  NetMode mode = NetMode::evaluation;

  // Evaluation-mode forward: running batch-norm statistics, no caching, const.
  // Input must be [N, 3, S, S] with S = config().input_side.
  Tensor forward(const Tensor& x, ShapeTrace* trace = nullptr) const;

  // Training-mode forward: batch statistics, caches into ws for backward.
  Tensor forward_train(const Tensor& x, Workspace& ws);

  // Backpropagates d(loss)/d(logits), accumulating into grads.
  void backward(const Tensor& grad_logits, const Workspace& ws, GradStore& grads);

  size_t parameter_count() const;
  GradStore make_grad_store() const;

  // Stable enumeration of trainable parameter vectors (w, b, affine pairs).
  void for_each_param(const std::function<void(std::vector<float>&)>& fn);
  void for_each_param(const std::function<void(const std::vector<float>&)>& fn) const;
  // Parameters plus batch-norm buffers, for serialization.
  void for_each_state(const std::function<void(std::vector<float>&)>& fn);
  void for_each_state(const std::function<void(const std::vector<float>&)>& fn) const;

 private:
  void build();
  void init_params(uint64_t seed);
  void check_input(const Tensor& x) const;

  NetworkConfig cfg_;
  ConvBlock stem1_, stem2_;
  struct Level {
    ConvBlock down, c1, c2;
  };
  struct DecLevel {
    ConvBlock up, c1, c2;
  };
  std::vector<Level> enc_;
  std::vector<DecLevel> dec_;
  ConvBlock head1_, head2_, head3_;

  template <typename Self, typename Fn>
  static void visit_blocks(Self& self, Fn&& fn);
};

// The published recipes.
Network build_network(const NetworkConfig& config, uint64_t init_seed);
Network build_crop(uint64_t init_seed = 0);     // depth 7, base 16, side 512
Network build_shallow(uint64_t init_seed = 0);  // depth 4, base 64, side 512

/// Sidecar metadata saved with every network dictionary.
struct CheckpointMeta {
  std::string name;
  int epoch = 0;
  double validation_iou = 0.0;
  std::string creation_date;  // ISO 8601, filled on save when empty
};

// Writes <dir>/<name> (binary parameter container) and <dir>/<name>.json.
// Names follow the net_dic_<tag>_<epoch> convention, see checkpoint_name().
void save_checkpoint(const Network& net, const std::string& dir, const CheckpointMeta& meta);
Network load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

std::string checkpoint_name(const std::string& tag, int epoch);

}  // namespace crop
