#include "crop/network.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace crop {

void NetworkConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("network: depth must be >= 1");
  if (base_width < 1) throw std::invalid_argument("network: base_width must be >= 1");
  if (input_side < 2) throw std::invalid_argument("network: input_side must be >= 2");
  if (input_side % (1 << depth) != 0)
    throw std::invalid_argument("network: input_side must be divisible by 2^depth");
}

Tensor ConvBlock::forward_eval(const Tensor& x) const {
  Tensor y = transposed ? tconv.forward(x, nullptr) : conv.forward(x, nullptr);
  if (bn.channels > 0) y = bn.forward_eval(y);
  if (relu) relu_forward(y, nullptr);
  return y;
}

Tensor ConvBlock::forward_train(const Tensor& x, Cache& cache) {
  Tensor y = transposed ? tconv.forward(x, &cache.conv) : conv.forward(x, &cache.conv);
  if (bn.channels > 0) y = bn.forward_train(y, cache.bn);
  if (relu) relu_forward(y, &cache.relu_mask);
  return y;
}

Tensor ConvBlock::backward(const Tensor& gy, const Cache& cache,
                           const std::function<std::vector<float>&(int)>& grad_of) const {
  Tensor g = gy;
  if (relu) relu_backward(g, cache.relu_mask);
  if (bn.channels > 0) {
    std::vector<float> scratch_g, scratch_b;
    if (!bn.affine) {
      scratch_g.assign(bn.channels, 0.f);
      scratch_b.assign(bn.channels, 0.f);
    }
    std::vector<float>& gg = bn.affine ? grad_of(2) : scratch_g;
    std::vector<float>& gb = bn.affine ? grad_of(3) : scratch_b;
    g = bn.backward(g, cache.bn, gg, gb);
  }
  return transposed ? tconv.backward(g, cache.conv, grad_of(0), grad_of(1))
                    : conv.backward(g, cache.conv, grad_of(0), grad_of(1));
}

void GradStore::zero() {
  for (auto& v : g) std::fill(v.begin(), v.end(), 0.f);
}

template <typename Self, typename Fn>
void Network::visit_blocks(Self& self, Fn&& fn) {
  fn(self.stem1_);
  fn(self.stem2_);
  for (auto& level : self.enc_) {
    fn(level.down);
    fn(level.c1);
    fn(level.c2);
  }
  // decoder in forward execution order: deepest first
  for (auto it = self.dec_.rbegin(); it != self.dec_.rend(); ++it) {
    fn(it->up);
    fn(it->c1);
    fn(it->c2);
  }
  fn(self.head1_);
  fn(self.head2_);
  fn(self.head3_);
}

Network::Network(const NetworkConfig& config, uint64_t init_seed) : cfg_(config) {
  cfg_.validate();
  build();
  init_params(init_seed);
}

void Network::build() {
  const int b = cfg_.base_width;
  const bool use_bn = cfg_.use_batch_norm;
  const bool aff = cfg_.batch_norm_affine;

  auto conv3 = [&](ConvBlock& blk, int ic, int oc, bool with_bn_relu = true) {
    blk.transposed = false;
    blk.conv.init(ic, oc, 3, 1, 1);
    if (with_bn_relu && use_bn) blk.bn.init(oc, aff);
    blk.relu = with_bn_relu;
  };

  conv3(stem1_, 3, b);
  conv3(stem2_, b, b);

  enc_.resize(cfg_.depth);
  for (int i = 0; i < cfg_.depth; ++i) {
    const int ci = b << i, co = b << (i + 1);
    enc_[i].down.transposed = false;
    enc_[i].down.conv.init(ci, co, 2, 2, 0);
    if (use_bn) enc_[i].down.bn.init(co, aff);
    conv3(enc_[i].c1, co, co);
    conv3(enc_[i].c2, co, co);
  }

  dec_.resize(cfg_.depth);
  for (int i = 0; i < cfg_.depth; ++i) {
    const int co = b << i;  // channels at this level after the up conv
    dec_[i].up.transposed = true;
    dec_[i].up.tconv.init(co * 2, co);
    if (use_bn) dec_[i].up.bn.init(co, aff);
    conv3(dec_[i].c1, co * 2, co);
    conv3(dec_[i].c2, co, co);
  }

  conv3(head1_, 2 * b, b);
  conv3(head2_, b, b);
  conv3(head3_, b, 1, false);  // bare logit convolution
}

void Network::init_params(uint64_t seed) {
  std::mt19937_64 rng(seed);
  visit_blocks(*this, [&rng](ConvBlock& blk) {
    const int fan_in = blk.transposed ? blk.tconv.in_ch : blk.conv.in_ch * blk.conv.k * blk.conv.k;
    const float bound = std::sqrt(6.f / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    auto& w = blk.transposed ? blk.tconv.w : blk.conv.w;
    for (float& v : w) v = dist(rng);
    // biases start at zero; batch-norm buffers at identity
  });
}

void Network::check_input(const Tensor& x) const {
  if (x.n < 1) throw std::invalid_argument("forward: batch size must be >= 1");
  if (x.c != 3) throw std::invalid_argument("forward: expected 3 input channels");
  if (x.h != cfg_.input_side || x.w != cfg_.input_side)
    throw std::invalid_argument("forward: expected " + std::to_string(cfg_.input_side) + "x" +
                                std::to_string(cfg_.input_side) + " input, got " +
                                std::to_string(x.h) + "x" + std::to_string(x.w));
}

Tensor Network::forward(const Tensor& x, ShapeTrace* trace) const {
  check_input(x);
  auto rec = [&](const std::string& name, const Tensor& t) {
    if (trace) trace->entries.push_back({name, t.c, t.h, t.w});
  };
  std::vector<Tensor> e;
  e.reserve(cfg_.depth + 1);
  e.push_back(stem2_.forward_eval(stem1_.forward_eval(x)));
  rec("stem", e[0]);
  for (int i = 0; i < cfg_.depth; ++i) {
    Tensor t = enc_[i].down.forward_eval(e[i]);
    t = enc_[i].c1.forward_eval(t);
    t = enc_[i].c2.forward_eval(t);
    rec("enc" + std::to_string(i + 1), t);
    e.push_back(std::move(t));
  }
  Tensor d = std::move(e[cfg_.depth]);
  for (int i = cfg_.depth - 1; i >= 0; --i) {
    Tensor u = dec_[i].up.forward_eval(d);
    Tensor cat = concat_channels(e[i], u);
    d = dec_[i].c1.forward_eval(cat);
    d = dec_[i].c2.forward_eval(d);
    rec("dec" + std::to_string(i), d);
  }
  Tensor hcat = concat_channels(e[0], d);
  Tensor h = head1_.forward_eval(hcat);
  h = head2_.forward_eval(h);
  h = head3_.forward_eval(h);
  rec("logits", h);
  return h;
}

Tensor Network::forward_train(const Tensor& x, Workspace& ws) {
  check_input(x);
  ws.enc.resize(cfg_.depth);
  ws.dec.resize(cfg_.depth);
  std::vector<Tensor> e;
  e.reserve(cfg_.depth + 1);
  e.push_back(stem2_.forward_train(stem1_.forward_train(x, ws.stem1), ws.stem2));
  for (int i = 0; i < cfg_.depth; ++i) {
    Tensor t = enc_[i].down.forward_train(e[i], ws.enc[i][0]);
    t = enc_[i].c1.forward_train(t, ws.enc[i][1]);
    t = enc_[i].c2.forward_train(t, ws.enc[i][2]);
    e.push_back(std::move(t));
  }
  Tensor d = std::move(e[cfg_.depth]);
  for (int i = cfg_.depth - 1; i >= 0; --i) {
    Tensor u = dec_[i].up.forward_train(d, ws.dec[i][0]);
    Tensor cat = concat_channels(e[i], u);
    d = dec_[i].c1.forward_train(cat, ws.dec[i][1]);
    d = dec_[i].c2.forward_train(d, ws.dec[i][2]);
  }
  Tensor hcat = concat_channels(e[0], d);
  Tensor h = head1_.forward_train(hcat, ws.head1);
  h = head2_.forward_train(h, ws.head2);
  h = head3_.forward_train(h, ws.head3);
  return h;
}

void Network::backward(const Tensor& grad_logits, const Workspace& ws, GradStore& grads) {
  // Map every block to its base index in the parameter enumeration.
  std::unordered_map<const ConvBlock*, int> base;
  int idx = 0;
  visit_blocks(*this, [&](ConvBlock& blk) {
    base[&blk] = idx;
    idx += blk.param_vectors();
  });
  auto gf = [&](const ConvBlock& blk) {
    const int bi = base.at(&blk);
    return std::function<std::vector<float>&(int)>(
        [&grads, bi](int i) -> std::vector<float>& { return grads.g[bi + i]; });
  };
  auto add_into = [](Tensor& dst, Tensor&& src) {
    if (dst.size() == 0) {
      dst = std::move(src);
      return;
    }
    for (size_t i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
  };

  const int b = cfg_.base_width;
  Tensor g = head3_.backward(grad_logits, ws.head3, gf(head3_));
  g = head2_.backward(g, ws.head2, gf(head2_));
  g = head1_.backward(g, ws.head1, gf(head1_));
  std::vector<Tensor> ge(cfg_.depth + 1);
  Tensor gd;
  split_channels(g, b, ge[0], gd);

  for (int i = 0; i < cfg_.depth; ++i) {
    Tensor t = dec_[i].c2.backward(gd, ws.dec[i][2], gf(dec_[i].c2));
    t = dec_[i].c1.backward(t, ws.dec[i][1], gf(dec_[i].c1));
    Tensor g_skip, g_up;
    split_channels(t, b << i, g_skip, g_up);
    add_into(ge[i], std::move(g_skip));
    gd = dec_[i].up.backward(g_up, ws.dec[i][0], gf(dec_[i].up));
  }
  add_into(ge[cfg_.depth], std::move(gd));

  for (int i = cfg_.depth - 1; i >= 0; --i) {
    Tensor t = enc_[i].c2.backward(ge[i + 1], ws.enc[i][2], gf(enc_[i].c2));
    t = enc_[i].c1.backward(t, ws.enc[i][1], gf(enc_[i].c1));
    t = enc_[i].down.backward(t, ws.enc[i][0], gf(enc_[i].down));
    add_into(ge[i], std::move(t));
  }
  Tensor t = stem2_.backward(ge[0], ws.stem2, gf(stem2_));
  stem1_.backward(t, ws.stem1, gf(stem1_));  // gradient w.r.t. the image is dropped
}

size_t Network::parameter_count() const {
  size_t total = 0;
  for_each_param([&total](const std::vector<float>& p) { total += p.size(); });
  return total;
}

GradStore Network::make_grad_store() const {
  GradStore gs;
  for_each_param([&gs](const std::vector<float>& p) { gs.g.emplace_back(p.size(), 0.f); });
  return gs;
}

void Network::for_each_param(const std::function<void(std::vector<float>&)>& fn) {
  visit_blocks(*this, [&fn](ConvBlock& blk) {
    fn(blk.transposed ? blk.tconv.w : blk.conv.w);
    fn(blk.transposed ? blk.tconv.b : blk.conv.b);
    if (blk.bn.channels > 0 && blk.bn.affine) {
      fn(blk.bn.gamma);
      fn(blk.bn.beta);
    }
  });
}

void Network::for_each_param(const std::function<void(const std::vector<float>&)>& fn) const {
  const_cast<Network*>(this)->for_each_param(
      [&fn](std::vector<float>& p) { fn(p); });
}

void Network::for_each_state(const std::function<void(std::vector<float>&)>& fn) {
  visit_blocks(*this, [&fn](ConvBlock& blk) {
    fn(blk.transposed ? blk.tconv.w : blk.conv.w);
    fn(blk.transposed ? blk.tconv.b : blk.conv.b);
    if (blk.bn.channels > 0) {
      fn(blk.bn.gamma);
      fn(blk.bn.beta);
      fn(blk.bn.run_mean);
      fn(blk.bn.run_var);
    }
  });
}

void Network::for_each_state(const std::function<void(const std::vector<float>&)>& fn) const {
  const_cast<Network*>(this)->for_each_state(
      [&fn](std::vector<float>& p) { fn(p); });
}

Network build_network(const NetworkConfig& config, uint64_t init_seed) {
  return Network(config, init_seed);
}

Network build_crop(uint64_t init_seed) {
  return Network(NetworkConfig{.depth = 7, .base_width = 16, .input_side = 512}, init_seed);
}

Network build_shallow(uint64_t init_seed) {
  return Network(NetworkConfig{.depth = 4, .base_width = 64, .input_side = 512}, init_seed);
}

namespace {
constexpr char kMagic[8] = {'C', 'R', 'O', 'P', 'D', 'I', 'C', '1'};

std::string now_iso8601() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}
}  // namespace

std::string checkpoint_name(const std::string& tag, int epoch) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", epoch);
  return "net_dic_" + tag + "_" + buf;
}

void save_checkpoint(const Network& net, const std::string& dir, const CheckpointMeta& meta) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path bin = fs::path(dir) / meta.name;
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + bin.string());
  out.write(kMagic, sizeof(kMagic));
  const auto& c = net.config();
  int32_t ints[3] = {c.depth, c.base_width, c.input_side};
  out.write(reinterpret_cast<const char*>(ints), sizeof(ints));
  uint8_t flags[2] = {c.use_batch_norm ? uint8_t{1} : uint8_t{0},
                      c.batch_norm_affine ? uint8_t{1} : uint8_t{0}};
  out.write(reinterpret_cast<const char*>(flags), sizeof(flags));
  uint32_t count = 0;
  net.for_each_state([&count](const std::vector<float>&) { ++count; });
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  net.for_each_state([&out](const std::vector<float>& v) {
    const uint64_t len = v.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(reinterpret_cast<const char*>(v.data()), len * sizeof(float));
  });
  if (!out) throw std::runtime_error("short write: " + bin.string());

  nlohmann::json j = {
      {"name", meta.name},
      {"epoch", meta.epoch},
      {"validation_iou", meta.validation_iou},
      {"creation_date", meta.creation_date.empty() ? now_iso8601() : meta.creation_date},
      {"config",
       {{"depth", c.depth},
        {"base_width", c.base_width},
        {"input_side", c.input_side},
        {"use_batch_norm", c.use_batch_norm},
        {"batch_norm_affine", c.batch_norm_affine}}},
  };
  std::ofstream side(bin.string() + ".json");
  side << j.dump(2) << "\n";
}

Network load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a network dictionary: " + path);
  int32_t ints[3];
  in.read(reinterpret_cast<char*>(ints), sizeof(ints));
  uint8_t flags[2];
  in.read(reinterpret_cast<char*>(flags), sizeof(flags));
  NetworkConfig cfg{.depth = ints[0], .base_width = ints[1], .input_side = ints[2],
                    .use_batch_norm = flags[0] != 0, .batch_norm_affine = flags[1] != 0};
  Network net(cfg, 0);
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  uint32_t expected = 0;
  net.for_each_state([&expected](const std::vector<float>&) { ++expected; });
  if (count != expected) throw std::runtime_error("checkpoint layout mismatch: " + path);
  net.for_each_state([&in, &path](std::vector<float>& v) {
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (len != v.size()) throw std::runtime_error("checkpoint tensor size mismatch: " + path);
    in.read(reinterpret_cast<char*>(v.data()), len * sizeof(float));
  });
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);

  if (meta) {
    *meta = CheckpointMeta{};
    std::ifstream side(path + ".json");
    if (side) {
      nlohmann::json j = nlohmann::json::parse(side, nullptr, false);
      if (!j.is_discarded()) {
        meta->name = j.value("name", "");
        meta->epoch = j.value("epoch", 0);
        meta->validation_iou = j.value("validation_iou", 0.0);
        meta->creation_date = j.value("creation_date", "");
      }
    }
  }
  return net;
}

}  // namespace crop
