#pragma once

// 1D multi-label segmentation network.
//
//   input 2 x n ──► 5 encoder blocks ──► 5 decoder blocks ──► non-local ──► 1x1 head ──► sigmoid
//
// Encoder block k:  conv3 → BN → ReLU → conv3 → BN → ReLU  (skip_k) → maxpool/2
// Decoder block j:  upsample x2 → conv3 → concat(skip_{4-j}) → conv3 → BN → ReLU → conv3 → BN → ReLU
//
// Each output entry is an independent class probability, so a bin can carry
// several classes at once.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stitch/binary_io.hpp"
#include "stitch/error.hpp"
#include "stitch/generator.hpp"
#include "stitch/nn_layers.hpp"
#include "stitch/rng.hpp"

namespace stitch::nn {

inline constexpr std::size_t kStages = 5;

/// Per-bin transform applied to the 2 x n input before the first layer.
/// With s = sqrt(n_iq):
///   Iq            identity
///   LogIq         x * log1p(|x| / s) / |x|
///   LogMagnitude  row 0 = log1p(|x| / s), row 1 = 0
enum class InputFeatures : std::uint8_t { Iq = 0, LogIq = 1, LogMagnitude = 2 };

inline const char* to_string(InputFeatures f) {
  switch (f) {
    case InputFeatures::Iq: return "iq";
    case InputFeatures::LogIq: return "log_iq";
    case InputFeatures::LogMagnitude: return "log_magnitude";
  }
  return "?";
}

inline std::optional<InputFeatures> input_features_from_string(std::string_view s) {
  for (auto f : {InputFeatures::Iq, InputFeatures::LogIq, InputFeatures::LogMagnitude}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

struct SegNetConfig {
  std::size_t n_iq = 256;
  std::size_t classes = 5;
  std::array<std::size_t, kStages> widths{8, 16, 32, 64, 128};
  std::size_t nonlocal_dim = 0;  // 0: half the final decoder width
  bool use_nonlocal = true;
  bool nonlocal_residual = true;
  InputFeatures features = InputFeatures::LogMagnitude;

  std::size_t attention_dim() const {
    return nonlocal_dim != 0 ? nonlocal_dim : std::max<std::size_t>(1, widths[0] / 2);
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (n_iq == 0 || n_iq % 32 != 0) out.emplace_back("n_iq must be a positive multiple of 32");
    if (classes == 0) out.emplace_back("classes must be positive");
    if (widths[0] == 0) out.emplace_back("widths must be positive");
    for (std::size_t i = 1; i < kStages; ++i) {
      if (widths[i] <= widths[i - 1]) out.emplace_back("widths must be strictly increasing");
    }
    return out;
  }

  void validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg;
    for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(Errc::InvalidConfig, msg);
  }

  bool operator==(const SegNetConfig&) const = default;
};

template <class T>
class SegNet {
 public:
  struct EncoderBlock {
    Conv1d<T> conv1, conv2;
    BatchNorm1d<T> bn1, bn2;
  };
  struct DecoderBlock {
    Conv1d<T> up_conv, conv1, conv2;
    BatchNorm1d<T> bn1, bn2;
  };

  struct EncoderTape {
    typename Conv1d<T>::Cache c1, c2;
    typename BatchNorm1d<T>::Cache b1, b2;
    Mat<T> r1, r2;
    std::vector<std::uint8_t> pool;
  };
  struct DecoderTape {
    typename Conv1d<T>::Cache up, c1, c2;
    typename BatchNorm1d<T>::Cache b1, b2;
    Mat<T> r1, r2;
  };
  /// Activations recorded by a training-mode forward pass.
  struct Tape {
    std::array<EncoderTape, kStages> enc;
    std::array<DecoderTape, kStages> dec;
    typename NonLocalBlock<T>::Cache nonlocal;
    typename Conv1d<T>::Cache head;
  };

  SegNet() = default;

  SegNet(const SegNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const auto& w = cfg_.widths;
    for (std::size_t k = 0; k < kStages; ++k) {
      const std::size_t in = k == 0 ? 2 : w[k - 1];
      auto& e = enc_[k];
      e.conv1 = Conv1d<T>(in, w[k], 3, rng);
      e.bn1 = BatchNorm1d<T>(w[k]);
      e.conv2 = Conv1d<T>(w[k], w[k], 3, rng);
      e.bn2 = BatchNorm1d<T>(w[k]);
    }
    for (std::size_t j = 0; j < kStages; ++j) {
      const std::size_t prev = j == 0 ? w[kStages - 1] : w[kStages - j];
      const std::size_t out = w[kStages - 1 - j];
      auto& d = dec_[j];
      d.up_conv = Conv1d<T>(prev, out, 3, rng);
      d.conv1 = Conv1d<T>(2 * out, out, 3, rng);
      d.bn1 = BatchNorm1d<T>(out);
      d.conv2 = Conv1d<T>(out, out, 3, rng);
      d.bn2 = BatchNorm1d<T>(out);
    }
    nonlocal_ = NonLocalBlock<T>(w[0], cfg_.attention_dim(), cfg_.nonlocal_residual, rng);
    head_ = Conv1d<T>(w[0], cfg_.classes, 1, rng);
  }

  const SegNetConfig& config() const { return cfg_; }
  const NonLocalBlock<T>& nonlocal() const { return nonlocal_; }
  NonLocalBlock<T>& nonlocal() { return nonlocal_; }

  static Mat<T> input_features(const Mat<T>& x, std::size_t n, InputFeatures f) {
    if (f == InputFeatures::Iq) return x;
    const double s = std::sqrt(static_cast<double>(n));
    Mat<T> out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double a = std::hypot(static_cast<double>(x(0, j)), static_cast<double>(x(1, j)));
      if (f == InputFeatures::LogMagnitude) {
        out(0, j) = static_cast<T>(std::log1p(a / s));
        out(1, j) = 0;
      } else {
        const double g = a > 0.0 ? std::log1p(a / s) / a : 1.0 / s;
        out(0, j) = static_cast<T>(x(0, j) * g);
        out(1, j) = static_cast<T>(x(1, j) * g);
      }
    }
    return out;
  }

  /// Logits, classes x (batch * n_iq). Training mode when `tape` is non-null.
  Mat<T> logits(const Mat<T>& input, Tape* tape) const {
    check_input(input);
    std::size_t len = cfg_.n_iq;
    std::array<Mat<T>, kStages> skips;
    Mat<T> h = input_features(input, cfg_.n_iq, cfg_.features);
    for (std::size_t k = 0; k < kStages; ++k) {
      const auto& e = enc_[k];
      EncoderTape* t = tape ? &tape->enc[k] : nullptr;
      Mat<T> a = e.bn1.forward(e.conv1.forward(h, len, t ? &t->c1 : nullptr), t ? &t->b1 : nullptr);
      a = relu(a);
      Mat<T> b = e.bn2.forward(e.conv2.forward(a, len, t ? &t->c2 : nullptr), t ? &t->b2 : nullptr);
      b = relu(b);
      h = maxpool2(b, t ? &t->pool : nullptr);
      if (t) t->r1 = std::move(a);
      skips[k] = std::move(b);
      len /= 2;
    }
    for (std::size_t j = 0; j < kStages; ++j) {
      const auto& d = dec_[j];
      DecoderTape* t = tape ? &tape->dec[j] : nullptr;
      len *= 2;
      Mat<T> up = d.up_conv.forward(upsample2(h), len, t ? &t->up : nullptr);
      const Mat<T>& skip = skips[kStages - 1 - j];
      Mat<T> cat(up.rows() + skip.rows(), up.cols());
      cat.topRows(up.rows()) = up;
      cat.bottomRows(skip.rows()) = skip;
      Mat<T> a = relu(d.bn1.forward(d.conv1.forward(cat, len, t ? &t->c1 : nullptr), t ? &t->b1 : nullptr));
      Mat<T> b = relu(d.bn2.forward(d.conv2.forward(a, len, t ? &t->c2 : nullptr), t ? &t->b2 : nullptr));
      if (t) {
        t->r1 = std::move(a);
        t->r2 = b;
      }
      h = std::move(b);
    }
    if (tape) {
      for (std::size_t k = 0; k < kStages; ++k) tape->enc[k].r2 = std::move(skips[k]);
    }
    if (cfg_.use_nonlocal) h = nonlocal_.forward(h, len, tape ? &tape->nonlocal : nullptr);
    return head_.forward(h, len, tape ? &tape->head : nullptr);
  }

  /// Eval-mode probabilities. Read-only; safe to call concurrently.
  Mat<T> predict(const Mat<T>& input) const { return sigmoid(logits(input, nullptr)); }

  /// Training-mode probabilities. Records `tape` and folds batch statistics
  /// into the running statistics.
  Mat<T> forward_train(const Mat<T>& input, Tape& tape) {
    Mat<T> p = sigmoid(logits(input, &tape));
    for (std::size_t k = 0; k < kStages; ++k) {
      enc_[k].bn1.update_running(tape.enc[k].b1);
      enc_[k].bn2.update_running(tape.enc[k].b2);
      dec_[k].bn1.update_running(tape.dec[k].b1);
      dec_[k].bn2.update_running(tape.dec[k].b2);
    }
    return p;
  }

  /// Accumulates parameter gradients given d(loss)/d(logits).
  void backward(const Mat<T>& dlogits, const Tape& tape) {
    Mat<T> g = head_.backward(dlogits, tape.head);
    if (cfg_.use_nonlocal) g = nonlocal_.backward(g, tape.nonlocal);
    std::array<Mat<T>, kStages> dskip;
    for (std::size_t jj = 0; jj < kStages; ++jj) {
      const std::size_t j = kStages - 1 - jj;
      auto& d = dec_[j];
      const auto& t = tape.dec[j];
      g = relu_backward(g, t.r2);
      g = d.conv2.backward(d.bn2.backward(g, t.b2), t.c2);
      g = relu_backward(g, t.r1);
      g = d.conv1.backward(d.bn1.backward(g, t.b1), t.c1);
      const Eigen::Index out = static_cast<Eigen::Index>(d.up_conv.out);
      dskip[kStages - 1 - j] = g.bottomRows(g.rows() - out);
      Mat<T> dup = d.up_conv.backward(g.topRows(out), t.up);
      g = upsample2_backward(dup);
    }
    for (std::size_t kk = 0; kk < kStages; ++kk) {
      const std::size_t k = kStages - 1 - kk;
      auto& e = enc_[k];
      const auto& t = tape.enc[k];
      g = maxpool2_backward(g, t.pool);
      g += dskip[k];
      g = relu_backward(g, t.r2);
      g = e.conv2.backward(e.bn2.backward(g, t.b2), t.c2);
      g = relu_backward(g, t.r1);
      g = e.conv1.backward(e.bn1.backward(g, t.b1), t.c1);
    }
  }

  /// Trainable parameters in checkpoint order.
  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& e : enc_) {
      e.conv1.collect(out);
      e.bn1.collect(out);
      e.conv2.collect(out);
      e.bn2.collect(out);
    }
    for (auto& d : dec_) {
      d.up_conv.collect(out);
      d.conv1.collect(out);
      d.bn1.collect(out);
      d.conv2.collect(out);
      d.bn2.collect(out);
    }
    if (cfg_.use_nonlocal) nonlocal_.collect(out);
    head_.collect(out);
    return out;
  }

  /// Batch-norm running statistics (mean, var per layer) in checkpoint order.
  std::vector<Mat<T>*> buffers() {
    std::vector<Mat<T>*> out;
    auto add = [&](BatchNorm1d<T>& bn) {
      out.push_back(&bn.running_mean);
      out.push_back(&bn.running_var);
    };
    for (auto& e : enc_) {
      add(e.bn1);
      add(e.bn2);
    }
    for (auto& d : dec_) {
      add(d.bn1);
      add(d.bn2);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : const_cast<SegNet*>(this)->params()) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.setZero();
  }

  template <class U>
  SegNet<U> cast() const {
    SegNet<U> out(cfg_, 0);
    auto src = const_cast<SegNet*>(this)->params();
    auto dst = out.params();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    auto sb = const_cast<SegNet*>(this)->buffers();
    auto db = out.buffers();
    for (std::size_t i = 0; i < sb.size(); ++i) *db[i] = sb[i]->template cast<U>();
    return out;
  }

  static Mat<T> sigmoid(const Mat<T>& z) {
    return (static_cast<T>(1) / (static_cast<T>(1) + (-z.array()).exp())).matrix();
  }

 private:
  void check_input(const Mat<T>& input) const {
    if (input.rows() != 2 || input.cols() == 0 ||
        input.cols() % static_cast<Eigen::Index>(cfg_.n_iq) != 0) {
      throw Error(Errc::ShapeMismatch, "expected 2 x (batch * " + std::to_string(cfg_.n_iq) + ") input, got " +
                                           std::to_string(input.rows()) + " x " + std::to_string(input.cols()));
    }
  }

  SegNetConfig cfg_;
  std::array<EncoderBlock, kStages> enc_;
  std::array<DecoderBlock, kStages> dec_;
  NonLocalBlock<T> nonlocal_;
  Conv1d<T> head_;
};

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy over every entry; p is clamped to
/// [1e-7, 1 - 1e-7]. `target` may be soft.
template <class T>
double bce_loss(const Mat<T>& pred, const Mat<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error(Errc::ShapeMismatch, "prediction and target shapes differ");
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const double p = std::clamp(static_cast<double>(pred(i, j)), kProbClamp, 1.0 - kProbClamp);
      const double l = static_cast<double>(target(i, j));
      sum -= l * std::log(p) + (1.0 - l) * std::log(1.0 - p);
    }
  }
  return sum / static_cast<double>(pred.size());
}

/// d(bce)/d(logit) for sigmoid outputs; zero where the clamp is active.
template <class T>
Mat<T> bce_logit_grad(const Mat<T>& pred, const Mat<T>& target) {
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(pred.size()));
  const T lo = static_cast<T>(kProbClamp);
  const T hi = static_cast<T>(1.0 - kProbClamp);
  return ((pred.array() > lo && pred.array() < hi).select((pred - target).array() * inv_n, static_cast<T>(0)))
      .matrix();
}

/// Label grid as a classes x n matrix of 0/1.
template <class T>
Mat<T> label_matrix(const LabelMatrix& label) {
  Mat<T> m(static_cast<Eigen::Index>(label.classes()), static_cast<Eigen::Index>(label.bins()));
  for (std::size_t j = 0; j < label.bins(); ++j) {
    for (std::size_t i = 0; i < label.classes(); ++i) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = label.at(i, j) ? 1 : 0;
    }
  }
  return m;
}

template <class T>
double bce_loss(const Mat<T>& pred, const LabelMatrix& label) {
  return bce_loss(pred, label_matrix<T>(label));
}

/// 2 x n input matrix from the stored real/imaginary rows.
template <class T>
Mat<T> input_matrix(std::span<const float> input, std::size_t n) {
  Mat<T> m(2, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    m(0, static_cast<Eigen::Index>(j)) = static_cast<T>(input[j]);
    m(1, static_cast<Eigen::Index>(j)) = static_cast<T>(input[n + j]);
  }
  return m;
}

/// Train-mode forward + loss + backward for one batch. Gradients are zeroed
/// first and left in the parameters; returns the loss.
template <class T>
double compute_gradients(SegNet<T>& net, const Mat<T>& input, const Mat<T>& target) {
  typename SegNet<T>::Tape tape;
  net.zero_grad();
  const Mat<T> p = net.forward_train(input, tape);
  const double loss = bce_loss(p, target);
  net.backward(bce_logit_grad(p, target), tape);
  return loss;
}

// ---------------------------------------------------------------------------
// Training

struct TrainHyper {
  double lr = 0.05;
  double lr_final = -1;  // cosine decay from lr to lr_final over the epochs; < 0 keeps lr constant
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double momentum = 0.9;
  double weight_decay = 0.0;  // L2 coefficient added to every gradient
  bool mirror_bins = false;  // with probability 1/2 reverse the spectrum (conjugate in time): bin j -> (n - j) mod n
};

struct TrainResult {
  std::vector<double> batch_loss;  // one entry per optimizer step
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// Reverses columns [off, off + len) about DC: column j takes column
/// (len - j) mod len. With `conjugate` the imaginary row is also negated,
/// giving the spectrum of conj(x) from the spectrum of x.
template <class T>
void mirror_spectrum(Mat<T>& m, Eigen::Index off, Eigen::Index len, bool conjugate = true) {
  const Mat<T> src = m.middleCols(off, len);
  for (Eigen::Index j = 0; j < len; ++j) m.col(off + j) = src.col((len - j) % len);
  if (conjugate) m.row(1).segment(off, len) *= T(-1);
}

/// Learning rate of epoch e.
inline double scheduled_lr(const TrainHyper& h, std::size_t epoch) {
  if (h.lr_final < 0 || h.epochs <= 1) return h.lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(h.epochs - 1);
  return h.lr_final + (h.lr - h.lr_final) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

/// Mini-batch SGD with momentum: v <- mu v + g; w <- w - lr v. Epoch e visits
/// samples in a Fisher-Yates order seeded by mix_seed(seed, e).
template <class T>
TrainResult train(SegNet<T>& net, const Dataset& data, const TrainHyper& hyper,
                  const std::function<void(std::size_t epoch, double loss)>& on_epoch = {}) {
  const auto& cfg = net.config();
  if (data.samples.empty()) throw Error(Errc::InvalidArgument, "training dataset is empty");
  if (data.header.n_iq != cfg.n_iq || static_cast<std::size_t>(data.header.class_count) != cfg.classes) {
    throw Error(Errc::ConfigMismatch, "dataset geometry does not match network");
  }
  if (hyper.batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be positive");

  const std::size_t n = cfg.n_iq;
  auto params = net.params();
  std::vector<Mat<T>> velocity;
  for (auto* p : params) velocity.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
  const T mu = static_cast<T>(hyper.momentum);
  const T wd = static_cast<T>(hyper.weight_decay);

  TrainResult result;
  std::vector<std::size_t> order(data.samples.size());
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(hyper.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[uniform_int(rng, 0, i - 1)]);
    }
    Rng aug_rng(mix_seed(hyper.seed ^ 0x9e3779b97f4a7c15ULL, epoch));
    const T lr = static_cast<T>(scheduled_lr(hyper, epoch));
    double epoch_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t bs = std::min(hyper.batch_size, order.size() - start);
      Mat<T> input(2, static_cast<Eigen::Index>(bs * n));
      Mat<T> target(static_cast<Eigen::Index>(cfg.classes), static_cast<Eigen::Index>(bs * n));
      for (std::size_t b = 0; b < bs; ++b) {
        const auto& s = data.samples[order[start + b]];
        const auto off = static_cast<Eigen::Index>(b * n);
        const auto L = static_cast<Eigen::Index>(n);
        input.middleCols(off, L) = input_matrix<T>(s.input, n);
        target.middleCols(off, L) = label_matrix<T>(s.label);
        if (hyper.mirror_bins && bernoulli(aug_rng, 0.5)) {
          mirror_spectrum(input, off, L);
          mirror_spectrum(target, off, L, false);
        }
      }
      const double loss = compute_gradients(net, input, target);
      if (!std::isfinite(loss)) {
        throw Error(Errc::DivergedLoss, "loss is not finite at epoch " + std::to_string(epoch));
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = mu * velocity[i] + params[i]->grad + wd * params[i]->value;
        params[i]->value -= lr * velocity[i];
      }
      result.batch_loss.push_back(loss);
      epoch_sum += loss;
      ++steps;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(steps));
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back());
  }
  return result;
}

// ---------------------------------------------------------------------------
// SGNT checkpoints
//
//   "SGNT" | u16 version
//   | u32 n_iq | u32 classes | 5 x u32 widths | u32 nonlocal_dim | u8 use_nonlocal | u8 residual | u8 features
//   | u32 tensor_count
//   | per tensor: u32 rank (=2) | u32 rows | u32 cols | rows*cols f32, column-major
//
// Tensor order: params() (encoder blocks, decoder blocks, non-local block
// when enabled, head) followed by buffers() (BN running mean/var).

inline constexpr std::uint16_t kCheckpointVersion = 1;

template <class T>
void checkpoint_save(const SegNet<T>& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  const auto& cfg = net.config();
  io::put_magic(os, "SGNT");
  io::put<std::uint16_t>(os, kCheckpointVersion);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.n_iq));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.classes));
  for (auto w : cfg.widths) io::put<std::uint32_t>(os, static_cast<std::uint32_t>(w));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.nonlocal_dim));
  io::put<std::uint8_t>(os, cfg.use_nonlocal ? 1 : 0);
  io::put<std::uint8_t>(os, cfg.nonlocal_residual ? 1 : 0);
  io::put<std::uint8_t>(os, static_cast<std::uint8_t>(cfg.features));
  auto& mut = const_cast<SegNet<T>&>(net);
  std::vector<const Mat<T>*> tensors;
  for (auto* p : mut.params()) tensors.push_back(&p->value);
  for (auto* b : mut.buffers()) tensors.push_back(b);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto* t : tensors) {
    io::put<std::uint32_t>(os, 2);
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(t->rows()));
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(t->cols()));
    for (Eigen::Index i = 0; i < t->size(); ++i) io::put<float>(os, static_cast<float>(t->data()[i]));
  }
  if (!os) throw Error(Errc::Io, "write failed for " + path.string());
}

/// Loads a checkpoint. When `expected` is given, its geometry must match the
/// stored configuration (ConfigMismatch otherwise).
template <class T>
SegNet<T> checkpoint_load(const std::filesystem::path& path, const SegNetConfig* expected = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::NotFound, "checkpoint " + path.string());
  constexpr Errc bad = Errc::CorruptCheckpoint;
  io::expect_magic(is, "SGNT", bad);
  const auto version = io::get<std::uint16_t>(is, bad);
  if (version != kCheckpointVersion) throw Error(bad, "unsupported version " + std::to_string(version));
  SegNetConfig cfg;
  cfg.n_iq = io::get<std::uint32_t>(is, bad);
  cfg.classes = io::get<std::uint32_t>(is, bad);
  for (auto& w : cfg.widths) w = io::get<std::uint32_t>(is, bad);
  cfg.nonlocal_dim = io::get<std::uint32_t>(is, bad);
  cfg.use_nonlocal = io::get<std::uint8_t>(is, bad) != 0;
  cfg.nonlocal_residual = io::get<std::uint8_t>(is, bad) != 0;
  const auto features = io::get<std::uint8_t>(is, bad);
  if (features > static_cast<std::uint8_t>(InputFeatures::LogMagnitude)) throw Error(bad, "unknown input features");
  cfg.features = static_cast<InputFeatures>(features);
  if (!cfg.violations().empty()) throw Error(bad, "stored configuration is invalid");
  if (expected && !(*expected == cfg)) {
    throw Error(Errc::ConfigMismatch, "checkpoint n_iq=" + std::to_string(cfg.n_iq) + " classes=" +
                                          std::to_string(cfg.classes) + " does not match the expected network");
  }
  SegNet<T> net(cfg, 0);
  std::vector<Mat<T>*> tensors;
  for (auto* p : net.params()) tensors.push_back(&p->value);
  for (auto* b : net.buffers()) tensors.push_back(b);
  const auto count = io::get<std::uint32_t>(is, bad);
  if (count != tensors.size()) throw Error(bad, "tensor count mismatch");
  for (auto* t : tensors) {
    const auto rank = io::get<std::uint32_t>(is, bad);
    const auto rows = io::get<std::uint32_t>(is, bad);
    const auto cols = io::get<std::uint32_t>(is, bad);
    if (rank != 2 || rows != t->rows() || cols != t->cols()) throw Error(bad, "tensor shape mismatch");
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = static_cast<T>(io::get<float>(is, bad));
  }
  io::expect_eof(is, bad);
  return net;
}

}  // namespace stitch::nn
