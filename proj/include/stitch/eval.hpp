#pragma once

// Evaluation: pooled IoU, rectangle-box hole analysis, non-local ablation and
// latency benchmarking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "stitch/error.hpp"
#include "stitch/generator.hpp"
#include "stitch/segnet.hpp"
#include "stitch/waveform.hpp"
#include "stitch/wideband.hpp"

namespace stitch {

// ---------------------------------------------------------------------------
// IoU

struct IoUReport {
  std::map<int, double> per_class;  // class id -> IoU, classes with a nonempty union
  double mean_iou = 0.0;
  std::size_t sample_count = 0;
};

/// Pooled intersection/union counts. Classes absent from both prediction and
/// truth are left out of the mean; classes predicted but never true score 0.
class IoUAccumulator {
 public:
  explicit IoUAccumulator(std::size_t classes = 0) : inter_(classes, 0), uni_(classes, 0) {}

  void add(const LabelMatrix& pred, const LabelMatrix& truth) {
    if (pred.classes() != truth.classes() || pred.bins() != truth.bins()) {
      throw Error(Errc::ShapeMismatch, "prediction and truth grids differ in shape");
    }
    if (inter_.empty()) {
      inter_.assign(truth.classes(), 0);
      uni_.assign(truth.classes(), 0);
    }
    if (truth.classes() != inter_.size()) throw Error(Errc::ShapeMismatch, "class count changed");
    for (std::size_t c = 0; c < truth.classes(); ++c) {
      for (std::size_t k = 0; k < truth.bins(); ++k) {
        const bool p = pred.at(c, k);
        const bool t = truth.at(c, k);
        inter_[c] += (p && t) ? 1 : 0;
        uni_[c] += (p || t) ? 1 : 0;
      }
    }
    ++samples_;
  }

  void merge(const IoUAccumulator& other) {
    if (inter_.empty()) {
      *this = other;
      return;
    }
    for (std::size_t c = 0; c < inter_.size(); ++c) {
      inter_[c] += other.inter_[c];
      uni_[c] += other.uni_[c];
    }
    samples_ += other.samples_;
  }

  IoUReport report() const {
    IoUReport r;
    r.sample_count = samples_;
    double sum = 0.0;
    for (std::size_t c = 0; c < inter_.size(); ++c) {
      if (uni_[c] == 0) continue;
      const double v = static_cast<double>(inter_[c]) / static_cast<double>(uni_[c]);
      r.per_class[static_cast<int>(c) + 1] = v;
      sum += v;
    }
    r.mean_iou = r.per_class.empty() ? 0.0 : sum / static_cast<double>(r.per_class.size());
    return r;
  }

 private:
  std::vector<std::uint64_t> inter_;
  std::vector<std::uint64_t> uni_;
  std::size_t samples_ = 0;
};

inline IoUReport iou(const LabelMatrix& pred, const LabelMatrix& truth) {
  IoUAccumulator acc(truth.classes());
  acc.add(pred, truth);
  return acc.report();
}

/// Held-out evaluation of a network: each sample is normalized, forwarded and
/// thresholded, then pooled. Samples are processed in batches; eval-mode
/// forwards are independent per sample.
inline IoUReport evaluate(const nn::SegNet<float>& net, const Dataset& data, const NoiseReference& ref,
                          double threshold = kDefaultThreshold, std::size_t batch = 64) {
  const std::size_t n = net.config().n_iq;
  if (data.header.n_iq != n) throw Error(Errc::ShapeMismatch, "dataset n_iq differs from the network");
  IoUAccumulator acc(net.config().classes);
  for (std::size_t lo = 0; lo < data.samples.size(); lo += batch) {
    const std::size_t hi = std::min(data.samples.size(), lo + batch);
    nn::Mat<float> x(2, static_cast<Eigen::Index>((hi - lo) * n));
    for (std::size_t i = lo; i < hi; ++i) {
      x.middleCols(static_cast<Eigen::Index>((i - lo) * n), static_cast<Eigen::Index>(n)) =
          nn::input_matrix<float>(normalize(data.samples[i].input, n, ref), n);
    }
    const nn::Mat<float> p = net.predict(x);
    for (std::size_t i = lo; i < hi; ++i) {
      LabelMatrix pred(net.config().classes, n);
      for (std::size_t c = 0; c < pred.classes(); ++c) {
        for (std::size_t k = 0; k < n; ++k) {
          pred.set(c, k, p(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>((i - lo) * n + k)) >= threshold);
        }
      }
      acc.add(pred, data.samples[i].label);
    }
  }
  return acc.report();
}

inline void write_iou_csv(std::ostream& os, const IoUReport& r, const std::vector<std::string>& class_names) {
  os << "class_id,class,iou\n";
  for (const auto& [id, v] : r.per_class) {
    const auto idx = static_cast<std::size_t>(id - 1);
    os << id << ',' << (idx < class_names.size() ? class_names[idx] : std::to_string(id)) << ',' << v << '\n';
  }
  os << "mean,mean," << r.mean_iou << '\n';
}

// ---------------------------------------------------------------------------
// Rectangle-box comparison

/// Occupied bins of one transmission.
struct SignalTruth {
  int class_id = 0;
  std::vector<std::uint8_t> mask;
};

using FrameTruth = std::vector<SignalTruth>;

struct BoxComparison {
  double segmentation_occupancy_error = 0.0;  // ideal segmentation: the truth itself
  double box_occupancy_error = 0.0;           // false-occupied bins inside boxes / all bins
  std::uint64_t gap_bins = 0;
  std::uint64_t total_bins = 0;
};

/// Class-row truth of a frame: union of each class's signals.
inline LabelMatrix frame_label(const FrameTruth& frame, std::size_t classes, std::size_t bins) {
  LabelMatrix m(classes, bins);
  for (const auto& s : frame) {
    for (std::size_t k = 0; k < bins; ++k) {
      if (s.mask[k]) m.set(static_cast<std::size_t>(s.class_id - 1), k);
    }
  }
  return m;
}

/// Fill of the tightest box around each signal, merged per class row.
inline LabelMatrix frame_boxes(const FrameTruth& frame, std::size_t classes, std::size_t bins) {
  LabelMatrix m(classes, bins);
  for (const auto& s : frame) {
    const auto first = std::find(s.mask.begin(), s.mask.end(), 1);
    if (first == s.mask.end()) continue;
    const auto lo = static_cast<std::size_t>(first - s.mask.begin());
    const auto hi = static_cast<std::size_t>(s.mask.rend() - std::find(s.mask.rbegin(), s.mask.rend(), 1)) - 1;
    for (std::size_t k = lo; k <= hi; ++k) m.set(static_cast<std::size_t>(s.class_id - 1), k);
  }
  return m;
}

/// Bins marked occupied in `pred` but free in `truth`.
inline std::uint64_t false_occupied(const LabelMatrix& pred, const LabelMatrix& truth) {
  std::uint64_t n = 0;
  for (std::size_t c = 0; c < truth.classes(); ++c) {
    for (std::size_t k = 0; k < truth.bins(); ++k) n += (pred.at(c, k) && !truth.at(c, k)) ? 1 : 0;
  }
  return n;
}

/// Excess occupancy of the rectangle oracle and of an ideal per-bin
/// segmentation (one that reproduces each signal's occupied bins).
inline BoxComparison box_oracle_compare(const std::vector<FrameTruth>& stream, std::size_t classes, std::size_t bins) {
  BoxComparison r;
  std::uint64_t seg_false = 0;
  for (const auto& frame : stream) {
    const LabelMatrix truth = frame_label(frame, classes, bins);
    r.gap_bins += false_occupied(frame_boxes(frame, classes, bins), truth);
    seg_false += false_occupied(frame_label(frame, classes, bins), truth);
    r.total_bins += bins;
  }
  if (r.total_bins > 0) {
    r.box_occupancy_error = static_cast<double>(r.gap_bins) / static_cast<double>(r.total_bins);
    r.segmentation_occupancy_error = static_cast<double>(seg_false) / static_cast<double>(r.total_bins);
  }
  return r;
}

struct HoleStreamOptions {
  std::size_t frames = 2000;
  std::size_t n_iq = 256;
  double bandwidth_hz = 25e6;
  double hole_fraction = 0.25;
  double p_empty = 0.05;
  int lte_class_id = 2;
};

/// Stream of frames, each holding one LTE-synth transmission (absent with
/// probability p_empty) placed wholly inside the window. Bins follow the
/// subcarrier grid one to one, so the truth mask is the subcarrier mask.
inline std::vector<FrameTruth> lte_hole_stream(const HoleStreamOptions& opt, std::uint64_t seed) {
  const double spacing = opt.bandwidth_hz / static_cast<double>(opt.n_iq);
  const std::size_t K = detail::ofdm_offsets(class_by_id(opt.lte_class_id).nominal_bandwidth_hz, spacing).size();
  if (K + 2 > opt.n_iq) throw Error(Errc::InvalidArgument, "LTE band does not fit the window");
  std::vector<FrameTruth> stream(opt.frames);
  for (std::size_t f = 0; f < opt.frames; ++f) {
    Rng rng(mix_seed(seed, f));
    if (bernoulli(rng, opt.p_empty)) continue;
    const auto first = static_cast<std::size_t>(uniform_int(rng, 0, opt.n_iq - K));
    const auto active = lte_subcarrier_mask(K, opt.hole_fraction, rng);
    SignalTruth s{opt.lte_class_id, std::vector<std::uint8_t>(opt.n_iq, 0)};
    for (std::size_t i = 0; i < K; ++i) s.mask[first + i] = active[i] ? 1 : 0;
    stream[f].push_back(std::move(s));
  }
  return stream;
}

/// Expected box excess for lte_hole_stream: (1 - p_empty) * holes / n_iq.
inline double lte_hole_expected_excess(const HoleStreamOptions& opt) {
  const double spacing = opt.bandwidth_hz / static_cast<double>(opt.n_iq);
  const std::size_t K = detail::ofdm_offsets(class_by_id(opt.lte_class_id).nominal_bandwidth_hz, spacing).size();
  const double holes = static_cast<double>(std::llround(opt.hole_fraction * static_cast<double>(K)));
  return (1.0 - opt.p_empty) * holes / static_cast<double>(opt.n_iq);
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationSeed {
  std::uint64_t seed = 0;
  IoUReport with_nonlocal;
  IoUReport without_nonlocal;
  double train_seconds_with = 0.0;
  double train_seconds_without = 0.0;
};

struct AblationReport {
  std::vector<AblationSeed> runs;
  std::vector<int> wideband_classes{1, 2};

  /// Mean over the wideband classes of (with - without) for one run.
  double wideband_delta(const AblationSeed& r) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (int c : wideband_classes) {
      const auto a = r.with_nonlocal.per_class.find(c);
      const auto b = r.without_nonlocal.per_class.find(c);
      if (a == r.with_nonlocal.per_class.end() || b == r.without_nonlocal.per_class.end()) continue;
      sum += a->second - b->second;
      ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
  }

  double mean_wideband_delta() const {
    double s = 0.0;
    for (const auto& r : runs) s += wideband_delta(r);
    return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
  }

  double stddev_wideband_delta() const {
    if (runs.size() < 2) return 0.0;
    const double m = mean_wideband_delta();
    double s = 0.0;
    for (const auto& r : runs) s += (wideband_delta(r) - m) * (wideband_delta(r) - m);
    return std::sqrt(s / static_cast<double>(runs.size() - 1));
  }
};

/// Trains a network on `train` (already normalized) and returns it.
inline nn::SegNet<float> train_network(const nn::SegNetConfig& cfg, const Dataset& train, nn::TrainHyper hyper,
                                       nn::TrainResult* trace = nullptr,
                                       const std::function<void(std::size_t, double)>& on_epoch = {}) {
  nn::SegNet<float> net(cfg, mix_seed(hyper.seed, 0x5e9));
  auto r = nn::train(net, train, hyper, on_epoch);
  if (trace) *trace = std::move(r);
  return net;
}

/// Trains matched networks with and without the non-local block for each
/// seed and evaluates both on `heldout`. Datasets are raw; both are
/// normalized against the training set's noise reference.
inline AblationReport ablation_run(const Dataset& train, const Dataset& heldout, const nn::SegNetConfig& base,
                                   const nn::TrainHyper& hyper, const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 3) throw Error(Errc::InvalidArgument, "ablation needs at least 3 seeds");
  const NoiseReference ref = estimate_noise_reference(train);
  Dataset train_n = train;
  normalize_dataset(train_n, ref);
  AblationReport report;
  for (auto seed : seeds) {
    AblationSeed run;
    run.seed = seed;
    for (bool nl : {true, false}) {
      nn::SegNetConfig cfg = base;
      cfg.use_nonlocal = nl;
      nn::TrainHyper h = hyper;
      h.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const auto net = train_network(cfg, train_n, h);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      (nl ? run.with_nonlocal : run.without_nonlocal) = evaluate(net, heldout, ref);
      (nl ? run.train_seconds_with : run.train_seconds_without) = secs;
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Latency

struct LatencyEntry {
  double multiple = 1.0;  // B_tilde / B
  std::size_t windows = 0;
  std::size_t runs = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

struct LatencyReport {
  std::vector<LatencyEntry> entries;

  double ratio(std::size_t i) const { return entries[i].mean_ms / entries.front().mean_ms; }
};

inline constexpr std::size_t kLatencyWarmup = 10;

inline LatencyReport latency_bench(const nn::SegNet<float>& net, const std::vector<double>& multiples, std::size_t runs,
                                   double bandwidth_hz = 25e6, std::size_t workers = 1, std::uint64_t seed = 1) {
  if (runs < 100) throw Error(Errc::InvalidArgument, "latency_bench needs at least 100 runs");
  const std::size_t n = net.config().n_iq;
  const NoiseReference ref{static_cast<double>(n)};
  LatencyReport report;
  for (double m : multiples) {
    const TilingPlan plan = plan_tiling(m * bandwidth_hz, bandwidth_hz, n);
    const std::size_t nt = plan.n_iq_tilde;
    const Spectrum s = fft_forward(synthesize_noise(nt, 1.0, mix_seed(seed, nt), m * bandwidth_hz));
    std::vector<float> wide(2 * nt);
    for (std::size_t k = 0; k < nt; ++k) {
      wide[k] = static_cast<float>(s.bins[k].real());
      wide[nt + k] = static_cast<float>(s.bins[k].imag());
    }
    InferOptions opt;
    opt.workers = workers;
    std::vector<double> ms;
    for (std::size_t r = 0; r < runs + kLatencyWarmup; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto map = infer_wideband(net, wide, plan, ref, opt);
      const double dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (map.bins != nt) throw Error(Errc::ShapeMismatch, "unexpected occupancy width");
      if (r >= kLatencyWarmup) ms.push_back(dt);
    }
    LatencyEntry e{m, plan.window_count(), ms.size(), 0.0, 0.0};
    for (double v : ms) e.mean_ms += v;
    e.mean_ms /= static_cast<double>(ms.size());
    for (double v : ms) e.std_ms += (v - e.mean_ms) * (v - e.mean_ms);
    e.std_ms = std::sqrt(e.std_ms / static_cast<double>(ms.size() - 1));
    report.entries.push_back(e);
  }
  return report;
}

inline void write_latency_csv(std::ostream& os, const LatencyReport& r) {
  os << "bandwidth_multiple,windows,runs,mean_ms,std_ms,ratio\n";
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    os << e.multiple << ',' << e.windows << ',' << e.runs << ',' << e.mean_ms << ',' << e.std_ms << ',' << r.ratio(i)
       << '\n';
  }
}

}  // namespace stitch
