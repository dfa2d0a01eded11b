#ifndef POMMER_NN_NETWORK_HPP_
#define POMMER_NN_NETWORK_HPP_

// Small convolutional network with hand-written reverse mode.
//
// Activations between conv layers are stored channel-major over the batch:
// a (channels) x (batch * height * width) matrix. Inputs arrive one sample
// per column in the encoder's (channel, row, col) order.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pommer/encoder.hpp"
#include "pommer/random.hpp"

namespace pommer::nn {

enum class Mode : std::uint8_t { Eval, Train };

struct NetSpec {
  int in_channels = kNumChannels;
  int height = kBoardSize;
  int width = kBoardSize;
  std::vector<int> conv_filters = {32, 64, 64};
  std::vector<int> pool_after = {1, 1, 0};  // 2x2 max pool after conv i
  std::vector<int> dense_units = {128};
  int outputs = kNumActions;
  double dropout = 0.2;  // after each pool, Train mode only

  static NetSpec policy() { return {}; }
  static NetSpec value() {
    NetSpec s;
    s.outputs = 1;
    return s;
  }

  int input_size() const { return in_channels * height * width; }

  void validate() const {
    if (in_channels <= 0 || height <= 0 || width <= 0 || outputs <= 0) {
      throw std::invalid_argument("net spec: non-positive dimension");
    }
    if (conv_filters.size() != pool_after.size()) {
      throw std::invalid_argument("net spec: pool flags must match conv layers");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw std::invalid_argument("net spec: dropout must be in [0, 1)");
    }
    for (int f : conv_filters) {
      if (f <= 0) throw std::invalid_argument("net spec: empty conv layer");
    }
    for (int u : dense_units) {
      if (u <= 0) throw std::invalid_argument("net spec: empty dense layer");
    }
  }

  std::string to_string() const {
    std::ostringstream out;
    out << "in=" << in_channels << "x" << height << "x" << width << " conv=";
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
      out << (i ? "," : "") << conv_filters[i] << (pool_after[i] ? "p" : "");
    }
    out << " dense=";
    for (std::size_t i = 0; i < dense_units.size(); ++i) {
      out << (i ? "," : "") << dense_units[i];
    }
    out << " out=" << outputs << " dropout=" << dropout;
    return out.str();
  }

  bool operator==(const NetSpec&) const = default;
};

template <typename T>
class Network {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  enum class OpKind : std::uint8_t { Conv, Relu, Pool, Dropout, Flatten, Dense };

  struct Op {
    OpKind kind;
    int in_c = 0, in_h = 0, in_w = 0;  // spatial ops
    int out_c = 0, out_h = 0, out_w = 0;
    int in_features = 0, out_features = 0;  // dense
    std::size_t weight_offset = 0, bias_offset = 0;
  };

  /// Everything backward() needs from a forward pass.
  struct Cache {
    int batch = 0;
    std::vector<Matrix> inputs;                // input of every op
    std::vector<Matrix> cols;                  // im2col per conv op
    std::vector<std::vector<int>> pool_index;  // argmax per pool op
    std::vector<Matrix> masks;                 // dropout masks (scaled)
  };

  explicit Network(NetSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    build();
    params_.assign(num_params_, T(0));
  }

  const NetSpec& spec() const { return spec_; }
  std::size_t num_params() const { return num_params_; }
  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }
  const std::vector<Op>& ops() const { return ops_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (const Op& op : ops_) {
      if (op.kind != OpKind::Conv && op.kind != OpKind::Dense) continue;
      const int fan_in = op.kind == OpKind::Conv ? op.in_c * 9 : op.in_features;
      const std::size_t nw = op.kind == OpKind::Conv
                                 ? static_cast<std::size_t>(op.out_c) * op.in_c * 9
                                 : static_cast<std::size_t>(op.out_features) * op.in_features;
      const std::size_t nb = op.kind == OpKind::Conv ? op.out_c : op.out_features;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t i = 0; i < nw; ++i) {
        params_[op.weight_offset + i] = static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound);
      }
      for (std::size_t i = 0; i < nb; ++i) {
        params_[op.bias_offset + i] = static_cast<T>((2.0 * rng.uniform01() - 1.0) * bound);
      }
    }
  }

  void set_params(std::span<const T> p) {
    if (p.size() != num_params_) throw std::invalid_argument("parameter count mismatch");
    std::copy(p.begin(), p.end(), params_.begin());
  }

  /// x: input_size x batch. Returns outputs x batch (raw logits or values).
  /// Train mode needs `rng` for dropout when the rate is non-zero.
  Matrix forward(const Matrix& x, Mode mode = Mode::Eval, Rng* rng = nullptr,
                 Cache* cache = nullptr) const {
    if (x.rows() != spec_.input_size()) {
      throw std::invalid_argument("input has " + std::to_string(x.rows()) +
                                  " rows, network expects " +
                                  std::to_string(spec_.input_size()));
    }
    const int n = static_cast<int>(x.cols());
    const bool dropout_on = mode == Mode::Train && spec_.dropout > 0.0;
    if (dropout_on && rng == nullptr) {
      throw std::invalid_argument("dropout in Train mode needs a generator");
    }
    if (cache) {
      cache->batch = n;
      cache->inputs.assign(ops_.size(), Matrix());
      cache->cols.assign(ops_.size(), Matrix());
      cache->pool_index.assign(ops_.size(), {});
      cache->masks.assign(ops_.size(), Matrix());
    }

    // Samples-as-columns to channel-major layout.
    const int hw = spec_.height * spec_.width;
    Matrix a(spec_.in_channels, static_cast<Eigen::Index>(n) * hw);
    for (int s = 0; s < n; ++s) {
      for (int c = 0; c < spec_.in_channels; ++c) {
        for (int i = 0; i < hw; ++i) a(c, s * hw + i) = x(c * hw + i, s);
      }
    }

    for (std::size_t k = 0; k < ops_.size(); ++k) {
      const Op& op = ops_[k];
      if (cache) cache->inputs[k] = a;
      switch (op.kind) {
        case OpKind::Conv: {
          Matrix cols = im2col(a, op, n);
          const ConstMatrixMap w(params_.data() + op.weight_offset, op.out_c, op.in_c * 9);
          const ConstVectorMap b(params_.data() + op.bias_offset, op.out_c);
          Matrix y = w * cols;
          y.colwise() += b;
          if (cache) cache->cols[k] = std::move(cols);
          a = std::move(y);
          break;
        }
        case OpKind::Relu:
          a = a.cwiseMax(T(0));
          break;
        case OpKind::Pool: {
          std::vector<int> idx;
          a = max_pool(a, op, n, cache ? &idx : nullptr);
          if (cache) cache->pool_index[k] = std::move(idx);
          break;
        }
        case OpKind::Dropout: {
          if (!dropout_on) break;
          const T keep = static_cast<T>(1.0 - spec_.dropout);
          Matrix mask(a.rows(), a.cols());
          for (Eigen::Index i = 0; i < mask.size(); ++i) {
            mask.data()[i] = rng->uniform01() < spec_.dropout ? T(0) : T(1) / keep;
          }
          a = a.cwiseProduct(mask);
          if (cache) cache->masks[k] = std::move(mask);
          break;
        }
        case OpKind::Flatten: {
          const int c = op.in_c;
          const int ohw = op.in_h * op.in_w;
          Matrix f(c * ohw, n);
          for (int s = 0; s < n; ++s) {
            for (int ch = 0; ch < c; ++ch) {
              for (int i = 0; i < ohw; ++i) f(ch * ohw + i, s) = a(ch, s * ohw + i);
            }
          }
          a = std::move(f);
          break;
        }
        case OpKind::Dense: {
          const ConstMatrixMap w(params_.data() + op.weight_offset, op.out_features,
                                 op.in_features);
          const ConstVectorMap b(params_.data() + op.bias_offset, op.out_features);
          Matrix y = w * a;
          y.colwise() += b;
          a = std::move(y);
          break;
        }
      }
    }
    return a;
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(outputs).
  void backward(const Cache& cache, const Matrix& d_out, std::span<T> grad) const {
    if (grad.size() != num_params_) throw std::invalid_argument("gradient size mismatch");
    if (cache.inputs.size() != ops_.size()) throw std::invalid_argument("empty cache");
    const int n = cache.batch;
    Matrix d = d_out;
    for (std::size_t k = ops_.size(); k-- > 0;) {
      const Op& op = ops_[k];
      const Matrix& in = cache.inputs[k];
      switch (op.kind) {
        case OpKind::Dense: {
          const ConstMatrixMap w(params_.data() + op.weight_offset, op.out_features,
                                 op.in_features);
          MatrixMap gw(grad.data() + op.weight_offset, op.out_features, op.in_features);
          VectorMap gb(grad.data() + op.bias_offset, op.out_features);
          gw.noalias() += d * in.transpose();
          gb += d.rowwise().sum();
          d = w.transpose() * d;
          break;
        }
        case OpKind::Flatten: {
          const int ohw = op.in_h * op.in_w;
          Matrix g(op.in_c, static_cast<Eigen::Index>(n) * ohw);
          for (int s = 0; s < n; ++s) {
            for (int ch = 0; ch < op.in_c; ++ch) {
              for (int i = 0; i < ohw; ++i) g(ch, s * ohw + i) = d(ch * ohw + i, s);
            }
          }
          d = std::move(g);
          break;
        }
        case OpKind::Dropout:
          if (cache.masks[k].size() > 0) d = d.cwiseProduct(cache.masks[k]);
          break;
        case OpKind::Pool: {
          Matrix g = Matrix::Zero(in.rows(), in.cols());
          const std::vector<int>& idx = cache.pool_index[k];
          for (Eigen::Index i = 0; i < d.size(); ++i) g.data()[idx[i]] += d.data()[i];
          d = std::move(g);
          break;
        }
        case OpKind::Relu:
          d.array() *= (in.array() > T(0)).template cast<T>();
          break;
        case OpKind::Conv: {
          const ConstMatrixMap w(params_.data() + op.weight_offset, op.out_c, op.in_c * 9);
          MatrixMap gw(grad.data() + op.weight_offset, op.out_c, op.in_c * 9);
          VectorMap gb(grad.data() + op.bias_offset, op.out_c);
          const Matrix dw = d * cache.cols[k].transpose();
          gw += dw;
          gb += d.rowwise().sum();
          if (k == 0) return;  // no gradient needed for the input
          const Matrix dcols = w.transpose() * d;
          d = col2im(dcols, op, n);
          break;
        }
      }
    }
  }

  /// Pattern of every ReLU and max-pool decision for `x`; a finite-difference
  /// step that changes it crossed a kink.
  std::vector<std::uint8_t> activation_pattern(const Matrix& x, Mode mode = Mode::Eval,
                                               Rng* rng = nullptr) const {
    Cache cache;
    forward(x, mode, rng, &cache);
    std::vector<std::uint8_t> out;
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      if (ops_[k].kind == OpKind::Relu) {
        const Matrix& in = cache.inputs[k];
        for (Eigen::Index i = 0; i < in.size(); ++i) out.push_back(in.data()[i] > T(0));
      } else if (ops_[k].kind == OpKind::Pool) {
        for (int i : cache.pool_index[k]) {
          out.push_back(static_cast<std::uint8_t>(i & 0xff));
          out.push_back(static_cast<std::uint8_t>((i >> 8) & 0xff));
        }
      }
    }
    return out;
  }

 private:
  void build() {
    int c = spec_.in_channels, h = spec_.height, w = spec_.width;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < spec_.conv_filters.size(); ++i) {
      Op conv{OpKind::Conv, c, h, w, spec_.conv_filters[i], h, w};
      conv.weight_offset = offset;
      offset += static_cast<std::size_t>(conv.out_c) * c * 9;
      conv.bias_offset = offset;
      offset += conv.out_c;
      ops_.push_back(conv);
      c = conv.out_c;
      ops_.push_back(Op{OpKind::Relu, c, h, w, c, h, w});
      if (spec_.pool_after[i]) {
        if (h < 2 || w < 2) throw std::invalid_argument("net spec: pooling below 2x2");
        ops_.push_back(Op{OpKind::Pool, c, h, w, c, h / 2, w / 2});
        h /= 2;
        w /= 2;
        ops_.push_back(Op{OpKind::Dropout, c, h, w, c, h, w});
      }
    }
    Op flat{OpKind::Flatten, c, h, w, c, h, w};
    flat.out_features = c * h * w;
    ops_.push_back(flat);
    int features = c * h * w;
    auto dense = [&](int units) {
      Op d{OpKind::Dense};
      d.in_features = features;
      d.out_features = units;
      d.weight_offset = offset;
      offset += static_cast<std::size_t>(units) * features;
      d.bias_offset = offset;
      offset += units;
      ops_.push_back(d);
      features = units;
    };
    for (int units : spec_.dense_units) {
      dense(units);
      Op r{OpKind::Relu};
      ops_.push_back(r);
    }
    dense(spec_.outputs);
    num_params_ = offset;
  }

  // 3x3 "same" patches: row (tap*in_c + ch) with tap = kr*3 + kc, column
  // (s*h*w + r*w + c). Channels are contiguous on both sides.
  static Matrix im2col(const Matrix& a, const Op& op, int n) {
    const int h = op.in_h, w = op.in_w, hw = h * w, ch = op.in_c;
    Matrix cols(ch * 9, static_cast<Eigen::Index>(n) * hw);
    for (int s = 0; s < n; ++s) {
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const Eigen::Index col = s * hw + r * w + c;
          for (int tap = 0; tap < 9; ++tap) {
            const int sr = r + tap / 3 - 1, sc = c + tap % 3 - 1;
            auto dst = cols.col(col).segment(tap * ch, ch);
            if (sr < 0 || sr >= h || sc < 0 || sc >= w) {
              dst.setZero();
            } else {
              dst = a.col(s * hw + sr * w + sc);
            }
          }
        }
      }
    }
    return cols;
  }

  static Matrix col2im(const Matrix& cols, const Op& op, int n) {
    const int h = op.in_h, w = op.in_w, hw = h * w, ch = op.in_c;
    Matrix a = Matrix::Zero(ch, static_cast<Eigen::Index>(n) * hw);
    for (int s = 0; s < n; ++s) {
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const Eigen::Index col = s * hw + r * w + c;
          for (int tap = 0; tap < 9; ++tap) {
            const int sr = r + tap / 3 - 1, sc = c + tap % 3 - 1;
            if (sr < 0 || sr >= h || sc < 0 || sc >= w) continue;
            a.col(s * hw + sr * w + sc) += cols.col(col).segment(tap * ch, ch);
          }
        }
      }
    }
    return a;
  }

  // 2x2 stride 2, trailing row/column dropped. `index` receives the flat
  // position in `a` of each window's maximum (first one on ties).
  static Matrix max_pool(const Matrix& a, const Op& op, int n, std::vector<int>* index) {
    const int h = op.in_h, w = op.in_w, oh = op.out_h, ow = op.out_w;
    Matrix out(op.in_c, static_cast<Eigen::Index>(n) * oh * ow);
    if (index) index->resize(out.size());
    const Eigen::Index rows = a.rows();
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < op.in_c; ++ch) {
        for (int r = 0; r < oh; ++r) {
          for (int c = 0; c < ow; ++c) {
            Eigen::Index best = ch + rows * (s * h * w + 2 * r * w + 2 * c);
            T best_v = a.data()[best];
            for (int dr = 0; dr < 2; ++dr) {
              for (int dc = 0; dc < 2; ++dc) {
                const Eigen::Index at =
                    ch + rows * (s * h * w + (2 * r + dr) * w + 2 * c + dc);
                if (a.data()[at] > best_v) {
                  best_v = a.data()[at];
                  best = at;
                }
              }
            }
            const Eigen::Index o = ch + rows * (s * oh * ow + r * ow + c);
            out.data()[o] = best_v;
            if (index) (*index)[o] = static_cast<int>(best);
          }
        }
      }
    }
    return out;
  }

  NetSpec spec_;
  std::vector<Op> ops_;
  std::size_t num_params_ = 0;
  std::vector<T> params_;
};

/// Packs tensors into an input_size x batch matrix.
template <typename T>
typename Network<T>::Matrix batch_matrix(std::span<const ObservationTensor> xs) {
  typename Network<T>::Matrix m(kTensorSize, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t s = 0; s < xs.size(); ++s) {
    for (int i = 0; i < kTensorSize; ++i) m(i, s) = static_cast<T>(xs[s].data[i]);
  }
  return m;
}

}  // namespace pommer::nn

#endif  // POMMER_NN_NETWORK_HPP_
