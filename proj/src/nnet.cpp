#include "dciris/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dciris {

void LayerParams::allocate(std::vector<std::size_t> wshape, std::vector<std::size_t> bshape) {
  weights = Tensor(wshape);
  weight_grad = Tensor(wshape);
  weight_momentum = Tensor(wshape);
  bias = Tensor(bshape);
  bias_grad = Tensor(bshape);
  bias_momentum = Tensor(std::move(bshape));
}

void LayerParams::zero_grad() {
  weight_grad.fill(0.0);
  bias_grad.fill(0.0);
}

void glorot_init(LayerParams& p, std::size_t fan_in, std::size_t fan_out, SplitRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < p.weights.numel(); ++i) p.weights[i] = rng.uniform(-a, a);
  p.bias.fill(0.0);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, std::size_t in, std::size_t out, std::size_t k,
               std::size_t stride_, std::size_t padding_, std::size_t dilation_)
    : in_channels(in), out_channels(out), kernel(k), stride(stride_), padding(padding_),
      dilation(dilation_) {
  params.name = std::move(name);
  params.allocate({out, in, k, k}, {out});
}

void Conv2d::init(SplitRng& rng) {
  glorot_init(params, in_channels * kernel * kernel, out_channels * kernel * kernel, rng);
}

namespace {

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                         std::size_t dilation) {
  const long span = static_cast<long>(in) + 2 * static_cast<long>(pad) -
                    static_cast<long>(dilation) * (static_cast<long>(k) - 1) - 1;
  if (span < 0) throw std::invalid_argument("conv2d: kernel does not fit the input");
  return static_cast<std::size_t>(span) / stride + 1;
}

// output column range for which the input column ix = ox*stride - pad + tap
// stays inside [0, in_w)
void tap_range(long tap, long stride, long pad, long in_w, long out_w, long& lo, long& hi) {
  const long off = tap - pad;
  long a = -off;  // need ox*stride >= -off
  lo = a <= 0 ? 0 : (a + stride - 1) / stride;
  long b = in_w - 1 - off;  // need ox*stride <= b
  hi = b < 0 ? -1 : std::min(out_w - 1, b / stride);
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x, bool cache) {
  require(x.rank() == 3 && x.dim(0) == in_channels, "conv2d: bad input shape");
  const std::size_t in_h = x.dim(1);
  const std::size_t in_w = x.dim(2);
  const std::size_t out_h = conv_out_dim(in_h, kernel, stride, padding, dilation);
  const std::size_t out_w = conv_out_dim(in_w, kernel, stride, padding, dilation);

  Tensor y({out_channels, out_h, out_w});
  const double* xd = x.data();
  const double* wd = params.weights.data();
  double* yd = y.data();

  const long s = static_cast<long>(stride);
  const long p = static_cast<long>(padding);
  const long d = static_cast<long>(dilation);
  const long ih = static_cast<long>(in_h);
  const long iw = static_cast<long>(in_w);
  const long oh = static_cast<long>(out_h);
  const long ow = static_cast<long>(out_w);

  for (std::size_t co = 0; co < out_channels; ++co) {
    double* yplane = yd + co * out_h * out_w;
    const double b = params.bias[co];
    for (std::size_t i = 0; i < out_h * out_w; ++i) yplane[i] = b;
    for (std::size_t ci = 0; ci < in_channels; ++ci) {
      const double* xplane = xd + ci * in_h * in_w;
      for (std::size_t ki = 0; ki < kernel; ++ki) {
        for (std::size_t kj = 0; kj < kernel; ++kj) {
          const double w = wd[((co * in_channels + ci) * kernel + ki) * kernel + kj];
          long ox_lo, ox_hi;
          tap_range(static_cast<long>(kj) * d, s, p, iw, ow, ox_lo, ox_hi);
          for (long oy = 0; oy < oh; ++oy) {
            const long iy = oy * s - p + static_cast<long>(ki) * d;
            if (iy < 0 || iy >= ih) continue;
            const double* xrow = xplane + iy * iw;
            double* yrow = yplane + oy * ow;
            const long base = -p + static_cast<long>(kj) * d;
            for (long ox = ox_lo; ox <= ox_hi; ++ox)
              yrow[ox] += w * xrow[ox * s + base];
          }
        }
      }
    }
  }
  if (cache) input_cache = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = input_cache;
  require(x.rank() == 3, "conv2d backward: no cached input");
  const std::size_t in_h = x.dim(1);
  const std::size_t in_w = x.dim(2);
  require(grad_out.rank() == 3 && grad_out.dim(0) == out_channels, "conv2d backward: bad grad shape");
  const std::size_t out_h = grad_out.dim(1);
  const std::size_t out_w = grad_out.dim(2);

  Tensor grad_in({in_channels, in_h, in_w});
  const double* xd = x.data();
  const double* gd = grad_out.data();
  const double* wd = params.weights.data();
  double* wgd = params.weight_grad.data();
  double* gid = grad_in.data();

  for (std::size_t co = 0; co < out_channels; ++co) {
    const double* gplane = gd + co * out_h * out_w;
    double bsum = 0.0;
    for (std::size_t i = 0; i < out_h * out_w; ++i) bsum += gplane[i];
    params.bias_grad[co] += bsum;
  }

  const long s = static_cast<long>(stride);
  const long p = static_cast<long>(padding);
  const long d = static_cast<long>(dilation);
  const long ih = static_cast<long>(in_h);
  const long iw = static_cast<long>(in_w);
  const long oh = static_cast<long>(out_h);
  const long ow = static_cast<long>(out_w);

  for (std::size_t co = 0; co < out_channels; ++co) {
    const double* gplane = gd + co * out_h * out_w;
    for (std::size_t ci = 0; ci < in_channels; ++ci) {
      const double* xplane = xd + ci * in_h * in_w;
      double* giplane = gid + ci * in_h * in_w;
      for (std::size_t ki = 0; ki < kernel; ++ki) {
        for (std::size_t kj = 0; kj < kernel; ++kj) {
          const std::size_t widx = ((co * in_channels + ci) * kernel + ki) * kernel + kj;
          const double w = wd[widx];
          double wg = 0.0;
          long ox_lo, ox_hi;
          tap_range(static_cast<long>(kj) * d, s, p, iw, ow, ox_lo, ox_hi);
          const long base = -p + static_cast<long>(kj) * d;
          for (long oy = 0; oy < oh; ++oy) {
            const long iy = oy * s - p + static_cast<long>(ki) * d;
            if (iy < 0 || iy >= ih) continue;
            const double* xrow = xplane + iy * iw;
            double* girow = giplane + iy * iw;
            const double* grow = gplane + oy * ow;
            for (long ox = ox_lo; ox <= ox_hi; ++ox) {
              const double g = grow[ox];
              const long ix = ox * s + base;
              wg += g * xrow[ix];
              girow[ix] += w * g;
            }
          }
          wgd[widx] += wg;
        }
      }
    }
  }
  return grad_in;
}

// ------------------------------------------------------ TransposedConv2d

TransposedConv2d::TransposedConv2d(std::string name, std::size_t in, std::size_t out,
                                   std::size_t k)
    : in_channels(in), out_channels(out), kernel(k) {
  params.name = std::move(name);
  params.allocate({in, out, k, k}, {out});
}

void TransposedConv2d::init(SplitRng& rng) {
  glorot_init(params, in_channels * kernel * kernel, out_channels * kernel * kernel, rng);
}

Tensor TransposedConv2d::forward(const Tensor& x, bool cache) {
  require(x.rank() == 3 && x.dim(0) == in_channels, "transposed_conv2d: bad input shape");
  const std::size_t in_h = x.dim(1);
  const std::size_t in_w = x.dim(2);
  const std::size_t out_h = in_h * kernel;
  const std::size_t out_w = in_w * kernel;

  Tensor y({out_channels, out_h, out_w});
  const double* xd = x.data();
  const double* wd = params.weights.data();
  double* yd = y.data();

  for (std::size_t co = 0; co < out_channels; ++co) {
    double* yplane = yd + co * out_h * out_w;
    const double b = params.bias[co];
    for (std::size_t i = 0; i < out_h * out_w; ++i) yplane[i] = b;
  }
  for (std::size_t ci = 0; ci < in_channels; ++ci) {
    const double* xplane = xd + ci * in_h * in_w;
    for (std::size_t co = 0; co < out_channels; ++co) {
      double* yplane = yd + co * out_h * out_w;
      for (std::size_t ki = 0; ki < kernel; ++ki) {
        for (std::size_t kj = 0; kj < kernel; ++kj) {
          const double w = wd[((ci * out_channels + co) * kernel + ki) * kernel + kj];
          for (std::size_t iy = 0; iy < in_h; ++iy) {
            const double* xrow = xplane + iy * in_w;
            double* yrow = yplane + (iy * kernel + ki) * out_w + kj;
            for (std::size_t ix = 0; ix < in_w; ++ix)
              yrow[ix * kernel] += w * xrow[ix];
          }
        }
      }
    }
  }
  if (cache) input_cache = x;
  return y;
}

Tensor TransposedConv2d::backward(const Tensor& grad_out) {
  const Tensor& x = input_cache;
  require(x.rank() == 3, "transposed_conv2d backward: no cached input");
  const std::size_t in_h = x.dim(1);
  const std::size_t in_w = x.dim(2);
  const std::size_t out_h = in_h * kernel;
  const std::size_t out_w = in_w * kernel;
  require(grad_out.rank() == 3 && grad_out.dim(0) == out_channels &&
              grad_out.dim(1) == out_h && grad_out.dim(2) == out_w,
          "transposed_conv2d backward: bad grad shape");

  Tensor grad_in({in_channels, in_h, in_w});
  const double* xd = x.data();
  const double* gd = grad_out.data();
  const double* wd = params.weights.data();
  double* wgd = params.weight_grad.data();
  double* gid = grad_in.data();

  for (std::size_t co = 0; co < out_channels; ++co) {
    const double* gplane = gd + co * out_h * out_w;
    double bsum = 0.0;
    for (std::size_t i = 0; i < out_h * out_w; ++i) bsum += gplane[i];
    params.bias_grad[co] += bsum;
  }

  for (std::size_t ci = 0; ci < in_channels; ++ci) {
    const double* xplane = xd + ci * in_h * in_w;
    double* giplane = gid + ci * in_h * in_w;
    for (std::size_t co = 0; co < out_channels; ++co) {
      const double* gplane = gd + co * out_h * out_w;
      for (std::size_t ki = 0; ki < kernel; ++ki) {
        for (std::size_t kj = 0; kj < kernel; ++kj) {
          const std::size_t widx = ((ci * out_channels + co) * kernel + ki) * kernel + kj;
          const double w = wd[widx];
          double wg = 0.0;
          for (std::size_t iy = 0; iy < in_h; ++iy) {
            const double* xrow = xplane + iy * in_w;
            double* girow = giplane + iy * in_w;
            const double* grow = gplane + (iy * kernel + ki) * out_w + kj;
            for (std::size_t ix = 0; ix < in_w; ++ix) {
              const double g = grow[ix * kernel];
              wg += g * xrow[ix];
              girow[ix] += w * g;
            }
          }
          wgd[widx] += wg;
        }
      }
    }
  }
  return grad_in;
}

// -------------------------------------------------------------------- Fc

Fc::Fc(std::string name, std::size_t in, std::size_t out) : in_features(in), out_features(out) {
  params.name = std::move(name);
  params.allocate({out, in}, {out});
}

void Fc::init(SplitRng& rng) { glorot_init(params, in_features, out_features, rng); }

Tensor Fc::forward(const Tensor& x, bool cache) {
  require(x.rank() == 2 && x.dim(1) == in_features, "fc: bad input shape");
  const std::size_t batch = x.dim(0);
  Tensor y({batch, out_features});
  const double* xd = x.data();
  const double* wd = params.weights.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xrow = xd + b * in_features;
    double* yrow = y.data() + b * out_features;
    for (std::size_t o = 0; o < out_features; ++o) {
      const double* wrow = wd + o * in_features;
      double acc = params.bias[o];
      for (std::size_t i = 0; i < in_features; ++i) acc += wrow[i] * xrow[i];
      yrow[o] = acc;
    }
  }
  if (cache) input_cache = x;
  return y;
}

Tensor Fc::backward(const Tensor& grad_out) {
  const Tensor& x = input_cache;
  require(x.rank() == 2, "fc backward: no cached input");
  const std::size_t batch = x.dim(0);
  require(grad_out.rank() == 2 && grad_out.dim(0) == batch && grad_out.dim(1) == out_features,
          "fc backward: bad grad shape");

  Tensor grad_in({batch, in_features});
  const double* xd = x.data();
  const double* gd = grad_out.data();
  const double* wd = params.weights.data();
  double* wgd = params.weight_grad.data();
  double* gid = grad_in.data();

  for (std::size_t b = 0; b < batch; ++b) {
    const double* xrow = xd + b * in_features;
    const double* grow = gd + b * out_features;
    double* girow = gid + b * in_features;
    for (std::size_t o = 0; o < out_features; ++o) {
      const double g = grow[o];
      params.bias_grad[o] += g;
      const double* wrow = wd + o * in_features;
      double* wgrow = wgd + o * in_features;
      for (std::size_t i = 0; i < in_features; ++i) {
        wgrow[i] += g * xrow[i];
        girow[i] += g * wrow[i];
      }
    }
  }
  return grad_in;
}

// ------------------------------------------------------------ BatchNormFc

BatchNormFc::BatchNormFc(std::string name, std::size_t n) : features(n) {
  params.name = std::move(name);
  params.allocate({n}, {n});
  params.weights.fill(1.0);  // gamma
  running_mean = Tensor({n});
  running_var = Tensor::full({n}, 1.0);
}

Tensor BatchNormFc::forward(const Tensor& x, bool training) {
  require(x.rank() == 2 && x.dim(1) == features, "batchnorm_fc: bad input shape");
  const std::size_t batch = x.dim(0);
  require(batch > 0, "batchnorm_fc: empty batch");
  Tensor y({batch, features});
  trained_forward = training;

  if (!training) {
    for (std::size_t n = 0; n < features; ++n) {
      const double inv = 1.0 / std::sqrt(running_var[n] + eps);
      const double g = params.weights[n];
      const double b = params.bias[n];
      const double m = running_mean[n];
      for (std::size_t i = 0; i < batch; ++i) y.at(i, n) = g * (x.at(i, n) - m) * inv + b;
    }
    return y;
  }

  x_hat_cache = Tensor({batch, features});
  inv_std_cache.assign(features, 0.0);
  const double bn = static_cast<double>(batch);
  for (std::size_t n = 0; n < features; ++n) {
    double mean = 0.0;
    for (std::size_t i = 0; i < batch; ++i) mean += x.at(i, n);
    mean /= bn;
    double var = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const double d = x.at(i, n) - mean;
      var += d * d;
    }
    var /= bn;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std_cache[n] = inv;
    const double g = params.weights[n];
    const double b = params.bias[n];
    for (std::size_t i = 0; i < batch; ++i) {
      const double xh = (x.at(i, n) - mean) * inv;
      x_hat_cache.at(i, n) = xh;
      y.at(i, n) = g * xh + b;
    }
    running_mean[n] = (1.0 - momentum) * running_mean[n] + momentum * mean;
    running_var[n] = (1.0 - momentum) * running_var[n] + momentum * var;
  }
  return y;
}

Tensor BatchNormFc::backward(const Tensor& grad_out) {
  require(grad_out.rank() == 2 && grad_out.dim(1) == features, "batchnorm_fc backward: bad grad");
  const std::size_t batch = grad_out.dim(0);
  Tensor grad_in({batch, features});

  if (!trained_forward) {
    for (std::size_t n = 0; n < features; ++n) {
      const double inv = 1.0 / std::sqrt(running_var[n] + eps);
      const double g = params.weights[n];
      for (std::size_t i = 0; i < batch; ++i) {
        const double go = grad_out.at(i, n);
        params.bias_grad[n] += go;
        grad_in.at(i, n) = go * g * inv;
      }
    }
    return grad_in;
  }

  require(x_hat_cache.rank() == 2 && x_hat_cache.dim(0) == batch,
          "batchnorm_fc backward: no cached activations");
  const double bn = static_cast<double>(batch);
  for (std::size_t n = 0; n < features; ++n) {
    const double g = params.weights[n];
    const double inv = inv_std_cache[n];
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const double go = grad_out.at(i, n);
      const double xh = x_hat_cache.at(i, n);
      sum_g += go;
      sum_gx += go * xh;
      params.weight_grad[n] += go * xh;
      params.bias_grad[n] += go;
    }
    for (std::size_t i = 0; i < batch; ++i) {
      const double go = grad_out.at(i, n);
      const double xh = x_hat_cache.at(i, n);
      grad_in.at(i, n) = g * inv / bn * (bn * go - sum_g - xh * sum_gx);
    }
  }
  return grad_in;
}

// ------------------------------------------------------------ activations

Tensor Relu::forward(const Tensor& x, bool cache) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.numel(); ++i)
    if (y[i] < 0.0) y[i] = 0.0;
  if (cache) input_cache = x;
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) const {
  require(input_cache.same_shape(grad_out), "relu backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.numel(); ++i)
    if (input_cache[i] <= 0.0) g[i] = 0.0;
  return g;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const double v = y[i];
    y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return y;
}

// ----------------------------------------------------------------- losses

ScalarLoss softmax_ce_loss(const Tensor& logits, std::size_t label) {
  require(logits.rank() == 1 && logits.numel() >= 2, "softmax_ce_loss: logits must be rank 1");
  require(label < logits.numel(), "softmax_ce_loss: label out of range");
  const std::size_t n = logits.numel();
  double m = logits[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i] - m);
  ScalarLoss out;
  out.loss = std::log(z) - (logits[label] - m);
  out.grad = Tensor({n});
  for (std::size_t i = 0; i < n; ++i)
    out.grad[i] = std::exp(logits[i] - m) / z - (i == label ? 1.0 : 0.0);
  return out;
}

SmoothL1Result smooth_l1(const RegressionTarget& pred, const RegressionTarget& target) {
  const double dp[6] = {pred.tx_iris, pred.ty_iris, pred.tx_pupil,
                        pred.ty_pupil, pred.tr_iris, pred.tr_pupil};
  const double dt[6] = {target.tx_iris, target.ty_iris, target.tx_pupil,
                        target.ty_pupil, target.tr_iris, target.tr_pupil};
  SmoothL1Result out;
  for (int i = 0; i < 6; ++i) {
    const double d = dp[i] - dt[i];
    const double ad = std::abs(d);
    if (ad < 1.0) {
      out.loss += 0.5 * d * d;
      out.grad[i] = d;
    } else {
      out.loss += ad - 0.5;
      out.grad[i] = d > 0.0 ? 1.0 : -1.0;
    }
  }
  return out;
}

ScalarLoss bce_loss(const Tensor& logits, const Tensor& target) {
  require(logits.same_shape(target), "bce_loss: shape mismatch");
  require(target.is_binary(), "bce_loss: target must be binary");
  const std::size_t n = logits.numel();
  require(n > 0, "bce_loss: empty input");
  ScalarLoss out;
  out.grad = Tensor(logits.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i];
    const double y = target[i];
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    out.grad[i] = (s - y) / static_cast<double>(n);
  }
  out.loss = sum / static_cast<double>(n);
  return out;
}

double multitask_loss(double cls_loss, double reg_loss, double lambda) {
  return cls_loss + lambda * reg_loss;
}

void sgd_step(const std::vector<LayerParams*>& params, double lr, double momentum,
              double weight_decay) {
  require(lr >= 0.0, "sgd_step: learning rate must be non-negative");
  for (LayerParams* p : params) {
    auto update = [&](Tensor& w, Tensor& g, Tensor& v) {
      for (std::size_t i = 0; i < w.numel(); ++i) {
        v[i] = momentum * v[i] + g[i] + weight_decay * w[i];
        w[i] -= lr * v[i];
        g[i] = 0.0;
      }
    };
    update(p->weights, p->weight_grad, p->weight_momentum);
    update(p->bias, p->bias_grad, p->bias_momentum);
  }
}

// -------------------------------------------------------------- weight io

namespace {

constexpr char kMagic[4] = {'D', 'C', 'S', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw std::runtime_error("weight file: truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::string serialize_weights(const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t i = 0; i < t->rank(); ++i)
      put_u32(out, static_cast<std::uint32_t>(t->dim(i)));
    for (std::size_t i = 0; i < t->numel(); ++i) put_f64(out, (*t)[i]);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> parse_weights(const std::string& bytes) {
  Reader r{bytes};
  if (r.str(4) != std::string(kMagic, 4)) throw std::runtime_error("weight file: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw std::runtime_error("weight file: unsupported version");
  const std::uint32_t count = r.u32();
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw std::runtime_error("weight file: implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape[k] = r.u32();
      numel *= shape[k];
    }
    r.need(numel * 8);
    Tensor t(shape);
    for (std::size_t k = 0; k < numel; ++k) t[k] = r.f64();
    out.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos != bytes.size()) throw std::runtime_error("weight file: trailing bytes");
  return out;
}

void save_weights(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  const std::string bytes = serialize_weights(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<std::pair<std::string, Tensor>> load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_weights(bytes);
}

}  // namespace dciris
