#include "nlekit/diffcore/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "nlekit/rng.hpp"

namespace nlekit::diffcore {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

/// Leading batch axis times trailing spatial extent, for [N, C, ...] inputs.
std::size_t trailing_extent(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t i = 2; i < s.size(); ++i) n *= s[i];
  return n;
}

/// Copies parameters and buffers across precisions, in declaration order.
template <typename T, typename L>
std::unique_ptr<Layer<long double>> extended_copy(const Layer<T>& self, std::unique_ptr<L> dst) {
  auto& src = const_cast<Layer<T>&>(self);
  auto copy = [](const std::vector<ParamRef<T>>& from, const std::vector<ParamRef<long double>>& to) {
    for (std::size_t i = 0; i < from.size(); ++i)
      std::copy(from[i].tensor->data().begin(), from[i].tensor->data().end(), to[i].tensor->data().begin());
  };
  copy(src.parameters(), dst->parameters());
  copy(src.buffers(), dst->buffers());
  return dst;
}

}  // namespace

template <typename T>
std::unique_ptr<Layer<long double>> Conv2d<T>::to_extended() const {
  return extended_copy(*this, std::make_unique<Conv2d<long double>>(in_channels_, out_channels_, kernel_h_, kernel_w_,
                                                                    padding_));
}

template <typename T>
std::unique_ptr<Layer<long double>> BatchNorm<T>::to_extended() const {
  auto e = std::make_unique<BatchNorm<long double>>(channels_, eps_, momentum_);
  e->set_frozen_stats(frozen_stats_);
  return extended_copy(*this, std::move(e));
}

template <typename T>
std::unique_ptr<Layer<long double>> Relu<T>::to_extended() const {
  return std::make_unique<Relu<long double>>();
}

template <typename T>
std::unique_ptr<Layer<long double>> MaxPool2d<T>::to_extended() const {
  return std::make_unique<MaxPool2d<long double>>(window_h_, window_w_, stride_h_, stride_w_);
}

template <typename T>
std::unique_ptr<Layer<long double>> Flatten<T>::to_extended() const {
  return std::make_unique<Flatten<long double>>();
}

template <typename T>
std::unique_ptr<Layer<long double>> Dense<T>::to_extended() const {
  return extended_copy(*this, std::make_unique<Dense<long double>>(in_features_, out_features_));
}

template <typename T>
std::unique_ptr<Layer<long double>> Softmax<T>::to_extended() const {
  return std::make_unique<Softmax<long double>>(temperature_);
}

template <typename T>
void Layer<T>::shape_error(const std::string& expected, const Shape& actual) const {
  fail(ErrorKind::config, std::string(kind()) + ": expected input " + expected + ", got " + shape_to_string(actual));
}

template <typename T>
void Layer<T>::no_cache_error() const {
  fail(ErrorKind::state, std::string(kind()) + ": backward called without a preceding train-mode forward");
}

template <typename T>
void kaiming_uniform_init(Tensor<T>& weight, std::size_t fan_in, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& w : weight.data()) w = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h, std::size_t kernel_w,
                  Padding2d padding)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      padding_(padding),
      weight_({out_channels, in_channels, kernel_h, kernel_w}),
      bias_({out_channels}) {}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  const std::string expected = "[N x " + std::to_string(in_channels_) + " x H x W] with padded H,W >= kernel " +
                               std::to_string(kernel_h_) + "x" + std::to_string(kernel_w_);
  if (in.size() != 4 || in[1] != in_channels_) this->shape_error(expected, in);
  const std::size_t ph = in[2] + padding_.top + padding_.bottom;
  const std::size_t pw = in[3] + padding_.left + padding_.right;
  if (ph < kernel_h_ || pw < kernel_w_) this->shape_error(expected, in);
  return {in[0], out_channels_, ph - kernel_h_ + 1, pw - kernel_w_ + 1};
}

template <typename T>
void Conv2d<T>::im2col(const T* image, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* col) const {
  const auto top = static_cast<std::ptrdiff_t>(padding_.top);
  const auto left = static_cast<std::ptrdiff_t>(padding_.left);
  const auto sh = static_cast<std::ptrdiff_t>(h);
  const auto sw = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < in_channels_; ++c) {
    const T* plane = image + c * h * w;
    for (std::size_t ki = 0; ki < kernel_h_; ++ki) {
      for (std::size_t kj = 0; kj < kernel_w_; ++kj) {
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ki) - top;
          T* dst = col + y * ow;
          if (iy < 0 || iy >= sh) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* row = plane + iy * sw;
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kj) - left;
            dst[x] = (ix >= 0 && ix < sw) ? row[ix] : T(0);
          }
        }
        col += oh * ow;
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, std::size_t h, std::size_t w, std::size_t oh, std::size_t ow, T* image) const {
  const auto top = static_cast<std::ptrdiff_t>(padding_.top);
  const auto left = static_cast<std::ptrdiff_t>(padding_.left);
  const auto sh = static_cast<std::ptrdiff_t>(h);
  const auto sw = static_cast<std::ptrdiff_t>(w);
  for (std::size_t c = 0; c < in_channels_; ++c) {
    T* plane = image + c * h * w;
    for (std::size_t ki = 0; ki < kernel_h_; ++ki) {
      for (std::size_t kj = 0; kj < kernel_w_; ++kj) {
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ki) - top;
          if (iy < 0 || iy >= sh) continue;
          const T* src = col + y * ow;
          T* row = plane + iy * sw;
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kj) - left;
            if (ix >= 0 && ix < sw) row[ix] += src[x];
          }
        }
        col += oh * ow;
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(Tensor<T> input, Mode mode) {
  const Shape out_shape = output_shape(input.shape());
  const std::size_t n = out_shape[0], h = input.dim(2), w = input.dim(3);
  const std::size_t oh = out_shape[2], ow = out_shape[3];
  const std::size_t rows = in_channels_ * kernel_h_ * kernel_w_, cols = oh * ow;

  Tensor<T> out(out_shape);
  AlignedVector<T> col(rows * cols);
  ConstMatMap<T> wmat(weight_.raw(), static_cast<Eigen::Index>(out_channels_), static_cast<Eigen::Index>(rows));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.raw(), static_cast<Eigen::Index>(out_channels_));
  for (std::size_t i = 0; i < n; ++i) {
    im2col(input.raw() + i * in_channels_ * h * w, h, w, oh, ow, col.data());
    ConstMatMap<T> cmat(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    MatMap<T> y(out.raw() + i * out_channels_ * cols, static_cast<Eigen::Index>(out_channels_),
                static_cast<Eigen::Index>(cols));
    y.noalias() = wmat * cmat;
    y.colwise() += b;
  }
  if (mode == Mode::train) cached_input_ = std::move(input);
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& upstream) {
  if (!cached_input_) this->no_cache_error();
  const Tensor<T> input = std::move(*cached_input_);
  cached_input_.reset();
  const Shape out_shape = output_shape(input.shape());
  if (upstream.shape() != out_shape) this->shape_error(shape_to_string(out_shape) + " upstream", upstream.shape());

  const std::size_t n = out_shape[0], h = input.dim(2), w = input.dim(3);
  const std::size_t oh = out_shape[2], ow = out_shape[3];
  const std::size_t rows = in_channels_ * kernel_h_ * kernel_w_, cols = oh * ow;
  const auto er = static_cast<Eigen::Index>(rows);
  const auto ec = static_cast<Eigen::Index>(cols);
  const auto eo = static_cast<Eigen::Index>(out_channels_);

  weight_.zero_grad();
  bias_.zero_grad();
  MatMap<T> dw(weight_.grad().data(), eo, er);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias_.grad().data(), eo);
  ConstMatMap<T> wmat(weight_.raw(), eo, er);

  Tensor<T> dx(input.shape());
  AlignedVector<T> col(rows * cols), dcol(rows * cols);
  for (std::size_t i = 0; i < n; ++i) {
    im2col(input.raw() + i * in_channels_ * h * w, h, w, oh, ow, col.data());
    ConstMatMap<T> cmat(col.data(), er, ec);
    ConstMatMap<T> dy(upstream.raw() + i * out_channels_ * cols, eo, ec);
    dw.noalias() += dy * cmat.transpose();
    db += dy.rowwise().sum();
    MatMap<T> dc(dcol.data(), er, ec);
    dc.noalias() = wmat.transpose() * dy;
    col2im(dcol.data(), h, w, oh, ow, dx.raw() + i * in_channels_ * h * w);
  }
  return dx;
}

// ------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      scale_({channels}, T(1)),
      shift_({channels}, T(0)),
      running_mean_({channels}, T(0)),
      running_var_({channels}, T(1)) {}

template <typename T>
Shape BatchNorm<T>::output_shape(const Shape& in) const {
  if (in.size() < 2 || in[1] != channels_) this->shape_error("[N x " + std::to_string(channels_) + " x ...]", in);
  return in;
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(Tensor<T> input, Mode mode) {
  using A = accum_t<T>;
  output_shape(input.shape());
  const std::size_t n = input.dim(0), s = trailing_extent(input.shape());
  const std::size_t m = n * s;
  const auto es = static_cast<Eigen::Index>(s);
  const bool batch_stats = mode == Mode::train && !frozen_stats_;
  auto span = [&](Tensor<T>& t, std::size_t i, std::size_t c) { return ArrMap<T>(t.raw() + (i * channels_ + c) * s, es); };

  Tensor<T> normalized;
  if (mode == Mode::train) normalized = Tensor<T>(input.shape());
  std::vector<A> inv_std(channels_);
  for (std::size_t c = 0; c < channels_; ++c) {
    A mean, var;
    if (batch_stats) {
      A sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += span(input, i, c).template cast<A>().sum();
      mean = sum / static_cast<A>(m);
      A sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) sq += (span(input, i, c).template cast<A>() - mean).square().sum();
      var = sq / static_cast<A>(m);
      const A unbiased = m > 1 ? sq / static_cast<A>(m - 1) : var;
      running_mean_[c] = static_cast<T>((A(1) - momentum_) * running_mean_[c] + momentum_ * mean);
      running_var_[c] = static_cast<T>((A(1) - momentum_) * running_var_[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    inv_std[c] = A(1) / std::sqrt(var + eps_);
    const T tm = static_cast<T>(mean), ti = static_cast<T>(inv_std[c]), g = scale_[c], b = shift_[c];
    for (std::size_t i = 0; i < n; ++i) {
      auto x = span(input, i, c);
      if (mode == Mode::train) {
        auto xh = span(normalized, i, c);
        xh = (x - tm) * ti;
        x = g * xh + b;
      } else {
        x = g * ((x - tm) * ti) + b;
      }
    }
  }
  if (mode == Mode::train) cache_ = Cache{std::move(normalized), std::move(inv_std), batch_stats};
  return input;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& upstream) {
  using A = accum_t<T>;
  if (!cache_) this->no_cache_error();
  Cache cache = std::move(*cache_);
  cache_.reset();
  if (upstream.shape() != cache.normalized.shape())
    this->shape_error(shape_to_string(cache.normalized.shape()) + " upstream", upstream.shape());

  const std::size_t n = upstream.dim(0), s = trailing_extent(upstream.shape());
  const auto es = static_cast<Eigen::Index>(s);
  const A m = static_cast<A>(n * s);
  scale_.zero_grad();
  shift_.zero_grad();
  Tensor<T> dx(upstream.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    A sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * channels_ + c) * s;
      ConstArrMap<T> dy(upstream.raw() + off, es), xh(cache.normalized.raw() + off, es);
      sum_dy += dy.template cast<A>().sum();
      sum_dy_xh += (dy.template cast<A>() * xh.template cast<A>()).sum();
    }
    scale_.grad()[c] = static_cast<T>(sum_dy_xh);
    shift_.grad()[c] = static_cast<T>(sum_dy);
    const A g = static_cast<A>(scale_[c]) * cache.inv_std[c];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * channels_ + c) * s;
      ConstArrMap<T> dy(upstream.raw() + off, es), xh(cache.normalized.raw() + off, es);
      ArrMap<T> out(dx.raw() + off, es);
      if (cache.batch_stats) {
        const T a = static_cast<T>(g), b = static_cast<T>(g * sum_dy / m), d = static_cast<T>(g * sum_dy_xh / m);
        out = a * dy - b - d * xh;
      } else {
        out = static_cast<T>(g) * dy;
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------ Relu

template <typename T>
Tensor<T> Relu<T>::forward(Tensor<T> input, Mode mode) {
  if (mode == Mode::train) cached_input_ = input;
  for (auto& v : input.data()) v = v > T(0) ? v : T(0);
  return input;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& upstream) {
  if (!cached_input_) this->no_cache_error();
  const Tensor<T> input = std::move(*cached_input_);
  cached_input_.reset();
  if (upstream.shape() != input.shape()) this->shape_error(shape_to_string(input.shape()) + " upstream", upstream.shape());
  Tensor<T> dx(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) dx[i] = input[i] > T(0) ? upstream[i] : T(0);
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

template <typename T>
MaxPool2d<T>::MaxPool2d(std::size_t window_h, std::size_t window_w, std::size_t stride_h, std::size_t stride_w)
    : window_h_(window_h), window_w_(window_w), stride_h_(stride_h), stride_w_(stride_w) {
  require(window_h > 0 && window_w > 0 && stride_h > 0 && stride_w > 0, ErrorKind::config,
          "maxpool: window and stride must be positive");
}

template <typename T>
Shape MaxPool2d<T>::output_shape(const Shape& in) const {
  if (in.size() != 4 || in[2] < window_h_ || in[3] < window_w_)
    this->shape_error("[N x C x H x W] with H >= " + std::to_string(window_h_) + ", W >= " + std::to_string(window_w_),
                      in);
  return {in[0], in[1], (in[2] - window_h_) / stride_h_ + 1, (in[3] - window_w_) / stride_w_ + 1};
}

template <typename T>
Tensor<T> MaxPool2d<T>::forward(Tensor<T> input, Mode mode) {
  const Shape os = output_shape(input.shape());
  const std::size_t planes = os[0] * os[1], h = input.dim(2), w = input.dim(3), oh = os[2], ow = os[3];
  Tensor<T> out(os);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = base + y * stride_h_ * w + x * stride_w_;
        for (std::size_t i = 0; i < window_h_; ++i)
          for (std::size_t j = 0; j < window_w_; ++j) {
            const std::size_t idx = base + (y * stride_h_ + i) * w + x * stride_w_ + j;
            if (input[idx] > input[best]) best = idx;
          }
        const std::size_t o = (p * oh + y) * ow + x;
        out[o] = input[best];
        argmax[o] = best;
      }
    }
  }
  if (mode == Mode::train) {
    cached_shape_ = input.shape();
    argmax_ = std::move(argmax);
  }
  return out;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& upstream) {
  if (!cached_shape_) this->no_cache_error();
  const Shape in_shape = *cached_shape_;
  cached_shape_.reset();
  if (upstream.size() != argmax_.size()) this->shape_error(shape_to_string(output_shape(in_shape)) + " upstream", upstream.shape());
  Tensor<T> dx(in_shape);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += upstream[o];
  return dx;
}

// --------------------------------------------------------------- Flatten

template <typename T>
Shape Flatten<T>::output_shape(const Shape& in) const {
  if (in.size() < 2) this->shape_error("[N x ...] with rank >= 2", in);
  std::size_t f = 1;
  for (std::size_t i = 1; i < in.size(); ++i) f *= in[i];
  return {in[0], f};
}

template <typename T>
Tensor<T> Flatten<T>::forward(Tensor<T> input, Mode mode) {
  Shape out = output_shape(input.shape());
  if (mode == Mode::train) cached_shape_ = input.shape();
  return std::move(input).reshaped(std::move(out));
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& upstream) {
  if (!cached_shape_) this->no_cache_error();
  Shape s = *cached_shape_;
  cached_shape_.reset();
  return upstream.reshaped(std::move(s));
}

// ----------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}) {}

template <typename T>
Shape Dense<T>::output_shape(const Shape& in) const {
  if (in.size() != 2 || in[1] != in_features_) this->shape_error("[N x " + std::to_string(in_features_) + "]", in);
  return {in[0], out_features_};
}

template <typename T>
Tensor<T> Dense<T>::forward(Tensor<T> input, Mode mode) {
  const Shape os = output_shape(input.shape());
  const auto n = static_cast<Eigen::Index>(os[0]);
  const auto fi = static_cast<Eigen::Index>(in_features_);
  const auto fo = static_cast<Eigen::Index>(out_features_);
  Tensor<T> out(os);
  ConstMatMap<T> x(input.raw(), n, fi);
  ConstMatMap<T> wmat(weight_.raw(), fo, fi);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.raw(), fo);
  MatMap<T> y(out.raw(), n, fo);
  y.noalias() = x * wmat.transpose();
  y.rowwise() += b;
  if (mode == Mode::train) cached_input_ = std::move(input);
  return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& upstream) {
  if (!cached_input_) this->no_cache_error();
  const Tensor<T> input = std::move(*cached_input_);
  cached_input_.reset();
  const Shape os = output_shape(input.shape());
  if (upstream.shape() != os) this->shape_error(shape_to_string(os) + " upstream", upstream.shape());
  const auto n = static_cast<Eigen::Index>(os[0]);
  const auto fi = static_cast<Eigen::Index>(in_features_);
  const auto fo = static_cast<Eigen::Index>(out_features_);
  ConstMatMap<T> x(input.raw(), n, fi);
  ConstMatMap<T> dy(upstream.raw(), n, fo);
  ConstMatMap<T> wmat(weight_.raw(), fo, fi);
  weight_.zero_grad();
  bias_.zero_grad();
  MatMap<T> dw(weight_.grad().data(), fo, fi);
  dw.noalias() = dy.transpose() * x;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.grad().data(), fo);
  db = dy.colwise().sum();
  Tensor<T> dx(input.shape());
  MatMap<T> dxm(dx.raw(), n, fi);
  dxm.noalias() = dy * wmat;
  return dx;
}

// --------------------------------------------------------------- Softmax

template <typename T>
Softmax<T>::Softmax(double temperature) : temperature_(temperature) {
  require(temperature > 0.0 && std::isfinite(temperature), ErrorKind::config, "softmax: temperature must be > 0");
}

template <typename T>
Shape Softmax<T>::output_shape(const Shape& in) const {
  if (in.size() != 2) this->shape_error("[N x K]", in);
  return in;
}

template <typename T>
Tensor<T> Softmax<T>::forward(Tensor<T> input, Mode mode) {
  using A = accum_t<T>;
  output_shape(input.shape());
  const std::size_t n = input.dim(0), k = input.dim(1);
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = input.raw() + i * k;
    T* p = out.raw() + i * k;
    const T zmax = *std::max_element(z, z + k);
    A sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const A e = std::exp((static_cast<A>(z[j]) - zmax) / temperature_);
      p[j] = static_cast<T>(e);
      sum += e;
    }
    for (std::size_t j = 0; j < k; ++j) p[j] = static_cast<T>(p[j] / sum);
  }
  if (mode == Mode::train) cached_output_ = out;
  return out;
}

template <typename T>
Tensor<T> Softmax<T>::backward(const Tensor<T>& upstream) {
  using A = accum_t<T>;
  if (!cached_output_) this->no_cache_error();
  const Tensor<T> p = std::move(*cached_output_);
  cached_output_.reset();
  if (upstream.shape() != p.shape()) this->shape_error(shape_to_string(p.shape()) + " upstream", upstream.shape());
  const std::size_t n = p.dim(0), k = p.dim(1);
  Tensor<T> dx(p.shape());
  for (std::size_t i = 0; i < n; ++i) {
    A dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += static_cast<A>(upstream[i * k + j]) * p[i * k + j];
    for (std::size_t j = 0; j < k; ++j)
      dx[i * k + j] = static_cast<T>(p[i * k + j] * (upstream[i * k + j] - dot) / temperature_);
  }
  return dx;
}

// ------------------------------------------------------------ Sequential

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  for (const auto& [name, layer] : other.layers_) layers_.emplace_back(name, layer->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void Sequential<T>::add(std::string name, std::unique_ptr<Layer<T>> layer) {
  layers_.emplace_back(std::move(name), std::move(layer));
}

template <typename T>
Tensor<T> Sequential<T>::forward(Tensor<T> input, Mode mode) {
  for (auto& [name, layer] : layers_) input = layer->forward(std::move(input), mode);
  return input;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& upstream) {
  Tensor<T> g = upstream;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
  return g;
}

template <typename T>
std::vector<ParamRef<T>> Sequential<T>::parameters() {
  std::vector<ParamRef<T>> out;
  for (auto& [name, layer] : layers_)
    for (auto& p : layer->parameters()) out.push_back({name + "." + p.name, p.tensor});
  return out;
}

template <typename T>
std::vector<ParamRef<T>> Sequential<T>::buffers() {
  std::vector<ParamRef<T>> out;
  for (auto& [name, layer] : layers_)
    for (auto& p : layer->buffers()) out.push_back({name + "." + p.name, p.tensor});
  return out;
}

template <typename T>
std::vector<ParamRef<T>> Sequential<T>::state() {
  auto out = parameters();
  for (auto& b : buffers()) out.push_back(b);
  return out;
}

template <typename T>
std::vector<Shape> Sequential<T>::shape_chain(const Shape& input) const {
  std::vector<Shape> chain{input};
  for (const auto& [name, layer] : layers_) {
    try {
      chain.push_back(layer->output_shape(chain.back()));
    } catch (const Error& e) {
      std::string msg = "infeasible layer shape chain:";
      for (std::size_t i = 0; i + 1 < chain.size(); ++i)
        msg += "\n  " + layers_[i].first + ": " + shape_to_string(chain[i]) + " -> " + shape_to_string(chain[i + 1]);
      msg += "\n  " + name + ": " + e.what();
      fail(ErrorKind::config, msg);
    }
  }
  return chain;
}

#define NLEKIT_INSTANTIATE(T)                                                  \
  template class Layer<T>;                                                     \
  template class Conv2d<T>;                                                    \
  template class BatchNorm<T>;                                                 \
  template class Relu<T>;                                                      \
  template class MaxPool2d<T>;                                                 \
  template class Flatten<T>;                                                   \
  template class Dense<T>;                                                     \
  template class Softmax<T>;                                                   \
  template class Sequential<T>;                                                \
  template void kaiming_uniform_init<T>(Tensor<T>&, std::size_t, std::uint64_t);

NLEKIT_INSTANTIATE(float)
NLEKIT_INSTANTIATE(double)
NLEKIT_INSTANTIATE(long double)

#undef NLEKIT_INSTANTIATE

}  // namespace nlekit::diffcore
