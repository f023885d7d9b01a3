#include <algorithm>
#include <cstring>

#include "bcnn/layers.hpp"
#include "gemm.hpp"

namespace bcnn {

namespace {

using detail::gemm;
using detail::Trans;

constexpr std::size_t kTaps = 9;
// Upper bound on im2col buffer elements; samples are processed in chunks
// so that deep, wide layers never materialize the full batch.
constexpr std::size_t kColsBudget = std::size_t{1} << 21;

// Rows are output pixels (sample, h, w); columns are (dh, dw, c).
template <typename T>
void im2col(const T* input, std::size_t samples, std::size_t height, std::size_t width,
            std::size_t channels, T* cols) {
  const std::size_t row_len = kTaps * channels;
  for (std::size_t s = 0; s < samples; ++s) {
    const T* image = input + s * height * width * channels;
    for (std::size_t h = 0; h < height; ++h) {
      for (std::size_t w = 0; w < width; ++w) {
        T* row = cols + ((s * height + h) * width + w) * row_len;
        for (std::size_t dh = 0; dh < 3; ++dh) {
          for (std::size_t dw = 0; dw < 3; ++dw) {
            T* dst = row + (dh * 3 + dw) * channels;
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h + dh) - 1;
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(w + dw) - 1;
            if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(height) ||
                iw >= static_cast<std::ptrdiff_t>(width)) {
              std::fill(dst, dst + channels, T{0});
            } else {
              std::memcpy(dst, image + (static_cast<std::size_t>(ih) * width + static_cast<std::size_t>(iw)) * channels,
                          channels * sizeof(T));
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::size_t samples, std::size_t height, std::size_t width,
                std::size_t channels, T* grad_input) {
  const std::size_t row_len = kTaps * channels;
  for (std::size_t s = 0; s < samples; ++s) {
    T* image = grad_input + s * height * width * channels;
    for (std::size_t h = 0; h < height; ++h) {
      for (std::size_t w = 0; w < width; ++w) {
        const T* row = cols + ((s * height + h) * width + w) * row_len;
        for (std::size_t dh = 0; dh < 3; ++dh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(h + dh) - 1;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t dw = 0; dw < 3; ++dw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(w + dw) - 1;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
            const T* src = row + (dh * 3 + dw) * channels;
            T* dst = image + (static_cast<std::size_t>(ih) * width + static_cast<std::size_t>(iw)) * channels;
            for (std::size_t c = 0; c < channels; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t filters, Rng& rng)
    : Conv2d(he_init<T>({3, 3, in_channels, filters}, kTaps * in_channels, rng),
             BasicTensor<T>({filters})) {}

template <typename T>
Conv2d<T>::Conv2d(BasicTensor<T> kernel, BasicTensor<T> bias)
    : kernel_(std::move(kernel)), bias_(std::move(bias)) {
  if (kernel_.rank() != 4 || kernel_.dim(0) != 3 || kernel_.dim(1) != 3) {
    throw ShapeError("conv2d kernel must be [3, 3, C, F], got " + shape_to_string(kernel_.shape()));
  }
  if (bias_.shape() != Shape{kernel_.dim(3)}) {
    throw ShapeError("conv2d bias must be [" + std::to_string(kernel_.dim(3)) + "], got " +
                     shape_to_string(bias_.shape()));
  }
  kernel_grad_ = BasicTensor<T>(kernel_.shape());
  bias_grad_ = BasicTensor<T>(bias_.shape());
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& input) const {
  if (input.size() != 4) throw ShapeError("conv2d expects NHWC input, got " + shape_to_string(input));
  if (input[3] != in_channels()) {
    throw ShapeError("conv2d channel mismatch: input has " + std::to_string(input[3]) +
                     " channels, kernel expects " + std::to_string(in_channels()));
  }
  return {input[0], input[1], input[2], filters()};
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& input, Mode) {
  BasicTensor<T> out(output_shape(input.shape()));
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const std::size_t f = filters(), pixels = h * w, row_len = kTaps * c;

  for (std::size_t p = 0; p < n * pixels; ++p) {
    std::copy(bias_.raw(), bias_.raw() + f, out.raw() + p * f);
  }
  const std::size_t chunk = std::clamp<std::size_t>(kColsBudget / (pixels * row_len), 1, n);
  std::vector<T> cols(chunk * pixels * row_len);
  for (std::size_t s0 = 0; s0 < n; s0 += chunk) {
    const std::size_t nb = std::min(chunk, n - s0);
    im2col(input.raw() + s0 * pixels * c, nb, h, w, c, cols.data());
    gemm(Trans::No, Trans::No, nb * pixels, f, row_len, T{1}, cols.data(), row_len, kernel_.raw(), f,
         T{1}, out.raw() + s0 * pixels * f, f);
  }
  input_ = input;
  return out;
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& grad_output) {
  const Shape expected = output_shape(input_.shape());
  if (grad_output.shape() != expected) {
    throw ShapeError("conv2d backward: gradient shape " + shape_to_string(grad_output.shape()) +
                     " does not match output " + shape_to_string(expected));
  }
  const std::size_t n = input_.dim(0), h = input_.dim(1), w = input_.dim(2), c = input_.dim(3);
  const std::size_t f = filters(), pixels = h * w, row_len = kTaps * c;

  kernel_grad_.fill(T{0});
  bias_grad_.fill(T{0});
  for (std::size_t p = 0; p < n * pixels; ++p) {
    const T* g = grad_output.raw() + p * f;
    for (std::size_t j = 0; j < f; ++j) bias_grad_[j] += g[j];
  }

  BasicTensor<T> grad_input(input_.shape());
  const std::size_t chunk = std::clamp<std::size_t>(kColsBudget / (pixels * row_len), 1, n);
  std::vector<T> cols(chunk * pixels * row_len), grad_cols(chunk * pixels * row_len);
  for (std::size_t s0 = 0; s0 < n; s0 += chunk) {
    const std::size_t nb = std::min(chunk, n - s0);
    const std::size_t rows = nb * pixels;
    const T* g = grad_output.raw() + s0 * pixels * f;
    im2col(input_.raw() + s0 * pixels * c, nb, h, w, c, cols.data());
    gemm(Trans::Yes, Trans::No, row_len, f, rows, T{1}, cols.data(), row_len, g, f, T{1},
         kernel_grad_.raw(), f);
    gemm(Trans::No, Trans::Yes, rows, row_len, f, T{1}, g, f, kernel_.raw(), f, T{0},
         grad_cols.data(), row_len);
    col2im_add(grad_cols.data(), nb, h, w, c, grad_input.raw() + s0 * pixels * c);
  }
  return grad_input;
}

template <typename T>
std::vector<ParamRef<T>> Conv2d<T>::parameters() {
  return {{"weight", &kernel_, &kernel_grad_}, {"bias", &bias_, &bias_grad_}};
}

template class Conv2d<float>;
template class Conv2d<double>;

}  // namespace bcnn
