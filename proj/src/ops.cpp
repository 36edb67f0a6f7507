#include "sing/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <string>

#include "sing/dsp.hpp"

namespace sing::grad {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMat<T>> as_mat(T* p, std::size_t rows, std::size_t cols) {
  return Eigen::Map<RowMat<T>>(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
Eigen::Map<const RowMat<T>> as_mat(const T* p, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const RowMat<T>>(p, static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(cols));
}

template <typename T>
void require_rank2(const Var<T>& v, const char* op) {
  require(v.defined() && v.value().rank() == 2,
          std::string(op) + " expects a 2-D tensor, got " +
              (v.defined() ? shape_string(v.shape()) : std::string("undefined")));
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& a, Fwd fwd, Deriv deriv) {
  Tensor<T> out(a.shape());
  const Tensor<T>& in = a.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result<T>(std::move(out), {a.node()}, [deriv](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    T* g = p.grad_data();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    }
  });
}

// Columns of a C x T signal gathered into (C*K) x T_out patches.
template <typename T>
void im2col(const T* src, std::size_t channels, std::size_t length, std::size_t kernel,
            std::size_t stride, std::size_t out_len, T* cols) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T* row = src + c * length;
    for (std::size_t k = 0; k < kernel; ++k) {
      T* dst = cols + (c * kernel + k) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) dst[t] = row[t * stride + k];
    }
  }
}

// Adjoint of im2col: scatter-add patches back into a C x T signal.
template <typename T>
void col2im_add(const T* cols, std::size_t channels, std::size_t length, std::size_t kernel,
                std::size_t stride, std::size_t out_len, T* dst) {
  for (std::size_t c = 0; c < channels; ++c) {
    T* row = dst + c * length;
    for (std::size_t k = 0; k < kernel; ++k) {
      const T* src = cols + (c * kernel + k) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) row[t * stride + k] += src[t];
    }
  }
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    for (const auto& p : self.parents) {
      if (!p->requires_grad) continue;
      T* g = p->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    const T sign[2] = {T(1), T(-1)};
    for (std::size_t k = 0; k < 2; ++k) {
      Node<T>& p = *self.parents[k];
      if (!p.requires_grad) continue;
      T* g = p.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    if (pa.requires_grad) {
      T* g = pa.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      T* g = pb.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return unary(a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T offset) {
  return unary(a, [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); },
               [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary(a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
               [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return unary(a, [](T x) { return std::abs(x); },
               [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total = T(0);
  for (T v : a.value().values()) total += v;
  return make_result<T>(Tensor<T>::scalar(total), {a.node()}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    T* g = p.grad_data();
    const T up = self.grad[0];
    for (std::size_t i = 0; i < p.value.size(); ++i) g[i] += up;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  require(a.size() > 0, "mean of an empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimensions differ " + shape_string(a.shape()) + " . " +
                             shape_string(b.shape()));
  Tensor<T> out({m, n});
  as_mat(out.data(), m, n).noalias() = as_mat(a.value().data(), m, k) * as_mat(b.value().data(), k, n);
  return make_result<T>(std::move(out), {a.node(), b.node()}, [m, k, n](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    auto g = as_mat(static_cast<const T*>(self.grad.data()), m, n);
    if (pa.requires_grad) {
      as_mat(pa.grad_data(), m, k).noalias() += g * as_mat(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      as_mat(pb.grad_data(), k, n).noalias() += as_mat(pa.value.data(), m, k).transpose() * g;
    }
  });
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias) {
  require_rank2(x, "add_bias");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  require(bias.size() == rows, "add_bias: bias has " + std::to_string(bias.size()) +
                                   " entries for " + std::to_string(rows) + " rows");
  Tensor<T> out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const T b = bias.value()[r];
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b;
  }
  return make_result<T>(std::move(out), {x.node(), bias.node()}, [rows, cols](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    if (px.requires_grad) {
      T* g = px.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      T* g = pb.grad_data();
      for (std::size_t r = 0; r < rows; ++r) {
        T acc = T(0);
        for (std::size_t c = 0; c < cols; ++c) acc += self.grad[r * cols + c];
        g[r] += acc;
      }
    }
  });
}

template <typename T>
Var<T> mul_window(const Var<T>& x, std::span<const double> window) {
  require(x.value().rank() >= 1 && x.shape().back() == window.size(),
          "mul_window: window length " + std::to_string(window.size()) +
              " does not match last axis of " + shape_string(x.shape()));
  std::vector<T> w(window.begin(), window.end());
  const std::size_t k = w.size();
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= w[i % k];
  return make_result<T>(std::move(out), {x.node()}, [w = std::move(w)](Node<T>& self) {
    T* g = self.parents[0]->grad_data();
    const std::size_t kk = w.size();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * w[i % kk];
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor<T> out({c, r});
  as_mat(out.data(), c, r) = as_mat(a.value().data(), r, c).transpose();
  return make_result<T>(std::move(out), {a.node()}, [r, c](Node<T>& self) {
    as_mat(self.parents[0]->grad_data(), r, c) +=
        as_mat(static_cast<const T*>(self.grad.data()), c, r).transpose();
  });
}

template <typename T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice");
  require(axis < 2, "slice axis must be 0 or 1");
  require(begin < end && end <= a.dim(axis),
          "slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
              shape_string(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  const std::size_t out_rows = axis == 0 ? end - begin : rows;
  const std::size_t out_cols = axis == 1 ? end - begin : cols;
  const std::size_t r0 = axis == 0 ? begin : 0;
  const std::size_t c0 = axis == 1 ? begin : 0;
  Tensor<T> out({out_rows, out_cols});
  for (std::size_t r = 0; r < out_rows; ++r) {
    std::copy_n(a.value().data() + (r + r0) * cols + c0, out_cols, out.data() + r * out_cols);
  }
  return make_result<T>(std::move(out), {a.node()},
                        [cols, out_rows, out_cols, r0, c0](Node<T>& self) {
                          T* g = self.parents[0]->grad_data();
                          for (std::size_t r = 0; r < out_rows; ++r) {
                            T* dst = g + (r + r0) * cols + c0;
                            const T* src = self.grad.data() + r * out_cols;
                            for (std::size_t c = 0; c < out_cols; ++c) dst[c] += src[c];
                          }
                        });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  require(!parts.empty(), "concat of an empty list");
  require(axis < 2, "concat axis must be 0 or 1");
  for (const auto& p : parts) require_rank2(p, "concat");
  const std::size_t other = 1 - axis;
  const std::size_t fixed = parts[0].dim(other);
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.dim(other) == fixed, "concat: mismatched " + shape_string(p.shape()) + " vs " +
                                       shape_string(parts[0].shape()));
    offsets.push_back(total);
    total += p.dim(axis);
  }
  const std::size_t rows = axis == 0 ? total : fixed;
  const std::size_t cols = axis == 1 ? total : fixed;
  Tensor<T> out({rows, cols});
  std::vector<NodePtr<T>> nodes;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& v = parts[k].value();
    const std::size_t pr = v.dim(0), pc = v.dim(1);
    const std::size_t r0 = axis == 0 ? offsets[k] : 0;
    const std::size_t c0 = axis == 1 ? offsets[k] : 0;
    for (std::size_t r = 0; r < pr; ++r) {
      std::copy_n(v.data() + r * pc, pc, out.data() + (r + r0) * cols + c0);
    }
    nodes.push_back(parts[k].node());
  }
  return make_result<T>(std::move(out), std::move(nodes),
                        [axis, cols, offsets](Node<T>& self) {
                          for (std::size_t k = 0; k < self.parents.size(); ++k) {
                            Node<T>& p = *self.parents[k];
                            if (!p.requires_grad) continue;
                            const std::size_t pr = p.value.dim(0), pc = p.value.dim(1);
                            const std::size_t r0 = axis == 0 ? offsets[k] : 0;
                            const std::size_t c0 = axis == 1 ? offsets[k] : 0;
                            T* g = p.grad_data();
                            for (std::size_t r = 0; r < pr; ++r) {
                              const T* src = self.grad.data() + (r + r0) * cols + c0;
                              for (std::size_t c = 0; c < pc; ++c) g[r * pc + c] += src[c];
                            }
                          }
                        });
}

template <typename T>
Var<T> pad_cols(const Var<T>& a, std::size_t left, std::size_t right) {
  require_rank2(a, "pad_cols");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  const std::size_t out_cols = cols + left + right;
  Tensor<T> out({rows, out_cols});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * cols, cols, out.data() + r * out_cols + left);
  }
  return make_result<T>(std::move(out), {a.node()}, [rows, cols, out_cols, left](Node<T>& self) {
    T* g = self.parents[0]->grad_data();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* src = self.grad.data() + r * out_cols + left;
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += src[c];
    }
  });
}

template <typename T>
Var<T> repeat_cols(const Var<T>& column, std::size_t n) {
  require(n > 0, "repeat_cols count must be positive");
  const std::size_t rows = column.size();
  require(column.value().rank() == 1 || (column.value().rank() == 2 && column.dim(1) == 1),
          "repeat_cols expects a column vector, got " + shape_string(column.shape()));
  Tensor<T> out({rows, n});
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(out.data() + r * n, n, column.value()[r]);
  }
  return make_result<T>(std::move(out), {column.node()}, [rows, n](Node<T>& self) {
    T* g = self.parents[0]->grad_data();
    for (std::size_t r = 0; r < rows; ++r) {
      T acc = T(0);
      for (std::size_t c = 0; c < n; ++c) acc += self.grad[r * n + c];
      g[r] += acc;
    }
  });
}

template <typename T>
Var<T> embedding_lookup(const Var<T>& table, std::size_t index) {
  require_rank2(table, "embedding_lookup");
  const std::size_t rows = table.dim(0), width = table.dim(1);
  require(index < rows, "embedding index " + std::to_string(index) + " out of range [0, " +
                            std::to_string(rows) + ")");
  Tensor<T> out({width, 1});
  std::copy_n(table.value().data() + index * width, width, out.data());
  return make_result<T>(std::move(out), {table.node()}, [index, width](Node<T>& self) {
    T* g = self.parents[0]->grad_data() + index * width;
    for (std::size_t e = 0; e < width; ++e) g[e] += self.grad[e];
  });
}

template <typename T>
Var<T> conv1d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias, std::size_t stride) {
  require_rank2(input, "conv1d");
  require(kernel.defined() && kernel.value().rank() == 3,
          "conv1d kernel must be C_out x C_in x K");
  require(stride > 0, "conv1d stride must be positive");
  const std::size_t c_in = input.dim(0), length = input.dim(1);
  const std::size_t c_out = kernel.dim(0), width = kernel.dim(2);
  require(kernel.dim(1) == c_in, "conv1d: kernel expects " + std::to_string(kernel.dim(1)) +
                                     " input channels, got " + std::to_string(c_in));
  require(length >= width, "conv1d: input length " + std::to_string(length) +
                               " is shorter than kernel size " + std::to_string(width));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.size() == c_out, "conv1d: bias size must equal output channels");
  const std::size_t out_len = (length - width) / stride + 1;
  const std::size_t patch = c_in * width;
  const bool direct = width == 1 && stride == 1;

  Tensor<T> cols;
  if (!direct) {
    cols = Tensor<T>({patch, out_len});
    im2col(input.value().data(), c_in, length, width, stride, out_len, cols.data());
  }
  const T* col_ptr = direct ? input.value().data() : cols.data();

  Tensor<T> out({c_out, out_len});
  auto o = as_mat(out.data(), c_out, out_len);
  o.noalias() = as_mat(kernel.value().data(), c_out, patch) * as_mat(col_ptr, patch, out_len);
  if (has_bias) {
    for (std::size_t r = 0; r < c_out; ++r) o.row(static_cast<Eigen::Index>(r)).array() += bias.value()[r];
  }

  std::vector<NodePtr<T>> parents = {input.node(), kernel.node()};
  if (has_bias) parents.push_back(bias.node());
  return make_result<T>(
      std::move(out), std::move(parents),
      [=, cols = std::move(cols)](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pk = *self.parents[1];
        auto g = as_mat(static_cast<const T*>(self.grad.data()), c_out, out_len);
        const T* patches = direct ? px.value.data() : cols.data();
        if (pk.requires_grad) {
          as_mat(pk.grad_data(), c_out, patch).noalias() +=
              g * as_mat(patches, patch, out_len).transpose();
        }
        if (has_bias && self.parents[2]->requires_grad) {
          T* gb = self.parents[2]->grad_data();
          for (std::size_t r = 0; r < c_out; ++r) gb[r] += g.row(static_cast<Eigen::Index>(r)).sum();
        }
        if (px.requires_grad) {
          if (direct) {
            as_mat(px.grad_data(), c_in, length).noalias() +=
                as_mat(pk.value.data(), c_out, patch).transpose() * g;
          } else {
            RowMat<T> dcols = as_mat(pk.value.data(), c_out, patch).transpose() * g;
            col2im_add(dcols.data(), c_in, length, width, stride, out_len, px.grad_data());
          }
        }
      });
}

template <typename T>
Var<T> conv_transpose1d(const Var<T>& input, const Var<T>& kernel, std::size_t stride) {
  require_rank2(input, "conv_transpose1d");
  require(kernel.defined() && kernel.value().rank() == 3,
          "conv_transpose1d kernel must be C_in x C_out x K");
  require(stride > 0, "conv_transpose1d stride must be positive");
  const std::size_t c_in = input.dim(0), steps = input.dim(1);
  const std::size_t c_out = kernel.dim(1), width = kernel.dim(2);
  require(steps >= 1, "conv_transpose1d needs at least one input step");
  require(kernel.dim(0) == c_in, "conv_transpose1d: kernel expects " +
                                     std::to_string(kernel.dim(0)) + " input channels, got " +
                                     std::to_string(c_in));
  const std::size_t length = (steps - 1) * stride + width;
  const std::size_t patch = c_out * width;

  RowMat<T> cols = as_mat(kernel.value().data(), c_in, patch).transpose() *
                   as_mat(input.value().data(), c_in, steps);
  Tensor<T> out({c_out, length});
  col2im_add(cols.data(), c_out, length, width, stride, steps, out.data());

  return make_result<T>(std::move(out), {input.node(), kernel.node()}, [=](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    Node<T>& pk = *self.parents[1];
    RowMat<T> dcols(static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(steps));
    im2col(self.grad.data(), c_out, length, width, stride, steps, dcols.data());
    if (px.requires_grad) {
      as_mat(px.grad_data(), c_in, steps).noalias() += as_mat(pk.value.data(), c_in, patch) * dcols;
    }
    if (pk.requires_grad) {
      as_mat(pk.grad_data(), c_in, patch).noalias() +=
          as_mat(px.value.data(), c_in, steps) * dcols.transpose();
    }
  });
}

template <typename T>
StftParts<T> stft(const Var<T>& signal, std::size_t frame_size, std::size_t hop,
                  std::span<const double> window) {
  require(window.size() == frame_size, "stft: window length must equal frame size");
  require(dsp::is_power_of_two(frame_size) && frame_size >= 2,
          "stft: frame size must be a power of two");
  const std::size_t length = signal.size();
  const std::size_t frames = dsp::frame_count(length, frame_size, hop);
  const std::size_t bins = frame_size / 2 + 1;
  std::vector<double> win(window.begin(), window.end());

  // One node holds [re | im] per frame; the public parts are column slices.
  Tensor<T> packed({frames, 2 * bins});
  std::vector<dsp::Complex> buf(frame_size);
  const T* x = signal.value().data();
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t n = 0; n < frame_size; ++n) {
      buf[n] = dsp::Complex(static_cast<double>(x[f * hop + n]) * win[n], 0.0);
    }
    dsp::fft_inplace(buf);
    T* row = packed.data() + f * 2 * bins;
    for (std::size_t m = 0; m < bins; ++m) {
      row[m] = static_cast<T>(buf[m].real());
      row[bins + m] = static_cast<T>(buf[m].imag());
    }
  }

  Var<T> joint = make_result<T>(
      std::move(packed), {signal.node()},
      [frames, bins, frame_size, hop, win = std::move(win)](Node<T>& self) {
        // dx[n] = w[n] * Re( sum_m conj(G[m]) e^{-2 pi i m n / L} ), G = g_re + i g_im.
        T* g = self.parents[0]->grad_data();
        std::vector<dsp::Complex> b(frame_size);
        for (std::size_t f = 0; f < frames; ++f) {
          const T* row = self.grad.data() + f * 2 * bins;
          std::fill(b.begin(), b.end(), dsp::Complex(0.0, 0.0));
          for (std::size_t m = 0; m < bins; ++m) {
            b[m] = dsp::Complex(static_cast<double>(row[m]), -static_cast<double>(row[bins + m]));
          }
          dsp::fft_inplace(b);
          T* dst = g + f * hop;
          for (std::size_t n = 0; n < frame_size; ++n) dst[n] += static_cast<T>(win[n] * b[n].real());
        }
      });

  Var<T> as_matrix = joint;
  return {slice(as_matrix, 1, 0, bins), slice(as_matrix, 1, bins, 2 * bins)};
}

#define SING_INSTANTIATE_OPS(T)                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, T);                                                   \
  template Var<T> add_scalar(const Var<T>&, T);                                              \
  template Var<T> relu(const Var<T>&);                                                       \
  template Var<T> sigmoid(const Var<T>&);                                                    \
  template Var<T> tanh(const Var<T>&);                                                       \
  template Var<T> log(const Var<T>&);                                                        \
  template Var<T> square(const Var<T>&);                                                     \
  template Var<T> abs(const Var<T>&);                                                        \
  template Var<T> sum(const Var<T>&);                                                        \
  template Var<T> mean(const Var<T>&);                                                       \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                      \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                                    \
  template Var<T> mul_window(const Var<T>&, std::span<const double>);                        \
  template Var<T> transpose(const Var<T>&);                                                  \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t, std::size_t);              \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                           \
  template Var<T> pad_cols(const Var<T>&, std::size_t, std::size_t);                         \
  template Var<T> repeat_cols(const Var<T>&, std::size_t);                                   \
  template Var<T> embedding_lookup(const Var<T>&, std::size_t);                              \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);          \
  template Var<T> conv_transpose1d(const Var<T>&, const Var<T>&, std::size_t);               \
  template StftParts<T> stft(const Var<T>&, std::size_t, std::size_t, std::span<const double>);

SING_INSTANTIATE_OPS(float)
SING_INSTANTIATE_OPS(double)

#undef SING_INSTANTIATE_OPS

}  // namespace sing::grad
