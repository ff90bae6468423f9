#include "maven/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maven/error.hpp"
#include "maven/kernels.hpp"

namespace maven::ops {

namespace {

void require_2d(const Tensor& x, const char* op) {
  if (x.ndim() != 2) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected a matrix, got " + shape_str(x.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
}

void add_into(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  const bool track = any_requires_grad({&x});
  Tensor y = make_result(x.shape(), std::move(out), track);
  if (track) {
    record_node(op, {x}, y, [deriv](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const auto& go = n.output->grad;
      const auto& xv = n.inputs[0]->data;
      const auto& yv = n.output->data;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * deriv(xv[i], yv[i]);
    });
  }
  return y;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw Error(ErrorCode::ShapeMismatch,
                "matmul: inner extents differ " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  kernels::matmul(a.data(), b.data(), out, m, k, n);
  const bool track = any_requires_grad({&a, &b});
  Tensor c = make_result({m, n}, std::move(out), track);
  if (track) {
    record_node("matmul", {a, b}, c, [m, k, n](const Node& node) {
      const auto& gc = node.output->grad;
      auto& ta = *node.inputs[0];
      auto& tb = *node.inputs[1];
      if (ta.requires_grad) kernels::matmul_bt(gc, tb.data, ta.ensure_grad(), m, n, k, true);
      if (tb.requires_grad) kernels::matmul_at(ta.data, gc, tb.ensure_grad(), k, m, n, true);
    });
  }
  return c;
}

Tensor transpose(const Tensor& x) {
  require_2d(x, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  const auto in = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  const bool track = any_requires_grad({&x});
  Tensor y = make_result({c, r}, std::move(out), track);
  if (track) {
    record_node("transpose", {x}, y, [r, c](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const auto& go = n.output->grad;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += go[j * r + i];
    });
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  const bool track = any_requires_grad({&a, &b});
  Tensor c = make_result(a.shape(), std::move(out), track);
  if (track) {
    record_node("add", {a, b}, c, [](const Node& n) {
      for (const auto& in : n.inputs) {
        if (in->requires_grad) add_into(in->ensure_grad(), n.output->grad);
      }
    });
  }
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  const bool track = any_requires_grad({&a, &b});
  Tensor c = make_result(a.shape(), std::move(out), track);
  if (track) {
    record_node("sub", {a, b}, c, [](const Node& n) {
      const auto& go = n.output->grad;
      if (n.inputs[0]->requires_grad) add_into(n.inputs[0]->ensure_grad(), go);
      if (n.inputs[1]->requires_grad) {
        auto& gb = n.inputs[1]->ensure_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
      }
    });
  }
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  const bool track = any_requires_grad({&a, &b});
  Tensor c = make_result(a.shape(), std::move(out), track);
  if (track) {
    record_node("mul", {a, b}, c, [](const Node& n) {
      const auto& go = n.output->grad;
      auto& ta = *n.inputs[0];
      auto& tb = *n.inputs[1];
      if (ta.requires_grad) {
        auto& ga = ta.ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * tb.data[i];
      }
      if (tb.requires_grad) {
        auto& gb = tb.ensure_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * ta.data[i];
      }
    });
  }
  return c;
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor;
  const bool track = any_requires_grad({&x});
  Tensor y = make_result(x.shape(), std::move(out), track);
  if (track) {
    record_node("scale", {x}, y, [factor](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const auto& go = n.output->grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
    });
  }
  return y;
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw Error(ErrorCode::ShapeMismatch, "scale_by: factor must have one element");
  const double f = s.item();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * f;
  const bool track = any_requires_grad({&x, &s});
  Tensor y = make_result(x.shape(), std::move(out), track);
  if (track) {
    record_node("scale_by", {x, s}, y, [](const Node& n) {
      const auto& go = n.output->grad;
      auto& tx = *n.inputs[0];
      auto& ts = *n.inputs[1];
      if (tx.requires_grad) {
        auto& gx = tx.ensure_grad();
        const double f = ts.data[0];
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * f;
      }
      if (ts.requires_grad) {
        double acc = 0.0;
        for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * tx.data[i];
        ts.ensure_grad()[0] += acc;
      }
    });
  }
  return y;
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const std::size_t n = x.cols();
  if (row.numel() != n) {
    throw Error(ErrorCode::ShapeMismatch,
                "add_row: row " + shape_str(row.shape()) + " does not broadcast over " + shape_str(x.shape()));
  }
  const std::size_t r = x.numel() / n;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.data()[i * n + j] + row.data()[j];
  const bool track = any_requires_grad({&x, &row});
  Tensor y = make_result(x.shape(), std::move(out), track);
  if (track) {
    record_node("add_row", {x, row}, y, [r, n](const Node& node) {
      const auto& go = node.output->grad;
      if (node.inputs[0]->requires_grad) add_into(node.inputs[0]->ensure_grad(), go);
      if (node.inputs[1]->requires_grad) {
        auto& gb = node.inputs[1]->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += go[i * n + j];
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sin(const Tensor& x) {
  return unary("sin", x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary("cos", x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

Tensor softmax(const Tensor& x, std::span<const unsigned char> mask) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "softmax: non-finite input");
  }
  if (!mask.empty() && mask.size() != x.numel()) {
    throw Error(ErrorCode::ShapeMismatch, "softmax: mask size does not match input");
  }
  const std::size_t cols = x.cols();
  const std::size_t rows = x.numel() / cols;
  if (!mask.empty()) {
    for (std::size_t i = 0; i < rows; ++i) {
      const auto row = mask.subspan(i * cols, cols);
      if (std::none_of(row.begin(), row.end(), [](unsigned char m) { return m != 0; })) {
        throw Error(ErrorCode::ShapeMismatch, "softmax: fully masked row " + std::to_string(i));
      }
    }
  }
  std::vector<double> out(x.numel());
  kernels::softmax_rows(x.data(), mask, out, rows, cols);
  const bool track = any_requires_grad({&x});
  Tensor y = make_result(x.shape(), std::move(out), track);
  if (track) {
    record_node("softmax", {x}, y, [rows, cols](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const auto& go = n.output->grad;
      const auto& yv = n.output->data;
      for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t o = i * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += go[o + j] * yv[o + j];
        for (std::size_t j = 0; j < cols; ++j) gx[o + j] += yv[o + j] * (go[o + j] - dot);
      }
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) {
    throw Error(ErrorCode::ShapeMismatch, "layer_norm: affine parameters must have " + std::to_string(d) + " entries");
  }
  const std::size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  kernels::layer_norm_rows(x.data(), xhat, inv_std, rows, d, eps);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xhat[i * d + j] * gamma.data()[j] + beta.data()[j];
  const bool track = any_requires_grad({&x, &gamma, &beta});
  Tensor y = make_result(x.shape(), std::move(out), track);
  if (track) {
    record_node("layer_norm", {x, gamma, beta}, y,
                [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& n) {
                  const auto& go = n.output->grad;
                  auto& tx = *n.inputs[0];
                  auto& tg = *n.inputs[1];
                  auto& tb = *n.inputs[2];
                  if (tg.requires_grad) {
                    auto& gg = tg.ensure_grad();
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t j = 0; j < d; ++j) gg[j] += go[i * d + j] * xhat[i * d + j];
                  }
                  if (tb.requires_grad) {
                    auto& gb = tb.ensure_grad();
                    for (std::size_t i = 0; i < rows; ++i)
                      for (std::size_t j = 0; j < d; ++j) gb[j] += go[i * d + j];
                  }
                  if (tx.requires_grad) {
                    auto& gx = tx.ensure_grad();
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t i = 0; i < rows; ++i) {
                      const std::size_t o = i * d;
                      double mean_g = 0.0, mean_gx = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double gh = go[o + j] * tg.data[j];
                        mean_g += gh;
                        mean_gx += gh * xhat[o + j];
                      }
                      mean_g *= inv_d;
                      mean_gx *= inv_d;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double gh = go[o + j] * tg.data[j];
                        gx[o + j] += inv_std[i] * (gh - mean_g - xhat[o + j] * mean_gx);
                      }
                    }
                  }
                });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul(x, weight), bias);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != r) throw Error(ErrorCode::ShapeMismatch, "concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].data();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(src.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  const bool track = any_requires_grad(parts);
  Tensor y = make_result({r, total}, std::move(out), track);
  if (track) {
    record_node("concat_cols", parts, y, [r, total, widths](const Node& n) {
      const auto& go = n.output->grad;
      std::size_t off = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (n.inputs[k]->requires_grad) {
          auto& g = n.inputs[k]->ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += go[i * total + off + j];
        }
        off += widths[k];
      }
    });
  }
  return y;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t total_rows = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.cols() != c) throw Error(ErrorCode::ShapeMismatch, "concat_rows: column counts differ");
    total_rows += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const bool track = any_requires_grad(parts);
  Tensor y = make_result({total_rows, c}, std::move(out), track);
  if (track) {
    record_node("concat_rows", parts, y, [](const Node& n) {
      const auto& go = n.output->grad;
      std::size_t off = 0;
      for (const auto& in : n.inputs) {
        const std::size_t len = in->data.size();
        if (in->requires_grad) {
          auto& g = in->ensure_grad();
          for (std::size_t i = 0; i < len; ++i) g[i] += go[off + i];
        }
        off += len;
      }
    });
  }
  return y;
}

Tensor slice_cols(const Tensor& x, std::size_t offset, std::size_t width) {
  require_2d(x, "slice_cols");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (width == 0 || offset + width > c) throw Error(ErrorCode::ShapeMismatch, "slice_cols: range out of bounds");
  std::vector<double> out(r * width);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(x.data().data() + i * c + offset, width, out.data() + i * width);
  const bool track = any_requires_grad({&x});
  Tensor y = make_result({r, width}, std::move(out), track);
  if (track) {
    record_node("slice_cols", {x}, y, [r, c, offset, width](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const auto& go = n.output->grad;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < width; ++j) gx[i * c + offset + j] += go[i * width + j];
    });
  }
  return y;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  const std::size_t c = x.cols();
  const std::size_t r = x.numel() / c;
  if (indices.empty()) throw Error(ErrorCode::ShapeMismatch, "gather_rows: empty index list");
  std::vector<double> out(indices.size() * c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= r) throw Error(ErrorCode::ShapeMismatch, "gather_rows: index out of range");
    std::copy_n(x.data().data() + indices[i] * c, c, out.data() + i * c);
  }
  const bool track = any_requires_grad({&x});
  Tensor y = make_result({indices.size(), c}, std::move(out), track);
  if (track) {
    record_node("gather_rows", {x}, y,
                [c, idx = std::vector<std::size_t>(indices.begin(), indices.end())](const Node& n) {
                  auto& gx = n.inputs[0]->ensure_grad();
                  const auto& go = n.output->grad;
                  for (std::size_t i = 0; i < idx.size(); ++i)
                    for (std::size_t j = 0; j < c; ++j) gx[idx[i] * c + j] += go[i * c + j];
                });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw Error(ErrorCode::ShapeMismatch, "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const bool track = any_requires_grad({&x});
  Tensor y = make_result(std::move(shape), std::move(out), track);
  if (track) {
    record_node("reshape", {x}, y, [](const Node& n) { add_into(n.inputs[0]->ensure_grad(), n.output->grad); });
  }
  return y;
}

Tensor mean_rows(const Tensor& x) {
  const std::size_t c = x.cols();
  const std::size_t r = x.numel() / c;
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x.data()[i * c + j];
  const double inv = 1.0 / static_cast<double>(r);
  for (double& v : out) v *= inv;
  const bool track = any_requires_grad({&x});
  Tensor y = make_result({1, c}, std::move(out), track);
  if (track) {
    record_node("mean_rows", {x}, y, [r, c, inv](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const auto& go = n.output->grad;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += go[j] * inv;
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  const auto d = x.data();
  const double s = std::accumulate(d.begin(), d.end(), 0.0);
  const bool track = any_requires_grad({&x});
  Tensor y = make_result({1}, {s}, track);
  if (track) {
    record_node("sum", {x}, y, [](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const double g = n.output->grad[0];
      for (double& v : gx) v += g;
    });
  }
  return y;
}

Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng) {
  if (mode == Mode::Eval || p <= 0.0) return x;
  if (p >= 1.0) throw Error(ErrorCode::InvalidConfig, "dropout: rate must be below 1");
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
  const bool track = any_requires_grad({&x});
  Tensor y = make_result(x.shape(), std::move(out), track);
  if (track) {
    record_node("dropout", {x}, y, [mask = std::move(mask)](const Node& n) {
      auto& gx = n.inputs[0]->ensure_grad();
      const auto& go = n.output->grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * mask[i];
    });
  }
  return y;
}

Tensor cyclic_shift(const Tensor& x, std::size_t grid_h, std::size_t grid_w, long shift) {
  if (x.rows() != grid_h * grid_w) {
    throw Error(ErrorCode::ShapeMismatch, "cyclic_shift: token count does not match grid");
  }
  const auto h = static_cast<long>(grid_h);
  const auto w = static_cast<long>(grid_w);
  std::vector<std::size_t> idx(grid_h * grid_w);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      const long sr = ((r + shift) % h + h) % h;
      const long sc = ((c + shift) % w + w) % w;
      idx[static_cast<std::size_t>(r * w + c)] = static_cast<std::size_t>(sr * w + sc);
    }
  return gather_rows(x, idx);
}

}  // namespace maven::ops
