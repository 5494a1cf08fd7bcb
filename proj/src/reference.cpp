#include "vapf/reference.hpp"

#include <algorithm>
#include <cmath>

#include "vapf/errors.hpp"

namespace vapf::reference {

namespace {

const Tensor& param(const ParameterStore& s, const std::string& name) {
  if (!s.contains(name)) throw ContractError("reference: missing parameter '" + name + "'");
  return s.get(name);
}

Mat add(const Mat& a, const Mat& b) {
  Mat out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] + b.v[i];
  return out;
}

// x[rows, cols_a] against y[rows2, cols_a]: out[i][j] = sum_p x[i][off+p] * y[j][off+p].
Mat scores(const Mat& x, const Mat& y, std::size_t off, std::size_t width, double inv) {
  Mat out(x.rows, y.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < y.rows; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < width; ++p) acc += x(i, off + p) * y(j, off + p);
      out(i, j) = acc * inv;
    }
  return out;
}

Mat feed_forward(const ParameterStore& s, const std::string& prefix, const Mat& x) {
  Mat h = linear(s, prefix + ".fc1", x);
  for (auto& e : h.v) e = gelu(e);
  return linear(s, prefix + ".fc2", h);
}

Mat attention(const ParameterStore& s, const std::string& prefix, const Mat& x,
              std::size_t heads) {
  const Mat q = linear(s, prefix + ".q", x);
  const Mat k = linear(s, prefix + ".k", x);
  const Mat v = linear(s, prefix + ".v", x);
  const std::size_t dh = x.cols / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat cat(x.rows, x.cols);
  for (std::size_t h = 0; h < heads; ++h) {
    Mat a = scores(q, k, h * dh, dh, inv);
    softmax_rows(a);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t d = 0; d < dh; ++d) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.rows; ++j) acc += a(i, j) * v(j, h * dh + d);
        cat(i, h * dh + d) = acc;
      }
  }
  return linear(s, prefix + ".out", cat);
}

}  // namespace

Mat from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("reference::from_tensor needs rank 2");
  Mat m(t.dim(0), t.dim(1));
  std::copy(t.data().begin(), t.data().end(), m.v.begin());
  return m;
}

Mat linear(const ParameterStore& s, const std::string& prefix, const Mat& x) {
  const Tensor& w = param(s, prefix + ".w");
  const Tensor& b = param(s, prefix + ".b");
  const std::size_t n = w.dim(1);
  Mat out(x.rows, n);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < x.cols; ++p) acc += x(i, p) * w.at(p, j);
      out(i, j) = acc + b[j];
    }
  return out;
}

Mat layer_norm(const ParameterStore& s, const std::string& prefix, const Mat& x, double eps) {
  const Tensor& g = param(s, prefix + ".gamma");
  const Tensor& b = param(s, prefix + ".beta");
  Mat out(x.rows, x.cols);
  const double n = static_cast<double>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) mu += x(i, j);
    mu /= n;
    double var = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= n;
    const double rs = 1.0 / std::sqrt(var + eps);
    const bool flat = std::all_of(x.v.begin() + static_cast<std::ptrdiff_t>(i * x.cols),
                                  x.v.begin() + static_cast<std::ptrdiff_t>((i + 1) * x.cols),
                                  [&](double e) { return e == x(i, 0); });
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double xh = flat ? 0.0 : (x(i, j) - mu) * rs;
      out(i, j) = xh * g[j] + b[j];
    }
  }
  return out;
}

void softmax_rows(Mat& x) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      x(i, j) = std::exp(x(i, j) - mx);
      total += x(i, j);
    }
    for (std::size_t j = 0; j < x.cols; ++j) x(i, j) /= total;
  }
}

double gelu(double x) {
  const double c = 0.7978845608028654;
  const double u = c * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

Mat transformer_layer(const ParameterStore& s, const std::string& prefix, const Mat& x,
                      std::size_t heads) {
  Mat h = add(x, attention(s, prefix + ".attn", layer_norm(s, prefix + ".ln1", x), heads));
  return add(h, feed_forward(s, prefix + ".ffn", layer_norm(s, prefix + ".ln2", h)));
}

Mat epa_block(const ParameterStore& s, const std::string& prefix, const Mat& x) {
  const Mat z = layer_norm(s, prefix + ".ln1", x);
  const Mat q = linear(s, prefix + ".q_shared", z);
  const Mat k = linear(s, prefix + ".k_shared", z);
  const std::size_t t = x.rows, c = x.cols;

  // spatial branch
  Mat a = scores(q, k, 0, c, 1.0 / std::sqrt(static_cast<double>(c)));
  softmax_rows(a);
  const Mat vs = linear(s, prefix + ".v_spatial", z);
  Mat sp(t, c);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t d = 0; d < c; ++d) {
      double acc = 0.0;
      for (std::size_t j = 0; j < t; ++j) acc += a(i, j) * vs(j, d);
      sp(i, d) = acc;
    }
  sp = linear(s, prefix + ".out_spatial", sp);

  // channel branch
  const double inv = 1.0 / std::sqrt(static_cast<double>(t));
  Mat ac(c, c);
  for (std::size_t c1 = 0; c1 < c; ++c1)
    for (std::size_t c2 = 0; c2 < c; ++c2) {
      double acc = 0.0;
      for (std::size_t r = 0; r < t; ++r) acc += q(r, c1) * k(r, c2);
      ac(c1, c2) = acc * inv;
    }
  softmax_rows(ac);
  const Mat vc = linear(s, prefix + ".v_channel", z);
  Mat ch(t, c);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c1 = 0; c1 < c; ++c1) {
      double acc = 0.0;
      for (std::size_t c2 = 0; c2 < c; ++c2) acc += vc(r, c2) * ac(c1, c2);
      ch(r, c1) = acc;
    }
  ch = linear(s, prefix + ".out_channel", ch);

  const Mat y = add(x, add(sp, ch));
  return add(y, feed_forward(s, prefix + ".ffn", layer_norm(s, prefix + ".ln2", y)));
}

Mat visual_encoder(const ParameterStore& s, const VisualEncoderConfig& cfg,
                   const std::vector<double>& volume) {
  const auto [D, H, W] = cfg.volume;
  if (volume.size() != D * H * W) throw ShapeError("reference: volume size mismatch");
  const std::size_t p = cfg.patch;
  Mat x;
  for (std::size_t st = 0; st < cfg.widths.size(); ++st) {
    const auto g = cfg.grid(st);
    Mat rows;
    if (st == 0) {
      rows = Mat(g[0] * g[1] * g[2], p * p * p);
      for (std::size_t tz = 0; tz < g[0]; ++tz)
        for (std::size_t ty = 0; ty < g[1]; ++ty)
          for (std::size_t tx = 0; tx < g[2]; ++tx) {
            const std::size_t tok = (tz * g[1] + ty) * g[2] + tx;
            std::size_t col = 0;
            for (std::size_t a = 0; a < p; ++a)
              for (std::size_t b = 0; b < p; ++b)
                for (std::size_t c = 0; c < p; ++c)
                  rows(tok, col++) = volume[((tz * p + a) * H + ty * p + b) * W + tx * p + c];
          }
    } else {
      const std::size_t f = cfg.downsample;
      const auto pg = cfg.grid(st - 1);
      const std::size_t ch = x.cols;
      rows = Mat(g[0] * g[1] * g[2], f * f * f * ch);
      for (std::size_t tz = 0; tz < g[0]; ++tz)
        for (std::size_t ty = 0; ty < g[1]; ++ty)
          for (std::size_t tx = 0; tx < g[2]; ++tx) {
            const std::size_t tok = (tz * g[1] + ty) * g[2] + tx;
            std::size_t col = 0;
            for (std::size_t a = 0; a < f; ++a)
              for (std::size_t b = 0; b < f; ++b)
                for (std::size_t c = 0; c < f; ++c) {
                  const std::size_t src = ((tz * f + a) * pg[1] + ty * f + b) * pg[2] + tx * f + c;
                  for (std::size_t k = 0; k < ch; ++k) rows(tok, col++) = x(src, k);
                }
          }
    }
    const std::string sp = "vis.stage" + std::to_string(st);
    x = add(linear(s, sp + ".embed", rows), from_tensor(param(s, sp + ".pos")));
    for (std::size_t b = 0; b < cfg.blocks_per_stage; ++b) {
      x = epa_block(s, sp + ".block" + std::to_string(b), x);
    }
  }
  return x;
}

Mat attribute_encoder(const ParameterStore& s, const AttributeSchema& schema,
                      const AttributeEncoderConfig& cfg, const AttributeRecord& record) {
  const std::size_t m = schema.attributes.size();
  const Tensor& ident = param(s, "tab.embed.identity");
  Mat x(m, cfg.width);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& a = schema.attributes[i];
    const std::string base = "tab.embed." + a.name;
    if (a.kind == AttributeKind::Categorical) {
      const Tensor& table = param(s, base + ".table");
      const auto level = static_cast<std::size_t>(record.values[i]);
      for (std::size_t j = 0; j < cfg.width; ++j) x(i, j) = table.at(level, j) + ident.at(i, j);
    } else {
      const double u = std::clamp((record.values[i] - a.min) / (a.max - a.min), 0.0, 1.0);
      const Tensor& dir = param(s, base + ".dir");
      const Tensor& bias = param(s, base + ".bias");
      for (std::size_t j = 0; j < cfg.width; ++j) x(i, j) = dir[j] * u + bias[j] + ident.at(i, j);
    }
  }
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    x = transformer_layer(s, "tab.layer" + std::to_string(l), x, cfg.heads);
  }
  return x;
}

double model_logit(const ParameterStore& s, const ModelConfig& cfg,
                   const std::vector<double>& volume, const AttributeRecord& record) {
  const Mat pv = linear(s, "fusion.proj_visual", visual_encoder(s, cfg.visual, volume));
  const Mat pt = linear(s, "fusion.proj_tabular",
                        attribute_encoder(s, cfg.schema, cfg.tabular, record));
  const Tensor& cls = param(s, "fusion.cls");
  Mat seq(1 + pv.rows + pt.rows, cfg.fusion.width);
  std::copy(cls.data().begin(), cls.data().end(), seq.v.begin());
  std::copy(pv.v.begin(), pv.v.end(), seq.v.begin() + static_cast<std::ptrdiff_t>(seq.cols));
  std::copy(pt.v.begin(), pt.v.end(),
            seq.v.begin() + static_cast<std::ptrdiff_t>((1 + pv.rows) * seq.cols));
  for (std::size_t l = 0; l < cfg.fusion.depth; ++l) {
    seq = transformer_layer(s, "fusion.layer" + std::to_string(l), seq, cfg.fusion.heads);
  }
  Mat head(1, seq.cols);
  std::copy(seq.v.begin(), seq.v.begin() + static_cast<std::ptrdiff_t>(seq.cols), head.v.begin());
  Mat h = linear(s, "head.fc1", layer_norm(s, "fusion.norm", head));
  for (auto& e : h.v) e = gelu(e);
  return linear(s, "head.fc2", h).v[0];
}

double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) throw MetricError("pairwise_auc: need both classes");
  return wins / static_cast<double>(pairs);
}

ConfusionCounts count_confusion(const std::vector<double>& scores, const std::vector<int>& labels) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= 0.5;
    if (labels[i] == 1) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

}  // namespace vapf::reference
