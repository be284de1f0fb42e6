#pragma once

// Shared test utilities. The reference implementations here are written as
// plain loops, independent of the library's Eigen and tape code paths, so
// they can serve as oracles.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "faser/encoder.hpp"
#include "faser/ingest.hpp"
#include "faser/loss.hpp"
#include "faser/tensor.hpp"
#include "faser/types.hpp"

namespace faser::testing {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::string tmpl = (base / "faser_test_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline RawFunction make_raw(std::string name, std::string arch,
                            std::vector<EsilInstruction> instrs,
                            std::string binary_id = "bin0") {
  RawFunction f;
  f.name = std::move(name);
  f.meta.binary_id = std::move(binary_id);
  f.meta.architecture = std::move(arch);
  f.meta.bitness = 32;
  f.meta.compiler = "cc";
  f.meta.opt_level = "O0";
  f.instructions = std::move(instrs);
  return f;
}

inline NormalizedFunction make_normalized(std::string label, std::string body,
                                          std::string arch = "arm32",
                                          std::string binary_id = "bin0") {
  NormalizedFunction f;
  f.label = std::move(label);
  f.body = std::move(body);
  f.token_count = static_cast<uint32_t>(count_tokens(f.body));
  f.meta.binary_id = std::move(binary_id);
  f.meta.architecture = std::move(arch);
  f.meta.bitness = 32;
  f.meta.compiler = "cc";
  f.meta.opt_level = "O0";
  return f;
}

// Edit distance over whole tokens, for checking mutation magnitudes.
inline size_t token_levenshtein(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Dense reference attention: builds the full allowed matrix and picks the
// global projections for any pair touching a global position.
inline Tensor reference_attention(const Tensor& ql, const Tensor& kl, const Tensor& vl,
                                  const Tensor& qg, const Tensor& kg, const Tensor& vg,
                                  const std::vector<uint8_t>& mask,
                                  const std::vector<uint8_t>& global, uint32_t window,
                                  uint32_t heads) {
  const size_t len = ql.rows;
  const size_t dim = ql.cols;
  const size_t hd = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const long half = static_cast<long>(window / 2);
  Tensor out = Tensor::zeros(len, dim);
  for (size_t i = 0; i < len; ++i) {
    if (!mask[i]) continue;
    std::vector<size_t> allowed;
    for (size_t j = 0; j < len; ++j) {
      if (!mask[j]) continue;
      long d = static_cast<long>(i) - static_cast<long>(j);
      if (global[i] || global[j] || (d >= -half && d <= half)) allowed.push_back(j);
    }
    for (uint32_t h = 0; h < heads; ++h) {
      std::vector<double> scores(allowed.size());
      double mx = -1e300;
      for (size_t a = 0; a < allowed.size(); ++a) {
        size_t j = allowed[a];
        bool g = global[i] || global[j];
        const float* qrow = (g ? qg : ql).row(i) + h * hd;
        const float* krow = (g ? kg : kl).row(j) + h * hd;
        double dot = 0;
        for (size_t c = 0; c < hd; ++c) dot += static_cast<double>(qrow[c]) * krow[c];
        scores[a] = dot * scale;
        mx = std::max(mx, scores[a]);
      }
      double denom = 0;
      for (double& s : scores) {
        s = std::exp(s - mx);
        denom += s;
      }
      for (size_t a = 0; a < allowed.size(); ++a) {
        size_t j = allowed[a];
        bool g = global[i] || global[j];
        const float* vrow = (g ? vg : vl).row(j) + h * hd;
        double w = scores[a] / denom;
        float* orow = out.row(i) + h * hd;
        for (size_t c = 0; c < hd; ++c)
          orow[c] += static_cast<float>(w * static_cast<double>(vrow[c]));
      }
    }
  }
  return out;
}

namespace refenc {

inline void layer_norm_row(const float* x, const float* gain, const float* bias, size_t n,
                           float* out) {
  double mean = 0;
  for (size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double var = 0;
  for (size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<double>(n);
  double inv = 1.0 / std::sqrt(var + 1e-5);
  for (size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>((x[i] - mean) * inv * gain[i] + bias[i]);
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  Tensor out(x.rows, x.cols);
  for (size_t r = 0; r < x.rows; ++r)
    layer_norm_row(x.row(r), gain.data.data(), bias.data.data(), x.cols, out.row(r));
  return out;
}

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor out(x.rows, w.cols);
  for (size_t r = 0; r < x.rows; ++r)
    for (size_t c = 0; c < w.cols; ++c) {
      double acc = b.data[c];
      for (size_t k = 0; k < x.cols; ++k)
        acc += static_cast<double>(x.at(r, k)) * w.at(k, c);
      out.at(r, c) = static_cast<float>(acc);
    }
  return out;
}

inline float gelu1(float v) {
  return static_cast<float>(0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))));
}

inline Tensor gelu(const Tensor& x) {
  Tensor out(x.rows, x.cols);
  for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = gelu1(x.data[i]);
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows, a.cols);
  for (size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

}  // namespace refenc

// Full eval-mode forward pass for one encoded function, plain loops only.
inline std::vector<float> reference_embed(const EncoderConfig& cfg, const Parameters& p,
                                          const EncodedFunction& enc) {
  using namespace refenc;
  const size_t len = cfg.input_len;
  Tensor x(len, cfg.hidden_dim);
  for (size_t i = 0; i < len; ++i) {
    const float* tok = p.token_embedding.row(enc.ids[i]);
    const float* pos = p.position_embedding.row(i);
    for (size_t c = 0; c < cfg.hidden_dim; ++c) x.at(i, c) = tok[c] + pos[c];
  }
  for (const auto& blk : p.blocks) {
    Tensor h = layer_norm(x, blk.ln1_gain, blk.ln1_bias);
    Tensor ql = linear(h, blk.q_local_w, blk.q_local_b);
    Tensor kl = linear(h, blk.k_local_w, blk.k_local_b);
    Tensor vl = linear(h, blk.v_local_w, blk.v_local_b);
    Tensor qg = cfg.tie_global ? ql : linear(h, blk.q_global_w, blk.q_global_b);
    Tensor kg = cfg.tie_global ? kl : linear(h, blk.k_global_w, blk.k_global_b);
    Tensor vg = cfg.tie_global ? vl : linear(h, blk.v_global_w, blk.v_global_b);
    Tensor attn = reference_attention(ql, kl, vl, qg, kg, vg, enc.attention_mask,
                                      enc.global_mask, cfg.window, cfg.num_heads);
    x = add(x, linear(attn, blk.out_w, blk.out_b));
    Tensor h2 = layer_norm(x, blk.ln2_gain, blk.ln2_bias);
    x = add(x, linear(gelu(linear(h2, blk.fc1_w, blk.fc1_b)), blk.fc2_w, blk.fc2_b));
  }
  Tensor cls(1, cfg.hidden_dim);
  for (size_t c = 0; c < cfg.hidden_dim; ++c) cls.at(0, c) = x.at(0, c);
  Tensor e = linear(gelu(linear(cls, p.head1_w, p.head1_b)), p.head2_w, p.head2_b);
  double norm = 0;
  for (float v : e.data) norm += static_cast<double>(v) * v;
  norm = std::sqrt(norm);
  std::vector<float> out(e.data.begin(), e.data.end());
  if (norm > 0)
    for (float& v : out) v = static_cast<float>(v / norm);
  return out;
}

// Central-difference gradient check over every element of every parameter
// tensor. `loss_fn` must evaluate the full pipeline at the current params.
struct GradCheckResult {
  std::string worst_tensor;
  double worst_rel = 0;
  bool ok = true;
};

template <typename LossFn>
GradCheckResult gradient_check(Parameters& params, Parameters& analytic, LossFn&& loss_fn,
                               float eps = 1e-3f, double rel_tol = 1e-2) {
  GradCheckResult result;
  std::vector<std::pair<std::string, Tensor*>> live, grads;
  params.visit([&](const std::string& n, Tensor& t) { live.emplace_back(n, &t); });
  analytic.visit([&](const std::string& n, Tensor& t) { grads.emplace_back(n, &t); });
  // Central differences of an f32 loss carry noise of about one loss ulp per
  // evaluation; tensors whose true gradient is below that floor (the last
  // block's global key bias cancels exactly in the pooled row's softmax)
  // must not be judged on relative error alone.
  const double loss_scale = std::abs(loss_fn());
  for (size_t ti = 0; ti < live.size(); ++ti) {
    Tensor& t = *live[ti].second;
    const Tensor& g = *grads[ti].second;
    double num = 0, den_fd = 0, den_an = 0;
    for (size_t i = 0; i < t.data.size(); ++i) {
      float saved = t.data[i];
      t.data[i] = saved + eps;
      double up = loss_fn();
      t.data[i] = saved - eps;
      double down = loss_fn();
      t.data[i] = saved;
      double fd = (up - down) / (2.0 * static_cast<double>(eps));
      double an = g.data[i];
      num += (fd - an) * (fd - an);
      den_fd += fd * fd;
      den_an += an * an;
    }
    double diff = std::sqrt(num);
    double denom = std::max(std::sqrt(den_fd), std::sqrt(den_an));
    double atol = 8.0 * loss_scale * 1.19e-7 * std::sqrt(double(t.data.size())) / eps;
    // Violation ratio: > 1 means the tensor fails the atol + rtol bound.
    double rel = diff / (atol + rel_tol * denom);
    if (rel > result.worst_rel) {
      result.worst_rel = rel;
      result.worst_tensor = live[ti].first;
    }
    if (rel > 1.0) result.ok = false;
  }
  return result;
}

}  // namespace faser::testing
