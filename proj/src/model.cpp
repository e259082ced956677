#include "capsnet/model.hpp"

#include <cmath>

namespace capsnet {

namespace {

using StridedMat = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMat = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Patch matrix for one example: row t = rows t-off .. t-off+ks-1 of x_e,
// zero outside the sequence.
void fill_patches(const double* x_e, Index seq_len, Index d_in, Index ksize, RowMat& patches) {
  const Index off = ksize / 2;
  patches.setZero();
  for (Index t = 0; t < seq_len; ++t)
    for (Index k = 0; k < ksize; ++k) {
      const Index src = t - off + k;
      if (src < 0 || src >= seq_len) continue;
      patches.row(t).segment(k * d_in, d_in) = ConstVecMap(x_e + src * d_in, d_in);
    }
}

}  // namespace

void ModelConfig::validate() const {
  if (d < 1 || max_len < 1 || conv_channels < 1 || kernel_size < 1 || conv_layers < 1 || u < 1 ||
      v_dim < 1 || num_classes < 1)
    throw ConfigError("model config: all dimensions must be positive");
  if (conv_channels % u != 0)
    throw ConfigError("model config: conv_channels (" + std::to_string(conv_channels) +
                      ") must be divisible by capsule dim u (" + std::to_string(u) + ")");
  if (routing_iters < 1) throw ConfigError("model config: routing_iters must be >= 1");
  if (!(0.0 < m_minus && m_minus < m_plus && m_plus < 1.0))
    throw ConfigError("model config: need 0 < m_minus < m_plus < 1");
  if (lambda <= 0.0) throw ConfigError("model config: lambda must be > 0");
}

ModelParams ModelParams::init(const ModelConfig& cfg, Index vocab_size, std::mt19937_64& rng) {
  cfg.validate();
  auto uniform_fill = [&rng](Tensor& t, double lim) {
    std::uniform_real_distribution<double> dist(-lim, lim);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  };
  ModelParams p;
  p.embedding = Tensor::zeros({vocab_size, cfg.d}, true);
  uniform_fill(p.embedding, 0.1);
  std::fill_n(p.embedding.data(), cfg.d, 0.0);  // PAD row
  Index d_in = cfg.d;
  for (Index l = 0; l < cfg.conv_layers; ++l) {
    Tensor k = Tensor::zeros({cfg.conv_channels, cfg.kernel_size * d_in}, true);
    uniform_fill(k, std::sqrt(6.0 / static_cast<double>(cfg.kernel_size * d_in + cfg.conv_channels)));
    p.conv_kernels.push_back(k);
    p.conv_biases.push_back(Tensor::zeros({cfg.conv_channels}, true));
    d_in = cfg.conv_channels;
  }
  const Index blocks = cfg.share_w ? cfg.capsule_maps() : cfg.num_primary();
  p.w = Tensor::zeros({blocks, cfg.num_classes, cfg.v_dim, cfg.u}, true);
  uniform_fill(p.w, std::sqrt(6.0 / static_cast<double>(cfg.u + cfg.v_dim)));
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embedding", embedding);
  for (std::size_t l = 0; l < conv_kernels.size(); ++l) {
    out.emplace_back("conv_kernel_" + std::to_string(l), conv_kernels[l]);
    out.emplace_back("conv_bias_" + std::to_string(l), conv_biases[l]);
  }
  out.emplace_back("w", w);
  return out;
}

ModelParams ModelParams::clone() const {
  auto copy = [](const Tensor& t) {
    return Tensor::from_data(t.shape(), t.data_vec(), t.requires_grad());
  };
  ModelParams p;
  p.embedding = copy(embedding);
  for (const auto& k : conv_kernels) p.conv_kernels.push_back(copy(k));
  for (const auto& b : conv_biases) p.conv_biases.push_back(copy(b));
  p.w = copy(w);
  return p;
}

void ModelParams::set_requires_grad(bool v) {
  for (auto& [name, t] : named()) {
    Tensor tt = t;
    tt.set_requires_grad(v);
  }
}

void ModelParams::zero_grads() {
  for (auto& [name, t] : named()) {
    Tensor tt = t;
    tt.zero_grad();
  }
}

Tensor conv1d_same(Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor& bias,
                   Index batch, Index seq_len) {
  const Index d_in = x.dim(1);
  const Index channels = kernels.dim(0);
  const Index ksize = kernels.dim(1) / d_in;
  if (kernels.dim(1) != ksize * d_in || x.dim(0) != batch * seq_len || bias.size() != channels)
    throw DimensionError("conv1d_same: inconsistent shapes x=" + shape_str(x.shape()) +
                         " k=" + shape_str(kernels.shape()));
  Tensor out = Tensor::zeros({batch * seq_len, channels});
  RowMat patches(seq_len, ksize * d_in);
  ConstMatMap k = kernels.mat(channels, ksize * d_in);
  for (Index e = 0; e < batch; ++e) {
    fill_patches(x.data() + e * seq_len * d_in, seq_len, d_in, ksize, patches);
    MatMap out_e(out.data() + e * seq_len * channels, seq_len, channels);
    out_e.noalias() = patches * k.transpose();
    out_e.rowwise() += bias.vec().transpose();
  }
  if (taped(tape, {x, kernels, bias})) {
    out.set_requires_grad(true);
    Tensor tx = x, tk = kernels, tb = bias, to = out;
    tape.push([tx, tk, tb, to, batch, seq_len, d_in, channels, ksize]() mutable {
      if (!to.has_grad()) return;
      RowMat patches(seq_len, ksize * d_in);
      RowMat dpatches(seq_len, ksize * d_in);
      ConstMatMap k(tk.data(), channels, ksize * d_in);
      const Index off = ksize / 2;
      for (Index e = 0; e < batch; ++e) {
        ConstMatMap g(to.grad() + e * seq_len * channels, seq_len, channels);
        if (tb.requires_grad()) {
          tb.ensure_grad();
          tb.grad_vec_map() += g.colwise().sum().transpose();
        }
        if (tk.requires_grad() || tx.requires_grad())
          fill_patches(tx.data() + e * seq_len * d_in, seq_len, d_in, ksize, patches);
        if (tk.requires_grad()) {
          tk.ensure_grad();
          tk.grad_mat(channels, ksize * d_in).noalias() += g.transpose() * patches;
        }
        if (tx.requires_grad()) {
          tx.ensure_grad();
          dpatches.noalias() = g * k;
          MatMap dx(tx.grad() + e * seq_len * d_in, seq_len, d_in);
          for (Index t = 0; t < seq_len; ++t)
            for (Index kk = 0; kk < ksize; ++kk) {
              const Index src = t - off + kk;
              if (src < 0 || src >= seq_len) continue;
              dx.row(src) += dpatches.row(t).segment(kk * d_in, d_in);
            }
        }
      }
    });
  }
  return out;
}

Tensor squash_rows(Tape& tape, const Tensor& s, Index row_width) {
  if (row_width <= 0 || s.size() % row_width != 0)
    throw DimensionError("squash_rows: row width " + std::to_string(row_width) +
                         " does not divide " + std::to_string(s.size()));
  const Index rows = s.size() / row_width;
  Tensor out = Tensor::zeros({rows, row_width});
  for (Index r = 0; r < rows; ++r) {
    ConstVecMap sr(s.data() + r * row_width, row_width);
    const double n = sr.norm();
    if (n > 0.0) {
      VecMap vr(out.data() + r * row_width, row_width);
      vr = sr * (n / (1.0 + n * n));
      // n^2/(1+n^2) < 1 exactly, but for n beyond ~1e8 the rounded result can
      // reach 1; nudge back inside the open unit ball
      while (vr.norm() >= 1.0) vr *= std::nextafter(1.0, 0.0);
    }
  }
  if (taped(tape, {s})) {
    out.set_requires_grad(true);
    Tensor ts = s, to = out;
    tape.push([ts, to, rows, row_width]() mutable {
      if (!to.has_grad()) return;
      ts.ensure_grad();
      for (Index r = 0; r < rows; ++r) {
        ConstVecMap sr(ts.data() + r * row_width, row_width);
        ConstVecMap g(to.grad() + r * row_width, row_width);
        const double n = sr.norm();
        if (n < 1e-100) continue;  // squash(0) has zero gradient
        const double n2 = n * n;
        const double scale = n / (1.0 + n2);
        // d/ds [s * n/(1+n^2)] = scale*I + (g'(n)/n) * s s^T
        const double coef = (1.0 - n2) / ((1.0 + n2) * (1.0 + n2) * n);
        VecMap(ts.grad() + r * row_width, row_width) += scale * g + (coef * g.dot(sr)) * sr;
      }
    });
  }
  return out;
}

Tensor squash(Tape& tape, const Tensor& s) { return squash_rows(tape, s, s.size()); }

Tensor predict_votes(Tape& tape, const Tensor& u, const Tensor& w, const ModelConfig& cfg,
                     Index batch) {
  const Index n_l = cfg.num_primary(), J = cfg.num_classes, V = cfg.v_dim, ud = cfg.u;
  const Index blocks = cfg.share_w ? cfg.capsule_maps() : n_l;
  if (u.dim(0) != batch * n_l || u.dim(1) != ud || w.size() != blocks * J * V * ud)
    throw DimensionError("predict_votes: inconsistent shapes u=" + shape_str(u.shape()) +
                         " w=" + shape_str(w.shape()));
  Tensor out = Tensor::zeros({batch, n_l, J * V});
  const Eigen::OuterStride<> u_stride(n_l * ud), o_stride(n_l * J * V);
  for (Index i = 0; i < n_l; ++i) {
    const Index blk = cfg.share_w ? i % cfg.capsule_maps() : i;
    ConstMatMap w_i(w.data() + blk * J * V * ud, J * V, ud);
    ConstStridedMat u_i(u.data() + i * ud, batch, ud, u_stride);
    StridedMat out_i(out.data() + i * J * V, batch, J * V, o_stride);
    out_i.noalias() = u_i * w_i.transpose();
  }
  if (taped(tape, {u, w})) {
    out.set_requires_grad(true);
    Tensor tu = u, tw = w, to = out;
    tape.push([tu, tw, to, cfg, batch, n_l, J, V, ud, u_stride, o_stride]() mutable {
      if (!to.has_grad()) return;
      for (Index i = 0; i < n_l; ++i) {
        const Index blk = cfg.share_w ? i % cfg.capsule_maps() : i;
        ConstStridedMat g_i(to.grad() + i * J * V, batch, J * V, o_stride);
        if (tu.requires_grad()) {
          tu.ensure_grad();
          ConstMatMap w_i(tw.data() + blk * J * V * ud, J * V, ud);
          StridedMat du_i(tu.grad() + i * ud, batch, ud, u_stride);
          du_i.noalias() += g_i * w_i;
        }
        if (tw.requires_grad()) {
          tw.ensure_grad();
          ConstStridedMat u_i(tu.data() + i * ud, batch, ud, u_stride);
          MatMap dw_i(tw.grad() + blk * J * V * ud, J * V, ud);
          dw_i.noalias() += g_i.transpose() * u_i;
        }
      }
    });
  }
  return out;
}

Tensor capsule_aggregate(Tape& tape, const Tensor& coupling, const Tensor& votes,
                         const ModelConfig& cfg, Index batch) {
  const Index n_l = cfg.num_primary(), J = cfg.num_classes, V = cfg.v_dim;
  if (coupling.size() != batch * n_l * J || votes.size() != batch * n_l * J * V)
    throw DimensionError("capsule_aggregate: inconsistent shapes c=" + shape_str(coupling.shape()) +
                         " votes=" + shape_str(votes.shape()));
  Tensor out = Tensor::zeros({batch * J, V});
  for (Index b = 0; b < batch; ++b)
    for (Index i = 0; i < n_l; ++i) {
      const double* uh = votes.data() + (b * n_l + i) * J * V;
      const double* c = coupling.data() + (b * n_l + i) * J;
      for (Index j = 0; j < J; ++j)
        VecMap(out.data() + (b * J + j) * V, V) += c[j] * ConstVecMap(uh + j * V, V);
    }
  if (taped(tape, {coupling, votes})) {
    out.set_requires_grad(true);
    Tensor tc = coupling, tv = votes, to = out;
    tape.push([tc, tv, to, batch, n_l, J, V]() mutable {
      if (!to.has_grad()) return;
      if (tc.requires_grad()) tc.ensure_grad();
      if (tv.requires_grad()) tv.ensure_grad();
      for (Index b = 0; b < batch; ++b)
        for (Index i = 0; i < n_l; ++i) {
          const Index row = (b * n_l + i);
          const double* uh = tv.data() + row * J * V;
          const double* c = tc.data() + row * J;
          for (Index j = 0; j < J; ++j) {
            ConstVecMap ds(to.grad() + (b * J + j) * V, V);
            if (tc.requires_grad()) tc.grad()[row * J + j] += ds.dot(ConstVecMap(uh + j * V, V));
            if (tv.requires_grad()) VecMap(tv.grad() + row * J * V + j * V, V) += c[j] * ds;
          }
        }
    });
  }
  return out;
}

Tensor vote_agreement(Tape& tape, const Tensor& votes, const Tensor& capsules,
                      const ModelConfig& cfg, Index batch) {
  const Index n_l = cfg.num_primary(), J = cfg.num_classes, V = cfg.v_dim;
  if (votes.size() != batch * n_l * J * V || capsules.size() != batch * J * V)
    throw DimensionError("vote_agreement: inconsistent shapes");
  Tensor out = Tensor::zeros({batch * n_l, J});
  for (Index b = 0; b < batch; ++b)
    for (Index i = 0; i < n_l; ++i) {
      const double* uh = votes.data() + (b * n_l + i) * J * V;
      double* a = out.data() + (b * n_l + i) * J;
      for (Index j = 0; j < J; ++j)
        a[j] = ConstVecMap(uh + j * V, V).dot(ConstVecMap(capsules.data() + (b * J + j) * V, V));
    }
  if (taped(tape, {votes, capsules})) {
    out.set_requires_grad(true);
    Tensor tv = votes, tc = capsules, to = out;
    tape.push([tv, tc, to, batch, n_l, J, V]() mutable {
      if (!to.has_grad()) return;
      if (tv.requires_grad()) tv.ensure_grad();
      if (tc.requires_grad()) tc.ensure_grad();
      for (Index b = 0; b < batch; ++b)
        for (Index i = 0; i < n_l; ++i) {
          const Index row = (b * n_l + i);
          const double* da = to.grad() + row * J;
          for (Index j = 0; j < J; ++j) {
            if (tv.requires_grad())
              VecMap(tv.grad() + row * J * V + j * V, V) +=
                  da[j] * ConstVecMap(tc.data() + (b * J + j) * V, V);
            if (tc.requires_grad())
              VecMap(tc.grad() + (b * J + j) * V, V) +=
                  da[j] * ConstVecMap(tv.data() + row * J * V + j * V, V);
          }
        }
    });
  }
  return out;
}

Tensor conv_encode(Tape& tape, const Tensor& x, const ModelParams& params, const ModelConfig& cfg,
                   Index batch) {
  Tensor h = x;
  for (std::size_t l = 0; l < params.conv_kernels.size(); ++l) {
    h = conv1d_same(tape, h, params.conv_kernels[l], params.conv_biases[l], batch, cfg.max_len);
    h = relu(tape, h);
  }
  return h;
}

Tensor form_primary_capsules(Tape& tape, const Tensor& features, const ModelConfig& cfg) {
  if (cfg.conv_channels % cfg.u != 0)
    throw ConfigError("form_primary_capsules: conv_channels not divisible by u");
  // Row-major [T x C] storage makes flat u-wide rows exactly the
  // position-major capsule order: capsule (t, m) covers channels [m*u, (m+1)*u).
  return squash_rows(tape, features, cfg.u);
}

RoutingState route(Tape& tape, const Tensor& votes, const ModelConfig& cfg, Index batch,
                   Index routing_iters) {
  if (routing_iters < 1) throw ConfigError("route: need at least one iteration");
  const Index n_l = cfg.num_primary();
  Tape detached;
  detached.recording = false;
  Tape& rt = cfg.stop_gradient_routing ? detached : tape;
  Tensor logits = Tensor::zeros({batch * n_l, cfg.num_classes});
  RoutingState st;
  for (Index it = 0; it < routing_iters; ++it) {
    Tensor c = softmax(rt, logits, 1);
    Tensor s = capsule_aggregate(tape, c, votes, cfg, batch);
    Tensor v = squash_rows(tape, s, cfg.v_dim);
    if (it + 1 < routing_iters) {
      Tensor agree = vote_agreement(rt, votes, v, cfg, batch);
      logits = add(rt, logits, agree);
    }
    st = RoutingState{logits, c, s, v};
  }
  return st;
}

Tensor margin_loss_batch(Tape& tape, const Tensor& norms, const std::vector<Index>& labels,
                         const ModelConfig& cfg) {
  const Index batch = static_cast<Index>(labels.size());
  const Index J = cfg.num_classes;
  if (norms.size() != batch * J)
    throw DimensionError("margin_loss: norms " + shape_str(norms.shape()) + " vs batch " +
                         std::to_string(batch) + " x " + std::to_string(J));
  Tensor pos_mask = Tensor::zeros({batch * J});
  Tensor neg_mask = Tensor::full({batch * J}, cfg.lambda);
  for (Index b = 0; b < batch; ++b) {
    const Index label = labels[static_cast<std::size_t>(b)];
    if (label < 0 || label >= J)
      throw DataError("margin_loss: label " + std::to_string(label) + " out of range [0," +
                      std::to_string(J) + ")");
    pos_mask.data()[b * J + label] = 1.0;
    neg_mask.data()[b * J + label] = 0.0;
  }
  Tensor pos = square(tape, relu(tape, affine(tape, norms, -1.0, cfg.m_plus)));
  Tensor neg = square(tape, relu(tape, affine(tape, norms, 1.0, -cfg.m_minus)));
  Tensor total = sum_all(tape, add(tape, mul(tape, pos, pos_mask), mul(tape, neg, neg_mask)));
  return scalar_mul(tape, total, 1.0 / static_cast<double>(batch));
}

Tensor margin_loss(Tape& tape, const Tensor& norms, Index label, const ModelConfig& cfg) {
  return margin_loss_batch(tape, norms, {label}, cfg);
}

std::pair<Index, double> classify_row(const double* norms, Index num_classes) {
  Index best = 0;
  double best_norm = norms[0];
  for (Index j = 1; j < num_classes; ++j)
    if (norms[j] > best_norm) {
      best = j;
      best_norm = norms[j];
    }
  return {best, best_norm};
}

std::pair<Index, double> classify(const RoutingState& state, const ModelConfig& cfg) {
  std::vector<double> norms(static_cast<std::size_t>(cfg.num_classes));
  for (Index j = 0; j < cfg.num_classes; ++j)
    norms[static_cast<std::size_t>(j)] =
        ConstVecMap(state.capsules.data() + j * cfg.v_dim, cfg.v_dim).norm();
  return classify_row(norms.data(), cfg.num_classes);
}

ForwardResult forward_batch(Tape& tape, const ModelParams& params, const ModelConfig& cfg,
                            std::span<const EncodedUtterance> batch) {
  const Index B = static_cast<Index>(batch.size());
  std::vector<Index> ids;
  ids.reserve(static_cast<std::size_t>(B * cfg.max_len));
  for (const auto& enc : batch) {
    if (static_cast<Index>(enc.ids.size()) != cfg.max_len)
      throw DimensionError("forward: utterance encoded to " + std::to_string(enc.ids.size()) +
                           " ids, config expects " + std::to_string(cfg.max_len));
    ids.insert(ids.end(), enc.ids.begin(), enc.ids.end());
  }
  ForwardResult r;
  r.batch = B;
  Tensor x = gather_rows(tape, params.embedding, ids);
  r.features = conv_encode(tape, x, params, cfg, B);
  r.primary = form_primary_capsules(tape, r.features, cfg);
  if (cfg.mask_padding) {
    const Index maps = cfg.capsule_maps();
    Tensor mask = Tensor::zeros({B * cfg.num_primary(), cfg.u});
    for (Index b = 0; b < B; ++b)
      for (Index t = 0; t < batch[static_cast<std::size_t>(b)].true_length; ++t)
        std::fill_n(mask.data() + ((b * cfg.max_len + t) * maps) * cfg.u, maps * cfg.u, 1.0);
    r.primary = mul(tape, r.primary, mask);
  }
  r.votes = predict_votes(tape, r.primary, params.w, cfg, B);
  r.state = route(tape, r.votes, cfg, B, cfg.routing_iters);
  r.norms = rowwise_l2_norm(tape, r.state.capsules, cfg.v_dim);
  return r;
}

ForwardResult forward(Tape& tape, const ModelParams& params, const ModelConfig& cfg,
                      const EncodedUtterance& enc) {
  return forward_batch(tape, params, cfg, std::span<const EncodedUtterance>(&enc, 1));
}

}  // namespace capsnet
