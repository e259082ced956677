#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "capsnet/text.hpp"

namespace capsnet {

struct ModelConfig {
  Index d = 100;            // embedding dim
  Index max_len = 35;       // tokens per utterance after pad/truncate
  Index conv_channels = 256;
  Index kernel_size = 3;
  Index conv_layers = 1;
  Index u = 8;              // primary capsule dim
  Index v_dim = 16;         // output capsule dim
  Index num_classes = 7;    // J
  Index routing_iters = 3;  // r
  double m_plus = 0.9;
  double m_minus = 0.1;
  double lambda = 0.5;
  bool share_w = false;
  bool stop_gradient_routing = false;
  bool mask_padding = false;

  Index capsule_maps() const { return conv_channels / u; }
  Index num_primary() const { return max_len * capsule_maps(); }  // n_l

  void validate() const;
};

struct ModelParams {
  Tensor embedding;                  // [V x d], row 0 (PAD) pinned to zero
  std::vector<Tensor> conv_kernels;  // each [C x ks*d_in], flat (C, ks, d_in)
  std::vector<Tensor> conv_biases;   // each [C]
  Tensor w;                          // [n_l x J x v_dim x u], or [maps x ...] when share_w

  static ModelParams init(const ModelConfig& cfg, Index vocab_size, std::mt19937_64& rng);

  std::vector<std::pair<std::string, Tensor>> named() const;
  ModelParams clone() const;
  void set_requires_grad(bool v);
  void zero_grads();
};

struct RoutingState {
  Tensor logits;    // b, [B*n_l x J]
  Tensor coupling;  // c, [B*n_l x J]; rows on the simplex
  Tensor pre_act;   // s, [B*J x v_dim]
  Tensor capsules;  // v, [B*J x v_dim]; every row norm < 1
};

struct ForwardResult {
  Index batch = 0;
  Tensor features;  // conv output, [B*T x C]
  Tensor primary;   // U, [B*n_l x u]
  Tensor votes;     // u_hat, [B x n_l x J*v_dim] flat
  RoutingState state;
  Tensor norms;     // [B*J]
};

// -- model-specific taped primitives -----------------------------------------

/// Same-padded 1-D convolution along the token axis over full-width rows.
/// x is [batch*seq_len x d_in] flat; kernels [channels x ksize*d_in]; bias [channels].
Tensor conv1d_same(Tape& tape, const Tensor& x, const Tensor& kernels, const Tensor& bias,
                   Index batch, Index seq_len);

/// Squash nonlinearity applied to consecutive rows of length row_width:
/// v = (|s|^2 / (1+|s|^2)) * s/|s|, with squash(0) = 0 and zero gradient there.
Tensor squash_rows(Tape& tape, const Tensor& s, Index row_width);
Tensor squash(Tape& tape, const Tensor& s);

/// Votes u_hat[b,i,j] = W_ij * U[b,i]. u is [B*n_l x u]; returns [B x n_l x J*v_dim].
Tensor predict_votes(Tape& tape, const Tensor& u, const Tensor& w, const ModelConfig& cfg,
                     Index batch);

/// s[b,j] = sum_i c[b,i,j] * u_hat[b,i,j]; c is [B*n_l x J], returns [B*J x v_dim].
Tensor capsule_aggregate(Tape& tape, const Tensor& coupling, const Tensor& votes,
                         const ModelConfig& cfg, Index batch);

/// Agreement a[b,i,j] = u_hat[b,i,j] . v[b,j]; returns [B*n_l x J].
Tensor vote_agreement(Tape& tape, const Tensor& votes, const Tensor& capsules,
                      const ModelConfig& cfg, Index batch);

// -- model pipeline -----------------------------------------------------------

/// Conv stack with ReLU after each layer.
Tensor conv_encode(Tape& tape, const Tensor& x, const ModelParams& params, const ModelConfig& cfg,
                   Index batch);

/// Groups conv channels into u-wide capsules (position-major) and squashes each.
Tensor form_primary_capsules(Tape& tape, const Tensor& features, const ModelConfig& cfg);

/// Routing-by-agreement: b starts at zero; r rounds of softmax -> weighted
/// aggregation -> squash; agreement updates b on all but the final round.
/// Differentiated through unless cfg.stop_gradient_routing.
RoutingState route(Tape& tape, const Tensor& votes, const ModelConfig& cfg, Index batch,
                   Index routing_iters);

/// Margin loss for one example. norms is [J].
Tensor margin_loss(Tape& tape, const Tensor& norms, Index label, const ModelConfig& cfg);

/// Mean margin loss over a batch. norms is [B*J], labels length B.
Tensor margin_loss_batch(Tape& tape, const Tensor& norms, const std::vector<Index>& labels,
                         const ModelConfig& cfg);

/// Argmax of capsule norms; ties broken by lowest index. Returns (class, confidence).
std::pair<Index, double> classify(const RoutingState& state, const ModelConfig& cfg);
std::pair<Index, double> classify_row(const double* norms, Index num_classes);

ForwardResult forward_batch(Tape& tape, const ModelParams& params, const ModelConfig& cfg,
                            std::span<const EncodedUtterance> batch);
ForwardResult forward(Tape& tape, const ModelParams& params, const ModelConfig& cfg,
                      const EncodedUtterance& enc);

}  // namespace capsnet
