#pragma once

#include <optional>
#include <string>
#include <vector>

#include "capsnet/model.hpp"

namespace capsnet {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  int early_stop_patience = 0;          // 0 disables
  double target_train_accuracy = 0.0;   // >0 stops once train accuracy reaches it

  void validate() const;
};

struct EpochRecord {
  int epoch;  // 1-based
  double train_loss;
  double val_loss;
  double val_accuracy;
};
using LossCurve = std::vector<EpochRecord>;

/// Adam with bias correction; one moment pair per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  long long t = 0;

  void init(const ModelParams& params);
};

/// One update from the gradients currently held in the parameter tensors.
/// The PAD embedding row is never updated. Throws NumericError naming the
/// parameter group on a non-finite gradient.
void adam_step(ModelParams& params, AdamState& state, const TrainConfig& cfg);

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig config;
  ModelParams params;
  std::vector<std::string> vocab_tokens;  // full id order including PAD/UNK
  std::vector<std::string> labels;
  AdamState opt;
  int epoch = 0;
  std::string rng_state;
  LossCurve curve;

  Vocabulary vocabulary() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  Checkpoint best;
  LossCurve curve;
};

/// Seeded mini-batch training under the margin loss. Shuffles each epoch,
/// tracks validation loss/accuracy, and returns the best-val-accuracy
/// checkpoint. A NaN train loss aborts with the last good checkpoint.
TrainResult train(ModelParams params, const ModelConfig& cfg,
                  const std::vector<EncodedUtterance>& train_set,
                  const std::vector<EncodedUtterance>& val_set, const TrainConfig& tcfg,
                  const std::vector<std::string>& vocab_tokens,
                  const std::vector<std::string>& labels);

/// Batched no-grad predictions (class index per example).
std::vector<Index> predict_all(const ModelParams& params, const ModelConfig& cfg,
                               const std::vector<EncodedUtterance>& examples);
double accuracy_of(const ModelParams& params, const ModelConfig& cfg,
                   const std::vector<EncodedUtterance>& examples);

/// Seeded stratified split: roughly `val_fraction` of each class goes to the
/// second half of the returned pair.
std::pair<std::vector<EncodedUtterance>, std::vector<EncodedUtterance>> stratified_split(
    const std::vector<EncodedUtterance>& examples, double val_fraction, std::uint64_t seed);

/// CSV with header exactly: epoch,train_loss,val_loss,val_accuracy
void write_loss_curve(const LossCurve& curve, const std::string& path);

}  // namespace capsnet
