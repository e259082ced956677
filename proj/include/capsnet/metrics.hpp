#pragma once

#include <string>
#include <vector>

#include "capsnet/train.hpp"

namespace capsnet {

struct ConfusionMatrix {
  Index num_classes = 0;
  std::vector<Index> counts;  // row = true class, col = predicted

  Index& at(Index truth, Index pred) { return counts[truth * num_classes + pred]; }
  Index at(Index truth, Index pred) const { return counts[truth * num_classes + pred]; }
  Index total() const;
  Index trace() const;
};

ConfusionMatrix confusion(const std::vector<Index>& preds, const std::vector<Index>& truths,
                          Index num_classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // class absent from both truths and predictions
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double intent_detection_rate = 0.0;  // macro-averaged recall (defined here; see README)
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix cm;
};

MetricsReport metrics(const ConfusionMatrix& cm);

/// JSON with fixed keys: accuracy, macro_f1, intent_detection_rate, per_class, confusion.
std::string metrics_to_json(const MetricsReport& report, const std::vector<std::string>& labels);

struct SweepRow {
  Index routing_iters;
  double accuracy;
};

/// Trains one model per r (identical seed and config otherwise) and reports
/// test accuracy of the best-validation checkpoint.
std::vector<SweepRow> routing_sweep(const ModelConfig& cfg, const TrainConfig& tcfg,
                                    const std::vector<EncodedUtterance>& train_set,
                                    const std::vector<EncodedUtterance>& val_set,
                                    const std::vector<EncodedUtterance>& test_set,
                                    const std::vector<std::string>& vocab_tokens,
                                    const std::vector<std::string>& labels,
                                    const std::vector<Index>& r_values);

/// CSV with header exactly: r,accuracy
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace capsnet
