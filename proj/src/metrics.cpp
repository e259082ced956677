#include "capsnet/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

using nlohmann::json;

namespace capsnet {

Index ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), Index{0}); }

Index ConfusionMatrix::trace() const {
  Index t = 0;
  for (Index j = 0; j < num_classes; ++j) t += at(j, j);
  return t;
}

ConfusionMatrix confusion(const std::vector<Index>& preds, const std::vector<Index>& truths,
                          Index num_classes) {
  if (preds.size() != truths.size())
    throw DataError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                    std::to_string(truths.size()) + " truths");
  ConfusionMatrix cm{num_classes, std::vector<Index>(static_cast<std::size_t>(num_classes * num_classes), 0)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (truths[i] < 0 || truths[i] >= num_classes || preds[i] < 0 || preds[i] >= num_classes)
      throw DataError("confusion: class index out of range at pair " + std::to_string(i));
    ++cm.at(truths[i], preds[i]);
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("metrics: empty confusion matrix");
  MetricsReport rep;
  rep.cm = cm;
  const Index J = cm.num_classes;
  rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  double f1_sum = 0.0, recall_sum = 0.0;
  for (Index j = 0; j < J; ++j) {
    Index col_sum = 0, row_sum = 0;
    for (Index k = 0; k < J; ++k) {
      col_sum += cm.at(k, j);
      row_sum += cm.at(j, k);
    }
    ClassMetrics c;
    c.degenerate = (col_sum == 0 && row_sum == 0);
    const double diag = static_cast<double>(cm.at(j, j));
    c.precision = col_sum > 0 ? diag / static_cast<double>(col_sum) : 0.0;
    c.recall = row_sum > 0 ? diag / static_cast<double>(row_sum) : 0.0;
    c.f1 = (c.precision + c.recall) > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
                                          : 0.0;
    f1_sum += c.f1;
    recall_sum += c.recall;
    rep.per_class.push_back(c);
  }
  rep.macro_f1 = f1_sum / static_cast<double>(J);
  rep.intent_detection_rate = recall_sum / static_cast<double>(J);
  return rep;
}

std::string metrics_to_json(const MetricsReport& rep, const std::vector<std::string>& labels) {
  json out;
  out["accuracy"] = rep.accuracy;
  out["macro_f1"] = rep.macro_f1;
  out["intent_detection_rate"] = rep.intent_detection_rate;
  json per_class = json::array();
  for (std::size_t j = 0; j < rep.per_class.size(); ++j) {
    const auto& c = rep.per_class[j];
    per_class.push_back({{"label", j < labels.size() ? labels[j] : std::to_string(j)},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"degenerate", c.degenerate}});
  }
  out["per_class"] = per_class;
  json confusion_rows = json::array();
  for (Index t = 0; t < rep.cm.num_classes; ++t) {
    json row = json::array();
    for (Index p = 0; p < rep.cm.num_classes; ++p) row.push_back(rep.cm.at(t, p));
    confusion_rows.push_back(row);
  }
  out["confusion"] = confusion_rows;
  return out.dump(2);
}

std::vector<SweepRow> routing_sweep(const ModelConfig& cfg, const TrainConfig& tcfg,
                                    const std::vector<EncodedUtterance>& train_set,
                                    const std::vector<EncodedUtterance>& val_set,
                                    const std::vector<EncodedUtterance>& test_set,
                                    const std::vector<std::string>& vocab_tokens,
                                    const std::vector<std::string>& labels,
                                    const std::vector<Index>& r_values) {
  if (r_values.empty()) throw ConfigError("routing sweep: no r values given");
  std::vector<SweepRow> rows;
  for (Index r : r_values) {
    if (r < 1) throw ConfigError("routing sweep: r must be >= 1");
    ModelConfig run_cfg = cfg;
    run_cfg.routing_iters = r;
    std::mt19937_64 rng(tcfg.seed);
    ModelParams params =
        ModelParams::init(run_cfg, static_cast<Index>(vocab_tokens.size()), rng);
    TrainResult result = train(std::move(params), run_cfg, train_set, val_set, tcfg,
                               vocab_tokens, labels);
    rows.push_back({r, accuracy_of(result.best.params, run_cfg, test_set)});
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write sweep CSV to " + path);
  out << "r,accuracy\n";
  char buf[80];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.9g\n", static_cast<long long>(row.routing_iters),
                  row.accuracy);
    out << buf;
  }
}

}  // namespace capsnet
