#include "capsnet/train.hpp"

#include <algorithm>
#include <map>
#include <span>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace capsnet {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'P', 'S', 'C', 'K', 'P', 'T'};
constexpr Index kEvalBatch = 64;

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalStats evaluate(const ModelParams& params, const ModelConfig& cfg,
                   const std::vector<EncodedUtterance>& examples) {
  EvalStats stats;
  if (examples.empty()) return stats;
  Tape tape;
  tape.recording = false;
  double loss_sum = 0.0;
  Index correct = 0;
  for (std::size_t start = 0; start < examples.size(); start += kEvalBatch) {
    const std::size_t end = std::min(examples.size(), start + kEvalBatch);
    std::span<const EncodedUtterance> batch(examples.data() + start, end - start);
    std::vector<Index> labels;
    for (const auto& e : batch) labels.push_back(e.intent_id);
    ForwardResult r = forward_batch(tape, params, cfg, batch);
    loss_sum += margin_loss_batch(tape, r.norms, labels, cfg).item() *
                static_cast<double>(batch.size());
    for (Index b = 0; b < r.batch; ++b)
      if (classify_row(r.norms.data() + b * cfg.num_classes, cfg.num_classes).first == labels[b])
        ++correct;
  }
  stats.loss = loss_sum / static_cast<double>(examples.size());
  stats.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return stats;
}

void write_raw(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream& in, void* data, std::size_t bytes, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes))
    throw IoError(std::string("truncated checkpoint while reading ") + what);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("train config: learning_rate must be > 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw ConfigError("train config: adam betas must lie in (0,1)");
}

void AdamState::init(const ModelParams& params) {
  m.clear();
  v.clear();
  t = 0;
  for (const auto& [name, tensor] : params.named()) {
    m.emplace_back(static_cast<std::size_t>(tensor.size()), 0.0);
    v.emplace_back(static_cast<std::size_t>(tensor.size()), 0.0);
  }
}

void adam_step(ModelParams& params, AdamState& state, const TrainConfig& cfg) {
  auto named = params.named();
  if (state.m.size() != named.size()) throw ConfigError("adam state does not match parameters");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < named.size(); ++p) {
    auto& [name, tensor] = named[p];
    Tensor t = tensor;
    t.ensure_grad();
    if (name == "embedding")  // PAD row stays pinned at zero
      std::fill_n(t.grad(), t.shape()[1], 0.0);
    for (Index i = 0; i < t.size(); ++i)
      if (!std::isfinite(t.grad()[i]))
        throw NumericError("non-finite gradient in parameter group '" + name + "'");
    ArrMap g = t.grad_array();
    ArrMap mm(state.m[p].data(), t.size());
    ArrMap vv(state.v[p].data(), t.size());
    mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * g;
    vv = cfg.adam_beta2 * vv + (1.0 - cfg.adam_beta2) * g.square();
    t.array() -= cfg.learning_rate * (mm / bc1) / ((vv / bc2).sqrt() + cfg.adam_eps);
  }
}

Vocabulary Checkpoint::vocabulary() const { return Vocabulary::from_tokens(vocab_tokens); }

TrainResult train(ModelParams params, const ModelConfig& cfg,
                  const std::vector<EncodedUtterance>& train_set,
                  const std::vector<EncodedUtterance>& val_set, const TrainConfig& tcfg,
                  const std::vector<std::string>& vocab_tokens,
                  const std::vector<std::string>& labels) {
  cfg.validate();
  tcfg.validate();
  if (train_set.empty()) throw DataError("train: empty training split");
  const std::vector<EncodedUtterance>& val = val_set.empty() ? train_set : val_set;

  std::mt19937_64 rng(tcfg.seed);
  AdamState opt;
  opt.init(params);

  LossCurve curve;
  ModelParams best_params;
  int best_epoch = 0;
  double best_val_acc = -1.0;
  int epochs_since_improvement = 0;
  bool diverged = false;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= tcfg.epochs && !diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + tcfg.batch_size);
      std::vector<EncodedUtterance> batch;
      std::vector<Index> batch_labels;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_set[order[i]]);
        batch_labels.push_back(train_set[order[i]].intent_id);
      }
      Tape tape;
      ForwardResult r = forward_batch(tape, params, cfg, batch);
      Tensor loss = margin_loss_batch(tape, r.norms, batch_labels, cfg);
      const double l = loss.item();
      if (!std::isfinite(l)) {
        diverged = true;
        break;
      }
      params.zero_grads();
      tape.backward(loss);
      adam_step(params, opt, tcfg);
      loss_sum += l * static_cast<double>(batch.size());
      seen += batch.size();
    }
    if (diverged) break;
    const double train_loss = loss_sum / static_cast<double>(seen);
    const EvalStats vs = evaluate(params, cfg, val);
    curve.push_back({epoch, train_loss, vs.loss, vs.accuracy});
    if (vs.accuracy > best_val_acc) {
      best_val_acc = vs.accuracy;
      best_params = params.clone();
      best_epoch = epoch;
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
    }
    if (tcfg.early_stop_patience > 0 && epochs_since_improvement >= tcfg.early_stop_patience) break;
    if (tcfg.target_train_accuracy > 0.0 &&
        accuracy_of(params, cfg, train_set) >= tcfg.target_train_accuracy)
      break;
  }
  if (best_epoch == 0) {
    if (diverged) throw NumericError("training diverged before completing the first epoch");
    best_params = params.clone();
  }

  TrainResult result;
  std::ostringstream rng_state;
  rng_state << rng;
  result.best = Checkpoint{cfg,       std::move(best_params), vocab_tokens, labels,
                           std::move(opt), best_epoch,        rng_state.str(), curve};
  result.curve = curve;
  return result;
}

std::vector<Index> predict_all(const ModelParams& params, const ModelConfig& cfg,
                               const std::vector<EncodedUtterance>& examples) {
  std::vector<Index> preds;
  preds.reserve(examples.size());
  Tape tape;
  tape.recording = false;
  for (std::size_t start = 0; start < examples.size(); start += kEvalBatch) {
    const std::size_t end = std::min(examples.size(), start + kEvalBatch);
    std::span<const EncodedUtterance> batch(examples.data() + start, end - start);
    ForwardResult r = forward_batch(tape, params, cfg, batch);
    for (Index b = 0; b < r.batch; ++b)
      preds.push_back(classify_row(r.norms.data() + b * cfg.num_classes, cfg.num_classes).first);
  }
  return preds;
}

double accuracy_of(const ModelParams& params, const ModelConfig& cfg,
                   const std::vector<EncodedUtterance>& examples) {
  if (examples.empty()) return 0.0;
  const auto preds = predict_all(params, cfg, examples);
  Index correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (preds[i] == examples[i].intent_id) ++correct;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

std::pair<std::vector<EncodedUtterance>, std::vector<EncodedUtterance>> stratified_split(
    const std::vector<EncodedUtterance>& examples, double val_fraction, std::uint64_t seed) {
  std::map<Index, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) by_class[examples[i].intent_id].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<EncodedUtterance> train, val;
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_val ? val : train).push_back(examples[idx[i]]);
  }
  return {std::move(train), std::move(val)};
}

void write_loss_curve(const LossCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss curve to " + path);
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  char buf[160];
  for (const auto& rec : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", rec.epoch, rec.train_loss, rec.val_loss,
                  rec.val_accuracy);
    out << buf;
  }
}

namespace {

json config_to_json(const ModelConfig& c) {
  return json{{"d", c.d},
              {"max_len", c.max_len},
              {"conv_channels", c.conv_channels},
              {"kernel_size", c.kernel_size},
              {"conv_layers", c.conv_layers},
              {"u", c.u},
              {"v_dim", c.v_dim},
              {"num_classes", c.num_classes},
              {"routing_iters", c.routing_iters},
              {"m_plus", c.m_plus},
              {"m_minus", c.m_minus},
              {"lambda", c.lambda},
              {"share_w", c.share_w},
              {"stop_gradient_routing", c.stop_gradient_routing},
              {"mask_padding", c.mask_padding}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d = j.at("d");
  c.max_len = j.at("max_len");
  c.conv_channels = j.at("conv_channels");
  c.kernel_size = j.at("kernel_size");
  c.conv_layers = j.at("conv_layers");
  c.u = j.at("u");
  c.v_dim = j.at("v_dim");
  c.num_classes = j.at("num_classes");
  c.routing_iters = j.at("routing_iters");
  c.m_plus = j.at("m_plus");
  c.m_minus = j.at("m_minus");
  c.lambda = j.at("lambda");
  c.share_w = j.at("share_w");
  c.stop_gradient_routing = j.at("stop_gradient_routing");
  c.mask_padding = j.at("mask_padding");
  return c;
}

Shape expected_shape(const std::string& name, const ModelConfig& cfg, Index vocab_size) {
  if (name == "embedding") return {vocab_size, cfg.d};
  if (name == "w") {
    const Index blocks = cfg.share_w ? cfg.capsule_maps() : cfg.num_primary();
    return {blocks, cfg.num_classes, cfg.v_dim, cfg.u};
  }
  if (name.starts_with("conv_kernel_")) {
    const Index layer = std::stoll(name.substr(12));
    const Index d_in = layer == 0 ? cfg.d : cfg.conv_channels;
    return {cfg.conv_channels, cfg.kernel_size * d_in};
  }
  if (name.starts_with("conv_bias_")) return {cfg.conv_channels};
  throw IoError("checkpoint names unknown tensor '" + name + "'");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint to " + path);

  const auto named = ckpt.params.named();
  json header;
  header["version"] = Checkpoint::kVersion;
  header["config"] = config_to_json(ckpt.config);
  header["labels"] = ckpt.labels;
  header["vocab"] = ckpt.vocab_tokens;
  header["epoch"] = ckpt.epoch;
  header["rng_state"] = ckpt.rng_state;
  header["adam_t"] = ckpt.opt.t;
  json curve = json::array();
  for (const auto& rec : ckpt.curve)
    curve.push_back({rec.epoch, rec.train_loss, rec.val_loss, rec.val_accuracy});
  header["curve"] = curve;
  json tensors = json::array();
  for (const auto& [name, t] : named) tensors.push_back({{"name", name}, {"shape", t.shape()}});
  header["tensors"] = tensors;
  const std::string header_str = header.dump();

  write_raw(out, kMagic, sizeof(kMagic));
  const std::uint32_t version = Checkpoint::kVersion;
  write_raw(out, &version, sizeof(version));
  const std::uint64_t header_len = header_str.size();
  write_raw(out, &header_len, sizeof(header_len));
  write_raw(out, header_str.data(), header_str.size());
  // little-endian f64 blocks: each parameter, then its Adam moments
  for (std::size_t p = 0; p < named.size(); ++p) {
    const Tensor& t = named[p].second;
    write_raw(out, t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
    write_raw(out, ckpt.opt.m[p].data(), ckpt.opt.m[p].size() * sizeof(double));
    write_raw(out, ckpt.opt.v[p].data(), ckpt.opt.v[p].size() * sizeof(double));
  }
  if (!out) throw IoError("write failure for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint from " + path);
  char magic[8];
  read_raw(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError(path + " is not a checkpoint file");
  std::uint32_t version = 0;
  read_raw(in, &version, sizeof(version), "version");
  if (version != Checkpoint::kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(Checkpoint::kVersion) + ")");
  std::uint64_t header_len = 0;
  read_raw(in, &header_len, sizeof(header_len), "header length");
  std::string header_str(header_len, '\0');
  read_raw(in, header_str.data(), header_len, "header");
  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.labels = header.at("labels").get<std::vector<std::string>>();
  ckpt.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
  ckpt.epoch = header.at("epoch");
  ckpt.rng_state = header.at("rng_state");
  ckpt.opt.t = header.at("adam_t");
  for (const auto& rec : header.at("curve"))
    ckpt.curve.push_back({rec.at(0).get<int>(), rec.at(1).get<double>(), rec.at(2).get<double>(),
                          rec.at(3).get<double>()});

  const Index vocab_size = static_cast<Index>(ckpt.vocab_tokens.size());
  std::vector<std::pair<std::string, Tensor>> loaded;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name");
    const Shape shape = entry.at("shape").get<Shape>();
    const Shape expected = expected_shape(name, ckpt.config, vocab_size);
    if (shape != expected)
      throw IoError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                    " but the stored config requires " + shape_str(expected));
    Tensor t = Tensor::zeros(shape, true);
    read_raw(in, t.data(), static_cast<std::size_t>(t.size()) * sizeof(double), name.c_str());
    std::vector<double> m(static_cast<std::size_t>(t.size())), v(static_cast<std::size_t>(t.size()));
    read_raw(in, m.data(), m.size() * sizeof(double), name.c_str());
    read_raw(in, v.data(), v.size() * sizeof(double), name.c_str());
    ckpt.opt.m.push_back(std::move(m));
    ckpt.opt.v.push_back(std::move(v));
    loaded.emplace_back(name, t);
  }
  for (auto& [name, t] : loaded) {
    if (name == "embedding")
      ckpt.params.embedding = t;
    else if (name == "w")
      ckpt.params.w = t;
    else if (name.starts_with("conv_kernel_"))
      ckpt.params.conv_kernels.push_back(t);
    else if (name.starts_with("conv_bias_"))
      ckpt.params.conv_biases.push_back(t);
  }
  if (!ckpt.params.embedding.defined() || !ckpt.params.w.defined() ||
      ckpt.params.conv_kernels.size() != static_cast<std::size_t>(ckpt.config.conv_layers) ||
      ckpt.params.conv_biases.size() != ckpt.params.conv_kernels.size())
    throw IoError("checkpoint " + path + " is missing parameter tensors");
  return ckpt;
}

}  // namespace capsnet
