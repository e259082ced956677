// Command-line front end: dataset conversion, training, evaluation,
// prediction, routing sweeps and curve export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "capsnet/dataset.hpp"
#include "capsnet/metrics.hpp"
#include "capsnet/synth.hpp"

namespace fs = std::filesystem;
using namespace capsnet;

namespace {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string train_file;
  std::string test_file;
  std::string manifest_file;
  std::string out_dir = "out";
  std::string checkpoint_file;
  std::string pretrained_embeddings;
  int min_freq = 1;
  double val_fraction = 0.1;
  std::string r_values = "1,2,3,4,5";
};

// Guards an output directory against concurrent runs.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(fs::path(dir) / ".lock") {
    fs::create_directories(dir);
    if (fs::exists(path_))
      throw ConfigError("output directory " + dir + " is locked by another run (" +
                        path_.string() + ")");
    std::ofstream(path_) << "locked\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

void add_model_options(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--d", rc.model.d, "embedding dimension");
  cmd->add_option("--max-len", rc.model.max_len, "sequence length after pad/truncate");
  cmd->add_option("--conv-channels", rc.model.conv_channels, "conv output channels");
  cmd->add_option("--kernel-size", rc.model.kernel_size, "conv kernel width in tokens");
  cmd->add_option("--conv-layers", rc.model.conv_layers, "conv stack depth");
  cmd->add_option("--u", rc.model.u, "primary capsule dimension");
  cmd->add_option("--v-dim", rc.model.v_dim, "output capsule dimension");
  cmd->add_option("--routing-iters", rc.model.routing_iters, "dynamic routing iterations");
  cmd->add_option("--m-plus", rc.model.m_plus, "positive margin");
  cmd->add_option("--m-minus", rc.model.m_minus, "negative margin");
  cmd->add_option("--lambda", rc.model.lambda, "negative-term balance factor");
  cmd->add_flag("--share-w", rc.model.share_w, "share W across positions within a capsule map");
  cmd->add_flag("--stop-gradient-routing", rc.model.stop_gradient_routing,
                "treat coupling coefficients as constants in backward");
  cmd->add_flag("--mask-padding", rc.model.mask_padding, "zero capsules at padded positions");
  cmd->add_option("--epochs", rc.train.epochs, "max training epochs");
  cmd->add_option("--batch-size", rc.train.batch_size, "mini-batch size");
  cmd->add_option("--learning-rate", rc.train.learning_rate, "Adam learning rate");
  cmd->add_option("--adam-beta1", rc.train.adam_beta1, "Adam beta1");
  cmd->add_option("--adam-beta2", rc.train.adam_beta2, "Adam beta2");
  cmd->add_option("--adam-eps", rc.train.adam_eps, "Adam epsilon");
  cmd->add_option("--seed", rc.train.seed, "rng seed for init/shuffle/split");
  cmd->add_option("--early-stop-patience", rc.train.early_stop_patience,
                  "stop after N epochs without val improvement (0 = off)");
  cmd->add_option("--target-train-accuracy", rc.train.target_train_accuracy,
                  "stop once train accuracy reaches this value (0 = off)");
  cmd->add_option("--min-freq", rc.min_freq, "vocabulary frequency cutoff");
  cmd->add_option("--val-fraction", rc.val_fraction, "fraction of train carved off for validation");
  cmd->add_option("--pretrained-embeddings", rc.pretrained_embeddings,
                  "optional 'token v1..vd' embedding file");
  cmd->set_config("--config", "", "flat key=value config file; command line overrides");
}

struct PreparedData {
  Manifest manifest;
  Vocabulary vocab;
  std::vector<EncodedUtterance> train_set, val_set;
};

std::vector<EncodedUtterance> encode_dataset(const std::vector<LabeledExample>& examples,
                                             const Vocabulary& vocab, Index max_len) {
  std::vector<EncodedUtterance> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    EncodedUtterance enc = encode(tokenize(ex.text), vocab, max_len);
    enc.intent_id = ex.intent_id;
    out.push_back(std::move(enc));
  }
  return out;
}

PreparedData prepare_training_data(const RunConfig& rc) {
  PreparedData data;
  data.manifest = load_manifest(rc.manifest_file);
  const auto examples = load_dataset(rc.train_file, data.manifest);
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(examples.size());
  for (const auto& ex : examples) corpus.push_back(tokenize(ex.text));
  data.vocab = Vocabulary::build(corpus, rc.min_freq);
  auto encoded = encode_dataset(examples, data.vocab, rc.model.max_len);
  std::tie(data.train_set, data.val_set) =
      stratified_split(encoded, rc.val_fraction, rc.train.seed);
  return data;
}

std::vector<std::string> full_vocab_tokens(const Vocabulary& vocab) { return vocab.tokens(); }

int cmd_train(RunConfig& rc) {
  DirLock lock(rc.out_dir);
  PreparedData data = prepare_training_data(rc);
  ModelConfig cfg = rc.model;
  cfg.num_classes = data.manifest.size();
  std::mt19937_64 rng(rc.train.seed);
  ModelParams params = ModelParams::init(cfg, data.vocab.size(), rng);
  if (!rc.pretrained_embeddings.empty())
    load_pretrained_embeddings(rc.pretrained_embeddings, data.vocab, params.embedding);
  std::cerr << "training on " << data.train_set.size() << " examples (" << data.val_set.size()
            << " validation), vocab " << data.vocab.size() << ", classes " << cfg.num_classes
            << "\n";
  TrainResult result = train(std::move(params), cfg, data.train_set, data.val_set, rc.train,
                             full_vocab_tokens(data.vocab), data.manifest.intents);
  save_checkpoint(result.best, (fs::path(rc.out_dir) / "checkpoint.bin").string());
  write_loss_curve(result.curve, (fs::path(rc.out_dir) / "loss_curve.csv").string());
  data.vocab.save((fs::path(rc.out_dir) / "vocab.txt").string());
  const auto& last = result.curve.back();
  std::cerr << "done: best epoch " << result.best.epoch << ", final val accuracy "
            << last.val_accuracy << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& out_file) {
  Checkpoint ckpt = load_checkpoint(rc.checkpoint_file);
  const Manifest manifest{ckpt.labels};
  const auto examples = load_dataset(rc.test_file, manifest);
  const Vocabulary vocab = ckpt.vocabulary();
  const auto encoded = encode_dataset(examples, vocab, ckpt.config.max_len);
  const auto preds = predict_all(ckpt.params, ckpt.config, encoded);
  std::vector<Index> truths;
  for (const auto& e : encoded) truths.push_back(e.intent_id);
  const MetricsReport report = metrics(confusion(preds, truths, ckpt.config.num_classes));
  const std::string text = metrics_to_json(report, ckpt.labels);
  if (out_file.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(out_file);
    if (!out) throw IoError("cannot write metrics to " + out_file);
    out << text << "\n";
  }
  return 0;
}

int cmd_predict(const RunConfig& rc) {
  Checkpoint ckpt = load_checkpoint(rc.checkpoint_file);
  const Vocabulary vocab = ckpt.vocabulary();
  Tape tape;
  tape.recording = false;
  std::string line;
  while (std::getline(std::cin, line)) {
    const EncodedUtterance enc = encode(tokenize(line), vocab, ckpt.config.max_len);
    const ForwardResult r = forward(tape, ckpt.params, ckpt.config, enc);
    const auto [cls, confidence] = classify(r.state, ckpt.config);
    std::printf("%s\t%.4f\n", ckpt.labels[static_cast<std::size_t>(cls)].c_str(), confidence);
  }
  return 0;
}

int cmd_sweep(RunConfig& rc, const std::string& out_file) {
  DirLock lock(rc.out_dir);
  PreparedData data = prepare_training_data(rc);
  ModelConfig cfg = rc.model;
  cfg.num_classes = data.manifest.size();
  const Manifest manifest = data.manifest;
  const auto test_examples = load_dataset(rc.test_file, manifest);
  const auto test_set = encode_dataset(test_examples, data.vocab, cfg.max_len);

  std::vector<Index> r_values;
  std::stringstream ss(rc.r_values);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) r_values.push_back(std::stoll(item));

  const auto rows = routing_sweep(cfg, rc.train, data.train_set, data.val_set, test_set,
                                  full_vocab_tokens(data.vocab), manifest.intents, r_values);
  const std::string path =
      out_file.empty() ? (fs::path(rc.out_dir) / "sweep.csv").string() : out_file;
  write_sweep_csv(rows, path);
  for (const auto& row : rows)
    std::cerr << "r=" << row.routing_iters << " accuracy=" << row.accuracy << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capsule-network intent classifier"};
  app.require_subcommand(1);
  RunConfig rc;

  auto* convert = app.add_subcommand("convert", "normalize a raw per-intent SNIPS tree");
  std::string raw_dir;
  convert->add_option("--raw-dir", raw_dir, "directory with train_*/validate_* JSON files")
      ->required();
  convert->add_option("--out-dir", rc.out_dir, "where train.jsonl/test.jsonl/manifest.txt go")
      ->required();

  auto* gen = app.add_subcommand("gen-data", "generate the built-in seven-intent demo corpus");
  std::uint64_t gen_seed = 7;
  Index gen_train = 1870, gen_test = 100;
  gen->add_option("--out-dir", rc.out_dir, "raw-format output directory")->required();
  gen->add_option("--seed", gen_seed, "corpus seed");
  gen->add_option("--train-per-intent", gen_train, "train utterances per intent");
  gen->add_option("--test-per-intent", gen_test, "test utterances per intent");

  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + loss curve");
  train_cmd->add_option("--train-file", rc.train_file, "train.jsonl")->required();
  train_cmd->add_option("--manifest", rc.manifest_file, "manifest.txt")->required();
  train_cmd->add_option("--out-dir", rc.out_dir, "output directory");
  add_model_options(train_cmd, rc);

  std::string out_file;
  auto* eval_cmd = app.add_subcommand("eval", "write the metrics report for a checkpoint");
  eval_cmd->add_option("--checkpoint", rc.checkpoint_file, "checkpoint.bin")->required();
  eval_cmd->add_option("--test-file", rc.test_file, "test.jsonl")->required();
  eval_cmd->add_option("--out", out_file, "metrics JSON path (default: stdout)");

  auto* predict_cmd = app.add_subcommand("predict", "stdin utterances -> intent<TAB>confidence");
  predict_cmd->add_option("--checkpoint", rc.checkpoint_file, "checkpoint.bin")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "train once per routing iteration count");
  sweep_cmd->add_option("--train-file", rc.train_file, "train.jsonl")->required();
  sweep_cmd->add_option("--test-file", rc.test_file, "test.jsonl")->required();
  sweep_cmd->add_option("--manifest", rc.manifest_file, "manifest.txt")->required();
  sweep_cmd->add_option("--out-dir", rc.out_dir, "output directory");
  sweep_cmd->add_option("--r-values", rc.r_values, "comma-separated routing iteration counts");
  sweep_cmd->add_option("--out", out_file, "sweep CSV path (default: <out-dir>/sweep.csv)");
  add_model_options(sweep_cmd, rc);

  auto* export_cmd = app.add_subcommand("export-curves", "re-emit a checkpoint's stored loss curve");
  export_cmd->add_option("--checkpoint", rc.checkpoint_file, "checkpoint.bin")->required();
  export_cmd->add_option("--out", out_file, "CSV path")->required();

  try {
    app.parse(argc, argv);
    if (convert->parsed()) {
      const ConvertResult result = convert_snips(raw_dir, rc.out_dir);
      std::cerr << "converted " << result.train_count << " train / " << result.test_count
                << " test records, " << result.manifest.size() << " intents\n";
      return 0;
    }
    if (gen->parsed()) {
      generate_demo_corpus(rc.out_dir, gen_seed, gen_train, gen_test);
      std::cerr << "wrote demo corpus (" << 7 * gen_train << " train / " << 7 * gen_test
                << " test) under " << rc.out_dir << "\n";
      return 0;
    }
    if (train_cmd->parsed()) return cmd_train(rc);
    if (eval_cmd->parsed()) return cmd_eval(rc, out_file);
    if (predict_cmd->parsed()) return cmd_predict(rc);
    if (sweep_cmd->parsed()) return cmd_sweep(rc, out_file);
    if (export_cmd->parsed()) {
      write_loss_curve(load_checkpoint(rc.checkpoint_file).curve, out_file);
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
