// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fail. Slow pieces (full training, the routing sweep)
// run on the generated demo corpus; pass a raw SNIPS tree via SNIPS_RAW_DIR
// to run them on the real dataset instead.
//
// usage: acceptance <path-to-capsnet-cli> [work-dir]

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "capsnet/dataset.hpp"
#include "capsnet/metrics.hpp"
#include "capsnet/synth.hpp"
#include "support/finite_diff.hpp"
#include "support/naive_routing.hpp"

namespace fs = std::filesystem;
using namespace capsnet;
using capsnet::testing::check_gradients;
using capsnet::testing::naive_margin_loss;
using capsnet::testing::naive_route;
using capsnet::testing::random_tensor;

namespace {

struct Gate {
  int failures = 0;

  void report(int number, const std::string& name, bool ok, double seconds,
              const std::string& detail) {
    std::printf("%s  %2d. %-28s (%.1fs)  %s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                seconds, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* spec, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), spec, a, b, c);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Corpus {
  Manifest manifest;
  Vocabulary vocab;
  std::vector<EncodedUtterance> train_set, val_set, test_set;
  std::vector<std::string> vocab_tokens;
};

Corpus prepare_corpus(const fs::path& work, Index max_len, std::uint64_t seed) {
  const fs::path raw = work / "raw";
  const fs::path data = work / "data";
  const char* env_raw = std::getenv("SNIPS_RAW_DIR");
  if (env_raw && *env_raw) {
    std::cerr << "using raw SNIPS tree from " << env_raw << "\n";
    convert_snips(env_raw, data.string());
  } else {
    std::cerr << "SNIPS_RAW_DIR not set; generating the demo corpus\n";
    generate_demo_corpus(raw.string(), 7, 1870, 100);
    convert_snips(raw.string(), data.string());
  }

  Corpus c;
  c.manifest = load_manifest((data / "manifest.txt").string());
  const auto train_examples = load_dataset((data / "train.jsonl").string(), c.manifest);
  const auto test_examples = load_dataset((data / "test.jsonl").string(), c.manifest);
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(train_examples.size());
  for (const auto& ex : train_examples) tokens.push_back(tokenize(ex.text));
  c.vocab = Vocabulary::build(tokens, 1);
  c.vocab_tokens = c.vocab.tokens();

  auto encode_all = [&](const std::vector<LabeledExample>& examples) {
    std::vector<EncodedUtterance> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
      EncodedUtterance enc = encode(tokenize(ex.text), c.vocab, max_len);
      enc.intent_id = ex.intent_id;
      out.push_back(std::move(enc));
    }
    return out;
  };
  auto encoded = encode_all(train_examples);
  std::tie(c.train_set, c.val_set) = stratified_split(encoded, 0.1, seed);
  c.test_set = encode_all(test_examples);
  std::cerr << "corpus: " << c.train_set.size() << " train / " << c.val_set.size() << " val / "
            << c.test_set.size() << " test, vocab " << c.vocab.size() << "\n";
  return c;
}

std::vector<EncodedUtterance> stratified_head(const std::vector<EncodedUtterance>& pool,
                                              Index num_classes, std::size_t total) {
  std::vector<EncodedUtterance> out;
  std::vector<std::size_t> taken(static_cast<std::size_t>(num_classes), 0);
  const std::size_t per_class = total / static_cast<std::size_t>(num_classes);
  for (const auto& e : pool) {
    auto& n = taken[static_cast<std::size_t>(e.intent_id)];
    if (n < per_class) {
      out.push_back(e);
      ++n;
    }
  }
  for (const auto& e : pool) {
    if (out.size() >= total) break;
    if (std::find_if(out.begin(), out.end(), [&](const EncodedUtterance& o) {
          return o.ids == e.ids && o.intent_id == e.intent_id;
        }) == out.end())
      out.push_back(e);
  }
  return out;
}

// -- criterion 1 --------------------------------------------------------------

bool gradient_fidelity(std::string& detail) {
  ModelConfig cfg;
  cfg.d = 5;
  cfg.max_len = 4;
  cfg.conv_channels = 8;
  cfg.u = 2;
  cfg.v_dim = 3;
  cfg.num_classes = 3;
  cfg.routing_iters = 2;
  const Index vocab_size = 12;

  std::mt19937_64 rng(101);
  std::uniform_int_distribution<Index> tok(1, vocab_size - 1);
  std::uniform_int_distribution<Index> label(0, cfg.num_classes - 1);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    ModelParams params = ModelParams::init(cfg, vocab_size, rng);
    EncodedUtterance enc;
    for (Index t = 0; t < cfg.max_len; ++t) enc.ids.push_back(tok(rng));
    enc.true_length = cfg.max_len;
    const Index y = label(rng);
    std::vector<Tensor> leaves = {params.embedding, params.conv_kernels[0], params.conv_biases[0],
                                  params.w};
    auto r = check_gradients(
        [&](Tape& t) {
          ForwardResult fr = forward(t, params, cfg, enc);
          return margin_loss_batch(t, fr.norms, {y}, cfg);
        },
        leaves, 1e-5);
    worst = std::max(worst, r.max_rel_error);
  }
  detail = fmt("max rel err %.3g over 20 draws (need < 1e-4)", worst);
  return worst < 1e-4;
}

// -- criterion 2 --------------------------------------------------------------

bool squash_contract(std::string& detail) {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> log_norm(std::log(1e-8), std::log(1e8));
  std::uniform_int_distribution<Index> dim_dist(1, 8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tape tape;
  tape.recording = false;

  bool range_ok = true, direction_ok = true, monotone_ok = true, unit_ok = true;
  for (int draw = 0; draw < 1000000; ++draw) {
    const Index dim = dim_dist(rng);
    Tensor s = Tensor::zeros({dim});
    for (Index k = 0; k < dim; ++k) s.data()[k] = gauss(rng);
    const double raw_norm = s.vec().norm();
    if (raw_norm == 0.0) continue;
    const double n1 = std::exp(log_norm(rng));
    const double n2 = std::exp(log_norm(rng));
    Tensor s2 = Tensor::zeros({dim});
    s2.vec() = s.vec() * (n2 / raw_norm);
    s.vec() *= n1 / raw_norm;

    Tensor v = squash(tape, s);
    const double vn = v.vec().norm();
    if (!(vn >= 0.0 && vn < 1.0)) range_ok = false;
    const double cosine = v.vec().dot(s.vec()) / (vn * s.vec().norm());
    if (std::abs(cosine - 1.0) > 1e-12) direction_ok = false;
    if (n1 != n2) {
      // monotone up to f64 resolution: distinct huge norms can land on
      // neighbouring representable values near the unit sphere
      const double vn2 = squash(tape, s2).vec().norm();
      const double lo = n1 < n2 ? vn : vn2;
      const double hi = n1 < n2 ? vn2 : vn;
      if (lo > hi + 4.0 * std::numeric_limits<double>::epsilon()) monotone_ok = false;
    }
    if (!range_ok || !direction_ok || !monotone_ok) break;
  }
  // strict increase where doubles can resolve it
  double last = -1.0;
  for (double n = 1e-8; n <= 1e6; n *= 10.0) {
    Tensor s = Tensor::from_data({3}, {n, 0, 0});
    const double out = squash(tape, s).vec().norm();
    if (!(out > last)) monotone_ok = false;
    last = out;
  }
  // |s| = 1 exactly: axis-aligned unit vectors avoid normalization rounding
  for (Index dim = 1; dim <= 8; ++dim)
    for (Index axis = 0; axis < dim; ++axis) {
      Tensor e = Tensor::zeros({dim});
      e.data()[axis] = 1.0;
      Tensor v = squash(tape, e);
      if (v.vec().norm() != 0.5) unit_ok = false;
    }
  detail = std::string("range ") + (range_ok ? "ok" : "BAD") + ", direction " +
           (direction_ok ? "ok" : "BAD") + ", monotone " + (monotone_ok ? "ok" : "BAD") +
           ", |s|=1 => |v|=0.5 " + (unit_ok ? "ok" : "BAD") + " (1e6 draws)";
  return range_ok && direction_ok && monotone_ok && unit_ok;
}

// -- criterion 3 --------------------------------------------------------------

bool routing_oracle(std::string& detail) {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<Index> n_dist(1, 4), j_dist(1, 3), v_dist(1, 3), r_dist(1, 4);
  Tape tape;
  tape.recording = false;
  double worst = 0.0;
  for (int trial = 0; trial < 1200; ++trial) {
    const Index n = n_dist(rng), J = j_dist(rng), V = v_dist(rng), r = r_dist(rng);
    ModelConfig cfg;
    cfg.max_len = 1;
    cfg.u = 1;
    cfg.conv_channels = n;
    cfg.num_classes = J;
    cfg.v_dim = V;
    Tensor votes = random_tensor({1, n, J * V}, rng, -2.0, 2.0);
    RoutingState st = route(tape, votes, cfg, 1, r);
    auto ref = naive_route(votes.data_vec(), static_cast<int>(n), static_cast<int>(J),
                           static_cast<int>(V), static_cast<int>(r));
    for (Index j = 0; j < J; ++j)
      for (Index k = 0; k < V; ++k)
        worst = std::max(worst, std::abs(st.capsules.at(j * V + k) - ref.capsules[j][k]));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < J; ++j)
        worst = std::max(worst, std::abs(st.coupling.at(i * J + j) - ref.coupling[i][j]));
  }
  if (worst >= 1e-10) {
    detail = fmt("naive-oracle max abs diff %.3g (need < 1e-10)", worst);
    return false;
  }

  // r = 1 against an independent uniform-average loop
  double worst_uniform = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = n_dist(rng), J = j_dist(rng), V = v_dist(rng);
    ModelConfig cfg;
    cfg.max_len = 1;
    cfg.u = 1;
    cfg.conv_channels = n;
    cfg.num_classes = J;
    cfg.v_dim = V;
    Tensor votes = random_tensor({1, n, J * V}, rng, -2.0, 2.0);
    RoutingState st = route(tape, votes, cfg, 1, 1);
    for (Index j = 0; j < J; ++j) {
      std::vector<double> s(static_cast<std::size_t>(V), 0.0);
      for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < V; ++k)  // uniform coupling c = 1/J
          s[static_cast<std::size_t>(k)] += votes.at((i * J + j) * V + k) / static_cast<double>(J);
      const auto v = capsnet::testing::naive_squash(s);
      for (Index k = 0; k < V; ++k)
        worst_uniform = std::max(
            worst_uniform, std::abs(st.capsules.at(j * V + k) - v[static_cast<std::size_t>(k)]));
    }
  }
  detail = fmt("naive max diff %.3g, r=1 uniform max diff %.3g", worst, worst_uniform);
  return worst_uniform < 1e-12;
}

// -- criterion 4 --------------------------------------------------------------

bool margin_oracle(std::string& detail) {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> norm_dist(0.0, 1.0);
  std::uniform_int_distribution<Index> label_dist(0, 6);
  ModelConfig cfg;
  cfg.num_classes = 7;
  Tape tape;
  tape.recording = false;
  double worst = 0.0;
  bool saw_zero = false;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> norms(7);
    for (auto& n : norms) n = norm_dist(rng);
    const Index y = label_dist(rng);
    if (trial % 10 == 0) {  // exercise both hinge-inactive zero branches
      norms[static_cast<std::size_t>(y)] = 0.9 + 0.09 * norm_dist(rng);
      for (Index j = 0; j < 7; ++j)
        if (j != y) norms[static_cast<std::size_t>(j)] = 0.1 * norm_dist(rng);
    }
    const double expect =
        naive_margin_loss(norms, static_cast<int>(y), cfg.m_plus, cfg.m_minus, cfg.lambda);
    if (expect == 0.0) saw_zero = true;
    const double got = margin_loss(tape, Tensor::from_data({7}, norms), y, cfg).item();
    worst = std::max(worst, std::abs(got - expect));
  }
  detail = fmt("max abs diff %.3g over 1000 draws", worst) +
           (saw_zero ? ", zero cases hit" : ", ZERO CASES NOT HIT");
  return worst < 1e-12 && saw_zero;
}

// -- criteria 5-8 -------------------------------------------------------------

bool overfit_sanity(const Corpus& corpus, std::string& detail) {
  Timer timer;
  ModelConfig cfg;  // default config
  cfg.num_classes = corpus.manifest.size();
  const auto subset = stratified_head(corpus.train_set, cfg.num_classes, 64);
  TrainConfig tcfg;
  tcfg.epochs = 200;
  tcfg.seed = 42;
  tcfg.target_train_accuracy = 0.99;
  std::mt19937_64 rng(tcfg.seed);
  ModelParams params = ModelParams::init(cfg, corpus.vocab.size(), rng);
  TrainResult r =
      train(std::move(params), cfg, subset, {}, tcfg, corpus.vocab_tokens, corpus.manifest.intents);
  const double acc = accuracy_of(r.best.params, cfg, subset);
  const double secs = timer.seconds();
  detail = fmt("train acc %.4f after %.0f epochs in %.1fs (need >= 0.99 within 200 ep / 300s)",
               acc, static_cast<double>(r.curve.size()), secs);
  return subset.size() == 64 && acc >= 0.99 && r.curve.size() <= 200 && secs < 300.0;
}

struct FullRun {
  TrainResult result;
  MetricsReport report;
  double seconds = 0.0;
  bool ok = false;
};

FullRun full_training(const Corpus& corpus, std::string& detail) {
  Timer timer;
  FullRun run;
  ModelConfig cfg;  // default config, r = 3
  cfg.num_classes = corpus.manifest.size();
  TrainConfig tcfg;
  tcfg.epochs = 8;
  tcfg.batch_size = 32;
  tcfg.seed = 42;
  std::mt19937_64 rng(tcfg.seed);
  ModelParams params = ModelParams::init(cfg, corpus.vocab.size(), rng);
  run.result = train(std::move(params), cfg, corpus.train_set, corpus.val_set, tcfg,
                     corpus.vocab_tokens, corpus.manifest.intents);
  const auto preds = predict_all(run.result.best.params, cfg, corpus.test_set);
  std::vector<Index> truths;
  for (const auto& e : corpus.test_set) truths.push_back(e.intent_id);
  run.report = metrics(confusion(preds, truths, cfg.num_classes));
  run.seconds = timer.seconds();
  run.ok = run.report.accuracy >= 0.90 && run.report.macro_f1 >= 0.89 && run.seconds < 3600.0;
  detail = fmt("test acc %.4f, macro-F1 %.4f in %.0fs (need >= 0.90 / >= 0.89 / < 3600s)",
               run.report.accuracy, run.report.macro_f1, run.seconds);
  return run;
}

bool sweep_trend(const Corpus& corpus, const fs::path& work, std::string& detail) {
  // Reduced width so five trainings stay cheap; pointwise conv (kernel 1) so
  // cross-position evidence integration happens in routing alone, which is the
  // most routing-sensitive setting found during calibration.
  ModelConfig cfg;
  cfg.d = 50;
  cfg.conv_channels = 64;
  cfg.v_dim = 12;
  cfg.kernel_size = 1;
  cfg.num_classes = corpus.manifest.size();
  TrainConfig tcfg;
  tcfg.epochs = 25;
  tcfg.batch_size = 16;
  tcfg.seed = 42;
  const auto train_sub = stratified_head(corpus.train_set, cfg.num_classes,
                                         60 * static_cast<std::size_t>(cfg.num_classes));

  const auto rows = routing_sweep(cfg, tcfg, train_sub, corpus.val_set, corpus.test_set,
                                  corpus.vocab_tokens, corpus.manifest.intents, {1, 2, 3, 4, 5});
  write_sweep_csv(rows, (work / "sweep.csv").string());
  double acc1 = 0, acc3 = 0, acc5 = 0;
  std::string all;
  for (const auto& row : rows) {
    if (row.routing_iters == 1) acc1 = row.accuracy;
    if (row.routing_iters == 3) acc3 = row.accuracy;
    if (row.routing_iters == 5) acc5 = row.accuracy;
    all += fmt("r%.0f=%.4f ", static_cast<double>(row.routing_iters), row.accuracy);
  }
  detail = all + "(need r3 > r1 + 0.01 and r5 <= r3 + 0.003)";
  return acc3 > acc1 + 0.01 && acc5 <= acc3 + 0.003;
}

bool convergence(const FullRun& run, const fs::path& work, std::string& detail) {
  const LossCurve& curve = run.result.curve;
  if (curve.size() < 5) {
    detail = "fewer than 5 epochs recorded";
    return false;
  }
  bool decreasing = true;
  for (std::size_t e = 1; e < 5; ++e)
    if (!(curve[e].train_loss < curve[e - 1].train_loss)) decreasing = false;

  const int best_epoch = run.result.best.epoch;
  const auto& best = curve[static_cast<std::size_t>(best_epoch - 1)];
  const bool gap_ok = best.val_loss <= 2.0 * best.train_loss;

  const fs::path csv = work / "loss_curve.csv";
  write_loss_curve(curve, csv.string());
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  const bool header_ok = header == "epoch,train_loss,val_loss,val_accuracy";

  detail = std::string("first-5 train loss ") + (decreasing ? "strictly down" : "NOT monotone") +
           fmt(", best-epoch val/train %.3g/%.3g", best.val_loss, best.train_loss) + ", header " +
           (header_ok ? "exact" : "WRONG");
  return decreasing && gap_ok && header_ok;
}

// -- criterion 9 --------------------------------------------------------------

bool determinism(const fs::path& cli, const fs::path& work, const Corpus& corpus,
                 std::string& detail) {
  const fs::path data = work / "data";
  auto run = [&](const std::string& out_dir) {
    std::ostringstream cmd;
    cmd << "'" << cli.string() << "' train"
        << " --train-file '" << (data / "train.jsonl").string() << "'"
        << " --manifest '" << (data / "manifest.txt").string() << "'"
        << " --out-dir '" << out_dir << "'"
        << " --d 24 --max-len 16 --conv-channels 32 --u 4 --v-dim 8"
        << " --epochs 2 --batch-size 32 --seed 77 --val-fraction 0.1"
        << " 2> /dev/null";
    return std::system(cmd.str().c_str());
  };
  const fs::path run1 = work / "det_run1";
  const fs::path run2 = work / "det_run2";
  fs::remove_all(run1);
  fs::remove_all(run2);
  if (run(run1.string()) != 0 || run(run2.string()) != 0) {
    detail = "cmd_train invocation failed";
    return false;
  }
  const bool curves_equal =
      read_file(run1 / "loss_curve.csv") == read_file(run2 / "loss_curve.csv") &&
      !read_file(run1 / "loss_curve.csv").empty();

  Checkpoint a = load_checkpoint((run1 / "checkpoint.bin").string());
  Checkpoint b = load_checkpoint((run2 / "checkpoint.bin").string());
  const Vocabulary vocab_a = a.vocabulary();
  std::vector<EncodedUtterance> probe;
  for (std::size_t i = 0; i < 16 && i < corpus.test_set.size(); ++i) {
    EncodedUtterance e = corpus.test_set[i];
    e.ids.resize(static_cast<std::size_t>(a.config.max_len), kPadId);
    e.true_length = std::min(e.true_length, a.config.max_len);
    probe.push_back(std::move(e));
  }
  Tape tape;
  tape.recording = false;
  ForwardResult fa = forward_batch(tape, a.params, a.config, probe);
  ForwardResult fb = forward_batch(tape, b.params, b.config, probe);
  const bool forward_equal = fa.norms.data_vec() == fb.norms.data_vec();

  detail = std::string("curves ") + (curves_equal ? "byte-identical" : "DIFFER") +
           ", probe forward " + (forward_equal ? "bit-identical" : "DIFFERS");
  return curves_equal && forward_equal;
}

// -- criterion 10 -------------------------------------------------------------

bool metrics_oracle(std::string& detail) {
  // worked 2-class example
  const MetricsReport rep = metrics(ConfusionMatrix{2, {2, 1, 0, 1}});
  const bool worked = rep.accuracy == 0.75 &&
                      std::abs(rep.macro_f1 - (0.8 + 2.0 / 3.0) / 2.0) < 1e-15 &&
                      std::abs(rep.intent_detection_rate - 5.0 / 6.0) < 1e-15;

  std::mt19937_64 rng(110);
  double worst = 0.0;
  bool degenerate_seen = false;
  for (int trial = 0; trial < 500; ++trial) {
    std::uniform_int_distribution<Index> j_dist(2, 7);
    const Index J = j_dist(rng);
    std::uniform_int_distribution<Index> cls(0, J - 1);
    std::uniform_int_distribution<int> n_dist(1, 50);
    const int n = n_dist(rng);
    std::vector<Index> preds, truths;
    // leave the last class unused in a fifth of the trials
    const Index hi = (trial % 5 == 0 && J > 2) ? J - 2 : J - 1;
    std::uniform_int_distribution<Index> used(0, hi);
    for (int i = 0; i < n; ++i) {
      preds.push_back(used(rng));
      truths.push_back(used(rng));
    }
    const MetricsReport got = metrics(confusion(preds, truths, J));
    if (hi < J - 1) {
      if (!got.per_class.back().degenerate) {
        detail = "absent class not flagged degenerate";
        return false;
      }
      degenerate_seen = true;
    }
    // brute-force recount from the raw pairs
    int correct = 0;
    double f1_sum = 0.0, recall_sum = 0.0;
    for (Index j = 0; j < J; ++j) {
      double tp = 0, fp = 0, fn = 0;
      for (int i = 0; i < n; ++i) {
        if (preds[static_cast<std::size_t>(i)] == j && truths[static_cast<std::size_t>(i)] == j)
          ++tp;
        if (preds[static_cast<std::size_t>(i)] == j && truths[static_cast<std::size_t>(i)] != j)
          ++fp;
        if (preds[static_cast<std::size_t>(i)] != j && truths[static_cast<std::size_t>(i)] == j)
          ++fn;
      }
      const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      f1_sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      recall_sum += r;
    }
    for (int i = 0; i < n; ++i)
      if (preds[static_cast<std::size_t>(i)] == truths[static_cast<std::size_t>(i)]) ++correct;
    worst = std::max(worst, std::abs(got.accuracy - static_cast<double>(correct) / n));
    worst = std::max(worst, std::abs(got.macro_f1 - f1_sum / static_cast<double>(J)));
    worst = std::max(
        worst, std::abs(got.intent_detection_rate - recall_sum / static_cast<double>(J)));
  }
  detail = std::string("worked example ") + (worked ? "exact" : "WRONG") +
           fmt(", recount max diff %.3g over 500 draws", worst);
  return worked && worst < 1e-12 && degenerate_seen;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-capsnet-cli> [work-dir]\n";
    return 2;
  }
  const fs::path cli = argv[1];
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "acceptance_work";
  fs::create_directories(work);

  Gate gate;
  std::string detail;
  {
    Timer t;
    const bool ok = gradient_fidelity(detail);
    gate.report(1, "gradient fidelity", ok, t.seconds(), detail);
  }
  {
    Timer t;
    const bool ok = squash_contract(detail);
    gate.report(2, "squash contract", ok, t.seconds(), detail);
  }
  {
    Timer t;
    const bool ok = routing_oracle(detail);
    gate.report(3, "routing oracle", ok, t.seconds(), detail);
  }
  {
    Timer t;
    const bool ok = margin_oracle(detail);
    gate.report(4, "margin-loss oracle", ok, t.seconds(), detail);
  }

  Timer prep_timer;
  const Corpus corpus = prepare_corpus(work, 35, 42);
  std::cerr << "corpus preparation took " << fmt("%.1fs", prep_timer.seconds()) << "\n";

  {
    Timer t;
    const bool ok = overfit_sanity(corpus, detail);
    gate.report(5, "overfit sanity", ok, t.seconds(), detail);
  }
  FullRun full;
  {
    Timer t;
    full = full_training(corpus, detail);
    gate.report(6, "full training", full.ok, t.seconds(), detail);
  }
  {
    Timer t;
    const bool ok = sweep_trend(corpus, work, detail);
    gate.report(7, "routing-iteration trend", ok, t.seconds(), detail);
  }
  {
    Timer t;
    const bool ok = convergence(full, work, detail);
    gate.report(8, "convergence behavior", ok, t.seconds(), detail);
  }
  {
    Timer t;
    const bool ok = determinism(cli, work, corpus, detail);
    gate.report(9, "determinism", ok, t.seconds(), detail);
  }
  {
    Timer t;
    const bool ok = metrics_oracle(detail);
    gate.report(10, "metrics oracle", ok, t.seconds(), detail);
  }

  if (gate.failures > 0) {
    std::printf("%d criterion(s) failed\n", gate.failures);
    return 1;
  }
  std::printf("all 10 criteria passed\n");
  return 0;
}
