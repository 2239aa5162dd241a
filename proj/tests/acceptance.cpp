#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "grczsl/classifier.hpp"
#include "grczsl/config.hpp"
#include "grczsl/cvae.hpp"
#include "grczsl/dataset.hpp"
#include "grczsl/experiment.hpp"
#include "grczsl/metrics.hpp"
#include "grczsl/replay.hpp"
#include "grczsl/residency.hpp"
#include "grczsl/taskstream.hpp"
#include "support.hpp"

using namespace grczsl;
using testsupport::random_matrix;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Verdict()>& body) {
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  failures += v.pass ? 0 : 1;
  std::printf("criterion %d %-24s %s  %s\n", id, title, v.pass ? "PASS" : "FAIL", v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Verdict gradients() {
  constexpr int kConfigs = 24;
  double enc_worst = 0, dec_worst = 0, clf_worst = 0;
  for (int i = 0; i < kConfigs; ++i) {
    Rng rng(derive_seed(1000, {static_cast<std::uint64_t>(i)}));
    CvaeArch arch;
    arch.feature_dim = 2 + rng.below(5);
    arch.attribute_dim = 1 + rng.below(4);
    arch.encoder_hidden = 3 + rng.below(6);
    arch.decoder_hidden = 3 + rng.below(6);
    arch.latent_dim = 1 + rng.below(3);
    arch.dropout_rate = i % 3 == 0 ? 0.0 : 0.3;
    CvaeParams p = init_cvae(arch, derive_seed(1001, {static_cast<std::uint64_t>(i)}));
    for (auto* layer : cvae_layers(p))
      for (double& b : layer->bias) b = 0.1 * rng.normal();
    const std::size_t batch = 1 + rng.below(5);
    const Matrix x = random_matrix(batch, arch.feature_dim, rng);
    const Matrix a = random_matrix(batch, arch.attribute_dim, rng);
    const double kl_weight = 0.5 + rng.uniform();
    const std::uint64_t seed = derive_seed(1002, {static_cast<std::uint64_t>(i)});
    const CvaeLoss analytic = cvae_loss(p, x, a, kl_weight, seed);
    auto layers = cvae_layers(p);
    auto loss = [&] { return cvae_loss(p, x, a, kl_weight, seed).total; };
    const auto enc = testsupport::check_gradients(std::span(layers.data(), 4), std::span(analytic.grads.data(), 4), loss);
    const auto dec =
        testsupport::check_gradients(std::span(layers.data() + 4, 2), std::span(analytic.grads.data() + 4, 2), loss);
    enc_worst = std::max(enc_worst, enc.max_rel);
    dec_worst = std::max(dec_worst, dec.max_rel);

    ClassifierParams c;
    const std::size_t in = 2 + rng.below(5), classes = 2 + rng.below(4);
    c.hidden = nn::make_layer(in, 3 + rng.below(6), nn::Activation::ReLU, rng);
    c.output = nn::make_layer(c.hidden.out_dim(), classes, nn::Activation::Linear, rng);
    for (double& b : c.hidden.bias) b = 0.1 * rng.normal();
    for (double& b : c.output.bias) b = 0.1 * rng.normal();
    for (std::size_t k = 0; k < classes; ++k) c.class_ids.push_back(k);
    const Matrix cx = random_matrix(batch + 1, in, rng);
    std::vector<std::size_t> cy;
    for (std::size_t r = 0; r < cx.rows(); ++r) cy.push_back(rng.below(classes));
    const double wd = i % 2 ? 1e-3 : 0.1;
    const auto cg = classifier_loss(c, cx, cy, wd);
    nn::DenseLayer* clayers[] = {&c.hidden, &c.output};
    const nn::LayerGrad cgrads[] = {cg.hidden, cg.output};
    const auto clf =
        testsupport::check_gradients(clayers, cgrads, [&] { return classifier_loss(c, cx, cy, wd).loss; });
    clf_worst = std::max(clf_worst, clf.max_rel);
  }
  const bool ok = enc_worst <= 1e-4 && dec_worst <= 1e-4 && clf_worst <= 1e-4;
  return {ok, std::to_string(kConfigs) + " configs; max rel err encoder " + fmt("%.2e", enc_worst) + ", decoder " +
                  fmt("%.2e", dec_worst) + ", classifier " + fmt("%.2e", clf_worst)};
}

Verdict kl_oracle() {
  Rng rng(77);
  double worst = 0;
  bool non_negative = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(8);
    LatentDistribution d{random_matrix(rows, cols, rng, 2.0), random_matrix(rows, cols, rng, 2.0)};
    double closed = 0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < cols; ++k) {
        const double mu = d.mu(r, k), lv = d.logvar(r, k);
        closed += 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
      }
    closed /= static_cast<double>(rows);
    const double got = kl_divergence(d);
    worst = std::max(worst, std::abs(got - closed) / std::max(1.0, std::abs(closed)));
    non_negative = non_negative && got >= 0.0;
  }
  LatentDistribution standard{Matrix(3, 5, 0.0), Matrix(3, 5, 0.0)};
  non_negative = non_negative && kl_divergence(standard) == 0.0;
  return {worst <= 1e-12 && non_negative, "1000 inputs; max err " + fmt("%.2e", worst) +
                                              (non_negative ? ", all non-negative" : ", NEGATIVE value seen")};
}

DatasetMeta named_meta(const std::string& name, std::size_t per_class) {
  const auto shape = *standard_split_shape(name);
  return testsupport::make_meta(name, shape.seen, shape.unseen, per_class, shape.attribute_dim);
}

Verdict split_exactness() {
  std::vector<std::string> problems;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  auto task_sizes = [](const TaskStream& s) {
    std::vector<std::size_t> out;
    for (const auto& t : s.tasks) out.push_back(t.train_classes.size());
    return out;
  };

  const auto cub = named_meta("CUB", 5);
  const auto cub_fixed = split_fixed(cub, 3);
  expect(task_sizes(cub_fixed) == std::vector<std::size_t>(20, 10), "CUB fixed is not 20 tasks of 10");
  std::set<std::size_t> all;
  for (const auto& t : cub_fixed.tasks) all.insert(t.train_classes.begin(), t.train_classes.end());
  expect(all.size() == 200, "CUB fixed does not cover 200 distinct classes");
  for (const auto& t : cub_fixed.tasks)
    expect(t.seen_at_t.size() == 10 * t.index && t.unseen_at_t.size() == 200 - 10 * t.index,
           "CUB fixed seen/unseen counts wrong at task " + std::to_string(t.index));

  auto check_dynamic = [&](const DatasetMeta& meta, std::size_t seen, std::size_t unseen) {
    const auto s = split_dynamic(meta, 5);
    const auto& last = s.tasks.back();
    expect(last.seen_at_t.size() == seen, meta.name + " dynamic last task seen count");
    expect(last.unseen_at_t.size() == unseen, meta.name + " dynamic last task unseen count");
    expect(last.seen_at_t == meta.seen_classes, meta.name + " dynamic final seen set differs from the standard split");
    expect(last.unseen_at_t == meta.unseen_classes, meta.name + " dynamic final unseen set differs");
    for (std::size_t t = 1; t < s.size(); ++t)
      expect(s.tasks[t - 1].seen_at_t.size() < s.tasks[t].seen_at_t.size(), meta.name + " dynamic seen set must grow");
    auto pool = evaluation_pool(s, s.size());
    std::sort(pool.begin(), pool.end());
    expect(pool == standard_gzsl_test_pool(meta, 5), meta.name + " dynamic last test pool != standard GZSL pool");
  };
  check_dynamic(cub, 150, 50);

  const auto sun = named_meta("SUN", 3);
  std::vector<std::size_t> sun_sizes = {47, 47, 47};
  sun_sizes.insert(sun_sizes.end(), 12, 48);
  expect(task_sizes(split_fixed(sun, 3)) == sun_sizes, "SUN fixed is not [47,47,47,48x12]");
  check_dynamic(sun, 645, 72);

  if (problems.empty()) return {true, "CUB 20x10, CUB dyn 150/50, SUN [47x3,48x12], SUN dyn 645/72, GZSL pool equal"};
  std::string detail;
  for (const auto& p : problems) detail += p + "; ";
  return {false, detail};
}

std::optional<double> brute_cacc(const TaskRecord& r, const std::vector<std::size_t>& classes) {
  double sum = 0;
  std::size_t present = 0;
  for (std::size_t c : classes) {
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      if (r.labels[i] != c) continue;
      ++total;
      if (r.predictions[i] == c) ++hit;
    }
    if (total == 0) continue;
    sum += static_cast<double>(hit) / static_cast<double>(total);
    ++present;
  }
  if (present == 0) return std::nullopt;
  return sum / static_cast<double>(present);
}

Verdict metric_oracle() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(4242, {seed}));
    const std::size_t classes = 2 + rng.below(9);
    const std::size_t tasks = 2 + rng.below(4);
    EvaluationLedger ledger;
    ledger.setting = seed % 2 ? SettingKind::Dynamic : SettingKind::Fixed;
    ledger.total_tasks = tasks;
    for (std::size_t t = 1; t <= tasks; ++t) {
      TaskRecord r;
      r.task = t;
      std::vector<std::size_t> order(classes);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      const std::size_t n_seen = 1 + rng.below(classes - 1);
      r.seen_classes.assign(order.begin(), order.begin() + n_seen);
      r.unseen_classes.assign(order.begin() + n_seen, order.end());
      std::sort(r.seen_classes.begin(), r.seen_classes.end());
      std::sort(r.unseen_classes.begin(), r.unseen_classes.end());
      r.labels.push_back(r.seen_classes[rng.below(r.seen_classes.size())]);
      r.labels.push_back(r.unseen_classes[rng.below(r.unseen_classes.size())]);
      const std::size_t extra = rng.below(30);
      for (std::size_t i = 0; i < extra; ++i) r.labels.push_back(rng.below(classes));
      for (std::size_t i = 0; i < r.labels.size(); ++i)
        r.predictions.push_back(rng.uniform() < 0.4 ? r.labels[i] : rng.below(classes));
      ledger.records.push_back(std::move(r));
    }
    const std::size_t u_last = ledger.setting == SettingKind::Fixed ? tasks - 1 : tasks;
    double s_sum = 0, u_sum = 0, h_sum = 0;
    for (const auto& r : ledger.records) {
      const double s = *brute_cacc(r, r.seen_classes);
      s_sum += s;
      if (r.task > u_last) continue;
      const double u = *brute_cacc(r, r.unseen_classes);
      u_sum += u;
      h_sum += s + u > 0 ? 2 * s * u / (s + u) : 0.0;
    }
    const auto m = evaluate(ledger);
    worst = std::max({worst, std::abs(m.mean_seen - s_sum / static_cast<double>(tasks)),
                      std::abs(m.mean_unseen - u_sum / static_cast<double>(u_last)),
                      std::abs(m.mean_h - h_sum / static_cast<double>(u_last))});
  }
  bool identities = true;
  for (double x : {0.0, 1e-9, 0.1, 0.37, 0.5, 0.99, 1.0}) {
    identities = identities && std::abs(harmonic(x, x) - x) <= 1e-15 && harmonic(x, 0.0) == 0.0 &&
                 harmonic(0.0, x) == 0.0;
  }
  return {worst <= 1e-12 && identities,
          "100 ledgers; max deviation " + fmt("%.2e", worst) + (identities ? ", H identities hold" : ", H identity broken")};
}

// Forgetting experiment: 4 tasks of 2 Gaussian clusters each, no held-out classes.
DatasetBundle forgetting_stream(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.name = "forgetting";
  spec.seen_classes = 8;
  spec.unseen_classes = 0;
  spec.feature_dim = 8;
  spec.attribute_dim = 3;
  spec.samples_per_class = 60;
  spec.attribute_weight = 4.0;
  spec.private_weight = 0.25;
  spec.noise = 0.3;
  spec.seed = seed;
  return make_synthetic(spec);
}

ExperimentConfig forgetting_config(std::uint64_t seed, double alpha, const std::filesystem::path& out) {
  ExperimentConfig c = default_config("forgetting", SettingKind::Fixed);
  c.fixed_recipe = FixedRecipe{{2, 2, 2, 2}};
  c.output_dir = out;
  c.seed = seed;
  c.arch.encoder_hidden = 32;
  c.arch.decoder_hidden = 32;
  c.arch.latent_dim = 2;
  c.train.alpha = alpha;
  c.train.epochs = 40;
  c.train.batch_size = 16;
  c.train.replay_batch_size = 16;
  c.train.samples_per_seen_class = 60;
  c.train.learning_rate = 5e-3;
  c.classifier.hidden = 32;
  c.classifier.epochs = 20;
  c.classifier.learning_rate = 5e-3;
  c.classifier.samples_per_class = 60;
  c.classifier.batch_size = 32;
  return c;
}

struct ForgettingRun {
  double task1_final = 0.0;
  double mean_h = 0.0;
  double mean_seen = 0.0;
  double mean_unseen = 0.0;
};

ForgettingRun forgetting_run(std::uint64_t seed, double alpha, const std::filesystem::path& root) {
  const auto data = forgetting_stream(seed);
  const auto cfg = forgetting_config(seed, alpha, root / ("s" + std::to_string(seed) + "_a" + fmt("%.1f", alpha)));
  const auto report = run_experiment(cfg, data);
  const auto& stream = report.outcome.stream;
  const auto& last = report.outcome.ledger.records.back();
  return {per_class_accuracy(last.predictions, last.labels, stream.task(1).train_classes), report.metrics.mean_h,
          report.metrics.mean_seen, report.metrics.mean_unseen};
}

Verdict forgetting() {
  testsupport::TempDir dir("grczsl-accept-forget");
  const std::vector<double> alphas = {0.0, 0.3, 0.5, 1.0};
  std::map<double, double> task1, mh, ms, mu;
  constexpr int kSeeds = 5;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    for (double alpha : alphas) {
      const auto r = forgetting_run(seed, alpha, dir.path());
      task1[alpha] += r.task1_final / kSeeds;
      mh[alpha] += r.mean_h / kSeeds;
      ms[alpha] += r.mean_seen / kSeeds;
      mu[alpha] += r.mean_unseen / kSeeds;
    }
  }
  const double gap = 100.0 * (task1[0.5] - task1[1.0]);
  const bool h_order = std::min(mh[0.3], mh[0.5]) > std::max(mh[0.0], mh[1.0]);
  std::string detail = "task-1 acc a=0.5 " + fmt("%.1f", 100 * task1[0.5]) + "% vs a=1 " +
                       fmt("%.1f", 100 * task1[1.0]) + "% (gap " + fmt("%.1f", gap) + " pts); mH a=0/0.3/0.5/1: " +
                       fmt("%.1f", 100 * mh[0.0]) + "/" + fmt("%.1f", 100 * mh[0.3]) + "/" + fmt("%.1f", 100 * mh[0.5]) +
                       "/" + fmt("%.1f", 100 * mh[1.0]);
  for (double alpha : alphas) {
    detail += "\n    a=" + fmt("%.1f", alpha) + ": task-1 " + fmt("%.1f", 100 * task1[alpha]) + "  mSA " +
              fmt("%.1f", 100 * ms[alpha]) + "  mUA " + fmt("%.1f", 100 * mu[alpha]) + "  mH " + fmt("%.1f", 100 * mh[alpha]);
  }
  return {gap >= 15.0 && h_order, detail};
}

LabeledBatch toy_task(std::size_t first_class, std::uint64_t seed) {
  Rng rng(seed);
  LabeledBatch b;
  b.features = Matrix(24, 5);
  b.attributes = Matrix(24, 2);
  for (std::size_t r = 0; r < 24; ++r) {
    const std::size_t c = first_class + r % 2;
    for (std::size_t k = 0; k < 5; ++k) b.features(r, k) = static_cast<double>(c) + 0.3 * rng.normal();
    b.attributes(r, 0) = std::cos(static_cast<double>(c));
    b.attributes(r, 1) = std::sin(static_cast<double>(c));
    b.labels.push_back(c);
  }
  return b;
}

// Plain sequential fine-tuning written against the loss and optimizer primitives only.
CvaeParams sequential_baseline(const std::vector<LabeledBatch>& tasks, const CvaeArch& arch, const TrainConfig& cfg) {
  CvaeParams params = init_cvae(arch, derive_seed(cfg.seed, {tag(SeedPurpose::Init)}));
  for (std::size_t t = 1; t <= tasks.size(); ++t) {
    const LabeledBatch& data = tasks[t - 1];
    auto layers = cvae_layers(params);
    std::vector<nn::AdamState> weight_state, bias_state;
    for (auto* l : layers) {
      weight_state.emplace_back(l->weights.size(), nn::AdamConfig{cfg.learning_rate});
      bias_state.emplace_back(l->bias.size(), nn::AdamConfig{cfg.learning_rate});
    }
    const std::size_t n = data.size();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      Rng shuffler(derive_seed(cfg.seed, {tag(SeedPurpose::Shuffle), t, epoch}));
      shuffler.shuffle(order);
      for (std::size_t step = 0, begin = 0; begin < n; ++step, begin += cfg.batch_size) {
        const std::size_t end = std::min(n, begin + cfg.batch_size);
        Matrix x(end - begin, data.features.cols()), a(end - begin, data.attributes.cols());
        for (std::size_t i = begin; i < end; ++i) {
          std::copy(data.features.row(order[i]).begin(), data.features.row(order[i]).end(), x.row(i - begin).begin());
          std::copy(data.attributes.row(order[i]).begin(), data.attributes.row(order[i]).end(),
                    a.row(i - begin).begin());
        }
        const CvaeLoss loss = cvae_loss(params, x, a, cfg.kl_weight, derive_seed(cfg.seed, {t, epoch, step, 0}));
        for (std::size_t k = 0; k < layers.size(); ++k) {
          nn::adam_update(layers[k]->weights.values(), loss.grads[k].weights.values(), weight_state[k]);
          nn::adam_update(layers[k]->bias, loss.grads[k].bias, bias_state[k]);
        }
      }
    }
  }
  return params;
}

Verdict baseline_equivalence() {
  CvaeArch arch;
  arch.feature_dim = 5;
  arch.attribute_dim = 2;
  arch.encoder_hidden = 12;
  arch.decoder_hidden = 12;
  arch.latent_dim = 3;
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 7;
  cfg.replay_batch_size = 9;
  cfg.samples_per_seen_class = 10;
  cfg.learning_rate = 3e-3;
  cfg.seed = 2024;
  const std::vector<LabeledBatch> tasks = {toy_task(0, 1), toy_task(2, 2), toy_task(4, 3)};
  Matrix attrs(6, 2);
  for (std::size_t c = 0; c < 6; ++c) {
    attrs(c, 0) = std::cos(static_cast<double>(c));
    attrs(c, 1) = std::sin(static_cast<double>(c));
  }

  auto pipeline = [&](bool exclude) {
    TrainConfig c = cfg;
    c.alpha = 1.0;
    c.exclude_replay = exclude;
    std::optional<CvaeParams> model;
    for (std::size_t t = 1; t <= tasks.size(); ++t) {
      std::optional<ReplaySet> replay;
      if (t >= 2) {
        ReplayPlan plan;
        for (std::size_t cls = 0; cls < 2 * (t - 1); ++cls) {
          plan.classes.push_back(cls);
          plan.source_tasks.push_back(cls / 2 + 1);
        }
        replay = synthesize_replay(model->decoder, plan, attrs, c.samples_per_seen_class, 99 + t);
      }
      model = train_task(t, tasks[t - 1], std::move(model), replay ? &*replay : nullptr, arch, c).params;
    }
    return std::move(*model);
  };

  const CvaeParams reference = sequential_baseline(tasks, arch, cfg);
  const bool excluded = pipeline(true) == reference;
  const bool zero_weighted = pipeline(false) == reference;
  return {excluded && zero_weighted, std::string("3 tasks; replay excluded ") + (excluded ? "identical" : "DIFFERS") +
                                         ", replay weighted by 0 " + (zero_weighted ? "identical" : "DIFFERS") +
                                         " to the sequential baseline"};
}

ExperimentConfig small_config(const std::filesystem::path& out) {
  ExperimentConfig c = forgetting_config(11, 0.5, out);
  c.train.epochs = 8;
  c.classifier.epochs = 5;
  return c;
}

Verdict memory_contract() {
  testsupport::TempDir dir("grczsl-accept-mem");
  const auto data = forgetting_stream(3);
  const auto before = residency::snapshot();
  std::size_t worst_full = 0, worst_frozen = 0, worst_total = 0;
  const auto outcome = train_experiment(small_config(dir / "run"), data, [&](std::size_t t, const TaskRecord&) {
    if (t < 2) return;
    const auto s = residency::snapshot();
    worst_full = std::max(worst_full, s.peak_full - before.live_full);
    worst_frozen = std::max(worst_frozen, s.peak_frozen - before.live_frozen);
    worst_total = std::max(worst_total, s.peak_total - before.live_full - before.live_frozen);
  });
  worst_full = std::max(worst_full, outcome.residency.peak_full - before.live_full);
  worst_frozen = std::max(worst_frozen, outcome.residency.peak_frozen - before.live_frozen);
  const bool ok = worst_full <= 1 && worst_frozen <= 1 && worst_total <= 2;
  return {ok, "peak resident during t>=2: " + std::to_string(worst_full) + " full CVAE, " +
                  std::to_string(worst_frozen) + " frozen decoder"};
}

Verdict determinism() {
  testsupport::TempDir dir("grczsl-accept-det");
  const auto data = forgetting_stream(4);
  run_experiment(small_config(dir / "a"), data);
  run_experiment(small_config(dir / "b"), data);
  std::vector<std::string> differing;
  for (const char* f : {kMetricsRecord, kCurvesFile, kReportTable, kLedgerFile}) {
    const auto a = slurp(dir / "a" / f);
    if (a.empty() || a != slurp(dir / "b" / f)) differing.push_back(f);
  }
  if (differing.empty()) return {true, "two runs: metrics.jsonl, curves.tsv, report.txt, ledger.json byte-identical"};
  std::string detail = "differing:";
  for (const auto& f : differing) detail += " " + f;
  return {false, detail};
}

}  // namespace

int main() {
  report(1, "gradient-correctness", gradients);
  report(2, "kl-oracle", kl_oracle);
  report(3, "split-exactness", split_exactness);
  report(4, "metric-oracle", metric_oracle);
  report(5, "forgetting", forgetting);
  report(6, "baseline-equivalence", baseline_equivalence);
  report(7, "memory-contract", memory_contract);
  report(8, "determinism", determinism);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
