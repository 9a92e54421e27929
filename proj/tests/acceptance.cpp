// Acceptance gate: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Property criteria use independent oracles; the two
// directional experiments train small models across seeds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "subattn/autodiff.hpp"
#include "subattn/coverage.hpp"
#include "subattn/decode.hpp"
#include "subattn/greedy.hpp"
#include "subattn/metrics.hpp"
#include "subattn/rng.hpp"
#include "subattn/seq2seq.hpp"
#include "subattn/synth.hpp"

using namespace subattn;

namespace {

struct Criterion {
  int id;
  std::string label;
  bool ok;
  double seconds;
};

std::vector<Criterion> g_results;

template <typename Fn>
void run_criterion(int id, const std::string& label, Fn fn) {
  auto start = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = fn();
  } catch (const std::exception& e) {
    std::cerr << "criterion " << id << " raised: " << e.what() << "\n";
  }
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  g_results.push_back({id, label, ok, secs});
  std::printf("[%2d] %s  %s  (%.1fs)\n", id, ok ? "PASS" : "FAIL",
              label.c_str(), secs);
  std::fflush(stdout);
}

std::vector<ConcaveTransform> transform_families() {
  return {ConcaveTransform::log_base(std::exp(1.0)),
          ConcaveTransform::log_base(2.2),
          ConcaveTransform::log_base(1.9),
          ConcaveTransform::square_root(),
          ConcaveTransform::power(0.65),
          ConcaveTransform::power(0.6)};
}

// --------------------------------------------------------------------------
// 1. Diminishing returns of F across all three transform families.

bool criterion_submodularity() {
  SplitMix64 rng(101);
  auto families = transform_families();
  for (int trial = 0; trial < 10000; ++trial) {
    const auto& g = families[trial % families.size()];
    int len = static_cast<int>(rng.next_int(1, 512));
    AttentionHistory h(len);
    for (double& a : h) a = rng.next_double();
    double delta = rng.next_double();

    // gains of adding the same score at increasing coverage levels
    double sum = 0.0;
    double prev_gain = g(sum + delta) - g(sum);
    for (double a : h) {
      sum += a;
      double gain = g(sum + delta) - g(sum);
      if (gain > prev_gain * (1.0 + 1e-12) + 1e-300) return false;
      prev_gain = gain;
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 2. Telescoping identity, batch and streaming forms.

bool criterion_telescoping() {
  SplitMix64 rng(202);
  auto families = transform_families();
  for (int trial = 0; trial < 10000; ++trial) {
    const auto& g = families[trial % families.size()];
    int len = static_cast<int>(rng.next_int(1, 64));
    AttentionHistory h(len);
    for (double& a : h) a = rng.next_double();

    double target = submodular_coverage(g, h);
    auto batch = diminishing_attention(g, h);
    if (std::abs(effective_coverage(batch) - target) > 1e-9) return false;

    CoverageTracker tracker(1);
    DiminishConfig cfg = DiminishConfig::dim(g);
    double streamed = 0.0;
    for (double a : h) {
      Eigen::VectorXd raw(1);
      raw[0] = a;
      streamed += effective_attention_step(cfg, tracker, raw)[0];
    }
    if (std::abs(streamed - target) > 1e-9) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// 3. Later-equal-attention and cross-state diminishing.

bool criterion_fig1_properties() {
  SplitMix64 rng(303);
  auto families = transform_families();
  for (int trial = 0; trial < 10000; ++trial) {
    const auto& g = families[trial % families.size()];
    double delta = 0.05 + 0.95 * rng.next_double();

    // the same raw score arriving later (after extra coverage) gains less
    AttentionHistory h;
    h.push_back(delta);
    int fillers = static_cast<int>(rng.next_int(1, 8));
    for (int k = 0; k < fillers; ++k) h.push_back(rng.next_double());
    h.push_back(delta);
    auto eff = diminishing_attention(g, h);
    if (eff.back() > eff.front() + 1e-12) return false;

    // a state with strictly more prior coverage gains less from delta
    double c_low = rng.next_double();
    double c_high = c_low + 0.1 + rng.next_double();
    double gain_low = g(c_low + delta) - g(c_low);
    double gain_high = g(c_high + delta) - g(c_high);
    if (gain_high > gain_low + 1e-12) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// 4. Order preservation of effective coverage.

bool criterion_order_preservation() {
  SplitMix64 rng(404);
  auto families = transform_families();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& g = families[trial % families.size()];
    int states = static_cast<int>(rng.next_int(2, 16));
    int steps = static_cast<int>(rng.next_int(1, 24));

    Eigen::MatrixXd raw(steps, states);
    for (int t = 0; t < steps; ++t) {
      double sum = 0.0;
      for (int i = 0; i < states; ++i) {
        raw(t, i) = rng.next_double();
        sum += raw(t, i);
      }
      raw.row(t) /= sum;
    }

    CoverageTracker tracker(states);
    DiminishConfig cfg = DiminishConfig::dim(g);
    Eigen::VectorXd eff_cov = Eigen::VectorXd::Zero(states);
    for (int t = 0; t < steps; ++t)
      eff_cov += effective_attention_step(cfg, tracker, raw.row(t).transpose());
    Eigen::VectorXd raw_cov = raw.colwise().sum().transpose();

    for (int i = 0; i < states; ++i)
      for (int k = 0; k < states; ++k) {
        double rd = raw_cov[i] - raw_cov[k];
        double ed = eff_cov[i] - eff_cov[k];
        if (rd > 1e-12 && ed <= 0.0) return false;
        if (std::abs(rd) <= 1e-12 && std::abs(ed) > 1e-9) return false;
      }
  }
  return true;
}

// --------------------------------------------------------------------------
// 5. DyDim: constant streams non-increasing over a transform grid; the
// mixing weight P is a monotone running max.

bool criterion_dydim() {
  // The monotone-gain consequence assumes an ordering: g1 has the
  // smaller first derivative over the traversed coverage, i.e. it
  // diminishes faster than g2. Build the grid from ordered pairs only.
  std::vector<std::pair<ConcaveTransform, ConcaveTransform>> grid;
  const std::vector<double> bases = {2.2, 2.5, 3.0, 4.5, 5.5,
                                     7.5, 9.0, 12.0, 16.0};
  const std::vector<double> exps = {0.2, 0.25, 0.3, 0.35, 0.4, 0.45,
                                    0.5, 0.6, 0.65, 0.7, 0.8, 0.9};

  // larger log base -> uniformly smaller derivative
  for (double a1 : bases)
    for (double a2 : bases)
      if (a1 > a2)
        grid.emplace_back(ConcaveTransform::log_base(a1),
                          ConcaveTransform::log_base(a2));
  // smaller power exponent -> uniformly smaller derivative
  for (double p1 : exps)
    for (double p2 : exps)
      if (p1 < p2)
        grid.emplace_back(ConcaveTransform::power(p1),
                          ConcaveTransform::power(p2));
  // sqrt(x+1) has the derivative of power 0.5
  for (double p : {0.2, 0.25, 0.3, 0.35, 0.4, 0.45})
    grid.emplace_back(ConcaveTransform::power(p),
                      ConcaveTransform::square_root());
  for (double p : {0.6, 0.65, 0.7, 0.8, 0.9})
    grid.emplace_back(ConcaveTransform::square_root(),
                      ConcaveTransform::power(p));
  // log base a below sqrt/power p requires 1/ln a <= p at x = 0
  for (double a : {7.5, 9.0, 12.0, 16.0}) {
    grid.emplace_back(ConcaveTransform::log_base(a),
                      ConcaveTransform::square_root());
    for (double p : {0.6, 0.65, 0.7, 0.8, 0.9})
      if (std::log(a) * p >= 1.0)
        grid.emplace_back(ConcaveTransform::log_base(a),
                          ConcaveTransform::power(p));
  }
  if (grid.size() < 100) return false;

  for (const auto& [g1, g2] : grid)
    for (double c : {0.05, 0.3, 0.7, 1.0}) {
      AttentionHistory h(24, c);
      auto eff = dynamic_diminishing_attention(g1, g2, h);
      for (size_t t = 1; t < eff.size(); ++t)
        if (eff[t] > eff[t - 1] + 1e-12) return false;
    }

  SplitMix64 rng(505);
  for (int trial = 0; trial < 1000; ++trial) {
    int states = static_cast<int>(rng.next_int(1, 8));
    CoverageTracker tracker(states);
    Eigen::VectorXd prev_peak = tracker.peak;
    for (int t = 0; t < 16; ++t) {
      Eigen::VectorXd raw(states);
      for (int i = 0; i < states; ++i) raw[i] = rng.next_double();
      raw /= raw.sum();
      tracker.update(raw);
      if (((tracker.peak - prev_peak).array() < -1e-300).any()) return false;
      prev_peak = tracker.peak;
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 6. Greedy bound with exhaustive submodularity confirmation.

bool criterion_greedy_bound() {
  SplitMix64 rng(606);
  auto families = transform_families();
  const double bound = 1.0 - 1.0 / std::exp(1.0) - 1e-9;
  for (int trial = 0; trial < 1000; ++trial) {
    int n = static_cast<int>(rng.next_int(4, 12));
    int concepts = static_cast<int>(rng.next_int(2, 5));
    int m = static_cast<int>(rng.next_int(1, 4));

    WeightedCoverageFunction f;
    f.concept_weights.resize(concepts);
    for (int c = 0; c < concepts; ++c)
      f.concept_weights[c] = 0.05 + 2.0 * rng.next_double();
    f.cover.resize(n, concepts);
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < concepts; ++c)
        f.cover(v, c) = rng.next_double() < 0.5 ? 3.0 * rng.next_double() : 0.0;
    f.cover(0, 0) += 0.1;  // optimum strictly positive
    f.transform = families[trial % families.size()];

    if (!is_submodular(f)) return false;
    auto greedy = greedy_maximize(f, m);
    auto brute = brute_force_maximize(f, m);
    if (brute.value <= 0.0) return false;
    if (greedy.value / brute.value < bound) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// 7. Gradient checks: primitives under 1e-6, the full attention step under
// 1e-4.

bool criterion_gradients() {
  SplitMix64 rng(707);
  auto rand_mat = [&](int r, int c, double lo, double hi) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < c; ++k) m(i, k) = lo + (hi - lo) * rng.next_double();
    return m;
  };

  using ad::Tape;
  using ad::Tensor;
  Eigen::MatrixXd x = rand_mat(3, 4, -1.0, 1.0);
  Eigen::MatrixXd pos = rand_mat(3, 4, 0.4, 2.0);
  Eigen::MatrixXd w = rand_mat(4, 3, -1.0, 1.0);

  std::vector<std::function<Tensor(Tape&, const Tensor&)>> prims = {
      [](Tape& t, const Tensor& a) { return ad::sum_all(ad::tanh(a)); },
      [](Tape& t, const Tensor& a) { return ad::sum_all(ad::sigmoid(a)); },
      [](Tape& t, const Tensor& a) { return ad::sum_all(ad::exp(a)); },
      [&](Tape& t, const Tensor& a) {
        return ad::sum_all(ad::matmul(a, t.input(w)));
      },
      [](Tape& t, const Tensor& a) { return ad::sum_all(ad::mul(a, a)); },
      [](Tape& t, const Tensor& a) {
        return ad::sum_all(ad::mul(ad::softmax_rows(a), a));
      },
      [](Tape& t, const Tensor& a) { return ad::sum_all(ad::cumsum_rows(a)); },
      [](Tape& t, const Tensor& a) {
        return ad::sum_all(ad::mul(ad::sum_rows(a), ad::sum_rows(a)));
      },
      [](Tape& t, const Tensor& a) {
        return ad::sum_all(ad::mul(ad::transpose(a), ad::transpose(a)));
      },
      [](Tape& t, const Tensor& a) {
        return ad::sum_all(ad::concat_rows({a, ad::mul_const(a, 3.0)}));
      },
      [](Tape& t, const Tensor& a) { return ad::cross_entropy(a, {1, 3, 0}); },
      [](Tape& t, const Tensor& a) {
        return ad::sum_all(ad::embedding_lookup(a, {2, 0, 1, 2}));
      },
  };
  for (auto& f : prims)
    if (ad::grad_check(f, x) >= 1e-6) return false;

  std::vector<std::function<Tensor(Tape&, const Tensor&)>> pos_prims = {
      [](Tape& t, const Tensor& a) { return ad::sum_all(ad::log(a)); },
      [](Tape& t, const Tensor& a) { return ad::sum_all(ad::sqrt(a)); },
      [](Tape& t, const Tensor& a) {
        return ad::sum_all(ad::pow_const(a, 0.65));
      },
  };
  for (auto& f : pos_prims)
    if (ad::grad_check(f, pos) >= 1e-6) return false;

  // full diminishing attention step through the model loss
  Instance inst{{5, 6, 7, 5}, {6, 7, 5}};
  ModelParams params = ModelParams::init(9, 5, 7070);
  auto ln = ConcaveTransform::log_base(std::exp(1.0));
  DiminishConfig dydim_cfg =
      DiminishConfig::dydim(ln, ConcaveTransform::square_root());
  // route gradient through the running max so finite differences and the
  // analytic path see the same function
  dydim_cfg.detach_peak_gradient = false;
  for (const auto& cfg : {DiminishConfig::dim(ln), dydim_cfg}) {
    // perturb one weight matrix and compare to the tape gradient
    auto f = [&](Tape& t, const Tensor& att_wh) {
      // tape model with att_wh as the variable input
      TapeModel m;
      m.embedding = t.input(params.embedding);
      m.enc_wx = t.input(params.enc_wx);
      m.enc_wh = t.input(params.enc_wh);
      m.enc_b = t.input(params.enc_b);
      m.att_wh = att_wh;
      m.att_ws = t.input(params.att_ws);
      m.att_b = t.input(params.att_b);
      m.att_v = t.input(params.att_v);
      m.dec_wy = t.input(params.dec_wy);
      m.dec_wc = t.input(params.dec_wc);
      m.dec_wh = t.input(params.dec_wh);
      m.dec_b = t.input(params.dec_b);
      m.out_w = t.input(params.out_w);
      m.out_b = t.input(params.out_b);
      return teacher_forced_loss(t, m, inst, cfg);
    };
    if (ad::grad_check(f, params.att_wh) >= 1e-4) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// Shared harness for the directional experiments.

struct VariantResult {
  double entropy = 0.0;     // mean coverage entropy over decoded outputs
  double repetition = 0.0;  // mean bigram repetition over decoded outputs
  double accuracy = 0.0;    // teacher-forced token accuracy on val
  std::vector<TokenSeq> outputs;
};

VariantResult run_variant(ModelParams params, const DiminishConfig& attn,
                          const Corpus& corpus, int finetune_epochs,
                          uint64_t seed, const DecodeConfig& dc,
                          double finetune_lr) {
  if (finetune_epochs > 0) {
    TrainConfig tc;
    tc.epochs = finetune_epochs;
    tc.batch_size = 32;
    tc.seed = seed;
    tc.learning_rate = finetune_lr;
    tc.attention = attn;
    train(params, tc, corpus.train);
  }
  VariantResult out;
  int counted = 0;
  for (const Instance& inst : corpus.test) {
    GenerationRecord rec = generate(params, inst.source, dc, attn);
    out.outputs.push_back(rec.output);
    out.repetition += repetition_ratio(rec.output, 2);
    if (rec.effective_coverage.sum() > 0.0) {
      out.entropy += coverage_entropy(rec.effective_coverage);
      ++counted;
    }
  }
  out.repetition /= corpus.test.size();
  if (counted) out.entropy /= counted;
  out.accuracy = evaluate_teacher_forced(params, attn, corpus.val).second;
  return out;
}

// --------------------------------------------------------------------------
// 8. Repeat-trap directional experiment.

bool criterion_repeat_trap() {
  const int seeds = 10;
  const auto ln = ConcaveTransform::log_base(std::exp(1.0));
  // ordered dydim pair: log16 has a uniformly smaller derivative than log2.2
  const auto dy1 = ConcaveTransform::log_base(16.0);
  const auto dy2 = ConcaveTransform::log_base(2.2);

  int entropy_wins_dim = 0, entropy_wins_dydim = 0;
  int rep_wins_dim = 0, rep_wins_dydim = 0;
  double acc_std = 0.0, acc_dim = 0.0, acc_dydim = 0.0;

  for (int s = 0; s < seeds; ++s) {
    TaskSpec task;
    task.kind = TaskSpec::Kind::RepeatTrap;
    task.vocab_size = 40;
    task.source_len_min = 30;
    task.source_len_max = 50;
    task.seed = 9000 + s;
    task.n_train = 2000;
    task.n_val = 32;
    task.n_test = 48;
    Corpus corpus = gen_repeat_trap(task);

    ModelParams params = ModelParams::init(corpus.vocab_size, 32, 800 + s);
    // pretrain past the loss plateau; short warm-restarted runs escape it
    // more reliably than one long run at this scale
    for (int chunk = 0; chunk < 14; ++chunk) {
      TrainConfig pre;
      pre.epochs = 2;
      pre.batch_size = 32;
      pre.learning_rate = 5e-3;
      pre.seed = 7100 + s + 31 * chunk;
      if (train(params, pre, corpus.train).loss_curve.back() < 2.0) break;
    }

    DecodeConfig dc;
    dc.beam_width = 1;
    dc.min_len = 12;
    dc.max_len = 16;

    const int ft = 1;
    const double ft_lr = 5e-4;  // nudge, not retrain: keep variants comparable
    VariantResult std_r = run_variant(params, DiminishConfig::standard(),
                                      corpus, ft, 7200 + s, dc, ft_lr);
    VariantResult dim_r = run_variant(params, DiminishConfig::dim(ln), corpus,
                                      ft, 7200 + s, dc, ft_lr);
    VariantResult dyd_r = run_variant(params, DiminishConfig::dydim(dy1, dy2),
                                      corpus, ft, 7200 + s, dc, ft_lr);

    entropy_wins_dim += dim_r.entropy > std_r.entropy;
    entropy_wins_dydim += dyd_r.entropy > std_r.entropy;
    rep_wins_dim += dim_r.repetition <= std_r.repetition;
    rep_wins_dydim += dyd_r.repetition <= std_r.repetition;
    acc_std += std_r.accuracy;
    acc_dim += dim_r.accuracy;
    acc_dydim += dyd_r.accuracy;
    std::printf("     seed %d: H %.3f/%.3f/%.3f rep2 %.3f/%.3f/%.3f acc "
                "%.3f/%.3f/%.3f (std/dim/dydim)\n",
                s, std_r.entropy, dim_r.entropy, dyd_r.entropy,
                std_r.repetition, dim_r.repetition, dyd_r.repetition,
                std_r.accuracy, dim_r.accuracy, dyd_r.accuracy);
    std::fflush(stdout);
  }
  acc_std /= seeds;
  acc_dim /= seeds;
  acc_dydim /= seeds;
  std::printf("     entropy wins dim %d/10 dydim %d/10; repetition wins dim "
              "%d/10 dydim %d/10; acc %.3f/%.3f/%.3f\n",
              entropy_wins_dim, entropy_wins_dydim, rep_wins_dim,
              rep_wins_dydim, acc_std, acc_dim, acc_dydim);
  return entropy_wins_dim >= 8 && entropy_wins_dydim >= 8 &&
         rep_wins_dim >= 8 && rep_wins_dydim >= 8 &&
         acc_dim >= acc_std - 0.02 && acc_dydim >= acc_std - 0.02;
}

// --------------------------------------------------------------------------
// 9. Layout-bias probe on the keyword task.

double tail_recall(const std::vector<TokenSeq>& outputs, const Corpus& corpus,
                   int salient_end) {
  double total = 0.0;
  int counted = 0;
  size_t out_idx = 0;
  for (size_t i = 0; i < corpus.test.size(); ++i, ++out_idx) {
    if (i % 2 == 0) continue;  // only the tail-biased half
    const Instance& inst = corpus.test[i];
    // salient tokens whose source position falls in the tail half
    TokenSeq tail_ref;
    int len = static_cast<int>(inst.source.size());
    for (int p = len / 2; p < len; ++p)
      if (inst.source[p] >= kFirstContentId && inst.source[p] < salient_end)
        tail_ref.push_back(inst.source[p]);
    if (tail_ref.empty()) continue;
    total += rouge_n(outputs[out_idx], tail_ref, 1).recall;
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

bool criterion_layout_bias() {
  const int seeds = 10;
  const auto ln = ConcaveTransform::log_base(std::exp(1.0));
  const auto dy1 = ConcaveTransform::log_base(16.0);
  const auto dy2 = ConcaveTransform::log_base(2.2);

  int wins_dim = 0, wins_dydim = 0;
  for (int s = 0; s < seeds; ++s) {
    TaskSpec task;
    task.kind = TaskSpec::Kind::KeywordSummarize;
    task.vocab_size = 36;
    task.source_len_min = 20;
    task.source_len_max = 32;
    task.salient_fraction = 0.25;
    task.seed = 9500 + s;
    task.n_train = 1200;
    task.n_val = 16;
    task.n_test = 60;
    Corpus corpus = gen_keyword_summarize(task);
    int salient_end = keyword_salient_vocab_end(task);

    // a shared standard-attention base model, pretrained past the task's
    // loss plateau (warm-restarted short runs escape it reliably at d=48)
    ModelParams base = ModelParams::init(corpus.vocab_size, 48, 860 + s);
    for (int chunk = 0; chunk < 20; ++chunk) {
      TrainConfig pre;
      pre.epochs = 2;
      pre.batch_size = 32;
      pre.learning_rate = 5e-3;
      pre.seed = 7300 + s + 31 * chunk;
      if (train(base, pre, corpus.train).loss_curve.back() < 1.0) break;
    }

    DecodeConfig dc;
    dc.beam_width = 1;
    dc.max_len = 14;

    auto finetune_and_decode = [&](const DiminishConfig& attn) {
      ModelParams params = base;
      TrainConfig tc;
      tc.epochs = 2;
      tc.batch_size = 32;
      tc.learning_rate = 1e-3;
      tc.seed = 7900 + s;
      tc.attention = attn;
      train(params, tc, corpus.train);
      std::vector<TokenSeq> outputs;
      for (const Instance& inst : corpus.test)
        outputs.push_back(generate(params, inst.source, dc, attn).output);
      return tail_recall(outputs, corpus, salient_end);
    };

    double std_r = finetune_and_decode(DiminishConfig::standard());
    double dim_r = finetune_and_decode(DiminishConfig::dim(ln));
    double dyd_r = finetune_and_decode(DiminishConfig::dydim(dy1, dy2));
    wins_dim += dim_r > std_r;
    wins_dydim += dyd_r > std_r;
    std::printf("     seed %d: tail recall %.3f/%.3f/%.3f (std/dim/dydim)\n",
                s, std_r, dim_r, dyd_r);
    std::fflush(stdout);
  }
  std::printf("     tail-recall wins dim %d/10 dydim %d/10\n", wins_dim,
              wins_dydim);
  return wins_dim >= 7 && wins_dydim >= 7;
}

// --------------------------------------------------------------------------
// 10. Decoding contracts at scale.

bool criterion_decoding() {
  TaskSpec task;
  task.kind = TaskSpec::Kind::RepeatTrap;
  task.vocab_size = 32;
  task.source_len_min = 16;
  task.source_len_max = 28;
  task.seed = 4242;
  task.n_train = 600;
  task.n_val = 8;
  task.n_test = 1000;
  Corpus corpus = gen_repeat_trap(task);

  ModelParams params = ModelParams::init(corpus.vocab_size, 24, 4242);
  TrainConfig tc;
  tc.epochs = 2;  // undertrained on purpose: repetition pressure
  tc.batch_size = 32;
  tc.seed = 4243;
  train(params, tc, corpus.train);

  DiminishConfig attn = DiminishConfig::standard();

  DecodeConfig blocked;
  blocked.beam_width = 4;
  blocked.max_len = 16;
  blocked.ngram_block_n = 3;
  int fallbacks = 0;
  for (const Instance& inst : corpus.test) {
    GenerationRecord rec = generate(params, inst.source, blocked, attn);
    if (rec.block_fallback) {
      ++fallbacks;
      continue;
    }
    if (repetition_ratio(rec.output, 3) != 0.0) return false;
  }
  if (fallbacks >= 10) return false;  // < 1% of 1000

  DecodeConfig greedy_cfg;
  greedy_cfg.beam_width = 1;
  greedy_cfg.max_len = 16;
  for (const Instance& inst : corpus.test) {
    GenerationRecord g = greedy_decode(params, inst.source, greedy_cfg, attn);
    GenerationRecord b =
        beam_search(params, inst.source, greedy_cfg, attn).front();
    if (g.output != b.output) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// 11. Metric oracles.

std::map<TokenSeq, int> oracle_ngrams(const TokenSeq& s, int n) {
  std::map<TokenSeq, int> out;
  for (int i = 0; i + n <= static_cast<int>(s.size()); ++i)
    ++out[TokenSeq(s.begin() + i, s.begin() + i + n)];
  return out;
}

bool criterion_metrics() {
  // hand examples from the metric contracts
  {
    auto s = rouge_n({10, 11, 12}, {10, 11}, 1);
    if (std::abs(s.precision - 2.0 / 3.0) > 1e-12) return false;
    if (std::abs(s.recall - 1.0) > 1e-12) return false;
    auto l = rouge_l({1, 3, 2, 4}, {1, 2, 3, 4});
    if (std::abs(l.precision - 0.75) > 1e-12) return false;
    if (std::abs(corpus_bleu({{1, 2, 3, 4, 5}}, {{1, 2, 3, 4, 5, 6}}) -
                 std::exp(1.0 - 6.0 / 5.0)) > 1e-12)
      return false;
    if (corpus_bleu({{1, 2, 9, 4, 7}}, {{1, 2, 3, 4, 5, 6}}) != 0.0)
      return false;
    if (std::abs(repetition_ratio({1, 2, 1, 2, 1}, 2) - 0.5) > 1e-12)
      return false;
    if (novel_ngram_pct({2, 3, 4}, {1, 2, 3, 4, 5}, 2) != 0.0) return false;
    if (novel_ngram_pct({7, 8, 9}, {1, 2, 3, 4, 5}, 2) != 1.0) return false;
  }

  SplitMix64 rng(1111);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = static_cast<int>(rng.next_int(1, 4));
    auto rand_seq = [&] {
      TokenSeq s(static_cast<size_t>(rng.next_int(0, 14)));
      for (int& t : s) t = static_cast<int>(rng.next_int(0, 5));
      return s;
    };
    TokenSeq cand = rand_seq(), ref = rand_seq();

    auto cg = oracle_ngrams(cand, n);
    auto rg = oracle_ngrams(ref, n);
    long long overlap = 0, ctot = 0, rtot = 0, novel = 0;
    for (auto& [gram, c] : cg) {
      ctot += c;
      auto it = rg.find(gram);
      if (it != rg.end())
        overlap += std::min<long long>(c, it->second);
      else
        novel += c;
    }
    for (auto& [gram, c] : rg) rtot += c;

    auto s = rouge_n(cand, ref, n);
    double p_oracle = ctot ? double(overlap) / ctot : 0.0;
    double r_oracle = rtot ? double(overlap) / rtot : 0.0;
    if (s.precision != p_oracle || s.recall != r_oracle) return false;

    if (static_cast<int>(cand.size()) >= n && ctot > 0) {
      double rep_oracle = 1.0 - double(cg.size()) / ctot;
      if (repetition_ratio(cand, n) != rep_oracle) return false;
      double nov_oracle = double(novel) / ctot;
      if (novel_ngram_pct(cand, ref, n) != nov_oracle) return false;
    }

    // LCS oracle for rouge_l
    if (!cand.empty() && !ref.empty()) {
      std::vector<std::vector<int>> dp(cand.size() + 1,
                                       std::vector<int>(ref.size() + 1, 0));
      for (size_t i = 1; i <= cand.size(); ++i)
        for (size_t k = 1; k <= ref.size(); ++k)
          dp[i][k] = cand[i - 1] == ref[k - 1]
                         ? dp[i - 1][k - 1] + 1
                         : std::max(dp[i - 1][k], dp[i][k - 1]);
      int lcs = dp[cand.size()][ref.size()];
      auto l = rouge_l(cand, ref);
      if (l.precision != double(lcs) / cand.size()) return false;
      if (l.recall != double(lcs) / ref.size()) return false;
    }
  }
  return true;
}

// --------------------------------------------------------------------------
// 12. Closed-form crossover of sqrt vs natural log derivatives.

bool criterion_crossover() {
  auto x = crossover_point(ConcaveTransform::square_root(),
                           ConcaveTransform::log_base(std::exp(1.0)));
  return x.has_value() && std::abs(*x - 3.0) <= 1e-8;
}

}  // namespace

int main() {
  run_criterion(1, "diminishing returns of F across transform families",
                criterion_submodularity);
  run_criterion(2, "telescoping identity, batch and streaming",
                criterion_telescoping);
  run_criterion(3, "later-equal-attention and cross-state diminishing",
                criterion_fig1_properties);
  run_criterion(4, "effective coverage preserves the raw coverage order",
                criterion_order_preservation);
  run_criterion(5, "dydim constant streams non-increasing; peak monotone",
                criterion_dydim);
  run_criterion(6, "greedy within 1-1/e of brute force; instances submodular",
                criterion_greedy_bound);
  run_criterion(7, "gradient checks: primitives 1e-6, attention step 1e-4",
                criterion_gradients);
  run_criterion(8, "repeat-trap: higher entropy, no more repetition",
                criterion_repeat_trap);
  run_criterion(9, "layout bias: better tail recall on keyword task",
                criterion_layout_bias);
  run_criterion(10, "decoding: blocking holds; beam-1 equals greedy",
                criterion_decoding);
  run_criterion(11, "metrics match brute-force oracles exactly",
                criterion_metrics);
  run_criterion(12, "sqrt/log derivative crossover at 3.0",
                criterion_crossover);

  int failed = 0;
  for (const Criterion& c : g_results) failed += !c.ok;
  if (failed) {
    std::printf("%d of %zu criteria FAILED\n", failed, g_results.size());
    return 1;
  }
  std::printf("all %zu criteria passed\n", g_results.size());
  return 0;
}
