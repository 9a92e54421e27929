#include "subattn/decode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace subattn {

void DecodeConfig::validate() const {
  if (beam_width < 1 || beam_width > 64)
    throw std::invalid_argument("beam width must be in [1, 64]");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (min_len < 0) throw std::invalid_argument("min_len must be >= 0");
  if (length_norm_alpha < 0.0)
    throw std::invalid_argument("length_norm_alpha must be >= 0");
  if (ngram_block_n == 1)
    throw std::invalid_argument("ngram_block_n must be 0 or >= 2");
}

bool ngram_blocked(const TokenSeq& tokens, int candidate, int n) {
  if (n < 2) throw std::invalid_argument("blocking requires n >= 2");
  if (static_cast<int>(tokens.size()) < n) return false;
  // The would-be n-gram is the last n-1 tokens plus the candidate; compare
  // it against every complete n-gram already in the sequence.
  const size_t tail = tokens.size() - static_cast<size_t>(n - 1);
  for (size_t start = 0; start + n <= tokens.size(); ++start) {
    if (tokens[start + n - 1] != candidate) continue;
    bool match = true;
    for (int k = 0; k < n - 1; ++k) {
      if (tokens[start + k] != tokens[tail + k]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

double length_normalized_score(double log_prob, int length, double alpha) {
  if (length < 1) throw std::invalid_argument("length must be >= 1");
  return log_prob / std::pow(static_cast<double>(length), alpha);
}

namespace {

struct Hypothesis {
  TokenSeq tokens;  // emitted tokens, EOS included once finished
  double log_prob = 0.0;
  Eigen::RowVectorXd state;
  CoverageTracker tracker;
  std::vector<Eigen::VectorXd> raw_rows;
  std::vector<Eigen::VectorXd> eff_rows;
  bool finished = false;
  bool fallback = false;  // blocking had to be relaxed on this path

  int steps() const { return static_cast<int>(raw_rows.size()); }
};

GenerationRecord to_record(const Hypothesis& hyp, const TokenSeq& source,
                           bool fallback) {
  GenerationRecord rec;
  rec.source = source;
  for (int tok : hyp.tokens)
    if (tok != kEosId) rec.output.push_back(tok);
  const int t_dec = hyp.steps();
  const Eigen::Index t_enc = hyp.tracker.size();
  rec.raw_attention.resize(t_dec, t_enc);
  rec.effective_attention.resize(t_dec, t_enc);
  for (int t = 0; t < t_dec; ++t) {
    rec.raw_attention.row(t) = hyp.raw_rows[t].transpose();
    rec.effective_attention.row(t) = hyp.eff_rows[t].transpose();
  }
  rec.effective_coverage = rec.effective_attention.colwise().sum().transpose();
  rec.log_prob = hyp.log_prob;
  rec.block_fallback = fallback;
  return rec;
}

Eigen::RowVectorXd log_softmax(const Eigen::RowVectorXd& logits) {
  double mx = logits.maxCoeff();
  double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

std::vector<Hypothesis> run_beam(const ModelParams& params,
                                 const TokenSeq& source,
                                 const DecodeConfig& cfg,
                                 const DiminishConfig& attn_cfg) {
  const Eigen::MatrixXd enc = encode(params, source);
  const int width = cfg.beam_width;

  Hypothesis root;
  root.state = enc.row(enc.rows() - 1);
  root.tracker = CoverageTracker(enc.rows());
  std::vector<Hypothesis> beam = {root};
  std::vector<Hypothesis> finished;

  auto normalized = [&](const Hypothesis& h) {
    return length_normalized_score(h.log_prob, std::max(1, h.steps()),
                                   cfg.length_norm_alpha);
  };

  for (int step = 0; step < cfg.max_len && !beam.empty(); ++step) {
    struct Candidate {
      int parent;
      int token;
      double log_prob;
      bool fallback;
    };
    std::vector<Candidate> pool;

    // Advance each hypothesis one step; the attention and new decoder state
    // do not depend on the candidate token, so children share them.
    std::vector<Eigen::RowVectorXd> new_states(beam.size());
    for (size_t h = 0; h < beam.size(); ++h) {
      Hypothesis& hyp = beam[h];
      int prev = hyp.tokens.empty() ? kBosId : hyp.tokens.back();
      AttendResult att = attend(hyp.state, enc, hyp.tracker, attn_cfg, params,
                                hyp.steps());
      hyp.raw_rows.push_back(att.raw);
      hyp.eff_rows.push_back(att.effective);
      DecoderStep ds = decoder_step(params, prev, att.context, hyp.state);
      new_states[h] = ds.state;
      Eigen::RowVectorXd logp = log_softmax(ds.logits);

      size_t before = pool.size();
      auto expand = [&](bool blocking) {
        for (int tok = 0; tok < params.vocab; ++tok) {
          if (tok == kPadId || tok == kBosId) continue;
          if (tok == kEosId &&
              static_cast<int>(hyp.tokens.size()) < cfg.min_len)
            continue;
          if (blocking && cfg.ngram_block_n >= 2 && tok != kEosId &&
              ngram_blocked(hyp.tokens, tok, cfg.ngram_block_n))
            continue;
          pool.push_back({static_cast<int>(h), tok, hyp.log_prob + logp(tok),
                          !blocking || hyp.fallback});
        }
      };
      expand(cfg.ngram_block_n >= 2);
      // Everything blocked on this path: relax blocking, flag descendants.
      if (pool.size() == before) expand(false);
    }

    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.log_prob != b.log_prob)
                         return a.log_prob > b.log_prob;
                       if (a.token != b.token) return a.token < b.token;
                       return a.parent < b.parent;
                     });

    // Each selected candidate counts against the width, finished or not,
    // so a width-1 beam follows the greedy path exactly.
    std::vector<Hypothesis> next;
    int selected = 0;
    for (const Candidate& cand : pool) {
      if (selected >= width) break;
      ++selected;
      Hypothesis child = beam[cand.parent];
      child.state = new_states[cand.parent];
      child.tokens.push_back(cand.token);
      child.log_prob = cand.log_prob;
      child.fallback = cand.fallback;
      if (cand.token == kEosId) {
        child.finished = true;
        finished.push_back(std::move(child));
        if (static_cast<int>(finished.size()) > width) {
          std::sort(finished.begin(), finished.end(),
                    [&](const Hypothesis& a, const Hypothesis& b) {
                      return normalized(a) > normalized(b);
                    });
          finished.pop_back();
        }
      } else {
        next.push_back(std::move(child));
      }
    }
    beam = std::move(next);

    // Early stop: log-probs only decrease, so the best score any live
    // hypothesis can still reach is log_prob / max_len^alpha.
    if (static_cast<int>(finished.size()) >= width && !beam.empty()) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const Hypothesis& h : beam)
        best_live = std::max(
            best_live, length_normalized_score(h.log_prob, cfg.max_len,
                                               cfg.length_norm_alpha));
      double worst_kept = normalized(finished.back());
      for (const Hypothesis& h : finished)
        worst_kept = std::min(worst_kept, normalized(h));
      if (best_live <= worst_kept) break;
    }
  }

  for (Hypothesis& h : beam) finished.push_back(std::move(h));
  std::stable_sort(finished.begin(), finished.end(),
                   [&](const Hypothesis& a, const Hypothesis& b) {
                     return normalized(a) > normalized(b);
                   });
  return finished;
}

}  // namespace

std::vector<GenerationRecord> beam_search(const ModelParams& params,
                                          const TokenSeq& source,
                                          const DecodeConfig& decode_cfg,
                                          const DiminishConfig& attn_cfg) {
  decode_cfg.validate();
  std::vector<Hypothesis> ranked =
      run_beam(params, source, decode_cfg, attn_cfg);
  std::vector<GenerationRecord> records;
  records.reserve(ranked.size());
  for (const Hypothesis& h : ranked)
    records.push_back(to_record(h, source, h.fallback));
  return records;
}

GenerationRecord greedy_decode(const ModelParams& params,
                               const TokenSeq& source,
                               const DecodeConfig& decode_cfg,
                               const DiminishConfig& attn_cfg) {
  decode_cfg.validate();
  const Eigen::MatrixXd enc = encode(params, source);

  Hypothesis hyp;
  hyp.state = enc.row(enc.rows() - 1);
  hyp.tracker = CoverageTracker(enc.rows());
  bool fallback = false;

  for (int step = 0; step < decode_cfg.max_len; ++step) {
    int prev = hyp.tokens.empty() ? kBosId : hyp.tokens.back();
    AttendResult att =
        attend(hyp.state, enc, hyp.tracker, attn_cfg, params, hyp.steps());
    hyp.raw_rows.push_back(att.raw);
    hyp.eff_rows.push_back(att.effective);
    DecoderStep ds = decoder_step(params, prev, att.context, hyp.state);
    hyp.state = ds.state;
    Eigen::RowVectorXd logp = log_softmax(ds.logits);

    int best = -1;
    for (int tok = 0; tok < params.vocab; ++tok) {
      if (tok == kPadId || tok == kBosId) continue;
      if (tok == kEosId && static_cast<int>(hyp.tokens.size()) < decode_cfg.min_len)
        continue;
      if (decode_cfg.ngram_block_n >= 2 && tok != kEosId &&
          ngram_blocked(hyp.tokens, tok, decode_cfg.ngram_block_n))
        continue;
      if (best < 0 || logp(tok) > logp(best)) best = tok;
    }
    if (best < 0) {  // fully blocked: fall back to the unblocked argmax
      fallback = true;
      for (int tok = 0; tok < params.vocab; ++tok) {
        if (tok == kPadId || tok == kBosId) continue;
        if (tok == kEosId &&
            static_cast<int>(hyp.tokens.size()) < decode_cfg.min_len)
          continue;
        if (best < 0 || logp(tok) > logp(best)) best = tok;
      }
    }
    hyp.tokens.push_back(best);
    hyp.log_prob += logp(best);
    if (best == kEosId) break;
  }
  return to_record(hyp, source, fallback);
}

GenerationRecord generate(const ModelParams& params, const TokenSeq& source,
                          const DecodeConfig& decode_cfg,
                          const DiminishConfig& attn_cfg) {
  if (decode_cfg.beam_width == 1)
    return greedy_decode(params, source, decode_cfg, attn_cfg);
  return beam_search(params, source, decode_cfg, attn_cfg).front();
}

}  // namespace subattn
