#pragma once

#include <vector>

#include "subattn/seq2seq.hpp"

namespace subattn {

struct DecodeConfig {
  int beam_width = 4;          // 1 selects greedy expansion
  int max_len = 32;
  int min_len = 0;
  double length_norm_alpha = 0.0;
  int ngram_block_n = 0;       // 0 disables blocking; otherwise >= 2

  void validate() const;
};

// True iff appending `candidate` to `tokens` creates an n-gram that already
// occurs in tokens.
bool ngram_blocked(const TokenSeq& tokens, int candidate, int n);

// log_prob / length^alpha.
double length_normalized_score(double log_prob, int length, double alpha);

// Greedy decoding with the same blocking/min-len constraints as the beam.
GenerationRecord greedy_decode(const ModelParams& params,
                               const TokenSeq& source,
                               const DecodeConfig& decode_cfg,
                               const DiminishConfig& attn_cfg);

// Beam search; hypotheses carry their own coverage trackers. Returns
// hypotheses ranked by normalized score, best first.
std::vector<GenerationRecord> beam_search(const ModelParams& params,
                                          const TokenSeq& source,
                                          const DecodeConfig& decode_cfg,
                                          const DiminishConfig& attn_cfg);

// Best hypothesis with attention matrices and coverage attached.
GenerationRecord generate(const ModelParams& params, const TokenSeq& source,
                          const DecodeConfig& decode_cfg,
                          const DiminishConfig& attn_cfg);

}  // namespace subattn
