#pragma once

#include <Eigen/Core>
#include <string>
#include <tuple>
#include <vector>

#include "subattn/autodiff.hpp"
#include "subattn/coverage.hpp"
#include "subattn/synth.hpp"

namespace subattn {

// Single-layer recurrent encoder-decoder with additive cross-attention.
// The effective attention used to form the context vector is selected by a
// DiminishConfig; the same parameters serve any config.
struct ModelParams {
  int vocab = 0;
  int dim = 0;

  Eigen::MatrixXd embedding;              // vocab x d
  Eigen::MatrixXd enc_wx, enc_wh, enc_b;  // d x d, d x d, 1 x d
  Eigen::MatrixXd att_wh, att_ws, att_b;  // d x d, d x d, 1 x d
  Eigen::MatrixXd att_v;                  // d x 1
  Eigen::MatrixXd dec_wy, dec_wc, dec_wh, dec_b;
  Eigen::MatrixXd out_w, out_b;           // d x vocab, 1 x vocab

  static ModelParams init(int vocab, int dim, uint64_t seed);

  static const std::vector<std::string>& field_names();
  std::vector<Eigen::MatrixXd*> fields();
  std::vector<const Eigen::MatrixXd*> fields() const;

  void check_finite() const;
};

// Versioned plain-text checkpoint: shapes, row-major values, config line.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Encoder pass: one d-vector of latent state per source token (rows).
Eigen::MatrixXd encode(const ModelParams& params, const TokenSeq& source);

// One inference attention step. Raw row is the softmax of additive scores;
// the effective row follows cfg; the tracker accumulates the RAW row.
// Context is effective * encoder_states (renormalized first iff flagged).
struct AttendResult {
  Eigen::RowVectorXd context;
  Eigen::VectorXd raw;
  Eigen::VectorXd effective;
};
AttendResult attend(const Eigen::RowVectorXd& decoder_state,
                    const Eigen::MatrixXd& encoder_states,
                    CoverageTracker& tracker, const DiminishConfig& cfg,
                    const ModelParams& params, int step_index);

// One decoder recurrence: consumes the previous output token embedding and
// the context, returns the new state and output logits.
struct DecoderStep {
  Eigen::RowVectorXd state;
  Eigen::RowVectorXd logits;
};
DecoderStep decoder_step(const ModelParams& params, int prev_token,
                         const Eigen::RowVectorXd& context,
                         const Eigen::RowVectorXd& prev_state);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  uint64_t seed = 1;
  double grad_clip_norm = 2.0;
  DiminishConfig attention;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean teacher-forced loss per epoch
};

// Teacher-forced Adam training, deterministic under the config seed.
// Mutates `params` in place; throws on non-finite loss with the epoch.
TrainResult train(ModelParams& params, const TrainConfig& config,
                  const std::vector<Instance>& corpus);

// Teacher-forced loss and token accuracy on a held-out set.
std::pair<double, double> evaluate_teacher_forced(
    const ModelParams& params, const DiminishConfig& cfg,
    const std::vector<Instance>& corpus);

// Tape-side forward (training path); exposed for gradient checks.
struct TapeModel {
  ad::Tensor embedding, enc_wx, enc_wh, enc_b;
  ad::Tensor att_wh, att_ws, att_b, att_v;
  ad::Tensor dec_wy, dec_wc, dec_wh, dec_b;
  ad::Tensor out_w, out_b;

  static TapeModel record(ad::Tape& tape, const ModelParams& params,
                          bool requires_grad);
};
ad::Tensor teacher_forced_loss(ad::Tape& tape, const TapeModel& model,
                               const Instance& instance,
                               const DiminishConfig& cfg);

// Zero-anchored concave transform expressed with tape primitives.
ad::Tensor transform_tensor(const ConcaveTransform& g, const ad::Tensor& x);

// Full generation output for one source.
struct GenerationRecord {
  TokenSeq source;
  TokenSeq output;                      // without BOS/EOS
  Eigen::MatrixXd raw_attention;        // T_dec x T_enc, rows sum to 1
  Eigen::MatrixXd effective_attention;  // same shape, entries >= 0
  Eigen::VectorXd effective_coverage;   // column sums of effective matrix
  double log_prob = 0.0;
  bool block_fallback = false;  // n-gram blocking had to be relaxed
};

}  // namespace subattn
