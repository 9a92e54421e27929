#include "subattn/seq2seq.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "subattn/rng.hpp"

namespace subattn {

namespace {

Eigen::MatrixXd gaussian_matrix(SplitMix64& rng, Eigen::Index rows,
                                Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = scale * rng.next_gaussian();
  return m;
}

}  // namespace

ModelParams ModelParams::init(int vocab, int dim, uint64_t seed) {
  if (vocab < kFirstContentId || dim < 1)
    throw std::invalid_argument("bad model dimensions");
  SplitMix64 rng(seed);
  double s = 1.0 / std::sqrt(static_cast<double>(dim));
  ModelParams p;
  p.vocab = vocab;
  p.dim = dim;
  p.embedding = gaussian_matrix(rng, vocab, dim, 0.1);
  p.enc_wx = gaussian_matrix(rng, dim, dim, s);
  p.enc_wh = gaussian_matrix(rng, dim, dim, s);
  p.enc_b = Eigen::MatrixXd::Zero(1, dim);
  p.att_wh = gaussian_matrix(rng, dim, dim, s);
  p.att_ws = gaussian_matrix(rng, dim, dim, s);
  p.att_b = Eigen::MatrixXd::Zero(1, dim);
  p.att_v = gaussian_matrix(rng, dim, 1, s);
  p.dec_wy = gaussian_matrix(rng, dim, dim, s);
  p.dec_wc = gaussian_matrix(rng, dim, dim, s);
  p.dec_wh = gaussian_matrix(rng, dim, dim, s);
  p.dec_b = Eigen::MatrixXd::Zero(1, dim);
  p.out_w = gaussian_matrix(rng, dim, vocab, s);
  p.out_b = Eigen::MatrixXd::Zero(1, vocab);
  return p;
}

const std::vector<std::string>& ModelParams::field_names() {
  static const std::vector<std::string> names = {
      "embedding", "enc_wx", "enc_wh", "enc_b", "att_wh", "att_ws", "att_b",
      "att_v",     "dec_wy", "dec_wc", "dec_wh", "dec_b", "out_w",  "out_b"};
  return names;
}

std::vector<Eigen::MatrixXd*> ModelParams::fields() {
  return {&embedding, &enc_wx, &enc_wh, &enc_b, &att_wh, &att_ws, &att_b,
          &att_v,     &dec_wy, &dec_wc, &dec_wh, &dec_b, &out_w,  &out_b};
}

std::vector<const Eigen::MatrixXd*> ModelParams::fields() const {
  return {&embedding, &enc_wx, &enc_wh, &enc_b, &att_wh, &att_ws, &att_b,
          &att_v,     &dec_wy, &dec_wc, &dec_wh, &dec_b, &out_w,  &out_b};
}

void ModelParams::check_finite() const {
  for (const Eigen::MatrixXd* f : fields())
    if (!f->allFinite())
      throw std::runtime_error("model parameters contain non-finite values");
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "subattn-checkpoint v1\n";
  out << "vocab " << params.vocab << " dim " << params.dim << '\n';
  out << std::setprecision(17);
  auto fields = params.fields();
  const auto& names = ModelParams::field_names();
  for (size_t k = 0; k < fields.size(); ++k) {
    const Eigen::MatrixXd& m = *fields[k];
    out << names[k] << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out << (c ? " " : "") << m(r, c);
      out << '\n';
    }
  }
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != "subattn-checkpoint v1")
    throw std::runtime_error("not a subattn checkpoint: " + path);
  std::string key;
  ModelParams params;
  in >> key >> params.vocab >> key >> params.dim;

  auto fields = params.fields();
  const auto& names = ModelParams::field_names();
  for (size_t k = 0; k < fields.size(); ++k) {
    std::string name;
    Eigen::Index rows, cols;
    in >> name >> rows >> cols;
    if (name != names[k])
      throw std::runtime_error("checkpoint field order mismatch at " + name);
    fields[k]->resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) in >> (*fields[k])(r, c);
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  params.check_finite();
  return params;
}

Eigen::MatrixXd encode(const ModelParams& params, const TokenSeq& source) {
  if (source.empty()) throw std::invalid_argument("empty source");
  Eigen::MatrixXd states(static_cast<Eigen::Index>(source.size()), params.dim);
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(params.dim);
  for (size_t i = 0; i < source.size(); ++i) {
    if (source[i] < 0 || source[i] >= params.vocab)
      throw std::out_of_range("unknown token id in source");
    h = (params.embedding.row(source[i]) * params.enc_wx + h * params.enc_wh +
         params.enc_b)
            .array()
            .tanh();
    states.row(static_cast<Eigen::Index>(i)) = h;
  }
  return states;
}

AttendResult attend(const Eigen::RowVectorXd& decoder_state,
                    const Eigen::MatrixXd& encoder_states,
                    CoverageTracker& tracker, const DiminishConfig& cfg,
                    const ModelParams& params, int step_index) {
  if (tracker.size() != encoder_states.rows())
    throw std::invalid_argument("tracker size does not match encoder states");
  if (tracker.steps != step_index)
    throw std::logic_error("coverage tracker desynchronized from step index");

  Eigen::MatrixXd pre = encoder_states * params.att_wh;
  pre.rowwise() += (decoder_state * params.att_ws + params.att_b).row(0);
  Eigen::VectorXd scores = pre.array().tanh().matrix() * params.att_v;

  Eigen::ArrayXd ex = (scores.array() - scores.maxCoeff()).exp();
  Eigen::VectorXd raw = (ex / ex.sum()).matrix();

  AttendResult result;
  result.raw = raw;
  result.effective = effective_attention_step(cfg, tracker, raw);
  Eigen::VectorXd weights = result.effective;
  if (cfg.renormalize_effective) {
    double total = weights.sum();
    if (total > 0.0) weights /= total;
  }
  result.context = weights.transpose() * encoder_states;
  return result;
}

DecoderStep decoder_step(const ModelParams& params, int prev_token,
                         const Eigen::RowVectorXd& context,
                         const Eigen::RowVectorXd& prev_state) {
  if (prev_token < 0 || prev_token >= params.vocab)
    throw std::out_of_range("unknown token id in decoder");
  DecoderStep step;
  step.state = (params.embedding.row(prev_token) * params.dec_wy +
                context * params.dec_wc + prev_state * params.dec_wh +
                params.dec_b)
                   .array()
                   .tanh();
  step.logits = step.state * params.out_w + params.out_b;
  return step;
}

TapeModel TapeModel::record(ad::Tape& tape, const ModelParams& params,
                            bool requires_grad) {
  TapeModel m;
  m.embedding = tape.input(params.embedding, requires_grad);
  m.enc_wx = tape.input(params.enc_wx, requires_grad);
  m.enc_wh = tape.input(params.enc_wh, requires_grad);
  m.enc_b = tape.input(params.enc_b, requires_grad);
  m.att_wh = tape.input(params.att_wh, requires_grad);
  m.att_ws = tape.input(params.att_ws, requires_grad);
  m.att_b = tape.input(params.att_b, requires_grad);
  m.att_v = tape.input(params.att_v, requires_grad);
  m.dec_wy = tape.input(params.dec_wy, requires_grad);
  m.dec_wc = tape.input(params.dec_wc, requires_grad);
  m.dec_wh = tape.input(params.dec_wh, requires_grad);
  m.dec_b = tape.input(params.dec_b, requires_grad);
  m.out_w = tape.input(params.out_w, requires_grad);
  m.out_b = tape.input(params.out_b, requires_grad);
  return m;
}

ad::Tensor transform_tensor(const ConcaveTransform& g, const ad::Tensor& x) {
  using namespace ad;
  switch (g.kind()) {
    case ConcaveTransform::Kind::LogBase:
      return mul_const(log(add_const(x, 1.0)), 1.0 / std::log(g.param()));
    case ConcaveTransform::Kind::SquareRoot:
      return add_const(sqrt(add_const(x, 1.0)), -1.0);
    case ConcaveTransform::Kind::Power:
      return add_const(pow_const(add_const(x, 1.0), g.param()), -1.0);
  }
  throw std::logic_error("unknown transform kind");
}

ad::Tensor teacher_forced_loss(ad::Tape& tape, const TapeModel& model,
                               const Instance& instance,
                               const DiminishConfig& cfg) {
  using namespace ad;
  if (instance.source.empty() || instance.target.empty())
    throw std::invalid_argument("empty instance");
  const Eigen::Index n_enc = static_cast<Eigen::Index>(instance.source.size());

  // Encoder.
  std::vector<Tensor> enc_rows;
  Tensor h = tape.input(Eigen::MatrixXd::Zero(1, model.enc_b.cols()), false);
  for (Eigen::Index i = 0; i < n_enc; ++i) {
    Tensor x = embedding_lookup(model.embedding, {instance.source[i]});
    h = tanh(add(add(matmul(x, model.enc_wx), matmul(h, model.enc_wh)),
                 model.enc_b));
    enc_rows.push_back(h);
  }
  Tensor enc_states = concat_rows(enc_rows);
  Tensor enc_att = matmul(enc_states, model.att_wh);  // reused every step

  // Teacher-forced decoder: inputs BOS + target, predicting target + EOS.
  std::vector<int> inputs = {kBosId};
  inputs.insert(inputs.end(), instance.target.begin(), instance.target.end());
  std::vector<int> outputs = instance.target;
  outputs.push_back(kEosId);

  Tensor state = enc_rows.back();
  Tensor coverage =
      tape.input(Eigen::MatrixXd::Zero(1, n_enc), false);  // c^{t-1}, 1 x T
  Tensor peak_t;  // running max as a tape value (used when P is not detached)
  Eigen::RowVectorXd peak_plain = Eigen::RowVectorXd::Zero(n_enc);
  bool first_step = true;

  std::vector<Tensor> logit_rows;
  for (size_t t = 0; t < inputs.size(); ++t) {
    // Additive attention scores against every encoder state.
    Tensor pre =
        add_rowwise(enc_att, add(matmul(state, model.att_ws), model.att_b));
    Tensor raw = softmax_rows(transpose(matmul(tanh(pre), model.att_v)));

    Tensor weights;
    switch (cfg.mode) {
      case DiminishConfig::Mode::Standard:
        weights = raw;
        break;
      case DiminishConfig::Mode::Dim: {
        Tensor next_cov = add(coverage, raw);
        weights = sub(transform_tensor(*cfg.g1, next_cov),
                      transform_tensor(*cfg.g1, coverage));
        coverage = next_cov;
        break;
      }
      case DiminishConfig::Mode::DyDim: {
        Tensor next_cov = add(coverage, raw);
        Tensor dim1 = sub(transform_tensor(*cfg.g1, next_cov),
                          transform_tensor(*cfg.g1, coverage));
        Tensor dim2 = sub(transform_tensor(*cfg.g2, next_cov),
                          transform_tensor(*cfg.g2, coverage));
        Tensor p;
        if (cfg.detach_peak_gradient) {
          p = tape.input(peak_plain, false);
        } else {
          p = first_step ? tape.input(Eigen::MatrixXd::Zero(1, n_enc), false)
                         : peak_t;
        }
        Tensor one_minus_p = add_const(mul_const(p, -1.0), 1.0);
        weights = add(mul(p, dim1), mul(one_minus_p, dim2));
        coverage = next_cov;
        if (!cfg.detach_peak_gradient)
          peak_t = first_step ? raw : cwise_max(peak_t, raw);
        peak_plain = peak_plain.cwiseMax(raw.value().row(0));
        break;
      }
    }
    if (cfg.mode == DiminishConfig::Mode::Dim) {
      // keep plain peak in sync for parity with the inference tracker
      peak_plain = peak_plain.cwiseMax(raw.value().row(0));
    }
    first_step = false;

    if (cfg.renormalize_effective)
      weights = scale_by(weights, pow_const(sum_all(weights), -1.0));

    Tensor context = matmul(weights, enc_states);
    Tensor y = embedding_lookup(model.embedding, {inputs[t]});
    state = tanh(add(add(add(matmul(y, model.dec_wy),
                             matmul(context, model.dec_wc)),
                         matmul(state, model.dec_wh)),
                     model.dec_b));
    logit_rows.push_back(add(matmul(state, model.out_w), model.out_b));
  }
  return cross_entropy(concat_rows(logit_rows), outputs);
}

namespace {

// Adam with per-field first/second moment state.
struct Adam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
  std::vector<Eigen::MatrixXd> m, v;

  explicit Adam(double learning_rate, const ModelParams& params)
      : lr(learning_rate) {
    for (const Eigen::MatrixXd* f : params.fields()) {
      m.push_back(Eigen::MatrixXd::Zero(f->rows(), f->cols()));
      v.push_back(Eigen::MatrixXd::Zero(f->rows(), f->cols()));
    }
  }

  void step(ModelParams& params, const std::vector<Eigen::MatrixXd>& grads) {
    ++t;
    auto fields = params.fields();
    double bc1 = 1.0 - std::pow(beta1, t);
    double bc2 = 1.0 - std::pow(beta2, t);
    for (size_t k = 0; k < fields.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * grads[k];
      v[k] = beta2 * v[k].array().matrix() +
             (1.0 - beta2) * grads[k].array().square().matrix();
      fields[k]->array() -= lr * (m[k].array() / bc1) /
                            ((v[k].array() / bc2).sqrt() + eps);
    }
  }
};

}  // namespace

TrainResult train(ModelParams& params, const TrainConfig& config,
                  const std::vector<Instance>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("empty training corpus");
  if (config.learning_rate < 0.0 || config.batch_size < 1 ||
      config.epochs < 0 || config.grad_clip_norm <= 0.0)
    throw std::invalid_argument("bad training hyperparameters");

  TrainResult result;
  Adam adam(config.learning_rate, params);
  SplitMix64 shuffle_rng(config.seed);

  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the portable generator.
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.next_int(0, i - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      size_t end = std::min(order.size(),
                            start + static_cast<size_t>(config.batch_size));
      ad::Tape tape;
      TapeModel model = TapeModel::record(tape, params, true);
      ad::Tensor batch_loss;
      for (size_t k = start; k < end; ++k) {
        ad::Tensor loss =
            teacher_forced_loss(tape, model, corpus[order[k]],
                                config.attention);
        batch_loss = k == start ? loss : ad::add(batch_loss, loss);
      }
      batch_loss =
          ad::mul_const(batch_loss, 1.0 / static_cast<double>(end - start));
      double loss_value = batch_loss.value()(0, 0);
      if (!std::isfinite(loss_value))
        throw std::runtime_error("training diverged at epoch " +
                                 std::to_string(epoch));
      epoch_loss += loss_value * static_cast<double>(end - start);
      tape.backward(batch_loss);

      std::vector<Eigen::MatrixXd> grads;
      const ad::Tensor* tensors[] = {
          &model.embedding, &model.enc_wx, &model.enc_wh, &model.enc_b,
          &model.att_wh,    &model.att_ws, &model.att_b,  &model.att_v,
          &model.dec_wy,    &model.dec_wc, &model.dec_wh, &model.dec_b,
          &model.out_w,     &model.out_b};
      double norm_sq = 0.0;
      for (const ad::Tensor* t : tensors) {
        grads.push_back(t->grad());
        norm_sq += grads.back().squaredNorm();
      }
      double norm = std::sqrt(norm_sq);
      if (norm > config.grad_clip_norm) {
        double scale = config.grad_clip_norm / norm;
        for (Eigen::MatrixXd& g : grads) g *= scale;
      }
      adam.step(params, grads);
    }
    result.loss_curve.push_back(epoch_loss /
                                static_cast<double>(corpus.size()));
  }
  params.check_finite();
  return result;
}

std::pair<double, double> evaluate_teacher_forced(
    const ModelParams& params, const DiminishConfig& cfg,
    const std::vector<Instance>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  double total_loss = 0.0;
  long long correct = 0, total = 0;
  for (const Instance& inst : corpus) {
    Eigen::MatrixXd enc = encode(params, inst.source);
    CoverageTracker tracker(enc.rows());
    Eigen::RowVectorXd state = enc.row(enc.rows() - 1);

    std::vector<int> inputs = {kBosId};
    inputs.insert(inputs.end(), inst.target.begin(), inst.target.end());
    std::vector<int> outputs = inst.target;
    outputs.push_back(kEosId);

    double inst_loss = 0.0;
    for (size_t t = 0; t < inputs.size(); ++t) {
      AttendResult att = attend(state, enc, tracker, cfg, params,
                                static_cast<int>(t));
      DecoderStep step = decoder_step(params, inputs[t], att.context, state);
      state = step.state;

      Eigen::ArrayXd row = step.logits.row(0).array();
      double mx = row.maxCoeff();
      double lse = mx + std::log((row - mx).exp().sum());
      inst_loss += lse - row(outputs[t]);
      Eigen::Index argmax;
      row.maxCoeff(&argmax);
      correct += argmax == outputs[t];
      ++total;
    }
    total_loss += inst_loss / static_cast<double>(inputs.size());
  }
  return {total_loss / static_cast<double>(corpus.size()),
          static_cast<double>(correct) / static_cast<double>(total)};
}

}  // namespace subattn
