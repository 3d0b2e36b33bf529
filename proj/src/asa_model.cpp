#include "actweave/asa_model.hpp"

#include <cmath>

#include "actweave/common.hpp"

namespace actweave {

ModelDims ModelDims::from(const PipelineConfig& config) {
  return {config.d_img, config.d_w2v, config.d_text, config.d_alg, config.max_seq_len};
}

AsaParams AsaParams::zeros(const ModelDims& d) {
  AsaParams p;
  const int in = d.d_w2v + d.d_text;
  for (auto* w : {&p.encoder.w_input, &p.encoder.w_forget, &p.encoder.w_output, &p.encoder.w_cell}) {
    *w = Eigen::MatrixXd::Zero(d.d_text, in);
  }
  for (auto* b : {&p.encoder.b_input, &p.encoder.b_forget, &p.encoder.b_output, &p.encoder.b_cell}) {
    *b = Eigen::MatrixXd::Zero(d.d_text, 1);
  }
  p.aligner.w1 = Eigen::MatrixXd::Zero(d.d_alg, d.d_vs());
  p.aligner.b1 = Eigen::MatrixXd::Zero(d.d_alg, 1);
  p.aligner.w2 = Eigen::MatrixXd::Zero(1, d.d_alg);
  p.aligner.b2 = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

bool AsaParams::operator==(const AsaParams& other) const {
  std::vector<const Eigen::MatrixXd*> mine, theirs;
  for_each([&](const char*, const Eigen::MatrixXd& m) { mine.push_back(&m); });
  other.for_each([&](const char*, const Eigen::MatrixXd& m) { theirs.push_back(&m); });
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols()) return false;
    if (*mine[i] != *theirs[i]) return false;
  }
  return true;
}

AsaModel::AsaModel(const ModelDims& dims) : dims_(dims), params_(AsaParams::zeros(dims)) {
  if (dims.d_img < 1 || dims.d_w2v < 1 || dims.d_text < 1 || dims.d_alg < 1 || dims.max_seq_len < 1) {
    throw InputError("model dimensions must be positive");
  }
}

AsaModel AsaModel::initialize(const ModelDims& dims, std::uint64_t seed) {
  AsaModel model(dims);
  Rng rng(seed ^ 0x5a5a0f0f12345678ULL);
  auto glorot = [&](Eigen::MatrixXd& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
    }
  };
  auto& e = model.params_.encoder;
  glorot(e.w_input);
  glorot(e.w_forget);
  glorot(e.w_output);
  glorot(e.w_cell);
  e.b_forget.setOnes();
  glorot(model.params_.aligner.w1);
  glorot(model.params_.aligner.w2);
  return model;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) { return x.unaryExpr([](double v) { return actweave::sigmoid(v); }); }

/// Per-step values kept for the backward pass.
struct LstmTrace {
  std::vector<Eigen::VectorXd> z, in, forget, out, cell_in, c, tanh_c;
};

Eigen::VectorXd run_lstm(const EncoderParams& p, const ModelDims& d, const Eigen::MatrixXd& embedded,
                         LstmTrace* trace) {
  if (embedded.rows() != d.d_w2v) throw InputError("encode_text: embedding dimension mismatch");
  if (embedded.cols() < 1) throw InputError("encode_text: empty token sequence");
  const Eigen::Index steps = std::min<Eigen::Index>(embedded.cols(), d.max_seq_len);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(d.d_text);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d.d_text);
  Eigen::VectorXd z(d.d_w2v + d.d_text);
  for (Eigen::Index t = 0; t < steps; ++t) {
    z << embedded.col(t), h;
    const Eigen::VectorXd i = sigmoid(Eigen::VectorXd(p.w_input * z + p.b_input));
    const Eigen::VectorXd f = sigmoid(Eigen::VectorXd(p.w_forget * z + p.b_forget));
    const Eigen::VectorXd o = sigmoid(Eigen::VectorXd(p.w_output * z + p.b_output));
    const Eigen::VectorXd g = (p.w_cell * z + p.b_cell).array().tanh().matrix();
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    const Eigen::VectorXd tc = c.array().tanh().matrix();
    h = o.cwiseProduct(tc);
    if (trace != nullptr) {
      trace->z.push_back(z);
      trace->in.push_back(i);
      trace->forget.push_back(f);
      trace->out.push_back(o);
      trace->cell_in.push_back(g);
      trace->c.push_back(c);
      trace->tanh_c.push_back(tc);
    }
  }
  return h;
}

void lstm_backward(const EncoderParams& p, const LstmTrace& tr, const Eigen::VectorXd& d_final,
                   EncoderParams& grads) {
  const Eigen::Index d_text = d_final.size();
  Eigen::VectorXd dh = d_final;
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(d_text);
  for (std::size_t t = tr.z.size(); t-- > 0;) {
    const Eigen::VectorXd& i = tr.in[t];
    const Eigen::VectorXd& f = tr.forget[t];
    const Eigen::VectorXd& o = tr.out[t];
    const Eigen::VectorXd& g = tr.cell_in[t];
    const Eigen::VectorXd& tc = tr.tanh_c[t];
    const Eigen::VectorXd c_prev = t > 0 ? tr.c[t - 1] : Eigen::VectorXd::Zero(d_text);

    dc += dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
    const Eigen::VectorXd da_o = dh.cwiseProduct(tc).cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
    const Eigen::VectorXd da_i = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
    const Eigen::VectorXd da_f = dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
    const Eigen::VectorXd da_g = dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());

    const Eigen::VectorXd& z = tr.z[t];
    grads.w_input.noalias() += da_i * z.transpose();
    grads.w_forget.noalias() += da_f * z.transpose();
    grads.w_output.noalias() += da_o * z.transpose();
    grads.w_cell.noalias() += da_g * z.transpose();
    grads.b_input += da_i;
    grads.b_forget += da_f;
    grads.b_output += da_o;
    grads.b_cell += da_g;

    const Eigen::VectorXd dz = p.w_input.transpose() * da_i + p.w_forget.transpose() * da_f +
                               p.w_output.transpose() * da_o + p.w_cell.transpose() * da_g;
    dh = dz.tail(d_text);
    dc = dc.cwiseProduct(f);
  }
}

void check_labels(const Eigen::MatrixXd& cs, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != cs.rows()) {
    throw InputError("stage2_loss: one label per row required");
  }
  for (int t : labels) {
    if (t < 0 || t >= cs.cols()) throw InputError("stage2_loss: label " + std::to_string(t) + " out of range");
  }
}

}  // namespace

Eigen::VectorXd AsaModel::encode_text(const Eigen::MatrixXd& embedded) const {
  return run_lstm(params_.encoder, dims_, embedded, nullptr);
}

double AsaModel::align_score(const Eigen::VectorXd& image, const Eigen::VectorXd& text) const {
  if (image.size() != dims_.d_img || text.size() != dims_.d_text) {
    throw InputError("align_score: input dimension mismatch");
  }
  const auto& a = params_.aligner;
  const Eigen::VectorXd pre = a.w1.leftCols(dims_.d_img) * image + a.w1.rightCols(dims_.d_text) * text + a.b1;
  return (a.w2 * pre.cwiseMax(0.0))(0, 0) + a.b2(0, 0);
}

Eigen::MatrixXd AsaModel::score_encoded(const Eigen::MatrixXd& images, const Eigen::MatrixXd& encoded) const {
  if (images.rows() != dims_.d_img || encoded.rows() != dims_.d_text) {
    throw InputError("score_matrix: input dimension mismatch");
  }
  const auto& a = params_.aligner;
  const Eigen::MatrixXd img_part = a.w1.leftCols(dims_.d_img) * images;
  const Eigen::MatrixXd txt_part = a.w1.rightCols(dims_.d_text) * encoded;
  Eigen::MatrixXd cs(images.cols(), encoded.cols());
  for (Eigen::Index i = 0; i < images.cols(); ++i) {
    for (Eigen::Index j = 0; j < encoded.cols(); ++j) {
      const Eigen::VectorXd h = (img_part.col(i) + txt_part.col(j) + a.b1).cwiseMax(0.0);
      cs(i, j) = (a.w2 * h)(0, 0) + a.b2(0, 0);
    }
  }
  return cs;
}

Eigen::MatrixXd AsaModel::score_matrix(const Eigen::MatrixXd& images, const std::vector<Eigen::MatrixXd>& texts) const {
  Eigen::MatrixXd encoded(dims_.d_text, static_cast<Eigen::Index>(texts.size()));
  for (std::size_t j = 0; j < texts.size(); ++j) encoded.col(static_cast<Eigen::Index>(j)) = encode_text(texts[j]);
  return score_encoded(images, encoded);
}

double stage1_loss(const Eigen::MatrixXd& cs, double alpha_c, double alpha_w) {
  if (cs.rows() != cs.cols()) throw InputError("stage1_loss: score matrix must be square");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < cs.rows(); ++i) {
    double wrong = 0.0;
    for (Eigen::Index j = 0; j < cs.cols(); ++j) {
      if (j != i) wrong += softplus(cs(i, j));
    }
    loss += alpha_c * softplus(-cs(i, i)) + alpha_w * wrong;
  }
  return loss;
}

double stage2_loss(const Eigen::MatrixXd& cs, const std::vector<int>& labels, double alpha_c, double alpha_w) {
  check_labels(cs, labels);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < cs.rows(); ++i) {
    const Eigen::Index t = labels[static_cast<std::size_t>(i)];
    double wrong = 0.0;
    for (Eigen::Index j = 0; j < cs.cols(); ++j) {
      if (j != t) wrong += softplus(cs(i, j));
    }
    loss += alpha_c * softplus(-cs(i, t)) + alpha_w * wrong;
  }
  return loss;
}

Eigen::MatrixXd stage1_loss_grad(const Eigen::MatrixXd& cs, double alpha_c, double alpha_w) {
  Eigen::MatrixXd g(cs.rows(), cs.cols());
  for (Eigen::Index i = 0; i < cs.rows(); ++i) {
    for (Eigen::Index j = 0; j < cs.cols(); ++j) {
      g(i, j) = i == j ? -alpha_c * sigmoid(-cs(i, j)) : alpha_w * sigmoid(cs(i, j));
    }
  }
  return g;
}

Eigen::MatrixXd stage2_loss_grad(const Eigen::MatrixXd& cs, const std::vector<int>& labels, double alpha_c,
                                 double alpha_w) {
  check_labels(cs, labels);
  Eigen::MatrixXd g(cs.rows(), cs.cols());
  for (Eigen::Index i = 0; i < cs.rows(); ++i) {
    const Eigen::Index t = labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < cs.cols(); ++j) {
      g(i, j) = j == t ? -alpha_c * sigmoid(-cs(i, j)) : alpha_w * sigmoid(cs(i, j));
    }
  }
  return g;
}

namespace {

void check_batch(const Batch& batch, LossKind kind) {
  if (batch.images.cols() < 1) throw InputError("batch is empty");
  if (batch.texts.empty()) throw InputError("batch has no texts");
  if (kind == LossKind::kStage1 && static_cast<Eigen::Index>(batch.texts.size()) != batch.images.cols()) {
    throw InputError("stage-1 batch needs one description per image");
  }
}

double loss_of(const Eigen::MatrixXd& cs, const Batch& batch, LossKind kind, const LossWeights& w) {
  return kind == LossKind::kStage1 ? stage1_loss(cs, w.alpha_c, w.alpha_w)
                                   : stage2_loss(cs, batch.labels, w.alpha_c, w.alpha_w);
}

}  // namespace

double batch_loss(const AsaModel& model, const Batch& batch, LossKind kind, const LossWeights& weights) {
  check_batch(batch, kind);
  return loss_of(model.score_matrix(batch.images, batch.texts), batch, kind, weights);
}

double forward_backward(const AsaModel& model, const Batch& batch, LossKind kind, const LossWeights& weights,
                        AsaParams& grads) {
  check_batch(batch, kind);
  const ModelDims& d = model.dims();
  const AsaParams& p = model.params();
  grads = AsaParams::zeros(d);

  const auto n_texts = static_cast<Eigen::Index>(batch.texts.size());
  std::vector<LstmTrace> traces(batch.texts.size());
  Eigen::MatrixXd encoded(d.d_text, n_texts);
  for (Eigen::Index j = 0; j < n_texts; ++j) {
    encoded.col(j) = run_lstm(p.encoder, d, batch.texts[static_cast<std::size_t>(j)], &traces[static_cast<std::size_t>(j)]);
  }

  const auto& a = p.aligner;
  const Eigen::MatrixXd img_part = a.w1.leftCols(d.d_img) * batch.images;
  const Eigen::MatrixXd txt_part = a.w1.rightCols(d.d_text) * encoded;
  const Eigen::Index n = batch.images.cols();
  Eigen::MatrixXd cs(n, n_texts);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n_texts; ++j) {
      const Eigen::VectorXd h = (img_part.col(i) + txt_part.col(j) + a.b1).cwiseMax(0.0);
      cs(i, j) = (a.w2 * h)(0, 0) + a.b2(0, 0);
    }
  }
  const double loss = loss_of(cs, batch, kind, weights);
  const Eigen::MatrixXd dcs = kind == LossKind::kStage1
                                  ? stage1_loss_grad(cs, weights.alpha_c, weights.alpha_w)
                                  : stage2_loss_grad(cs, batch.labels, weights.alpha_c, weights.alpha_w);

  Eigen::MatrixXd d_img_part = Eigen::MatrixXd::Zero(d.d_alg, n);
  Eigen::MatrixXd d_txt_part = Eigen::MatrixXd::Zero(d.d_alg, n_texts);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n_texts; ++j) {
      const Eigen::VectorXd pre = img_part.col(i) + txt_part.col(j) + a.b1;
      const double g = dcs(i, j);
      grads.aligner.w2.noalias() += g * pre.cwiseMax(0.0).transpose();
      grads.aligner.b2(0, 0) += g;
      const Eigen::VectorXd dpre =
          (pre.array() > 0.0).select(g * a.w2.transpose().array(), 0.0).matrix();
      d_img_part.col(i) += dpre;
      d_txt_part.col(j) += dpre;
      grads.aligner.b1 += dpre;
    }
  }
  grads.aligner.w1.leftCols(d.d_img).noalias() = d_img_part * batch.images.transpose();
  grads.aligner.w1.rightCols(d.d_text).noalias() = d_txt_part * encoded.transpose();

  const Eigen::MatrixXd d_encoded = a.w1.rightCols(d.d_text).transpose() * d_txt_part;
  for (Eigen::Index j = 0; j < n_texts; ++j) {
    lstm_backward(p.encoder, traces[static_cast<std::size_t>(j)], d_encoded.col(j), grads.encoder);
  }
  return loss;
}

void Adam::step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<const Eigen::MatrixXd*>& grads) {
  if (params.size() != grads.size()) throw InputError("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw InputError("adam: parameter count changed between steps");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Eigen::MatrixXd& g = *grads[k];
    if (g.rows() != params[k]->rows() || g.cols() != params[k]->cols() || m_[k].rows() != g.rows() ||
        m_[k].cols() != g.cols()) {
      throw InputError("adam: shape mismatch");
    }
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[k]->array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

void Adam::restore(std::int64_t steps, std::vector<Eigen::MatrixXd> m, std::vector<Eigen::MatrixXd> v) {
  if (m.size() != v.size()) throw InputError("adam: moment count mismatch");
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

bool Adam::operator==(const Adam& other) const {
  if (lr_ != other.lr_ || beta1_ != other.beta1_ || beta2_ != other.beta2_ || eps_ != other.eps_ ||
      steps_ != other.steps_ || m_.size() != other.m_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < m_.size(); ++k) {
    if (m_[k] != other.m_[k] || v_[k] != other.v_[k]) return false;
  }
  return true;
}

AsaOptimizer AsaOptimizer::from(const PipelineConfig& config) {
  return {Adam(config.lr_encoder), Adam(config.lr_align)};
}

void AsaOptimizer::step(AsaParams& params, const AsaParams& grads) {
  std::vector<Eigen::MatrixXd*> p;
  std::vector<const Eigen::MatrixXd*> g;
  params.encoder.for_each([&](const char*, Eigen::MatrixXd& m) { p.push_back(&m); });
  grads.encoder.for_each([&](const char*, const Eigen::MatrixXd& m) { g.push_back(&m); });
  encoder.step(p, g);
  p.clear();
  g.clear();
  params.aligner.for_each([&](const char*, Eigen::MatrixXd& m) { p.push_back(&m); });
  grads.aligner.for_each([&](const char*, const Eigen::MatrixXd& m) { g.push_back(&m); });
  aligner.step(p, g);
}

}  // namespace actweave
