#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "actweave/config.hpp"

namespace actweave {

struct ModelDims {
  int d_img = 0;
  int d_w2v = 0;
  int d_text = 0;
  int d_alg = 0;
  int max_seq_len = 6;

  int d_vs() const { return d_text + d_img; }
  static ModelDims from(const PipelineConfig& config);
  bool operator==(const ModelDims&) const = default;
};

/// Gated recurrent encoder. Each gate matrix is d_text x (d_w2v + d_text)
/// and acts on [x_t; h_{t-1}].
struct EncoderParams {
  Eigen::MatrixXd w_input, w_forget, w_output, w_cell;
  Eigen::MatrixXd b_input, b_forget, b_output, b_cell;  // d_text x 1

  template <typename F>
  void for_each(F&& f) {
    f("encoder.w_input", w_input);
    f("encoder.w_forget", w_forget);
    f("encoder.w_output", w_output);
    f("encoder.w_cell", w_cell);
    f("encoder.b_input", b_input);
    f("encoder.b_forget", b_forget);
    f("encoder.b_output", b_output);
    f("encoder.b_cell", b_cell);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<EncoderParams*>(this)->for_each([&](const char* name, Eigen::MatrixXd& m) {
      f(name, static_cast<const Eigen::MatrixXd&>(m));
    });
  }
};

/// Two-layer scorer: cs = w2 . relu(w1 [v; s] + b1) + b2.
struct AlignerParams {
  Eigen::MatrixXd w1;  // d_alg x d_vs, image columns first
  Eigen::MatrixXd b1;  // d_alg x 1
  Eigen::MatrixXd w2;  // 1 x d_alg
  Eigen::MatrixXd b2;  // 1 x 1

  template <typename F>
  void for_each(F&& f) {
    f("aligner.w1", w1);
    f("aligner.b1", b1);
    f("aligner.w2", w2);
    f("aligner.b2", b2);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<AlignerParams*>(this)->for_each([&](const char* name, Eigen::MatrixXd& m) {
      f(name, static_cast<const Eigen::MatrixXd&>(m));
    });
  }
};

struct AsaParams {
  EncoderParams encoder;
  AlignerParams aligner;

  template <typename F>
  void for_each(F&& f) {
    encoder.for_each(f);
    aligner.for_each(f);
  }
  template <typename F>
  void for_each(F&& f) const {
    encoder.for_each(f);
    aligner.for_each(f);
  }

  static AsaParams zeros(const ModelDims& dims);
  bool operator==(const AsaParams& other) const;
};

/// Text encoder plus alignment scorer. Word embeddings are supplied by the
/// caller already looked up (one column per token) and are not trained.
class AsaModel {
 public:
  AsaModel() = default;
  explicit AsaModel(const ModelDims& dims);  // all-zero parameters

  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) matrices, zero biases, forget
  /// bias 1.
  static AsaModel initialize(const ModelDims& dims, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  AsaParams& params() { return params_; }
  const AsaParams& params() const { return params_; }

  /// Final hidden state after at most max_seq_len tokens, from zero state.
  Eigen::VectorXd encode_text(const Eigen::MatrixXd& embedded) const;

  double align_score(const Eigen::VectorXd& image, const Eigen::VectorXd& text) const;

  /// cs(i, j) = align_score(images.col(i), texts[j] encoded).
  Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& images, const std::vector<Eigen::MatrixXd>& texts) const;

  /// Same, with texts already encoded (one column per text).
  Eigen::MatrixXd score_encoded(const Eigen::MatrixXd& images, const Eigen::MatrixXd& encoded) const;

 private:
  ModelDims dims_;
  AsaParams params_;
};

/// log(1 + exp(x)) without overflow.
double softplus(double x);
double sigmoid(double x);

/// Image-description loss over an N x N score matrix; diagonal entries are
/// the correct pairs.
double stage1_loss(const Eigen::MatrixXd& cs, double alpha_c, double alpha_w);

/// Category loss over an N x M score matrix with one label per row.
double stage2_loss(const Eigen::MatrixXd& cs, const std::vector<int>& labels, double alpha_c, double alpha_w);

/// dLoss/dcs for the two losses.
Eigen::MatrixXd stage1_loss_grad(const Eigen::MatrixXd& cs, double alpha_c, double alpha_w);
Eigen::MatrixXd stage2_loss_grad(const Eigen::MatrixXd& cs, const std::vector<int>& labels, double alpha_c,
                                 double alpha_w);

enum class LossKind { kStage1, kStage2 };

/// images: d_img x N. Stage 1: texts has N entries paired by index.
/// Stage 2: texts are the M category descriptions and labels has N entries.
struct Batch {
  Eigen::MatrixXd images;
  std::vector<Eigen::MatrixXd> texts;
  std::vector<int> labels;
};

struct LossWeights {
  double alpha_c = 1.0;
  double alpha_w = 0.01;
};

double batch_loss(const AsaModel& model, const Batch& batch, LossKind kind, const LossWeights& weights);

/// Loss and exact reverse-mode gradients for every encoder and aligner
/// parameter. `grads` is overwritten.
double forward_backward(const AsaModel& model, const Batch& batch, LossKind kind, const LossWeights& weights,
                        AsaParams& grads);

/// Bias-corrected Adam over one parameter group.
class Adam {
 public:
  explicit Adam(double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Moments are created lazily on the first step.
  void step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<const Eigen::MatrixXd*>& grads);

  double lr() const { return lr_; }
  std::int64_t steps() const { return steps_; }
  const std::vector<Eigen::MatrixXd>& first_moments() const { return m_; }
  const std::vector<Eigen::MatrixXd>& second_moments() const { return v_; }

  void restore(std::int64_t steps, std::vector<Eigen::MatrixXd> m, std::vector<Eigen::MatrixXd> v);
  bool operator==(const Adam& other) const;

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t steps_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

/// One Adam per subnetwork: encoder at lr_encoder, aligner at lr_align.
struct AsaOptimizer {
  Adam encoder;
  Adam aligner;

  static AsaOptimizer from(const PipelineConfig& config);
  void step(AsaParams& params, const AsaParams& grads);
  bool operator==(const AsaOptimizer&) const = default;
};

}  // namespace actweave
