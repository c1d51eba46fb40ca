// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CD_TOY_TRANSFORMER_HPP_
#define CD_TOY_TRANSFORMER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cd/matrix.hpp"

namespace cd {

enum class Activation {
  kIdentity,
  kRelu,
  kGelu,
};

enum class Readout {
  kFirstPrompt,  // classify from the first prompt position (decoder style)
  kLastToken,    // classify from the last sequence position
};

struct ModelConfig {
  int dim = 64;        // embedding dim d
  int heads = 2;       // H, must divide dim
  int ffn_dim = 64;    // M
  int n_classes = 2;   // classifier rows
  int vocab_size = 32; // token lookup table columns
  Activation activation = Activation::kGelu;
  Readout readout = Readout::kFirstPrompt;
  std::uint64_t seed = 0;

  int head_dim() const { return dim / heads; }
};

// Single-block weights. Attention projections are stored per head.
struct BlockWeights {
  std::vector<Matrix> wq;  // head_dim x dim
  std::vector<Matrix> wk;  // head_dim x dim
  std::vector<Matrix> wv;  // head_dim x dim
  std::vector<Matrix> wo;  // dim x head_dim
  Matrix w1;               // dim x ffn_dim, columns r_m
  Matrix w2;               // dim x ffn_dim, columns p_m
  Matrix w_cls;            // n_classes x dim
  Matrix embed;            // dim x vocab_size
};

// Everything the forward pass computed, kept for verification and backprop.
struct AttentionTrace {
  Matrix t;                   // input sequence incl. prompt, dim x n
  std::vector<Matrix> attn;   // per head, n x n, rows sum to 1
  std::vector<Matrix> z;      // per head, head_dim x n
  Matrix x;                   // post-attention residual stream, dim x n
  Matrix h_pre;               // ffn preactivations, ffn_dim x n
  Matrix h_act;               // ffn activations, ffn_dim x n
  Matrix ffn;                 // ffn output, dim x n
  Matrix y;                   // final residual stream, dim x n
  std::vector<double> logits;
  int n_prompt = 0;
  int readout_pos = 0;
};

struct Gradients {
  Matrix d_prompt;  // dim x n_prompt
  Matrix d_input;   // dim x n_input
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> probs;
};

class ToyTransformer {
 public:
  explicit ToyTransformer(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const BlockWeights& weights() const { return weights_; }
  BlockWeights& mutable_weights() { return weights_; }

  // Looks up embedding columns for token ids.
  Matrix embed_tokens(const std::vector<int>& ids) const;

  // Runs the block on [prompt | input] and returns the populated trace.
  // Either prompt or input may be empty, but not both.
  AttentionTrace forward(const Matrix& prompt, const Matrix& input) const;

  // Backpropagates a gradient on the logits to the prompt and input
  // embeddings. The trace must come from this model's forward.
  Gradients backward(const AttentionTrace& trace,
                     const std::vector<double>& logit_grad) const;

 private:
  ModelConfig config_;
  BlockWeights weights_;
};

// Cross entropy of the true class under softmax(logits).
LossResult cross_entropy(const std::vector<double>& logits, int label);

// Gradient of cross_entropy w.r.t. the logits: probs - onehot(label).
std::vector<double> cross_entropy_logit_grad(const std::vector<double>& probs, int label);

// Max over positions of the l2 gap between the FFN column and its
// reconstruction as sum_m phi(r_m . x_i) p_m recomputed from the trace.
double verify_span_membership(const ToyTransformer& model, const AttentionTrace& trace);

// Identity activation only: max gap between the FFN column and the
// closed-form split into an attention term plus a residual term.
double verify_two_term_split(const ToyTransformer& model, const AttentionTrace& trace);

// Compares analytic prompt/input gradients against central finite
// differences of the cross entropy; returns the max relative error.
double gradient_check(const ToyTransformer& model, const Matrix& prompt, const Matrix& input,
                      int label, double step = 1e-5);

// One training example: embedded token columns plus class index.
struct EmbeddedExample {
  Matrix input;  // dim x length
  int label = 0;
  std::string id;
};

struct TrainParams {
  double lr = 1e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 16;
  int max_steps = 2000;
  int patience = 100;       // steps without validation improvement
  int eval_every = 1;       // validation cadence in steps
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Matrix prompt;                  // best-validation prompt
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  int best_step = -1;
  double best_val_loss = 0.0;
  int steps_run = 0;
};

// Tunes only the prompt matrix (model weights frozen) with adaptive moment
// estimates and decoupled weight decay, early stopping on validation loss.
TrainResult p_tune(const ToyTransformer& model, const std::vector<EmbeddedExample>& dataset,
                   int n_prompt, const TrainParams& params);

// Fraction of examples whose argmax logit matches the label.
double prompt_accuracy(const ToyTransformer& model, const Matrix& prompt,
                       const std::vector<EmbeddedExample>& dataset);

// Checkpoints: one tensor file per weight plus a JSON manifest.
void save_checkpoint(const ToyTransformer& model, const std::filesystem::path& dir);
ToyTransformer load_checkpoint(const std::filesystem::path& dir);

}  // namespace cd

#endif  // CD_TOY_TRANSFORMER_HPP_
