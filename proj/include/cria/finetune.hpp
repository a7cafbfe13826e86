#pragma once

#include <string>
#include <vector>

#include "cria/model.hpp"
#include "cria/pretrain.hpp"

namespace cria {

enum class TaskLoss { bce, focal, multiclass };

TaskLoss task_loss_from_name(const std::string& name);
const char* task_loss_name(TaskLoss k);

// Mean of -[y ln sigma(s) + (1-y) ln(1-sigma(s))] on B x 1 scores.
Tensor bce_loss(const Tensor& scores, const std::vector<int>& labels);

// Mean of -alpha_t (1-p_t)^gamma ln p_t, p_t the true-class probability.
Tensor focal_loss(const Tensor& scores, const std::vector<int>& labels, double gamma = 2.0,
                  double alpha = 0.25);

// Mean of -ln softmax(scores)[label].
Tensor multiclass_ce(const Tensor& scores, const std::vector<int>& labels);

struct FinetuneOptions {
    TaskLoss loss = TaskLoss::multiclass;
    double attn_value_mask_ratio = 0.1;
    double focal_gamma = 2.0;
    double focal_alpha = 0.25;
    bool freeze_encoder = false;
};

// Drops all but the last n encoder layers (task-local truncation).
void keep_last_layers(ModelParams& model, int n);

// Batched training forward: embeddings under attention-value masking,
// head with dropout, stacked B x K scores.
Tensor finetune_forward(const std::vector<SegmentedSlice>& slices, const ModelParams& model,
                        const HeadParams& head, bool training, double attn_value_mask_ratio, Rng* rng);

struct FinetuneStepResult {
    double loss = 0.0;
};

// One optimizer step on the task loss; throws DivergenceError on a
// non-finite loss. The optimizer decides which tensors actually move.
FinetuneStepResult finetune_step(ModelParams& model, HeadParams& head, Adam& opt,
                                 const std::vector<SegmentedSlice>& slices,
                                 const std::vector<int>& labels, Rng& rng,
                                 const FinetuneOptions& opt_cfg = {});

// Deterministic evaluation scores (no dropout, no masking).
Tensor predict_scores(const std::vector<SegmentedSlice>& slices, const ModelParams& model,
                      const HeadParams& head);

}  // namespace cria
