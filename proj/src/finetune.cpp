#include "cria/finetune.hpp"

#include <cmath>

namespace cria {

TaskLoss task_loss_from_name(const std::string& name) {
    if (name == "bce") return TaskLoss::bce;
    if (name == "focal") return TaskLoss::focal;
    if (name == "ce" || name == "multiclass") return TaskLoss::multiclass;
    throw DimensionError("unknown task loss '" + name + "'");
}

const char* task_loss_name(TaskLoss k) {
    switch (k) {
        case TaskLoss::bce: return "bce";
        case TaskLoss::focal: return "focal";
        default: return "ce";
    }
}

namespace {

void check_binary(const Tensor& scores, const std::vector<int>& labels, const char* who) {
    if (scores.rank() != 2 || scores.cols() != 1)
        throw DimensionError(std::string(who) + ": scores must be B x 1, got " + shape_str(scores.shape()));
    if (static_cast<int>(labels.size()) != scores.rows())
        throw DimensionError(std::string(who) + ": labels length mismatch");
    for (int y : labels)
        if (y != 0 && y != 1) throw DimensionError(std::string(who) + ": labels must be 0 or 1");
}

}  // namespace

Tensor bce_loss(const Tensor& scores, const std::vector<int>& labels) {
    check_binary(scores, labels, "bce");
    return bce_with_logits(scores, labels);
}

Tensor focal_loss(const Tensor& scores, const std::vector<int>& labels, double gamma, double alpha) {
    check_binary(scores, labels, "focal");
    if (gamma < 0.0) throw DimensionError("focal: gamma must be >= 0");
    if (alpha <= 0.0 || alpha >= 1.0) throw DimensionError("focal: alpha must lie in (0,1)");
    const int b = scores.rows();
    std::vector<double> sign(b), offset(b), alpha_t(b);
    for (int i = 0; i < b; ++i) {
        sign[i] = labels[i] ? 1.0 : -1.0;
        offset[i] = labels[i] ? 0.0 : 1.0;
        alpha_t[i] = labels[i] ? alpha : 1.0 - alpha;
    }
    // p_t = y p + (1-y)(1-p) expressed as offset + sign * p
    const Tensor p_t = add(Tensor({b, 1}, offset), mul(Tensor({b, 1}, sign), sigmoid(scores)));
    Tensor term = mul(Tensor({b, 1}, alpha_t), neg(log_t(p_t)));
    if (gamma > 0.0) term = mul(pow_const(sub(Tensor({b, 1}, std::vector<double>(b, 1.0)), p_t), gamma), term);
    return scale(sum(term), 1.0 / b);
}

Tensor multiclass_ce(const Tensor& scores, const std::vector<int>& labels) {
    return ce_labels(scores, labels);
}

void keep_last_layers(ModelParams& model, int n) {
    if (n < 1 || n > static_cast<int>(model.layers.size()))
        throw DimensionError("keep_last_layers: n out of range");
    model.layers.erase(model.layers.begin(), model.layers.end() - n);
    model.cfg.layers = n;
}

Tensor finetune_forward(const std::vector<SegmentedSlice>& slices, const ModelParams& model,
                        const HeadParams& head, bool training, double attn_value_mask_ratio, Rng* rng) {
    if (slices.empty()) throw DimensionError("finetune_forward: empty batch");
    const MaskSpec mask{View::none, training ? attn_value_mask_ratio : 0.0};
    std::vector<Tensor> feats;
    feats.reserve(slices.size());
    for (const auto& s : slices) feats.push_back(embed_slice(s, model, mask, rng));
    return head_forward(concat_rows(feats), head, training, rng);
}

FinetuneStepResult finetune_step(ModelParams& model, HeadParams& head, Adam& opt,
                                 const std::vector<SegmentedSlice>& slices,
                                 const std::vector<int>& labels, Rng& rng,
                                 const FinetuneOptions& opt_cfg) {
    if (labels.size() != slices.size()) throw DimensionError("finetune_step: one label per slice");
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor scores =
        finetune_forward(slices, model, head, true, opt_cfg.attn_value_mask_ratio, &rng);
    Tensor loss;
    switch (opt_cfg.loss) {
        case TaskLoss::bce: loss = bce_loss(scores, labels); break;
        case TaskLoss::focal: loss = focal_loss(scores, labels, opt_cfg.focal_gamma, opt_cfg.focal_alpha); break;
        default: loss = multiclass_ce(scores, labels); break;
    }
    FinetuneStepResult res;
    res.loss = loss.item();
    if (!std::isfinite(res.loss))
        throw DivergenceError(opt.steps() + 1,
                              "finetune diverged at step " + std::to_string(opt.steps() + 1));
    opt.zero_grad();
    backward(loss);
    opt.step();
    return res;
}

Tensor predict_scores(const std::vector<SegmentedSlice>& slices, const ModelParams& model,
                      const HeadParams& head) {
    Tape::Pause pause;
    return finetune_forward(slices, model, head, false, 0.0, nullptr);
}

}  // namespace cria
