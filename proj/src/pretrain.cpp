#include "cria/pretrain.hpp"

#include <cmath>

namespace cria {

void Adam::attach(const std::string& name, const Tensor& t) {
    if (slots_.count(name)) throw AutodiffError("adam: duplicate parameter name '" + name + "'");
    params_.emplace_back(name, t);
    slots_[name] = AdamSlot{std::vector<double>(t.size(), 0.0), std::vector<double>(t.size(), 0.0)};
}

void Adam::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

void Adam::step() {
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (auto& [name, t] : params_) {
        AdamSlot& s = slots_[name];
        t.impl->ensure_grad();
        const std::vector<double>& g = t.impl->grad;
        std::vector<double>& d = t.data();
        for (std::size_t i = 0; i < d.size(); ++i) {
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            d[i] -= cfg_.lr * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + cfg_.eps);
        }
    }
}

PretrainBatch make_pretrain_batch(std::vector<SegmentedSlice> slices, Rng& rng, bool per_batch) {
    if (slices.size() < 2) throw DimensionError("pretrain batch: need at least two slices");
    static const View kViews[3] = {View::temporal, View::spatial, View::spectral};
    PretrainBatch b;
    b.mask_choices.reserve(slices.size());
    const View shared = kViews[rng.below(3)];
    for (std::size_t i = 0; i < slices.size(); ++i)
        b.mask_choices.push_back(per_batch ? shared : kViews[rng.below(3)]);
    b.slices = std::move(slices);
    return b;
}

std::pair<Tensor, Tensor> twin_embed(const PretrainBatch& batch, const ModelParams& params) {
    if (batch.slices.size() < 2) throw DimensionError("twin_embed: need at least two slices");
    if (batch.mask_choices.size() != batch.slices.size())
        throw DimensionError("twin_embed: one mask choice per slice required");
    std::vector<Tensor> plain, masked;
    plain.reserve(batch.slices.size());
    masked.reserve(batch.slices.size());
    for (std::size_t i = 0; i < batch.slices.size(); ++i) {
        plain.push_back(embed_slice(batch.slices[i], params, MaskSpec{}));
        masked.push_back(embed_slice(batch.slices[i], params, MaskSpec{batch.mask_choices[i], 0.0}));
    }
    return {l2_normalize_rows(concat_rows(plain)), l2_normalize_rows(concat_rows(masked))};
}

Tensor contrastive_loss(const Tensor& f, const Tensor& f_prime, double temperature, bool symmetric) {
    if (temperature <= 0.0) throw DimensionError("contrastive loss: temperature must be positive");
    if (f.shape() != f_prime.shape()) throw DimensionError("contrastive loss: embedding shapes differ");
    const Tensor s = scale(matmul(f, transpose(f_prime)), 1.0 / temperature);
    if (!symmetric) return ce_identity(s);
    return scale(add(ce_identity(s), ce_identity(transpose(s))), 0.5);
}

PretrainStepResult pretrain_step(ModelParams& model, Adam& opt, std::vector<SegmentedSlice> slices,
                                 Rng& rng, const PretrainOptions& opt_cfg) {
    const PretrainBatch batch = make_pretrain_batch(std::move(slices), rng, opt_cfg.per_batch_mask);

    PretrainStepResult res;
    for (View v : batch.mask_choices) res.mask_histogram[static_cast<int>(v) - 1]++;

    Tape tape;
    Tape::Scope scope(tape);
    auto [f, f_prime] = twin_embed(batch, model);
    const Tensor loss = contrastive_loss(f, f_prime, opt_cfg.temperature, opt_cfg.symmetric_loss);
    res.loss = loss.item();
    if (!std::isfinite(res.loss))
        throw DivergenceError(opt.steps() + 1,
                              "pretrain diverged at step " + std::to_string(opt.steps() + 1));
    opt.zero_grad();
    backward(loss);
    opt.step();
    return res;
}

}  // namespace cria
