#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cria/model.hpp"

namespace cria {

struct DivergenceError : std::runtime_error {
    DivergenceError(std::int64_t at_step, const std::string& what)
        : std::runtime_error(what), step(at_step) {}
    std::int64_t step;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamSlot {
    std::vector<double> m, v;
};

// Adam over named parameter tensors. Tensors are attached by handle, so
// the optimizer updates the same buffers the model forwards with.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void attach(const std::string& name, const Tensor& t);
    void zero_grad();
    void step();

    std::int64_t steps() const { return steps_; }
    void set_steps(std::int64_t s) { steps_ = s; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    std::map<std::string, AdamSlot>& slots() { return slots_; }

private:
    AdamConfig cfg_;
    std::vector<std::pair<std::string, Tensor>> params_;
    std::map<std::string, AdamSlot> slots_;
    std::int64_t steps_ = 0;
};

struct PretrainBatch {
    std::vector<SegmentedSlice> slices;
    std::vector<View> mask_choices;  // one per slice
};

// Batch with a per-sample masked view drawn uniformly over the three
// views (or one shared draw when per_batch is set).
PretrainBatch make_pretrain_batch(std::vector<SegmentedSlice> slices, Rng& rng, bool per_batch = false);

// Twin forward passes through the same parameters: rows of F come from
// the unmasked pass, rows of F' from the per-sample masked pass. Both
// are L2-normalized.
std::pair<Tensor, Tensor> twin_embed(const PretrainBatch& batch, const ModelParams& params);

// Mean row-wise cross-entropy of softmax(F F'^T / T) against the
// identity pairing; expects L2-normalized rows. The symmetric variant
// averages in the transposed direction.
Tensor contrastive_loss(const Tensor& f, const Tensor& f_prime, double temperature,
                        bool symmetric = false);

struct PretrainStepResult {
    double loss = 0.0;
    std::array<int, 3> mask_histogram{};  // temporal, spatial, spectral
};

struct PretrainOptions {
    double temperature = 0.2;
    bool symmetric_loss = false;
    bool per_batch_mask = false;
};

// One optimizer step; throws DivergenceError on a non-finite loss.
PretrainStepResult pretrain_step(ModelParams& model, Adam& opt, std::vector<SegmentedSlice> slices,
                                 Rng& rng, const PretrainOptions& opt_cfg = {});

}  // namespace cria
