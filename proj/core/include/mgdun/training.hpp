// End-to-end optimization: L1 loss, bias-corrected Adam, the training loop
// with periodic validation and best-checkpoint tracking, and the checkpoint
// container (bit-exact round trip).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgdun/degradation.hpp"
#include "mgdun/unfolding.hpp"

namespace mgdun {

struct TrainConfig {
    float lr = 1e-5f;
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;
    int batch_size = 4;
    int epochs = 1;
    int max_iters = 0;   // 0 = run out the epochs
    int val_every = 50;  // iterations between validation passes
    std::uint64_t seed = 0;
    bool freeze_eta = false;  // guide-disabled ablation: eta pinned at 0

    void validate() const;
};

struct AdamState {
    std::vector<Tensor> m, v;
    long step = 0;

    static AdamState init(const MgdunModel& model);
};

float l1_loss(const Tensor& pred, const Tensor& gt);
Var l1_loss(Tape& t, Var pred, Var gt);

// One bias-corrected Adam update over all parameters. `grads[i]` may be empty
// (parameter untouched this step). Throws on non-finite gradients.
void adam_step(MgdunModel& model, const std::vector<Tensor>& grads,
               AdamState& state, const TrainConfig& cfg);

struct LossRow {
    int iter = 0;
    double loss = 0.0;
    double val_psnr = 0.0;  // NaN when this iteration had no validation pass
};

struct TrainResult {
    MgdunModel final_model;
    MgdunModel best_model;
    double best_val_psnr = 0.0;
    int best_iter = 0;
    std::vector<LossRow> trace;
    bool diverged = false;
    int iters_run = 0;
};

// Epochs x batches of forward / L1 / backward / Adam. Batches are stacked
// along the batch axis; the set is reshuffled each epoch from cfg.seed.
// On a non-finite loss the loop stops and returns the last good state with
// `diverged` set.
TrainResult train(const TrainConfig& cfg, MgdunModel model,
                  const std::vector<ReconProblem>& train_set,
                  const std::vector<ReconProblem>& val_set);

void checkpoint_save(const MgdunModel& model, const std::string& path,
                     const AdamState* adam = nullptr);
MgdunModel checkpoint_load(const std::string& path, AdamState* adam = nullptr);

}  // namespace mgdun
