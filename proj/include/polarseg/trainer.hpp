#pragma once

// SGD-with-momentum training loop with polynomial learning-rate decay,
// deterministic per-epoch shuffling derived from the run seed, and
// checkpointing (weights + velocities in the binary container, everything
// else in a JSON sidecar).

#include <cstdint>
#include <string>
#include <vector>

#include "polarseg/mnet.hpp"
#include "polarseg/objective.hpp"

namespace polarseg {

struct TrainConfig {
    float lr0 = 1e-4f;
    float momentum = 0.9f;
    int iterations = 100;  // epochs over the training set
    int batch_size = 1;
    float decay_power = 0.9f;
    float lr_floor = 0.01f;  // fraction of lr0 the schedule never drops below
    std::uint32_t seed = 0;

    void validate() const;
};

struct OptState {
    std::vector<Tensor> velocity;  // aligned with the graph parameters
};

OptState make_opt_state(const LayerGraph& graph);

// v <- momentum * v - lr * g; theta <- theta + v (classical momentum).
// Frozen parameters are left untouched. A non-finite gradient aborts with a
// diagnostic naming the parameter.
void sgd_momentum_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads,
                       OptState& state, float lr, float momentum);

// lr0 * max(lr_floor, (1 - step/total)^decay_power); non-increasing in step.
float lr_schedule(long step, long total_steps, const TrainConfig& cfg);

struct TrainSample {
    Tensor input;   // (1, C, H, W)
    Tensor target;  // (1, K, H, W), binary
};

struct TrainLog {
    std::vector<LossReport> per_step;
    long first_step = 0;
};

long steps_per_epoch(std::size_t num_samples, int batch_size);

// Runs steps [start_step, stop_step) of the deterministic schedule
// (stop_step < 0 means run to the configured end). Resuming from a checkpoint
// at step s and continuing reproduces the uninterrupted run exactly.
TrainLog train(MNet& net, const std::vector<TrainSample>& data, const TrainConfig& cfg,
               OptState& state, long start_step = 0, long stop_step = -1);

// Writes <prefix>.weights.bin, <prefix>.velocity.bin and <prefix>.meta.json.
void save_checkpoint(const std::string& prefix, const MNet& net, const OptState& state,
                     const TrainConfig& cfg, long step);

struct LoadedCheckpoint {
    MNet net;
    OptState state;
    TrainConfig train_cfg;
    long step = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& prefix);

}  // namespace polarseg
