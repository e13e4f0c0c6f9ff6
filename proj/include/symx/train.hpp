#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "symx/loss.hpp"
#include "symx/network.hpp"
#include "symx/systems.hpp"

namespace symx {

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 1;
    int folds = 5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    void validate() const;
};

// min(floor(sqrt(train_size)), 32), never below 1.
std::size_t batch_size_for(std::size_t train_size);

// First call may pass empty m/v; they are sized to the parameters then.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;
};

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

struct FoldResult {
    int fold = 0;
    NetworkWeights weights;
    double held_out_loss = 0.0;
    std::vector<double> history;  // mean batch loss per epoch
    bool diverged = false;
    std::string note;  // divergence reason when diverged
};

// Every fold reported Diverged; carries DivergedError's exit code.
class AllFoldsDiverged : public DivergedError {
public:
    explicit AllFoldsDiverged(std::string msg) : DivergedError(std::move(msg)) {}
};

// Trains one instance on the given index split. Initialization and the
// per-epoch shuffles both derive from fold_seed, so a fold's result does not
// depend on when or where it runs. Throws DivergedError when the epoch loss
// is non-finite or above 1e6 for 10 consecutive epochs, or when the final
// held-out loss is non-finite.
FoldResult train_fold(const Dataset& data, std::span<const std::size_t> train_idx,
                      std::span<const std::size_t> test_idx, int fold_index,
                      const NetworkShape& shape, const LossConfig& loss_cfg,
                      const TrainConfig& train_cfg, std::uint64_t fold_seed);

struct KFoldResult {
    int best_fold = -1;
    NetworkWeights best;
    std::vector<FoldResult> folds;
};

// Shuffled disjoint cover of [0, size): slice i is fold i's held-out set.
std::vector<std::vector<std::size_t>> kfold_partition(std::size_t size, int folds,
                                                      std::uint64_t seed);

// Index of the surviving fold with the smallest held-out loss, lowest index
// on ties; AllFoldsDiverged when every fold diverged.
int select_best_fold(const std::vector<FoldResult>& folds);

// Shuffles sample indices once, splits them into `folds` disjoint slices,
// holds out slice i in fold i, and keeps the weights with the smallest
// held-out loss (ties go to the lowest fold index). Diverged folds are
// reported in place; AllFoldsDiverged when none survives.
KFoldResult train_kfold(const Dataset& data, const NetworkShape& shape,
                        const LossConfig& loss_cfg, const TrainConfig& train_cfg);

// Per-system training recipe: network shape, loss, optimizer settings, and
// the noise level the reference datasets use.
struct RunPreset {
    std::string system;
    double sigma1 = 0.01;
    double sigma2 = 0.01;
    NetworkShape shape;
    LossConfig loss;
    TrainConfig train;
};

const RunPreset& preset(std::string_view name);
const std::vector<std::string>& preset_names();

}  // namespace symx
