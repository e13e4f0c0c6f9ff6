#include "symx/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "symx/errors.hpp"
#include "symx/rng.hpp"
#include "symx/tape.hpp"

namespace symx {

namespace {

constexpr double kLossCeiling = 1e6;
constexpr int kBadEpochLimit = 10;

void gather(const Dataset& data, std::span<const std::size_t> idx, bool time_input,
            std::vector<double>& X, std::vector<double>& Y) {
    const std::size_t n = static_cast<std::size_t>(data.n);
    const std::size_t in_w = n + (time_input ? 1 : 0);
    X.resize(idx.size() * in_w);
    Y.resize(idx.size() * n);
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const std::size_t s = idx[j];
        for (std::size_t i = 0; i < n; ++i) {
            X[j * in_w + i] = data.X[s * n + i];
            Y[j * n + i] = data.Y[s * n + i];
        }
        if (time_input) X[j * in_w + n] = data.time_of(s);
    }
}

void check_split(const Dataset& data, std::span<const std::size_t> train_idx,
                 std::span<const std::size_t> test_idx) {
    if (train_idx.empty() || test_idx.empty())
        throw ValidationError("fold split requires non-empty train and test index lists");
    std::vector<char> seen(data.size(), 0);
    for (std::size_t s : train_idx) {
        if (s >= data.size()) throw ValidationError("train index out of range");
        seen[s] = 1;
    }
    for (std::size_t s : test_idx) {
        if (s >= data.size()) throw ValidationError("test index out of range");
        if (seen[s]) throw ValidationError("train and test splits overlap");
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0)
        throw ValidationError("learning_rate must be positive");
    if (epochs < 0) throw ValidationError("epochs must be non-negative");
    if (folds < 2) throw ValidationError("folds must be at least 2");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ValidationError("adam betas must lie in [0, 1)");
    if (!std::isfinite(epsilon) || epsilon <= 0.0)
        throw ValidationError("adam epsilon must be positive");
}

std::size_t batch_size_for(std::size_t train_size) {
    if (train_size == 0) throw ValidationError("batch size undefined for an empty training split");
    std::size_t root = static_cast<std::size_t>(std::sqrt(static_cast<double>(train_size)));
    while ((root + 1) * (root + 1) <= train_size) ++root;
    while (root * root > train_size) --root;
    return std::max<std::size_t>(1, std::min<std::size_t>(root, 32));
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double epsilon) {
    if (state.m.empty()) state.m.assign(params.size(), 0.0);
    if (state.v.empty()) state.v.assign(params.size(), 0.0);
    if (grads.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw ValidationError("adam step requires params, grads and state of one size");
    if (state.t < 0) throw ValidationError("adam step counter must be non-negative");
    if (!std::isfinite(lr) || lr <= 0.0) throw ValidationError("adam learning rate must be positive");
    for (double g : grads)
        if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in adam step");

    state.t += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + epsilon);
    }
}

FoldResult train_fold(const Dataset& data, std::span<const std::size_t> train_idx,
                      std::span<const std::size_t> test_idx, int fold_index,
                      const NetworkShape& shape, const LossConfig& loss_cfg,
                      const TrainConfig& train_cfg, std::uint64_t fold_seed) {
    data.validate();
    shape.validate();
    loss_cfg.validate();
    train_cfg.validate();
    if (shape.n != data.n) throw ValidationError("network width does not match the dataset");
    check_split(data, train_idx, test_idx);

    FoldResult result;
    result.fold = fold_index;
    result.weights = init_weights(shape, derive_seed(fold_seed, 0));
    result.history.reserve(static_cast<std::size_t>(train_cfg.epochs));

    std::vector<double> flat = flatten(result.weights);
    std::vector<double> grads(flat.size());
    AdamState opt;

    const std::size_t batch = batch_size_for(train_idx.size());
    std::vector<std::size_t> perm(train_idx.begin(), train_idx.end());
    std::vector<std::size_t> batch_idx;
    std::vector<double> bx, by, adj;
    Tape tape;

    int bad_streak = 0;
    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(fold_seed, 1 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(std::span<std::size_t>(perm));

        double loss_sum = 0.0;
        std::size_t batches = 0;
        bool blew_up = false;
        for (std::size_t start = 0; start < perm.size(); start += batch) {
            const std::size_t bm = std::min(batch, perm.size() - start);
            batch_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                             perm.begin() + static_cast<std::ptrdiff_t>(start + bm));
            gather(data, batch_idx, shape.time_input, bx, by);
            try {
                tape.clear();
                PreparedNetwork p = prepare(tape, result.weights);
                Tape::Id loss_id = emit_total_loss(tape, p, bx, by, loss_cfg);
                tape.backward(loss_id, adj);
                for (std::size_t j = 0; j < grads.size(); ++j)
                    grads[j] = adj[static_cast<std::size_t>(p.param_ids[j])];
                loss_sum += tape.value(loss_id);
                adam_step(flat, grads, opt, train_cfg.learning_rate, train_cfg.beta1,
                          train_cfg.beta2, train_cfg.epsilon);
                set_from_flat(result.weights, flat);
                ++batches;
            } catch (const NonFiniteError&) {
                blew_up = true;
                break;
            }
        }

        const double epoch_loss = blew_up ? std::numeric_limits<double>::infinity()
                                          : loss_sum / static_cast<double>(batches);
        result.history.push_back(epoch_loss);
        const bool bad = !std::isfinite(epoch_loss) || epoch_loss > kLossCeiling;
        bad_streak = bad ? bad_streak + 1 : 0;
        if (bad_streak >= kBadEpochLimit)
            throw DivergedError("fold " + std::to_string(fold_index) +
                                " diverged: training loss out of range for " +
                                std::to_string(kBadEpochLimit) + " consecutive epochs");
    }

    gather(data, test_idx, shape.time_input, bx, by);
    try {
        result.held_out_loss = total_loss_value(result.weights, bx, by, loss_cfg);
    } catch (const NonFiniteError&) {
        throw DivergedError("fold " + std::to_string(fold_index) +
                            " diverged: held-out loss is non-finite");
    }
    if (!std::isfinite(result.held_out_loss))
        throw DivergedError("fold " + std::to_string(fold_index) +
                            " diverged: held-out loss is non-finite");
    return result;
}

std::vector<std::vector<std::size_t>> kfold_partition(std::size_t size, int folds,
                                                      std::uint64_t seed) {
    if (folds < 2) throw ValidationError("folds must be at least 2");
    if (size < static_cast<std::size_t>(folds))
        throw ValidationError("dataset smaller than the fold count");
    std::vector<std::size_t> order(size);
    for (std::size_t i = 0; i < size; ++i) order[i] = i;
    Rng part_rng(derive_seed(seed, 0));
    part_rng.shuffle(std::span<std::size_t>(order));

    std::vector<std::vector<std::size_t>> slices;
    const std::size_t k = static_cast<std::size_t>(folds);
    slices.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t lo = i * size / k;
        const std::size_t hi = (i + 1) * size / k;
        slices.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                            order.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return slices;
}

int select_best_fold(const std::vector<FoldResult>& folds) {
    int best = -1;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        if (folds[i].diverged) continue;
        if (best < 0 || folds[i].held_out_loss < folds[static_cast<std::size_t>(best)].held_out_loss)
            best = static_cast<int>(i);
    }
    if (best < 0) throw AllFoldsDiverged("all folds diverged");
    return best;
}

KFoldResult train_kfold(const Dataset& data, const NetworkShape& shape,
                        const LossConfig& loss_cfg, const TrainConfig& train_cfg) {
    data.validate();
    train_cfg.validate();
    const std::vector<std::vector<std::size_t>> slices =
        kfold_partition(data.size(), train_cfg.folds, train_cfg.seed);

    KFoldResult result;
    result.folds.reserve(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        std::vector<std::size_t> train;
        train.reserve(data.size() - slices[i].size());
        for (std::size_t j = 0; j < slices.size(); ++j)
            if (j != i) train.insert(train.end(), slices[j].begin(), slices[j].end());

        const std::uint64_t fold_seed = derive_seed(train_cfg.seed, 1 + i);
        try {
            result.folds.push_back(train_fold(data, train, slices[i], static_cast<int>(i), shape,
                                              loss_cfg, train_cfg, fold_seed));
        } catch (const DivergedError& e) {
            FoldResult failed;
            failed.fold = static_cast<int>(i);
            failed.held_out_loss = std::numeric_limits<double>::infinity();
            failed.diverged = true;
            failed.note = e.what();
            result.folds.push_back(std::move(failed));
        }
    }

    result.best_fold = select_best_fold(result.folds);
    result.best = result.folds[static_cast<std::size_t>(result.best_fold)].weights;
    return result;
}

namespace {

std::vector<RunPreset> make_presets() {
    std::vector<RunPreset> ps;
    auto add = [&ps](std::string system, int n, int K, int L, double lr, int epochs,
                     double sigma) {
        RunPreset p;
        p.system = std::move(system);
        p.sigma1 = sigma;
        p.sigma2 = sigma;
        p.shape = NetworkShape{n, K, L, false};
        p.train.learning_rate = lr;
        p.train.epochs = epochs;
        p.train.folds = 5;
        ps.push_back(std::move(p));
    };
    add("takens_bogdanov", 2, 1, 10, 0.01, 25, 0.01);
    add("pendulum", 2, 1, 10, 0.032, 100, 0.01);
    add("rossler", 3, 1, 10, 0.01, 400, 0.01);
    add("lorenz", 3, 1, 10, 0.01, 6400, 0.01);
    add("fitzhugh_nagumo", 2, 2, 1, 0.01, 3200, 0.01);
    add("chemical_kinetics", 2, 2, 1, 0.01, 6400, 0.001);
    add("chua", 3, 1, 10, 0.032, 6400, 0.01);
    return ps;
}

}  // namespace

const RunPreset& preset(std::string_view name) {
    static const std::vector<RunPreset> ps = make_presets();
    for (const RunPreset& p : ps)
        if (p.system == name) return p;
    throw ValidationError("unknown preset: " + std::string(name));
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const RunPreset& p : make_presets()) out.push_back(p.system);
        return out;
    }();
    return names;
}

}  // namespace symx
