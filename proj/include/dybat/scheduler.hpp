#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dybat/corpus.hpp"
#include "dybat/losses.hpp"
#include "dybat/model.hpp"

namespace dybat {

/// Per-batch training state: the loss from the most recent forward pass and
/// how many times the batch has been trained.
struct LedgerEntry {
    int batch_id = 0;
    std::string patient_id;
    double last_loss = 0.0;
    std::uint64_t train_count = 0;
};

enum class TrainMode { traditional, dynamic };

TrainMode train_mode_from_string(const std::string& name);
std::string to_string(TrainMode m);

struct TrainConfig {
    TrainMode mode = TrainMode::dynamic;
    double delta = 0.2;        // fraction of batches selected per dynamic round
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    LossConfig loss;
    AdamConfig optimizer;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainRecord {
    std::vector<double> epoch_mean_loss;  // one entry per nominal epoch
    std::vector<LedgerEntry> ledger;      // in batch_id order
    std::uint64_t total_batch_trainings = 0;
};

/// Invoked after each nominal epoch (traditional) or outer iteration
/// (dynamic); lets callers snapshot checkpoints on their own criterion.
using EpochCallback = std::function<void(std::size_t index, const TinySegNet& net)>;

/// Every epoch: one shuffled full pass; forward, loss, backward, optimizer
/// step per batch. All train counts equal cfg.epochs at completion.
TrainRecord traditional_train(TinySegNet& net, const std::vector<BatchUnit>& batches,
                              const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// floor(E/2) outer iterations of: a shuffled full pass refreshing the
/// ledger, then floor(1/delta) rounds that each sort the ledger by
/// descending last loss (ascending batch_id on ties) and train the first
/// ceil(delta*N) batches. Odd E appends one final full pass.
TrainRecord dynamic_train(TinySegNet& net, const std::vector<BatchUnit>& batches,
                          const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct PatientRank {
    std::string patient_id;
    std::uint64_t train_count_sum = 0;
    double mean_last_loss = 0.0;
};

/// Per-patient aggregation of the ledger (sum of counts, mean of last
/// losses), sorted by count descending with patient_id ascending on ties;
/// at most top_k rows returned.
std::vector<PatientRank> hard_sample_report(const std::vector<LedgerEntry>& ledger,
                                            std::size_t top_k);

}  // namespace dybat
