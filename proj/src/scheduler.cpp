#include "dybat/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dybat {

namespace {

struct TrainLoop {
    TinySegNet& net;
    const std::vector<BatchUnit>& batches;
    const TrainConfig& cfg;
    AdamState adam;
    std::vector<LedgerEntry> ledger;
    std::uint64_t total_trainings = 0;

    TrainLoop(TinySegNet& net_, const std::vector<BatchUnit>& batches_, const TrainConfig& cfg_)
        : net(net_), batches(batches_), cfg(cfg_), adam(net_.parameter_count(), cfg_.optimizer) {
        ledger.reserve(batches.size());
        for (const auto& b : batches) {
            ledger.push_back({b.batch_id, b.patient_id, 0.0, 0});
        }
    }

    /// Forward, loss, backward, optimizer step; refreshes the ledger slot.
    double train_one(std::size_t index) {
        const BatchUnit& batch = batches[index];
        double total = 0.0;
        try {
            const Tensor probs = net.forward(batch.input);
            const LossValue loss = evaluate_loss(batch.target, probs, cfg.loss);
            if (!std::isfinite(loss.total)) {
                throw NumericError("non-finite loss");
            }
            const Tensor dprob = loss_gradient(batch.target, probs, cfg.loss);
            const auto grads = net.backward(batch.input, dprob);
            adam.step(net.parameters(), grads);
            total = loss.total;
        } catch (const NumericError& e) {
            throw NumericError("training diverged on batch " +
                               std::to_string(batch.batch_id) + " (patient " +
                               batch.patient_id + "): " + e.what());
        } catch (const DataError& e) {
            throw NumericError("training diverged on batch " +
                               std::to_string(batch.batch_id) + " (patient " +
                               batch.patient_id + "): " + e.what());
        }

        ledger[index].last_loss = total;
        ledger[index].train_count += 1;
        ++total_trainings;
        return total;
    }

    /// One shuffled pass over every batch; returns the mean loss.
    double full_pass(Rng& rng) {
        std::vector<std::size_t> order(batches.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        double sum = 0.0;
        for (std::size_t i : order) sum += train_one(i);
        return sum / static_cast<double>(order.size());
    }

    /// Indices of the ledger sorted by descending last loss, ascending
    /// batch_id on ties: a total order, so identical ledgers sort identically.
    std::vector<std::size_t> loss_ranked_indices() const {
        std::vector<std::size_t> idx(ledger.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (ledger[a].last_loss != ledger[b].last_loss) {
                return ledger[a].last_loss > ledger[b].last_loss;
            }
            return ledger[a].batch_id < ledger[b].batch_id;
        });
        return idx;
    }
};

void check_common(const std::vector<BatchUnit>& batches, const TrainConfig& cfg) {
    cfg.validate();
    if (batches.empty()) throw PreconditionError("train: no batches");
}

}  // namespace

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "traditional") return TrainMode::traditional;
    if (name == "dynamic") return TrainMode::dynamic;
    throw ConfigError("unknown train mode: " + name);
}

std::string to_string(TrainMode m) {
    return m == TrainMode::traditional ? "traditional" : "dynamic";
}

void TrainConfig::validate() const {
    if (!(delta > 0.0 && delta <= 1.0)) {
        throw ConfigError("train: delta must be in (0, 1], got " + std::to_string(delta));
    }
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    loss.validate();
}

TrainRecord traditional_train(TinySegNet& net, const std::vector<BatchUnit>& batches,
                              const TrainConfig& cfg, const EpochCallback& on_epoch) {
    check_common(batches, cfg);
    Rng rng(cfg.seed);
    TrainLoop loop(net, batches, cfg);

    TrainRecord record;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        record.epoch_mean_loss.push_back(loop.full_pass(rng));
        if (on_epoch) on_epoch(epoch, net);
    }
    record.ledger = std::move(loop.ledger);
    record.total_batch_trainings = loop.total_trainings;
    return record;
}

TrainRecord dynamic_train(TinySegNet& net, const std::vector<BatchUnit>& batches,
                          const TrainConfig& cfg, const EpochCallback& on_epoch) {
    check_common(batches, cfg);
    Rng rng(cfg.seed);
    TrainLoop loop(net, batches, cfg);

    const std::size_t n = batches.size();
    // floor(1/delta) rounds of ceil(delta*N) selections, nudged so integral
    // ratios survive binary rounding (1/0.2, 0.2*10, ...).
    const auto rounds = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(1.0 / cfg.delta + 1e-9)));
    const auto selected = std::min(
        n, std::max<std::size_t>(
               1, static_cast<std::size_t>(
                      std::ceil(cfg.delta * static_cast<double>(n) - 1e-9))));

    TrainRecord record;
    const std::size_t outer = cfg.epochs / 2;
    for (std::size_t iter = 0; iter < outer; ++iter) {
        // Regular phase: every batch once, shuffled.
        record.epoch_mean_loss.push_back(loop.full_pass(rng));

        // Dynamic phase: rounds of sort-select-train on the hardest batches.
        double phase_sum = 0.0;
        std::size_t phase_count = 0;
        for (std::size_t round = 0; round < rounds; ++round) {
            const auto ranked = loop.loss_ranked_indices();
            for (std::size_t r = 0; r < selected; ++r) {
                phase_sum += loop.train_one(ranked[r]);
                ++phase_count;
            }
        }
        record.epoch_mean_loss.push_back(phase_sum / static_cast<double>(phase_count));
        if (on_epoch) on_epoch(iter, net);
    }
    if (cfg.epochs % 2 == 1) {
        // Odd epoch budget: one final regular pass honors the nominal count.
        record.epoch_mean_loss.push_back(loop.full_pass(rng));
        if (on_epoch) on_epoch(outer, net);
    }
    record.ledger = std::move(loop.ledger);
    record.total_batch_trainings = loop.total_trainings;
    return record;
}

std::vector<PatientRank> hard_sample_report(const std::vector<LedgerEntry>& ledger,
                                            std::size_t top_k) {
    if (ledger.empty()) throw PreconditionError("hard_sample_report: empty ledger");
    if (top_k < 1) throw PreconditionError("hard_sample_report: top_k must be >= 1");

    std::map<std::string, std::pair<std::uint64_t, std::pair<double, std::size_t>>> agg;
    for (const auto& e : ledger) {
        auto& slot = agg[e.patient_id];
        slot.first += e.train_count;
        slot.second.first += e.last_loss;
        slot.second.second += 1;
    }
    std::vector<PatientRank> ranks;
    ranks.reserve(agg.size());
    for (const auto& [pid, data] : agg) {
        ranks.push_back({pid, data.first,
                         data.second.first / static_cast<double>(data.second.second)});
    }
    std::sort(ranks.begin(), ranks.end(), [](const PatientRank& a, const PatientRank& b) {
        if (a.train_count_sum != b.train_count_sum) return a.train_count_sum > b.train_count_sum;
        return a.patient_id < b.patient_id;
    });
    if (ranks.size() > top_k) ranks.resize(top_k);
    return ranks;
}

}  // namespace dybat
