#pragma once

#include <filesystem>
#include <string>

#include "dybat/corpus.hpp"
#include "dybat/scheduler.hpp"
#include "dybat/synthetic.hpp"

namespace dybat {

/// CSV float field: 6 significant digits, except the HD95 penalty constant
/// which is written exactly as 373.12866.
std::string csv_float(double v);

/// Everything `train` needs beyond the scheduler config.
struct TrainSettings {
    TrainConfig train;
    std::size_t hidden_width = 16;
    double foreground_threshold = 0.0;
    std::filesystem::path corpus_dir;
};

/// Strictly parsed config sections; unknown keys are rejected, ranges
/// validated at load. Relative paths resolve against the config file's
/// directory.
GeneratorSpec load_generator_config(const std::filesystem::path& config_path);
TrainSettings load_train_config(const std::filesystem::path& config_path);

/// Mean over patients of (dice_ET + dice_WT + dice_TC) / 3 on the given corpus.
double mean_corpus_dice(const TinySegNet& net, const std::vector<VolumeSample>& raw_samples,
                        double foreground_threshold);

/// Predicted label volume [D,H,W] for one preprocessed sample.
Tensor predict_labels(const TinySegNet& net, const VolumeSample& preprocessed);

/// gen-corpus: synthesize the corpus described by the config into out_dir.
void run_gen_corpus(const std::filesystem::path& config_path,
                    const std::filesystem::path& out_dir);

struct TrainOutputs {
    TrainRecord record;
    std::filesystem::path checkpoint_path;
    std::filesystem::path ledger_path;
    double best_mean_dice = 0.0;
    std::size_t best_epoch = 0;
};

/// train: run the configured mode over the corpus; writes checkpoint.bin
/// (best mean training dice), ledger.csv, epoch_loss.csv, pid_vs_count.csv
/// and pid_vs_dice.csv under out_dir.
TrainOutputs run_train(const std::filesystem::path& config_path,
                       const std::filesystem::path& out_dir);

/// evaluate: per patient and region dice/hd95/penalty rows plus a final mean
/// row, written as CSV to out_file.
void run_evaluate(const std::filesystem::path& checkpoint_path,
                  const std::filesystem::path& corpus_dir,
                  const std::filesystem::path& out_file);

/// report: joins a ledger CSV with a metrics CSV into hard_samples.csv,
/// pid_vs_dice.csv and pid_vs_count.csv under out_dir.
void run_report(const std::filesystem::path& ledger_path,
                const std::filesystem::path& metrics_path,
                const std::filesystem::path& out_dir);

}  // namespace dybat
