#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dybat/run.hpp"

namespace {

int guarded(const char* what, const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << what << ": " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic batch training harness for desk-scale segmentation runs"};
    app.require_subcommand(1);

    std::string config_path, out_path, checkpoint_path, corpus_path, ledger_path, metrics_path;

    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
    gen->add_option("--config", config_path, "config file with a generator section")->required();
    gen->add_option("--out", out_path, "corpus output directory")->required();

    auto* train = app.add_subcommand("train", "train on a corpus");
    train->add_option("--config", config_path, "config file with a train section")->required();
    train->add_option("--out", out_path, "run output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint against a corpus");
    evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    evaluate->add_option("--corpus", corpus_path, "corpus directory")->required();
    evaluate->add_option("--out", out_path, "metrics CSV output path")->required();

    auto* report = app.add_subcommand("report", "hard-sample report and scatter data");
    report->add_option("--ledger", ledger_path, "ledger CSV from a train run")->required();
    report->add_option("--metrics", metrics_path, "metrics CSV from evaluate")->required();
    report->add_option("--out", out_path, "report output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        return guarded("gen-corpus", [&] { dybat::run_gen_corpus(config_path, out_path); });
    }
    if (train->parsed()) {
        return guarded("train", [&] {
            const auto outputs = dybat::run_train(config_path, out_path);
            std::cout << "trained " << outputs.record.total_batch_trainings
                      << " batch-trainings; best mean dice "
                      << dybat::csv_float(outputs.best_mean_dice) << " at epoch "
                      << outputs.best_epoch << "\n";
        });
    }
    if (evaluate->parsed()) {
        return guarded("evaluate",
                       [&] { dybat::run_evaluate(checkpoint_path, corpus_path, out_path); });
    }
    return guarded("report", [&] { dybat::run_report(ledger_path, metrics_path, out_path); });
}
