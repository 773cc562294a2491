#include "dybat/run.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dybat/metrics.hpp"
#include "dybat/preprocess.hpp"

namespace dybat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config ---

json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
}

void check_keys(const json& obj, const std::string& context,
                const std::set<std::string>& required, const std::set<std::string>& optional) {
    if (!obj.is_object()) throw ConfigError(context + " must be a JSON object");
    for (const auto& item : obj.items()) {
        if (!required.count(item.key()) && !optional.count(item.key())) {
            throw ConfigError(context + ": unknown key '" + item.key() + "'");
        }
    }
    for (const auto& key : required) {
        if (!obj.contains(key)) throw ConfigError(context + ": missing required key '" + key + "'");
    }
}

template <typename T>
T get_as(const json& obj, const std::string& key, const std::string& context) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(context + ": bad value for '" + key + "'");
    }
}

GeneratorSpec parse_generator(const json& g) {
    check_keys(g, "generator",
               {"num_samples", "dims"},
               {"modalities", "noise", "seed", "empty_samples", "injections"});
    GeneratorSpec spec;
    spec.num_samples = get_as<std::size_t>(g, "num_samples", "generator");
    const auto dims = get_as<std::vector<std::size_t>>(g, "dims", "generator");
    if (dims.size() != 3) throw ConfigError("generator: dims must be [depth, height, width]");
    spec.depth = dims[0];
    spec.height = dims[1];
    spec.width = dims[2];
    if (g.contains("modalities")) {
        spec.modalities = get_as<std::vector<std::string>>(g, "modalities", "generator");
    }
    if (g.contains("noise")) spec.noise = get_as<double>(g, "noise", "generator");
    if (g.contains("seed")) spec.seed = get_as<std::uint64_t>(g, "seed", "generator");
    if (g.contains("empty_samples")) {
        spec.empty_samples = get_as<std::size_t>(g, "empty_samples", "generator");
    }
    if (g.contains("injections")) {
        const auto& inj = g.at("injections");
        check_keys(inj, "generator.injections", {},
                   {"label_permutation", "rare_class_absent", "tiny_region", "heavy_noise"});
        auto& i = spec.injections;
        if (inj.contains("label_permutation")) {
            i.label_permutation = get_as<std::size_t>(inj, "label_permutation", "injections");
        }
        if (inj.contains("rare_class_absent")) {
            i.rare_class_absent = get_as<std::size_t>(inj, "rare_class_absent", "injections");
        }
        if (inj.contains("tiny_region")) {
            i.tiny_region = get_as<std::size_t>(inj, "tiny_region", "injections");
        }
        if (inj.contains("heavy_noise")) {
            i.heavy_noise = get_as<std::size_t>(inj, "heavy_noise", "injections");
        }
    }
    spec.validate();
    return spec;
}

TrainSettings parse_train(const json& t, const fs::path& base_dir) {
    check_keys(t, "train",
               {"mode", "epochs", "corpus_dir"},
               {"delta", "batch_size", "seed", "hidden_width", "foreground_threshold",
                "optimizer", "loss"});
    TrainSettings s;
    s.train.mode = train_mode_from_string(get_as<std::string>(t, "mode", "train"));
    s.train.epochs = get_as<std::size_t>(t, "epochs", "train");
    s.corpus_dir = base_dir / fs::path(get_as<std::string>(t, "corpus_dir", "train"));
    if (t.contains("delta")) s.train.delta = get_as<double>(t, "delta", "train");
    if (t.contains("batch_size")) s.train.batch_size = get_as<std::size_t>(t, "batch_size", "train");
    if (t.contains("seed")) s.train.seed = get_as<std::uint64_t>(t, "seed", "train");
    if (t.contains("hidden_width")) {
        s.hidden_width = get_as<std::size_t>(t, "hidden_width", "train");
        if (s.hidden_width == 0) throw ConfigError("train: hidden_width must be >= 1");
    }
    if (t.contains("foreground_threshold")) {
        s.foreground_threshold = get_as<double>(t, "foreground_threshold", "train");
    }
    if (t.contains("optimizer")) {
        const auto& o = t.at("optimizer");
        check_keys(o, "train.optimizer", {}, {"learning_rate", "beta1", "beta2", "epsilon"});
        auto& a = s.train.optimizer;
        if (o.contains("learning_rate")) a.learning_rate = get_as<double>(o, "learning_rate", "optimizer");
        if (o.contains("beta1")) a.beta1 = get_as<double>(o, "beta1", "optimizer");
        if (o.contains("beta2")) a.beta2 = get_as<double>(o, "beta2", "optimizer");
        if (o.contains("epsilon")) a.epsilon = get_as<double>(o, "epsilon", "optimizer");
        if (a.learning_rate <= 0.0) throw ConfigError("optimizer: learning_rate must be > 0");
        if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0)) {
            throw ConfigError("optimizer: betas must be in [0, 1)");
        }
        if (a.epsilon <= 0.0) throw ConfigError("optimizer: epsilon must be > 0");
    }
    if (t.contains("loss")) {
        const auto& l = t.at("loss");
        check_keys(l, "train.loss", {},
                   {"variant", "gamma", "alpha_fg", "alpha_bg", "c_weight", "epsilon"});
        auto& c = s.train.loss;
        if (l.contains("variant")) {
            c.variant = loss_variant_from_string(get_as<std::string>(l, "variant", "loss"));
        }
        if (l.contains("gamma")) c.gamma = get_as<double>(l, "gamma", "loss");
        if (l.contains("alpha_fg")) c.alpha_fg = get_as<double>(l, "alpha_fg", "loss");
        if (l.contains("alpha_bg")) c.alpha_bg = get_as<double>(l, "alpha_bg", "loss");
        if (l.contains("c_weight")) c.c_weight = get_as<double>(l, "c_weight", "loss");
        if (l.contains("epsilon")) c.epsilon = get_as<double>(l, "epsilon", "loss");
    }
    s.train.validate();
    if (s.foreground_threshold < 0.0) {
        throw ConfigError("train: foreground_threshold must be >= 0");
    }
    return s;
}

json load_config_root(const fs::path& config_path) {
    const json root = load_json(config_path);
    check_keys(root, "config", {}, {"generator", "train"});
    return root;
}

// ------------------------------------------------------------------- csv ---

void open_csv(std::ofstream& out, const fs::path& path) {
    out.open(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw IoError("cannot write: " + path.string());
}

struct LedgerRow {
    int batch_id;
    std::string patient_id;
    double last_loss;
    std::uint64_t train_count;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

std::vector<LedgerRow> read_ledger_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ledger: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "batch_id,patient_id,last_loss,train_count") {
        throw DataError("ledger CSV header mismatch in " + path.string());
    }
    std::vector<LedgerRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw DataError("ledger CSV bad row: " + line);
        rows.push_back({std::stoi(f[0]), f[1], std::stod(f[2]),
                        static_cast<std::uint64_t>(std::stoull(f[3]))});
    }
    return rows;
}

struct MetricsRow {
    std::string patient_id;
    std::string region;
    double dice;
    double hd95;
};

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "patient_id,region,dice,hd95,penalty_applied") {
        throw DataError("metrics CSV header mismatch in " + path.string());
    }
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 5) throw DataError("metrics CSV bad row: " + line);
        if (f[0] == "mean") continue;
        rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3])});
    }
    return rows;
}

void write_ledger_csv(const fs::path& path, const std::vector<LedgerEntry>& ledger) {
    std::ofstream out;
    open_csv(out, path);
    out << "batch_id,patient_id,last_loss,train_count\n";
    for (const auto& e : ledger) {
        out << e.batch_id << "," << e.patient_id << "," << csv_float(e.last_loss) << ","
            << e.train_count << "\n";
    }
}

// ------------------------------------------------------------- evaluation ---

struct PatientDice {
    RegionReport report;
    double avg_dice = 0.0;  // (ET + WT + TC) / 3
};

PatientDice score_patient(const TinySegNet& net, const VolumeSample& preprocessed,
                          const VolumeSample& raw) {
    PatientDice out;
    const Tensor pred = predict_labels(net, preprocessed);
    out.report = evaluate_regions(pred, raw.labels);
    out.avg_dice = (out.report.et.dice + out.report.wt.dice + out.report.tc.dice) / 3.0;
    return out;
}

}  // namespace

std::string csv_float(double v) {
    if (v == kHd95Penalty) return "373.12866";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

GeneratorSpec load_generator_config(const fs::path& config_path) {
    const json root = load_config_root(config_path);
    if (!root.contains("generator")) {
        throw ConfigError("config has no 'generator' section: " + config_path.string());
    }
    return parse_generator(root.at("generator"));
}

TrainSettings load_train_config(const fs::path& config_path) {
    const json root = load_config_root(config_path);
    if (!root.contains("train")) {
        throw ConfigError("config has no 'train' section: " + config_path.string());
    }
    return parse_train(root.at("train"), config_path.parent_path());
}

Tensor predict_labels(const TinySegNet& net, const VolumeSample& preprocessed) {
    return argmax_labels(net.forward(preprocessed.input));
}

double mean_corpus_dice(const TinySegNet& net, const std::vector<VolumeSample>& raw_samples,
                        double foreground_threshold) {
    double sum = 0.0;
    for (const auto& raw : raw_samples) {
        const VolumeSample pre = preprocess_sample(raw, foreground_threshold);
        sum += score_patient(net, pre, raw).avg_dice;
    }
    return sum / static_cast<double>(raw_samples.size());
}

void run_gen_corpus(const fs::path& config_path, const fs::path& out_dir) {
    const GeneratorSpec spec = load_generator_config(config_path);
    const SyntheticCorpus corpus = generate_synthetic_corpus(spec);
    write_corpus(corpus.samples, corpus.manifest, out_dir);
}

TrainOutputs run_train(const fs::path& config_path, const fs::path& out_dir) {
    const TrainSettings settings = load_train_config(config_path);

    // Everything that can fail validates before any output file is created.
    const CorpusManifest manifest = load_manifest(settings.corpus_dir);
    if (manifest.samples.empty()) throw DataError("corpus has no samples");
    const std::vector<VolumeSample> raw_samples = load_corpus(settings.corpus_dir, manifest);

    std::vector<VolumeSample> samples;
    samples.reserve(raw_samples.size());
    for (const auto& raw : raw_samples) {
        samples.push_back(preprocess_sample(raw, settings.foreground_threshold));
    }
    const std::vector<BatchUnit> batches = partition_corpus(samples, settings.train.batch_size);

    const std::size_t in_channels = manifest.samples.front().modalities.size();
    Rng init_rng = Rng(settings.train.seed).fork(0x1717);
    TinySegNet net(NetConfig{in_channels, settings.hidden_width, kNumClasses}, init_rng);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create out dir: " + out_dir.string());

    TrainOutputs outputs;
    outputs.checkpoint_path = out_dir / "checkpoint.bin";
    outputs.ledger_path = out_dir / "ledger.csv";

    // Weights are checkpointed whenever the mean training dice improves.
    double best_dice = -1.0;
    std::size_t best_epoch = 0;
    const EpochCallback on_epoch = [&](std::size_t index, const TinySegNet& snapshot) {
        const double d = mean_corpus_dice(snapshot, raw_samples, settings.foreground_threshold);
        if (d > best_dice) {
            best_dice = d;
            best_epoch = index;
            snapshot.save_checkpoint(outputs.checkpoint_path);
        }
    };

    TrainRecord record;
    if (settings.train.mode == TrainMode::traditional) {
        record = traditional_train(net, batches, settings.train, on_epoch);
    } else {
        record = dynamic_train(net, batches, settings.train, on_epoch);
    }

    write_ledger_csv(outputs.ledger_path, record.ledger);

    {
        std::ofstream out;
        open_csv(out, out_dir / "epoch_loss.csv");
        out << "epoch,mean_loss\n";
        for (std::size_t i = 0; i < record.epoch_mean_loss.size(); ++i) {
            out << i << "," << csv_float(record.epoch_mean_loss[i]) << "\n";
        }
    }

    // Scatter data: per-patient train counts and best-checkpoint dice.
    {
        std::map<std::string, std::uint64_t> counts;
        for (const auto& e : record.ledger) counts[e.patient_id] += e.train_count;
        std::ofstream out;
        open_csv(out, out_dir / "pid_vs_count.csv");
        out << "patient_id,train_count_sum\n";
        for (const auto& [pid, c] : counts) out << pid << "," << c << "\n";
    }
    {
        const TinySegNet best = TinySegNet::load_checkpoint(outputs.checkpoint_path);
        std::ofstream out;
        open_csv(out, out_dir / "pid_vs_dice.csv");
        out << "patient_id,avg_dice\n";
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double avg = score_patient(best, samples[i], raw_samples[i]).avg_dice;
            out << samples[i].patient_id << "," << csv_float(avg * 100.0) << "\n";
        }
    }

    outputs.record = std::move(record);
    outputs.best_mean_dice = best_dice;
    outputs.best_epoch = best_epoch;
    return outputs;
}

void run_evaluate(const fs::path& checkpoint_path, const fs::path& corpus_dir,
                  const fs::path& out_file) {
    const TinySegNet net = TinySegNet::load_checkpoint(checkpoint_path);
    const CorpusManifest manifest = load_manifest(corpus_dir);

    struct Row {
        std::string patient_id;
        const char* region;
        RegionScore score;
    };
    std::vector<Row> rows;
    double dice_sum = 0.0, hd_sum = 0.0, penalty_sum = 0.0;

    std::vector<ManifestEntry> entries = manifest.samples;
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.patient_id < b.patient_id;
              });
    for (const auto& entry : entries) {
        if (entry.modalities.size() != net.config().in_channels) {
            throw DataError("sample " + entry.patient_id + ": corpus has " +
                            std::to_string(entry.modalities.size()) +
                            " modalities but checkpoint expects " +
                            std::to_string(net.config().in_channels));
        }
        const VolumeSample raw = load_sample(corpus_dir, entry);
        const VolumeSample pre = preprocess_sample(raw);
        const PatientDice scored = score_patient(net, pre, raw);
        rows.push_back({entry.patient_id, "ET", scored.report.et});
        rows.push_back({entry.patient_id, "WT", scored.report.wt});
        rows.push_back({entry.patient_id, "TC", scored.report.tc});
    }
    for (const auto& r : rows) {
        dice_sum += r.score.dice;
        hd_sum += r.score.hd95;
        penalty_sum += r.score.penalty_applied ? 1.0 : 0.0;
    }

    std::ofstream out;
    open_csv(out, out_file);
    out << "patient_id,region,dice,hd95,penalty_applied\n";
    for (const auto& r : rows) {
        out << r.patient_id << "," << r.region << "," << csv_float(r.score.dice) << ","
            << csv_float(r.score.hd95) << "," << (r.score.penalty_applied ? 1 : 0) << "\n";
    }
    const auto n = static_cast<double>(rows.size());
    out << "mean,all," << csv_float(dice_sum / n) << "," << csv_float(hd_sum / n) << ","
        << csv_float(penalty_sum / n) << "\n";
}

void run_report(const fs::path& ledger_path, const fs::path& metrics_path,
                const fs::path& out_dir) {
    const auto ledger_rows = read_ledger_csv(ledger_path);
    const auto metrics_rows = read_metrics_csv(metrics_path);
    if (ledger_rows.empty()) throw DataError("ledger CSV has no rows");
    if (metrics_rows.empty()) throw DataError("metrics CSV has no rows");

    // Per-patient aggregates from both inputs.
    std::map<std::string, std::pair<std::uint64_t, std::pair<double, std::size_t>>> counts;
    for (const auto& r : ledger_rows) {
        auto& slot = counts[r.patient_id];
        slot.first += r.train_count;
        slot.second.first += r.last_loss;
        slot.second.second += 1;
    }
    std::map<std::string, std::map<std::string, double>> dice_by_patient;
    for (const auto& r : metrics_rows) dice_by_patient[r.patient_id][r.region] = r.dice;

    std::vector<std::string> unmatched;
    for (const auto& [pid, _] : counts) {
        if (!dice_by_patient.count(pid)) unmatched.push_back(pid);
    }
    for (const auto& [pid, _] : dice_by_patient) {
        if (!counts.count(pid)) unmatched.push_back(pid);
    }
    if (!unmatched.empty()) {
        std::string msg = "patient ids do not match between ledger and metrics:";
        for (const auto& pid : unmatched) msg += " " + pid;
        throw DataError(msg);
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create out dir: " + out_dir.string());

    // Ranked hard-sample table over the full ledger.
    std::vector<LedgerEntry> entries;
    for (const auto& r : ledger_rows) {
        entries.push_back({r.batch_id, r.patient_id, r.last_loss, r.train_count});
    }
    const auto ranked = hard_sample_report(entries, entries.size());
    {
        std::ofstream out;
        open_csv(out, out_dir / "hard_samples.csv");
        out << "rank,patient_id,train_count_sum,mean_last_loss\n";
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            out << (i + 1) << "," << ranked[i].patient_id << "," << ranked[i].train_count_sum
                << "," << csv_float(ranked[i].mean_last_loss) << "\n";
        }
    }
    {
        std::ofstream out;
        open_csv(out, out_dir / "pid_vs_count.csv");
        out << "patient_id,train_count_sum\n";
        for (const auto& [pid, data] : counts) out << pid << "," << data.first << "\n";
    }
    {
        std::ofstream out;
        open_csv(out, out_dir / "pid_vs_dice.csv");
        out << "patient_id,avg_dice\n";
        for (const auto& [pid, regions] : dice_by_patient) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const char* region : {"ET", "WT", "TC"}) {
                const auto it = regions.find(region);
                if (it != regions.end()) {
                    sum += it->second;
                    ++n;
                }
            }
            if (n != 3) throw DataError("metrics CSV missing regions for patient " + pid);
            out << pid << "," << csv_float(sum / 3.0 * 100.0) << "\n";
        }
    }
}

}  // namespace dybat
