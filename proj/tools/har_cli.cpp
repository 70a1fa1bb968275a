// Command-line surface for the activity-recognition pipeline: cleaning and
// inspecting CASAS-style logs, training embeddings, running K-fold
// classification experiments, transfer runs, synthetic data generation and
// embedding export.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "har/bilm.hpp"
#include "har/checkpoint.hpp"
#include "har/classifier.hpp"
#include "har/dataset.hpp"
#include "har/eval.hpp"
#include "har/event_log.hpp"
#include "har/synthgen.hpp"
#include "har/word2vec.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.2.0";

// Sub-seed labels so each trained component gets an independent stream
// derived from the single mandatory run seed.
constexpr std::uint64_t kW2vSeedSalt = 0x77327665ull;
constexpr std::uint64_t kBiLmSeedSalt = 0x62696c6dull;

// Built-in defaults: K=3, max sequence length 2000, classifier 64 units /
// batch 64 / 400 epochs / patience 20, word2vec 64 dims / window 20 /
// 100 epochs, bilm 64 dims / window 60 / 400 epochs / batch 512.
json default_config() {
  json j;
  j["dataset"] = {{"path", ""}, {"relabel", "none"}, {"max_len", 2000}};
  j["embedding"] = {{"type", "trainable_embedding"},
                    {"elmo_mode", "concat"},
                    {"size", 64},
                    {"w2v_window", 20},
                    {"w2v_epochs", 100},
                    {"w2v_negatives", 5},
                    {"w2v_noise_exponent", 0.75},
                    {"w2v_learning_rate", 0.025},
                    {"bilm_window", 60},
                    {"bilm_epochs", 400},
                    {"bilm_batch", 512},
                    {"bilm_patience", 20},
                    {"bilm_learning_rate", 0.001}};
  j["classifier"] = {{"directionality", "bi"},
                     {"layers", 1},
                     {"units", 64},
                     {"batch", 64},
                     {"epochs", 400},
                     {"patience", 20},
                     {"learning_rate", 0.001}};
  j["k"] = 3;
  j["workers"] = 1;
  j["output_dir"] = "har_out";
  return j;
}

void merge_into(json& base, const json& overrides, const std::string& prefix,
                std::vector<std::string>& overridden) {
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object() && base.contains(it.key()) &&
        base[it.key()].is_object()) {
      merge_into(base[it.key()], *it, key, overridden);
    } else {
      if (!base.contains(it.key()) || base[it.key()] != *it)
        overridden.push_back(key);
      base[it.key()] = *it;
    }
  }
}

struct RunConfig {
  json snapshot;  // defaults with user overrides applied
  std::vector<std::string> overridden;
  std::string dataset_path;
  har::RelabelMap relabel;
  std::size_t max_len = 2000;
  har::ExperimentConfig experiment;
};

har::RelabelMap relabel_from_name(const std::string& name) {
  if (name == "none" || name.empty()) return har::RelabelMap::identity();
  if (name == "milan") return har::RelabelMap::milan_default();
  if (name == "cairo") return har::RelabelMap::cairo_default();
  return har::RelabelMap::from_json_file(name);  // treat as a file path
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json user;
  in >> user;

  RunConfig rc;
  rc.snapshot = default_config();
  merge_into(rc.snapshot, user, "", rc.overridden);

  if (!rc.snapshot.contains("seed"))
    throw std::runtime_error("config error: a seed is required");
  const json& j = rc.snapshot;

  rc.dataset_path = j["dataset"]["path"].get<std::string>();
  if (rc.dataset_path.empty())
    throw std::runtime_error("config error: dataset.path is required");
  if (!fs::exists(rc.dataset_path))
    throw std::runtime_error("config error: dataset path does not exist: " +
                             rc.dataset_path);
  rc.relabel = relabel_from_name(j["dataset"]["relabel"].get<std::string>());
  rc.max_len = j["dataset"]["max_len"].get<std::size_t>();

  har::ExperimentConfig& ec = rc.experiment;
  ec.seed = j["seed"].get<std::uint64_t>();
  ec.k = j["k"].get<std::size_t>();
  ec.workers = j["workers"].get<std::size_t>();
  if (const char* cap = std::getenv("HAR_MAX_WORKERS"))
    ec.workers = std::min<std::size_t>(
        ec.workers, static_cast<std::size_t>(std::stoul(cap)));

  const json& emb = j["embedding"];
  ec.embedding.kind = har::encoder_from_string(emb["type"].get<std::string>());
  ec.embedding.elmo_mode =
      har::elmo_mode_from_string(emb["elmo_mode"].get<std::string>());
  const std::size_t emb_size = emb["size"].get<std::size_t>();
  ec.embedding.w2v.embedding_size = emb_size;
  ec.embedding.w2v.window = emb["w2v_window"].get<std::size_t>();
  ec.embedding.w2v.epochs = emb["w2v_epochs"].get<std::size_t>();
  ec.embedding.w2v.negatives = emb["w2v_negatives"].get<std::size_t>();
  ec.embedding.w2v.noise_exponent = emb["w2v_noise_exponent"].get<double>();
  ec.embedding.w2v.learning_rate = emb["w2v_learning_rate"].get<double>();
  ec.embedding.w2v.seed = ec.seed ^ kW2vSeedSalt;
  ec.embedding.bilm.embedding_size = emb_size;
  ec.embedding.bilm.hidden_size = emb_size;
  ec.embedding.bilm.window = emb["bilm_window"].get<std::size_t>();
  ec.embedding.bilm.max_epochs = emb["bilm_epochs"].get<std::size_t>();
  ec.embedding.bilm.batch_size = emb["bilm_batch"].get<std::size_t>();
  ec.embedding.bilm.patience = emb["bilm_patience"].get<std::size_t>();
  ec.embedding.bilm.learning_rate = emb["bilm_learning_rate"].get<double>();
  ec.embedding.bilm.seed = ec.seed ^ kBiLmSeedSalt;

  const json& clf = j["classifier"];
  ec.classifier.directionality =
      clf["directionality"].get<std::string>() == "uni"
          ? har::Directionality::kUni
          : har::Directionality::kBi;
  ec.classifier.recurrent_layers = clf["layers"].get<std::size_t>();
  ec.classifier.units = clf["units"].get<std::size_t>();
  ec.classifier.embedding_size = emb_size;
  ec.classifier.batch_size = clf["batch"].get<std::size_t>();
  ec.classifier.max_epochs = clf["epochs"].get<std::size_t>();
  ec.classifier.patience = clf["patience"].get<std::size_t>();
  ec.classifier.learning_rate = clf["learning_rate"].get<double>();
  return rc;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const RunConfig& rc, const json& metrics) {
  json manifest;
  manifest["tool_version"] = kVersion;
  manifest["command"] = command;
  manifest["seed"] = rc.snapshot["seed"];
  manifest["config"] = rc.snapshot;
  manifest["overridden_fields"] = rc.overridden;
  manifest["metric_summary"] = metrics;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

har::LabeledDataset load_dataset(const RunConfig& rc) {
  std::vector<std::string> warnings;
  har::LabeledDataset ds = har::load_dataset_file(rc.dataset_path, rc.relabel,
                                                  rc.max_len, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  return ds;
}

void write_experiment_outputs(const fs::path& dir,
                              const har::ExperimentResult& result) {
  {
    std::ofstream out(dir / "report.json");
    out << result.to_json().dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "metrics.csv");
    out << har::EvalReport::metrics_csv_header() << "\n";
    out << result.averaged.metrics_csv_row("averaged") << "\n";
    for (std::size_t f = 0; f < result.per_fold.size(); ++f)
      out << result.per_fold[f].metrics_csv_row("fold" + std::to_string(f + 1))
          << "\n";
  }
  result.averaged.write_confusion_csv((dir / "confusion_pooled.csv").string());
  for (std::size_t f = 0; f < result.per_fold.size(); ++f)
    result.per_fold[f].write_confusion_csv(
        (dir / ("confusion_fold" + std::to_string(f + 1) + ".csv")).string());
  for (std::size_t f = 0; f < result.fold_logs.size(); ++f)
    har::write_training_log(
        result.fold_logs[f],
        (dir / ("training_fold" + std::to_string(f + 1) + ".csv")).string());
}

int cmd_clean(const std::string& in_path, const std::string& out_path) {
  std::vector<std::string> warnings;
  const auto events = har::parse_file(in_path, &warnings);
  har::CleaningReport report;
  const auto cleaned = har::clean(events, &report);
  har::write_log(out_path, cleaned);
  std::cout << report.to_json() << "\n";
  return 0;
}

int cmd_stats(const std::string& in_path, const std::string& relabel_name) {
  std::vector<std::string> warnings;
  const auto events = har::parse_file(in_path, &warnings);
  har::CleaningReport report;
  const auto cleaned = har::clean(events, &report);
  const auto labeled = har::annotate(cleaned, &warnings);
  auto sequences = har::segment(labeled);
  const har::RelabelMap relabel = relabel_from_name(relabel_name);
  for (auto& seq : sequences) seq.label = relabel.relabel(seq.label);
  const har::DatasetStats st = har::stats(sequences, cleaned);

  json j;
  j["sensor_count"] = st.sensor_count;
  j["activity_class_count"] = st.activity_class_count;
  j["day_count"] = st.day_count;
  j["sequence_count"] = sequences.size();
  j["sequences_per_class"] = st.sequences_per_class;
  j["cleaning"] = json::parse(report.to_json());
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_train_w2v(const std::string& config_path) {
  const RunConfig rc = load_config(config_path);
  const fs::path dir = rc.snapshot["output_dir"].get<std::string>();
  fs::create_directories(dir);
  const har::LabeledDataset ds = load_dataset(rc);

  const har::SkipGramResult result = har::train_skipgram(
      ds.index_corpus, ds.vocab, rc.experiment.embedding.w2v);
  har::save_embedding(result.embedding, (dir / "w2v.ckpt").string(),
                      rc.experiment.embedding.w2v);
  {
    std::ofstream out(dir / "w2v_loss.csv");
    out << "epoch,mean_pair_loss\n";
    char buf[48];
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g", e + 1, result.epoch_loss[e]);
      out << buf << "\n";
    }
  }
  {
    std::ofstream out(dir / "vocab.json");
    out << ds.vocab.to_json() << "\n";
  }
  json metrics;
  metrics["final_mean_pair_loss"] = result.epoch_loss.back();
  metrics["vocab_size"] = ds.vocab.size();
  write_manifest(dir, "train-w2v", rc, metrics);
  std::cout << "wrote " << (dir / "w2v.ckpt").string() << "\n";
  return 0;
}

int cmd_train_bilm(const std::string& config_path) {
  const RunConfig rc = load_config(config_path);
  const fs::path dir = rc.snapshot["output_dir"].get<std::string>();
  fs::create_directories(dir);
  const har::LabeledDataset ds = load_dataset(rc);

  const har::BiLmTrainResult result = har::train_bilm(
      ds.index_corpus, ds.vocab, rc.experiment.embedding.bilm);
  har::save_bilm(result.model, result.validation_perplexity,
                 (dir / "bilm.ckpt").string());
  {
    std::ofstream out(dir / "vocab.json");
    out << ds.vocab.to_json() << "\n";
  }
  json metrics;
  metrics["initial_perplexity"] = result.validation_perplexity.front();
  metrics["best_perplexity"] = result.validation_perplexity[result.best_epoch];
  metrics["best_epoch"] = result.best_epoch;
  metrics["epochs_run"] = result.validation_perplexity.size() - 1;
  write_manifest(dir, "train-bilm", rc, metrics);
  std::cout << "wrote " << (dir / "bilm.ckpt").string() << "\n";
  return 0;
}

json metric_summary(const har::ExperimentResult& result) {
  json metrics;
  metrics["averaged_accuracy"] = result.averaged.micro_accuracy;
  metrics["averaged_weighted_f1"] = result.averaged.weighted_f1;
  metrics["averaged_balanced_accuracy"] = result.averaged.balanced_accuracy;
  metrics["compat_view"] = result.averaged.compat_view();
  return metrics;
}

int cmd_experiment(const std::string& config_path) {
  const RunConfig rc = load_config(config_path);
  const fs::path dir = rc.snapshot["output_dir"].get<std::string>();
  fs::create_directories(dir);
  const har::LabeledDataset ds = load_dataset(rc);
  const har::ExperimentResult result = har::run_experiment(ds, rc.experiment);
  write_experiment_outputs(dir, result);
  write_manifest(dir, "experiment", rc, metric_summary(result));
  std::cout << "averaged accuracy " << 100.0 * result.averaged.micro_accuracy
            << "\n";
  return 0;
}

int cmd_transfer(const std::string& source_ckpt,
                 const std::string& config_path) {
  const RunConfig rc = load_config(config_path);
  const fs::path dir = rc.snapshot["output_dir"].get<std::string>();
  fs::create_directories(dir);
  const har::LabeledDataset ds = load_dataset(rc);
  const har::BiLmModel source = har::load_bilm(source_ckpt);

  har::ExperimentConfig cfg = rc.experiment;
  cfg.embedding.kind = har::EncoderKind::kElmoFrozen;
  const har::ExperimentResult result = har::transfer_experiment(source, ds, cfg);
  write_experiment_outputs(dir, result);
  write_manifest(dir, "transfer", rc, metric_summary(result));
  std::cout << "averaged accuracy " << 100.0 * result.averaged.micro_accuracy
            << "\n";
  return 0;
}

int cmd_synth(const std::string& scenario, const std::string& out_log,
              std::uint64_t seed_override, bool has_seed) {
  auto scenarios = har::default_scenarios();
  const auto it = scenarios.find(scenario);
  if (it == scenarios.end()) {
    std::cerr << "unknown scenario: " << scenario << " (available:";
    for (const auto& [name, spec] : scenarios) std::cerr << " " << name;
    std::cerr << ")\n";
    return 1;
  }
  har::HomeSpec spec = it->second;
  if (has_seed) spec.seed = seed_override;
  const har::GeneratedDataset gen = har::generate(spec);
  gen.write(out_log, out_log + ".truth.json");
  std::cout << "wrote " << out_log << " (" << gen.log_lines.size()
            << " events)\n";
  return 0;
}

int cmd_export_emb(const std::string& ckpt, const std::string& csv) {
  // Accepts either embedding checkpoint kind; a bilm exports its token layer.
  const har::Checkpoint header = har::load_checkpoint(ckpt);
  const std::string kind = header.meta.value("kind", "");
  har::EmbeddingMatrix emb;
  if (kind == "word2vec") {
    emb = har::load_embedding(ckpt);
  } else if (kind == "bilm") {
    const har::BiLmModel model = har::load_bilm(ckpt);
    emb.matrix = model.embedding.value;
    emb.vocab = model.vocab();
  } else {
    std::cerr << "not an embedding checkpoint: " << ckpt << "\n";
    return 1;
  }
  har::export_embeddings(emb, csv);
  std::cout << "wrote " << csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart-home activity recognition pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string in_path, out_path, config_path, ckpt_path, scenario;
  std::uint64_t synth_seed = 0;

  auto* clean_cmd =
      app.add_subcommand("clean", "Parse, clean and rewrite a log");
  clean_cmd->add_option("input", in_path, "raw log file")->required();
  clean_cmd->add_option("output", out_path, "cleaned log file")->required();

  std::string stats_relabel = "none";
  auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics");
  stats_cmd->add_option("input", in_path, "raw log file")->required();
  stats_cmd->add_option("--relabel", stats_relabel,
                        "none|milan|cairo|<map.json>");

  auto* w2v_cmd = app.add_subcommand("train-w2v", "Train skip-gram embeddings");
  w2v_cmd->add_option("config", config_path, "run config JSON")->required();

  auto* bilm_cmd = app.add_subcommand(
      "train-bilm", "Train the bidirectional language model");
  bilm_cmd->add_option("config", config_path, "run config JSON")->required();

  auto* exp_cmd = app.add_subcommand("experiment", "Stratified K-fold run");
  exp_cmd->add_option("config", config_path, "run config JSON")->required();

  auto* transfer_cmd =
      app.add_subcommand("transfer", "Classify with a foreign frozen bi-LM");
  transfer_cmd->add_option("source", ckpt_path, "source bilm checkpoint")
      ->required();
  transfer_cmd->add_option("config", config_path, "target run config JSON")
      ->required();

  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic home log");
  synth_cmd
      ->add_option("scenario", scenario, "aruba_like|milan_like|cairo_like")
      ->required();
  synth_cmd->add_option("output", out_path, "log file to write")->required();
  auto* seed_opt = synth_cmd->add_option("--seed", synth_seed, "scenario seed");

  auto* export_cmd =
      app.add_subcommand("export-emb", "Export embedding rows as CSV");
  export_cmd->add_option("checkpoint", ckpt_path, "embedding checkpoint")
      ->required();
  export_cmd->add_option("csv", out_path, "CSV file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (clean_cmd->parsed()) return cmd_clean(in_path, out_path);
    if (stats_cmd->parsed()) return cmd_stats(in_path, stats_relabel);
    if (w2v_cmd->parsed()) return cmd_train_w2v(config_path);
    if (bilm_cmd->parsed()) return cmd_train_bilm(config_path);
    if (exp_cmd->parsed()) return cmd_experiment(config_path);
    if (transfer_cmd->parsed()) return cmd_transfer(ckpt_path, config_path);
    if (synth_cmd->parsed())
      return cmd_synth(scenario, out_path, synth_seed, !seed_opt->empty());
    if (export_cmd->parsed()) return cmd_export_emb(ckpt_path, out_path);
  } catch (const har::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
