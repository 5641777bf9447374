#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ega/checkpoint.hpp"
#include "ega/config.hpp"
#include "ega/signal.hpp"
#include "ega/tensor.hpp"

namespace ega::harness {

struct Dataset {
  std::vector<ad::Tensor> x;  // n_channels x length each
  std::vector<int> y;
  std::vector<std::string> subject;
  std::size_t n_channels = 0;
  std::size_t length = 0;

  std::size_t size() const { return x.size(); }
};

Dataset dataset_from_segments(const std::vector<signal::Segment>& segs);

/// Every *.eegb file in dir, cut into non-overlapping windows of
/// `segment_length` samples. Trailing samples shorter than a window are
/// dropped. Unlabeled files are an error when `require_labels` is set and
/// get label 0 otherwise.
Dataset load_eegb_dir(const std::filesystem::path& dir, std::size_t segment_length, bool require_labels = true);

/// Synthetic data or an EEGB directory, as the config says.
Dataset load_dataset(const ExperimentConfig& cfg);

/// Unlabeled pre-training data: synthetic segments from pretrain_seed, or
/// the EEGB directory cut at encoder_input_length.
Dataset load_pretrain_dataset(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Cross-validation and metrics

struct Fold {
  std::vector<std::size_t> train, eval;
};

/// Stratified: each class is shuffled and dealt round-robin to the k folds.
std::vector<Fold> kfold_split(const std::vector<int>& labels, std::size_t k, std::uint64_t seed);

/// 2 TP / (2 TP + FP + FN), 0 when the denominator is 0.
double f1_score(const std::vector<int>& preds, const std::vector<int>& labels);

/// Mann-Whitney AUROC with midranks. Throws when only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Pre-training and fine-tuning

/// Builds and pre-trains the backbone, returning the checkpoint contents.
io::Checkpoint pretrain(const ExperimentConfig& cfg, const Dataset& data,
                        const std::function<void(const std::string&)>& log = {});

struct EpochMetrics {
  std::size_t epoch = 0;
  std::optional<double> train_loss;  // absent at epoch 0
  double f1 = 0.0;
  std::optional<double> auroc;
};

struct FoldReport {
  std::size_t fold = 0;
  std::size_t n_train = 0, n_eval = 0;
  std::vector<EpochMetrics> epochs;
  double f1 = 0.0;
  std::optional<double> auroc;
  std::string auroc_error;
  std::size_t trainable_params = 0;
  double wall_clock_s = 0.0;
  std::uint64_t backbone_digest_before = 0, backbone_digest_after = 0;
  std::vector<double> eval_scores;  // last epoch, positive-class probability
  std::vector<int> eval_labels;
};

struct ParamCounts {
  std::size_t trainable = 0, adapter = 0, encoder = 0, head = 0;
};

struct FinetuneResult {
  std::vector<FoldReport> folds;
  ParamCounts counts;
};

struct FinetuneOptions {
  std::function<void(const std::string&)> log;
  /// When set, each fold's final model is written as fold<i>.egac here.
  std::filesystem::path save_models_dir;
};

/// k-fold fine-tuning of cfg.variant starting from a pre-trained checkpoint.
/// Throws if a frozen backbone buffer changes during any fold.
FinetuneResult finetune(const ExperimentConfig& cfg, const Dataset& data, const io::Checkpoint& pretrained,
                        const FinetuneOptions& opts = {});

/// Trainable counts for a variant, computed from freshly initialized
/// parameters.
ParamCounts count_variant_params(const ExperimentConfig& cfg, RunVariant v);

/// Closed-form counterpart of count_variant_params.
ParamCounts closed_form_params(const ExperimentConfig& cfg, RunVariant v);

/// Accuracy-type metrics of a saved fine-tuned model on a dataset.
nlohmann::json evaluate_model(const io::Checkpoint& model, const Dataset& data);

// ---------------------------------------------------------------------------
// Reporting

nlohmann::json report_json(const ExperimentConfig& cfg, const FinetuneResult& result);
std::string report_table(const nlohmann::json& report);
/// Throws FormatError describing the first schema violation.
void validate_report(const nlohmann::json& report);
/// Copy with every "wall_clock_s" field removed.
nlohmann::json strip_wall_clock(nlohmann::json report);

}  // namespace ega::harness
