#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ega/checkpoint.hpp"
#include "ega/config.hpp"
#include "ega/eegb.hpp"
#include "ega/errors.hpp"
#include "ega/gradsuite.hpp"
#include "ega/harness.hpp"
#include "ega/kernels.hpp"
#include "ega/signal.hpp"
#include "ega/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_line(const std::string& s) { std::cerr << s << "\n"; }

ega::ExperimentConfig base_config(const std::string& path) {
  if (path.empty()) {
    ega::ExperimentConfig cfg;
    cfg.finalize();
    return cfg;
  }
  return ega::load_config(path);
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::pair<double, double> parse_band(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ega::ConfigError("--band expects lo:hi, got '" + s + "'");
  return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
}

std::vector<fs::path> inputs_of(const fs::path& in) {
  if (!fs::is_directory(in)) return {in};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(in)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".eegb" || ext == ".csv")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-adapter EEG fine-tuning toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic spatial-correlation dataset as EEGB files");
  std::string synth_out, synth_config;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_subjects;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--config", synth_config, "Experiment config (synth section)");
  synth->add_option("--seed", synth_seed, "Data seed");
  synth->add_option("--subjects-per-class", synth_subjects);

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Filter, resample and segment EEGB/CSV recordings");
  std::string prep_in, prep_out, prep_band = "0.1:100";
  double resample_hz = 256.0, notch_hz = 50.0, window_s = 60.0, csv_rate = 0.0;
  std::optional<int> csv_label;
  prep->add_option("--in", prep_in, "EEGB/CSV file or directory")->required();
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("--resample-hz", resample_hz)->capture_default_str();
  prep->add_option("--notch", notch_hz, "Notch frequency, 0 disables")->capture_default_str();
  prep->add_option("--band", prep_band, "Band-pass lo:hi in Hz, or 'none'")->capture_default_str();
  prep->add_option("--window-s", window_s)->capture_default_str();
  prep->add_option("--csv-rate", csv_rate, "CSV sample rate; 0 infers it from the time column");
  prep->add_option("--label", csv_label, "Label for CSV inputs");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Masked self-supervised pre-training of the backbone");
  std::string pre_config, pre_out;
  std::optional<std::size_t> pre_steps;
  pre->add_option("--config", pre_config, "Experiment config");
  pre->add_option("--out", pre_out, "Checkpoint path")->required();
  pre->add_option("--steps", pre_steps, "Override pretrain.steps");

  // finetune
  auto* ft = app.add_subcommand("finetune", "k-fold fine-tuning from a pre-trained checkpoint");
  std::string ft_config, ft_ckpt, ft_data, ft_variant, ft_out = "report.json", ft_models;
  std::optional<std::size_t> ft_k, ft_epochs;
  std::optional<std::uint64_t> ft_seed;
  std::optional<double> ft_lr;
  ft->add_option("--config", ft_config, "Experiment config");
  ft->add_option("--ckpt", ft_ckpt, "Pre-trained checkpoint")->required();
  ft->add_option("--data", ft_data, "EEGB directory (default: the config's task)");
  ft->add_option("--variant", ft_variant, "baseline | frozen | gcn | sage | gat");
  ft->add_option("--k", ft_k, "Folds");
  ft->add_option("--seed", ft_seed, "Fold and initialization seed");
  ft->add_option("--epochs", ft_epochs);
  ft->add_option("--lr", ft_lr);
  ft->add_option("--out", ft_out, "Report path")->capture_default_str();
  ft->add_option("--save-models", ft_models, "Directory for per-fold model checkpoints");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a saved fine-tuned model on a dataset");
  std::string ev_model, ev_data, ev_out;
  ev->add_option("--model", ev_model, "Fine-tuned checkpoint")->required();
  ev->add_option("--data", ev_data, "EEGB directory (default: the model's task)");
  ev->add_option("--out", ev_out, "Write the metrics JSON here");

  // params
  auto* pr = app.add_subcommand("params", "Trainable parameter counts per variant");
  std::string pr_config;
  pr->add_option("--config", pr_config, "Experiment config");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  std::size_t gc_seeds = 10;
  double gc_tol = 1e-4;
  gc->add_option("--seeds", gc_seeds)->capture_default_str();
  gc->add_option("--tol", gc_tol)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) ega::kernels::set_num_threads(threads);

  try {
    if (*synth) {
      auto cfg = base_config(synth_config);
      auto spec = cfg.synth;
      if (synth_subjects) spec.n_subjects_per_class = *synth_subjects;
      const auto segs = ega::signal::synthesize_dataset(spec, synth_seed.value_or(cfg.data_seed));
      fs::create_directories(synth_out);
      for (const auto& s : segs) {
        auto rec = ega::signal::to_recording(s, spec.sample_rate_hz);
        ega::io::write_eegb(fs::path(synth_out) / (s.subject_id + "_" + std::to_string(s.offset / s.length) + ".eegb"),
                            rec);
      }
      std::cout << "wrote " << segs.size() << " recordings to " << synth_out << "\n";
    } else if (*prep) {
      ega::signal::PreprocessOptions opts;
      opts.resample_hz = resample_hz;
      opts.apply_notch = notch_hz > 0.0;
      opts.filters.notch_hz = notch_hz;
      opts.apply_bandpass = prep_band != "none";
      if (opts.apply_bandpass) std::tie(opts.filters.band_lo_hz, opts.filters.band_hi_hz) = parse_band(prep_band);
      opts.segments.window_s = window_s;
      fs::create_directories(prep_out);
      std::size_t n_out = 0;
      for (const auto& in : inputs_of(prep_in)) {
        ega::signal::Recording rec;
        if (in.extension() == ".csv") {
          rec = ega::io::read_csv(in, csv_rate);
          if (csv_label) rec.label = *csv_label;
        } else {
          rec = ega::io::read_eegb(in);
        }
        const auto segs = ega::signal::preprocess(rec, opts);
        for (std::size_t i = 0; i < segs.size(); ++i) {
          auto out = ega::signal::to_recording(segs[i], resample_hz);
          out.label = rec.label;
          ega::io::write_eegb(fs::path(prep_out) / (in.stem().string() + "_s" + std::to_string(i) + ".eegb"), out);
          ++n_out;
        }
        std::cout << in.filename().string() << ": " << segs.size() << " segments\n";
      }
      std::cout << "wrote " << n_out << " segments to " << prep_out << "\n";
    } else if (*pre) {
      auto cfg = base_config(pre_config);
      if (pre_steps) cfg.pretrain.steps = *pre_steps;
      const auto data = ega::harness::load_pretrain_dataset(cfg);
      const auto t0 = std::chrono::steady_clock::now();
      const auto ck = ega::harness::pretrain(cfg, data, log_line);
      ega::io::save_checkpoint(pre_out, ck.config, ck.params, ck.rng_state);
      std::cout << "pretrained on " << data.size() << " segments in "
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s -> " << pre_out
                << "\n";
    } else if (*ft) {
      auto cfg = base_config(ft_config);
      if (!ft_variant.empty()) cfg.variant = ega::parse_run_variant(ft_variant);
      if (ft_k) cfg.k_folds = *ft_k;
      if (ft_seed) cfg.seed = *ft_seed;
      if (ft_epochs) cfg.epochs = *ft_epochs;
      if (ft_lr) cfg.lr = *ft_lr;
      if (!ft_data.empty()) {
        cfg.task = "eegb-dir";
        cfg.data_dir = ft_data;
      }
      cfg.finalize();
      const auto ckpt = ega::io::load_checkpoint(ft_ckpt);
      const auto data = ega::harness::load_dataset(cfg);
      ega::harness::FinetuneOptions opts;
      opts.log = log_line;
      opts.save_models_dir = ft_models;
      const auto result = ega::harness::finetune(cfg, data, ckpt, opts);
      const auto report = ega::harness::report_json(cfg, result);
      ega::harness::validate_report(report);
      write_json(ft_out, report);
      std::cout << ega::harness::report_table(report);
    } else if (*ev) {
      const auto model = ega::io::load_checkpoint(ev_model);
      auto cfg = ega::config_from_json(model.config.at("experiment"));
      if (!ev_data.empty()) {
        cfg.task = "eegb-dir";
        cfg.data_dir = ev_data;
      }
      const auto metrics = ega::harness::evaluate_model(model, ega::harness::load_dataset(cfg));
      if (!ev_out.empty()) write_json(ev_out, metrics);
      std::cout << metrics.dump(2) << "\n";
    } else if (*pr) {
      const auto cfg = base_config(pr_config);
      bool all_match = true;
      std::cout << std::left << std::setw(10) << "variant" << std::right << std::setw(12) << "trainable"
                << std::setw(12) << "closed" << std::setw(12) << "adapter" << std::setw(12) << "encoder"
                << std::setw(8) << "head" << "  match\n";
      for (auto v : {ega::RunVariant::gcn, ega::RunVariant::gat, ega::RunVariant::sage, ega::RunVariant::frozen,
                     ega::RunVariant::baseline}) {
        const auto a = ega::harness::count_variant_params(cfg, v);
        const auto c = ega::harness::closed_form_params(cfg, v);
        const bool match = a.trainable == c.trainable && a.adapter == c.adapter && a.encoder == c.encoder &&
                           a.head == c.head;
        all_match = all_match && match;
        std::cout << std::left << std::setw(10) << ega::to_string(v) << std::right << std::setw(12) << a.trainable
                  << std::setw(12) << c.trainable << std::setw(12) << a.adapter << std::setw(12) << a.encoder
                  << std::setw(8) << a.head << "  " << (match ? "yes" : "NO") << "\n";
      }
      return all_match ? 0 : 1;
    } else if (*gc) {
      bool ok = true;
      for (const auto& e : ega::run_grad_suite(gc_seeds, gc_tol)) {
        std::cout << std::left << std::setw(15) << e.layer << " seeds " << e.seeds << "  failures " << e.failures
                  << "  max rel err " << std::scientific << std::setprecision(2) << e.max_rel_error
                  << std::defaultfloat << "  " << std::fixed << std::setprecision(2) << e.seconds << " s"
                  << std::defaultfloat << "\n";
        ok = ok && e.failures == 0;
      }
      std::cout << (ok ? "all layers pass" : "gradient check FAILED") << "\n";
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
