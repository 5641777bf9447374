#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "ega/errors.hpp"
#include "ega/harness.hpp"

namespace ega::harness {

using nlohmann::json;

namespace {

constexpr const char* kSchema = "ega.report/1";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Population mean and std.
json summarize(const std::vector<double>& v) {
  if (v.empty()) return {{"mean", nullptr}, {"std", nullptr}, {"n", 0}};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {{"mean", mean}, {"std", std::sqrt(var)}, {"n", v.size()}};
}

json counts_json(const ParamCounts& c) {
  return {{"trainable", c.trainable}, {"adapter", c.adapter}, {"encoder", c.encoder}, {"head", c.head}};
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw FormatError("report: " + where + ": " + what);
}

const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(where, std::string("missing '") + key + "'");
  return j.at(key);
}

void need_unit(const json& v, const std::string& where, bool nullable) {
  if (nullable && v.is_null()) return;
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!(x >= 0.0 && x <= 1.0)) fail(where, "value " + std::to_string(x) + " outside [0, 1]");
}

void need_count(const json& v, const std::string& where) {
  if (!v.is_number_unsigned()) fail(where, "expected a non-negative integer");
}

void need_summary(const json& s, const std::string& where) {
  need_count(need(s, "n", where), where + ".n");
  const bool empty = s.at("n").get<std::size_t>() == 0;
  need_unit(need(s, "mean", where), where + ".mean", empty);
  const auto& sd = need(s, "std", where);
  if (!(empty && sd.is_null()) && !(sd.is_number() && sd.get<double>() >= 0.0)) fail(where + ".std", "expected >= 0");
}

std::string fmt(const json& v, int precision = 4) {
  if (v.is_null()) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v.get<double>();
  return os.str();
}

}  // namespace

json report_json(const ExperimentConfig& cfg, const FinetuneResult& result) {
  if (result.folds.empty()) throw std::invalid_argument("report: no folds");
  json folds = json::array();
  std::vector<double> f1s, aurocs, pooled_scores;
  std::vector<int> pooled_labels, pooled_preds;
  double wall = 0.0;
  for (const auto& f : result.folds) {
    json epochs = json::array();
    for (const auto& e : f.epochs)
      epochs.push_back({{"epoch", e.epoch}, {"train_loss", opt(e.train_loss)}, {"f1", e.f1}, {"auroc", opt(e.auroc)}});
    json fj = {{"fold", f.fold},
               {"n_train", f.n_train},
               {"n_eval", f.n_eval},
               {"f1", f.f1},
               {"auroc", opt(f.auroc)},
               {"trainable_params", f.trainable_params},
               {"backbone_digest_before", hex64(f.backbone_digest_before)},
               {"backbone_digest_after", hex64(f.backbone_digest_after)},
               {"epochs", epochs},
               {"wall_clock_s", f.wall_clock_s}};
    if (!f.auroc_error.empty()) fj["auroc_error"] = f.auroc_error;
    folds.push_back(std::move(fj));
    f1s.push_back(f.f1);
    if (f.auroc) aurocs.push_back(*f.auroc);
    wall += f.wall_clock_s;
    for (std::size_t i = 0; i < f.eval_scores.size() && i < f.eval_labels.size(); ++i) {
      pooled_scores.push_back(f.eval_scores[i]);
      pooled_labels.push_back(f.eval_labels[i]);
      pooled_preds.push_back(f.eval_scores[i] > 0.5 ? 1 : 0);
    }
  }
  json pooled = {{"n", pooled_labels.size()}, {"f1", f1_score(pooled_preds, pooled_labels)}, {"auroc", nullptr}};
  try {
    pooled["auroc"] = auroc(pooled_scores, pooled_labels);
  } catch (const std::invalid_argument&) {
  }
  return {{"schema", kSchema},
          {"variant", to_string(cfg.variant)},
          {"config_hash", config_hash(cfg)},
          {"config", config_to_json(cfg)},
          {"params", counts_json(result.counts)},
          {"folds", folds},
          {"fold_mean", {{"f1", summarize(f1s)}, {"auroc", summarize(aurocs)}, {"std", "population"}}},
          {"pooled", pooled},
          {"wall_clock_s", wall}};
}

void validate_report(const json& r) {
  if (!r.is_object()) fail("root", "expected an object");
  if (need(r, "schema", "root") != kSchema) fail("schema", "expected '" + std::string(kSchema) + "'");
  parse_run_variant(need(r, "variant", "root").get<std::string>());
  const auto& hash = need(r, "config_hash", "root");
  if (!hash.is_string() || hash.get<std::string>().size() != 16) fail("config_hash", "expected 16 hex digits");
  if (!need(r, "config", "root").is_object()) fail("config", "expected an object");
  const auto& params = need(r, "params", "root");
  for (const char* k : {"trainable", "adapter", "encoder", "head"}) need_count(need(params, k, "params"), std::string("params.") + k);

  const auto& folds = need(r, "folds", "root");
  if (!folds.is_array() || folds.empty()) fail("folds", "expected a non-empty array");
  std::size_t with_auroc = 0;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const auto& f = folds[i];
    const std::string w = "folds[" + std::to_string(i) + "]";
    for (const char* k : {"fold", "n_train", "n_eval", "trainable_params"}) need_count(need(f, k, w), w + "." + k);
    need_unit(need(f, "f1", w), w + ".f1", false);
    need_unit(need(f, "auroc", w), w + ".auroc", true);
    if (!f.at("auroc").is_null()) ++with_auroc;
    for (const char* k : {"backbone_digest_before", "backbone_digest_after"})
      if (!need(f, k, w).is_string()) fail(w + "." + k, "expected a hex string");
    const auto& epochs = need(f, "epochs", w);
    if (!epochs.is_array() || epochs.empty()) fail(w + ".epochs", "expected a non-empty array");
    for (std::size_t e = 0; e < epochs.size(); ++e) {
      const std::string we = w + ".epochs[" + std::to_string(e) + "]";
      need_count(need(epochs[e], "epoch", we), we + ".epoch");
      need_unit(need(epochs[e], "f1", we), we + ".f1", false);
      need_unit(need(epochs[e], "auroc", we), we + ".auroc", true);
      const auto& loss = need(epochs[e], "train_loss", we);
      if (!loss.is_null() && !loss.is_number()) fail(we + ".train_loss", "expected a number or null");
    }
    if (epochs.back().at("f1") != f.at("f1")) fail(w + ".f1", "differs from the last epoch");
  }

  const auto& mean = need(r, "fold_mean", "root");
  need_summary(need(mean, "f1", "fold_mean"), "fold_mean.f1");
  need_summary(need(mean, "auroc", "fold_mean"), "fold_mean.auroc");
  if (mean.at("f1").at("n").get<std::size_t>() != folds.size()) fail("fold_mean.f1.n", "differs from the fold count");
  if (mean.at("auroc").at("n").get<std::size_t>() != with_auroc)
    fail("fold_mean.auroc.n", "differs from the number of folds with an AUROC");
  const auto& pooled = need(r, "pooled", "root");
  need_count(need(pooled, "n", "pooled"), "pooled.n");
  need_unit(need(pooled, "f1", "pooled"), "pooled.f1", false);
  need_unit(need(pooled, "auroc", "pooled"), "pooled.auroc", true);
}

json strip_wall_clock(json report) {
  if (report.is_object()) {
    report.erase("wall_clock_s");
    for (auto& [k, v] : report.items()) v = strip_wall_clock(std::move(v));
  } else if (report.is_array()) {
    for (auto& v : report) v = strip_wall_clock(std::move(v));
  }
  return report;
}

std::string report_table(const json& r) {
  std::ostringstream os;
  os << "variant " << r.at("variant").get<std::string>() << "  config " << r.at("config_hash").get<std::string>()
     << "  trainable params " << r.at("params").at("trainable").get<std::size_t>() << "\n\n";
  os << std::left << std::setw(6) << "fold" << std::right << std::setw(8) << "n_eval" << std::setw(10) << "F1"
     << std::setw(10) << "AUROC" << std::setw(12) << "params" << std::setw(10) << "seconds" << "\n";
  for (const auto& f : r.at("folds")) {
    os << std::left << std::setw(6) << f.at("fold").get<std::size_t>() << std::right << std::setw(8)
       << f.at("n_eval").get<std::size_t>() << std::setw(10) << fmt(f.at("f1")) << std::setw(10) << fmt(f.at("auroc"))
       << std::setw(12) << f.at("trainable_params").get<std::size_t>() << std::setw(10)
       << (f.contains("wall_clock_s") ? fmt(f.at("wall_clock_s"), 1) : "-") << "\n";
  }
  const auto& m = r.at("fold_mean");
  auto pm = [&](const json& s) { return fmt(s.at("mean")) + " +/- " + fmt(s.at("std")); };
  os << "\nfold mean    F1 " << pm(m.at("f1")) << "   AUROC " << pm(m.at("auroc")) << "\n";
  os << "pooled       F1 " << fmt(r.at("pooled").at("f1")) << "            AUROC " << fmt(r.at("pooled").at("auroc"))
     << "\n";
  return os.str();
}

}  // namespace ega::harness
