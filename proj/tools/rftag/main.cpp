// Copyright 2026 The rftag Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// rftag command-line entry point. Exit codes: 0 success, 1 invalid input,
// 2 runtime failure. Errors also go to stderr as one JSON line.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rftag/error.hpp"
#include "rftag/eval/inference.hpp"
#include "rftag/eval/metrics.hpp"
#include "rftag/pipeline/commands.hpp"
#include "rftag/pipeline/config.hpp"
#include "rftag/pipeline/manifest.hpp"
#include "rftag/pipeline/synth.hpp"
#include "rftag/rf/receptive_field.hpp"
#include "rftag/zoo/model.hpp"

namespace fs = std::filesystem;
using namespace rftag;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

void report_error(const char* kind, int code, const std::string& message) {
  nlohmann::json j = {{"error", kind}, {"exit", code}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "INI run configuration");
  cmd->add_option("--set", c.overrides, "Override one key, section.key=value")->allow_extra_args(false);
}

pipeline::RunConfig resolve(const Common& c) {
  pipeline::RunConfig config;
  if (!c.config_file.empty()) config.merge_file(c.config_file);
  for (const auto& o : c.overrides) config.apply_override(o);
  config.validate();
  return config;
}

fs::path out_dir_of(const pipeline::RunConfig& config, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (config.has_value("run.out_dir")) return config.get("run.out_dir");
  throw ValidationError("no output directory: pass --out or set run.out_dir");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f << text;
}

std::string slurp(const fs::path& path, const char* what) {
  std::ifstream f(path);
  if (!f) throw ValidationError(std::string(what) + " not found: " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receptive-field regularized CNN toolkit for music tagging"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rftag 0.1.0");

  // synth-data
  Common synth_c;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-data", "Write the synthetic tone-band tagging dataset");
  add_common(synth, synth_c);
  synth->add_option("--out", synth_out, "Output directory");

  // extract
  Common ex_c;
  std::vector<std::string> ex_manifests;
  std::string ex_out, ex_vocab;
  auto* ex = app.add_subcommand("extract", "Compute log-mel spectrograms for manifests");
  add_common(ex, ex_c);
  ex->add_option("manifests", ex_manifests, "Audio manifests (track_id, path, tags)")->required();
  ex->add_option("--out", ex_out, "Output directory")->required();
  ex->add_option("--vocabulary", ex_vocab, "Tag vocabulary file");

  // rf-report
  Common rr_c;
  bool rr_csv = false;
  std::size_t rr_budget = 0;
  auto* rr = app.add_subcommand("rf-report", "Print per-layer receptive fields of the configured model");
  add_common(rr, rr_c);
  rr->add_flag("--csv", rr_csv, "CSV instead of a table");
  rr->add_option("--budget", rr_budget, "Also report the largest rho within this frequency RF");

  // rf-sweep
  Common sw_c;
  std::string sw_out, sw_budgets;
  auto* sw = app.add_subcommand("rf-sweep", "Train one model per frequency RF budget and score it");
  add_common(sw, sw_c);
  sw->add_option("--out", sw_out, "Output directory");
  sw->add_option("--budgets", sw_budgets, "Comma-separated budgets (overrides sweep.budgets)");

  // train
  Common tr_c;
  std::string tr_out;
  auto* tr = app.add_subcommand("train", "Train one model");
  add_common(tr, tr_c);
  tr->add_option("--out", tr_out, "Run directory (overrides run.out_dir)");

  // predict
  std::string pr_ckpt, pr_manifest, pr_out, pr_thresholds, pr_decisions;
  std::size_t pr_max_swa = 4;
  auto* pr = app.add_subcommand("predict", "Score a manifest with a checkpoint or a run's snapshot ensemble");
  pr->add_option("--checkpoint", pr_ckpt, "Run directory or .ckpt file")->required();
  pr->add_option("--manifest", pr_manifest, "Tracks to score")->required();
  pr->add_option("--out", pr_out, "Predictions TSV")->required();
  pr->add_option("--max-swa", pr_max_swa, "SWA snapshots to average with best.ckpt");
  pr->add_option("--thresholds", pr_thresholds, "Per-tag thresholds for binary decisions");
  pr->add_option("--decisions", pr_decisions, "Decisions TSV (needs --thresholds)");

  // evaluate
  std::string ev_preds, ev_labels, ev_report, ev_tune;
  auto* ev = app.add_subcommand("evaluate", "Macro PR-AUC of predictions against labels");
  ev->add_option("--predictions", ev_preds, "Predictions TSV")->required();
  ev->add_option("--labels", ev_labels, "Manifest or 0/1 label table")->required();
  ev->add_option("--report", ev_report, "Also write the per-tag report here");
  ev->add_option("--tune-thresholds", ev_tune, "Write F1-tuned per-tag thresholds here");

  // ensemble
  std::string en_members, en_out;
  auto* en = app.add_subcommand("ensemble", "Average the predictions of several members");
  en->add_option("--members", en_members, "File listing one predictions TSV per line")->required();
  en->add_option("--out", en_out, "Averaged predictions TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    report_error("usage", kInvalid, e.what());
    return kInvalid;
  }

  try {
    if (*synth) {
      const auto config = resolve(synth_c);
      const fs::path dir = out_dir_of(config, synth_out);
      const auto out = pipeline::write_synth_dataset(config.synth_config(), dir);
      config.write(dir / "config.ini");
      std::cout << "wrote " << out.train_manifest.string() << ", " << out.val_manifest.string()
                << ", " << out.test_manifest.string() << "\n";
      return kOk;
    }

    if (*ex) {
      const auto config = resolve(ex_c);
      std::optional<fs::path> vocab;
      if (!ex_vocab.empty()) vocab = ex_vocab;
      std::size_t failed = 0;
      for (const auto& m : ex_manifests) {
        const auto manifest = pipeline::parse_manifest(m, vocab);
        const auto r = pipeline::extract(manifest, ex_out, config);
        std::cout << m << ": wrote " << r.written << ", up to date " << r.skipped << ", failed "
                  << r.failures.size() << " -> " << r.manifest.string() << "\n";
        for (const auto& [id, why] : r.failures) std::cout << "unreadable\t" << id << "\t" << why << "\n";
        failed += r.failures.size();
      }
      pipeline::write_if_changed(fs::path(ex_out) / "config.ini", config.format());
      if (failed > 0) {
        report_error("runtime", kFailed, std::to_string(failed) + " track(s) could not be extracted");
        return kFailed;
      }
      return kOk;
    }

    if (*rr) {
      const auto config = resolve(rr_c);
      const auto mc = config.model_config(1);
      const auto report = rf::compute_rf(mc.arch());
      std::cout << (rr_csv ? rf::format_rf_csv(report) : rf::format_rf_table(report));
      if (rr_budget > 0) {
        const rf::RhoTemplate tmpl{mc.resolved_base(), mc.rho_time};
        std::cout << "budget=" << rr_budget << " rho=" << rf::max_rho_for_budget(tmpl, rr_budget) << "\n";
      }
      return kOk;
    }

    if (*sw) {
      auto config = resolve(sw_c);
      if (!sw_budgets.empty()) config.set("sweep.budgets", sw_budgets);
      const fs::path dir = out_dir_of(config, sw_out);
      fs::create_directories(dir);
      config.write(dir / "config.ini");
      const auto r = pipeline::rf_sweep(config, config.get_size_list("sweep.budgets"), dir, &std::cout);
      std::cout << pipeline::format_sweep_csv(r.rows);
      if (!r.failures.empty()) {
        for (const auto& f : r.failures) report_error("runtime", kFailed, f);
        return kFailed;
      }
      return kOk;
    }

    if (*tr) {
      const auto config = resolve(tr_c);
      const fs::path dir = out_dir_of(config, tr_out);
      const auto data = pipeline::load_run_data(config);
      const auto art = pipeline::run_training(config, data, dir, &std::cout);
      std::printf("best_epoch=%zu best_val_pr_auc=%.6f swa_checkpoints=%zu\n", art.best_epoch,
                  art.best_val, art.swa.size());
      return kOk;
    }

    if (*pr) {
      if (!pr_decisions.empty() && pr_thresholds.empty()) {
        throw ValidationError("--decisions needs --thresholds");
      }
      auto r = pipeline::predict_manifest(pr_ckpt, pr_manifest, pr_max_swa);
      eval::write_predictions(pr_out, r.predictions);
      std::string prov = "member\n";
      for (const auto& m : r.members) prov += fs::absolute(m).string() + "\n";
      write_text(pr_out + ".members", prov);
      if (!pr_thresholds.empty()) {
        const auto t = eval::parse_thresholds(slurp(pr_thresholds, "thresholds"), pr_thresholds);
        const auto decided = eval::apply_thresholds(r.predictions, t);
        if (!pr_decisions.empty()) eval::write_decisions(pr_decisions, decided);
      }
      std::cout << "scored " << r.predictions.tracks() << " tracks with " << r.members.size()
                << " checkpoint(s) -> " << pr_out << "\n";
      return kOk;
    }

    if (*ev) {
      const auto preds = eval::read_predictions(ev_preds);
      const auto labels = pipeline::load_labels(ev_labels, preds.tags);
      const auto report = eval::macro_pr_auc(preds, labels);
      const std::string text = eval::format_report(report);
      if (!ev_report.empty()) write_text(ev_report, text);
      if (!ev_tune.empty()) write_text(ev_tune, eval::format_thresholds(eval::tune_thresholds(preds, labels)));
      std::cout << text;
      return kOk;
    }

    if (*en) {
      std::vector<eval::PredictionSet> members;
      for (const auto& p : pipeline::read_member_list(en_members)) members.push_back(eval::read_predictions(p));
      eval::write_predictions(en_out, eval::ensemble_average(members));
      std::cout << "averaged " << members.size() << " member(s) -> " << en_out << "\n";
      return kOk;
    }
  } catch (const ValidationError& e) {
    report_error("validation", kInvalid, e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    report_error("runtime", kFailed, e.what());
    return kFailed;
  }
  return kInvalid;
}
