// Copyright 2026 The CountPath Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// countpath: batch front end for the counting pipeline, metrics, agreement
// statistics, synthetic corpora, QC comparison and the review service.
//
// Exit codes: 0 success, 1 parse/ingest/runtime errors, 2 usage or
// configuration errors.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"

#include "countpath/countpath.hpp"
#include "countpath/http_routes.hpp"

namespace {

using namespace countpath;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string fixed3(const std::optional<double>& v) { return v ? fixed3(*v) : "n/a"; }

std::string pm(const Spread& s) { return fixed3(s.mean) + " +/- " + fixed3(s.stddev); }

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

PipelineMode mode_from_flag(const std::string& s) {
  const auto m = parse_mode(s);
  if (!m) throw UsageError("unknown mode " + s);
  return *m;
}

RejectionPolicy policy_from_flag(const std::string& s, PipelineMode mode) {
  if (s == "none") return RejectionPolicy::NoRejection;
  if (s == "reject") return rejecting_policy_for(mode);
  throw UsageError("unknown policy " + s);
}

void print_metrics(const Metrics& m) {
  std::cout << "mae " << fixed3(m.mae) << "\n"
            << "r2 " << fixed3(m.r_squared) << "\n"
            << "accuracy " << fixed3(m.accuracy) << "\n"
            << "precision " << fixed3(m.precision) << "\n"
            << "recall " << fixed3(m.recall) << "\n"
            << "f1-score " << fixed3(m.f1) << "\n";
}

void print_summary(const EvalSummary& s) {
  std::cout << "slides " << s.n_total << "\n"
            << "accepted " << s.n_total - s.n_rejected << "\n"
            << "rejected " << s.n_rejected << "\n"
            << "rejection_rate " << fixed3(s.rejection_rate) << "\n";
  if (s.metrics) print_metrics(*s.metrics);
}

/// Truth labels for `verdicts`, looked up by slide id. Empty when any
/// verdict has no truth.
std::optional<std::vector<ClassLabel>> truths_for(const std::vector<SlideVerdict>& verdicts,
                                                  const Manifest& manifest) {
  std::vector<ClassLabel> out;
  for (const auto& v : verdicts) {
    const auto* e = manifest.find(v.slide_id);
    if (!e || !e->truth_label) return std::nullopt;
    out.push_back(*e->truth_label);
  }
  return out;
}

json verdict_row_json(const SlideVerdict& v) {
  return json{{"slide_id", v.slide_id},
              {"outcome", v.accepted() ? "accepted" : "rejected"},
              {"label", v.label() ? json(v.label()->value()) : json(nullptr)},
              {"reason", v.rejection() ? json(to_string(*v.rejection())) : json(nullptr)}};
}

// ---- run ----

struct RunOptions {
  std::string manifest;
  std::string detections;
  std::string mode = "hybrid";
  std::string policy = "none";
  std::string out;
  std::string run_id;
  std::string thumbnails;
  std::string format = "text";
  double set_threshold = 0.25;
  double fragment_threshold = 0.25;
  std::optional<double> set_iou;
  std::optional<double> fragment_iou;
  unsigned threads = 1;
};

int cmd_run(const RunOptions& o) {
  const auto mode = mode_from_flag(o.mode);
  const auto policy = policy_from_flag(o.policy, mode);
  PipelineConfig cfg;
  cfg.set_confidence_threshold = o.set_threshold;
  cfg.fragment_confidence_threshold = o.fragment_threshold;
  try {
    if (o.set_iou) cfg.set_overlap = OverlapRule::iou_above(*o.set_iou);
    if (o.fragment_iou) cfg.fragment_overlap = OverlapRule::iou_above(*o.fragment_iou);
    cfg.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }
  if (!fs::is_directory(o.detections)) {
    throw UsageError("detections directory not found: " + o.detections);
  }

  const fs::path manifest_path = o.manifest;
  const auto manifest = parse_manifest(read_file(manifest_path), manifest_path.string());
  const fs::path thumb_root =
      o.thumbnails.empty() ? manifest_path.parent_path() : fs::path(o.thumbnails);
  const auto batch = load_batch(manifest, o.detections, mode, thumb_root);
  if (batch.clamped_values > 0) {
    std::cerr << "warning: " << batch.clamped_values
              << " detection values clamped to [0,1]\n";
  }

  RunRecord record;
  record.run_id = o.run_id.empty() ? fs::path(o.out).stem().string() : o.run_id;
  record.created_at = utc_now_iso8601();
  record.mode = mode;
  record.policy = policy;
  record.config = cfg;
  record.manifest_id = manifest.dataset_id.empty() ? manifest_path.stem().string()
                                                   : manifest.dataset_id;
  record.verdicts = run_batch(batch.inputs, mode, cfg, policy, o.threads);
  write_file(o.out, save_run(record));

  const auto truths = truths_for(record.verdicts, manifest);
  EvalSummary summary;
  if (truths) {
    summary = evaluate_with_rejection(record.verdicts, *truths);
  } else {
    // Rejection counts only; metrics need a truth for every slide.
    const std::vector<ClassLabel> dummy(record.verdicts.size(), ClassLabel(1));
    summary = evaluate_with_rejection(record.verdicts, dummy);
    summary.metrics.reset();
  }

  if (o.format == "json") {
    json rows = json::array();
    for (const auto& v : record.verdicts) rows.push_back(verdict_row_json(v));
    print_json(json{{"run_id", record.run_id},
                    {"mode", to_string(mode)},
                    {"policy", to_string(policy)},
                    {"verdicts", rows},
                    {"summary", summary_to_json(summary)}});
    return 0;
  }

  std::size_t width = 8;
  for (const auto& v : record.verdicts) width = std::max(width, v.slide_id.size());
  std::cout << pad("slide_id", width) << "  verdict   label  reason\n";
  for (const auto& v : record.verdicts) {
    std::cout << pad(v.slide_id, width) << "  ";
    if (auto label = v.label()) {
      std::cout << "ACCEPTED  " << pad(std::to_string(label->value()), 5) << "  -\n";
    } else {
      std::cout << "REJECTED  -      " << to_string(*v.rejection()) << "\n";
    }
  }
  std::cout << "\nrun_id " << record.run_id << "\n"
            << "mode " << to_string(mode) << "\n"
            << "policy " << to_string(policy) << "\n";
  print_summary(summary);
  return 0;
}

// ---- eval ----

int cmd_eval(const std::string& run_path, const std::string& truth_path,
             const std::string& format) {
  const auto record = load_run(read_file(run_path), run_path);
  const auto manifest = parse_manifest(read_file(truth_path), truth_path);
  std::vector<ClassLabel> truths;
  for (const auto& v : record.verdicts) {
    const auto* e = manifest.find(v.slide_id);
    if (!e) throw Error(truth_path + ": slide " + v.slide_id + " not in manifest");
    if (!e->truth_label) throw Error(truth_path + ": slide " + v.slide_id + " has no truth_label");
    truths.push_back(*e->truth_label);
  }
  const auto summary = evaluate_with_rejection(record.verdicts, truths);
  if (format == "json") {
    auto j = summary_to_json(summary);
    j["run_id"] = record.run_id;
    print_json(j);
    return 0;
  }
  std::cout << "run_id " << record.run_id << "\n";
  print_summary(summary);
  return 0;
}

// ---- agree ----

std::optional<IccForm> icc_form_from_flag(const std::string& s) {
  static const std::map<std::string, IccForm> forms = {
      {"1,1", IccForm::OneWaySingle},       {"2,1", IccForm::TwoWayRandomSingle},
      {"3,1", IccForm::TwoWayMixedSingle},  {"1,k", IccForm::OneWayAverage},
      {"2,k", IccForm::TwoWayRandomAverage}, {"3,k", IccForm::TwoWayMixedAverage}};
  const auto it = forms.find(s);
  if (it == forms.end()) return std::nullopt;
  return it->second;
}

int cmd_agree(const std::string& table_path, const std::string& truth_path,
              const std::string& icc_flag, const std::string& format) {
  const auto form = icc_form_from_flag(icc_flag);
  if (!form) throw UsageError("unknown ICC form " + icc_flag);
  const auto table = parse_rater_table(read_file(table_path), table_path);
  const double kappa = fleiss_kappa(table);
  const double icc_value = icc(table, *form);

  std::optional<ObserverSummary> observers;
  if (!truth_path.empty()) {
    const auto manifest = parse_manifest(read_file(truth_path), truth_path);
    std::vector<ClassLabel> truths;
    for (const auto& id : table.item_ids()) {
      const auto* e = manifest.find(id);
      if (!e || !e->truth_label) throw Error(truth_path + ": no truth_label for item " + id);
      truths.push_back(*e->truth_label);
    }
    observers = observer_evaluation(table, truths);
  }

  if (format == "json") {
    json j{{"n_items", table.n_items()},
           {"n_raters", table.n_raters()},
           {"kappa", kappa},
           {"band", agreement_band(kappa)},
           {"icc", icc_value},
           {"icc_form", to_string(*form)}};
    if (observers) {
      json per = json::object();
      for (std::size_t r = 0; r < table.n_raters(); ++r) {
        per[table.raters()[r]] = metrics_to_json(observers->per_rater[r]);
      }
      auto sp = [](const Spread& s) { return json{{"mean", s.mean}, {"std", s.stddev}}; };
      j["observers"] = per;
      j["observer_spread"] = json{
          {"mae", sp(observers->mae)},
          {"r2", observers->r_squared ? sp(*observers->r_squared) : json(nullptr)},
          {"accuracy", sp(observers->accuracy)},
          {"precision", sp(observers->precision)},
          {"recall", sp(observers->recall)},
          {"f1-score", sp(observers->f1)}};
    }
    print_json(j);
    return 0;
  }

  std::cout << "items " << table.n_items() << "\n"
            << "raters " << table.n_raters() << "\n"
            << "kappa " << fixed3(kappa) << " (" << agreement_band(kappa) << ")\n"
            << "icc " << fixed3(icc_value) << " " << to_string(*form) << "\n";
  if (observers) {
    std::size_t width = 5;
    for (const auto& r : table.raters()) width = std::max(width, r.size());
    std::cout << "\n" << pad("rater", width)
              << "  mae    r2     accuracy  precision  recall  f1-score\n";
    for (std::size_t r = 0; r < table.n_raters(); ++r) {
      const auto& m = observers->per_rater[r];
      std::cout << pad(table.raters()[r], width) << "  " << pad(fixed3(m.mae), 5) << "  "
                << pad(fixed3(m.r_squared), 5) << "  " << pad(fixed3(m.accuracy), 8) << "  "
                << pad(fixed3(m.precision), 9) << "  " << pad(fixed3(m.recall), 6) << "  "
                << fixed3(m.f1) << "\n";
    }
    std::cout << "\nmae " << pm(observers->mae) << "\n"
              << "r2 " << (observers->r_squared ? pm(*observers->r_squared) : "n/a") << "\n"
              << "accuracy " << pm(observers->accuracy) << "\n"
              << "precision " << pm(observers->precision) << "\n"
              << "recall " << pm(observers->recall) << "\n"
              << "f1-score " << pm(observers->f1) << "\n";
  }
  return 0;
}

// ---- synth ----

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  auto num = [&](std::string_view part) {
    const auto v = detail::parse_integer(part);
    if (!v || *v < 0) throw UsageError("bad seed range " + s + " (expected A..B)");
    return static_cast<std::uint64_t>(*v);
  };
  if (dots == std::string::npos) {
    const auto v = num(s);
    return {v, v};
  }
  const auto lo = num(std::string_view(s).substr(0, dots));
  const auto hi = num(std::string_view(s).substr(dots + 2));
  if (lo > hi) throw UsageError("bad seed range " + s + " (A > B)");
  return {lo, hi};
}

struct SynthOptions {
  std::string seeds;
  std::string noise = "none";
  std::string out;
  std::uint64_t noise_seed = 0;
  bool thumbnails = true;
};

int cmd_synth(const SynthOptions& o) {
  const auto [lo, hi] = parse_seed_range(o.seeds);
  const auto noise = NoiseProfile::named(o.noise);
  if (!noise) throw UsageError("unknown noise profile " + o.noise);

  const fs::path out = o.out;
  const fs::path det_dir = out / "detections";
  const fs::path thumb_dir = out / "thumbnails";
  fs::create_directories(det_dir);
  if (o.thumbnails) fs::create_directories(thumb_dir);

  Manifest manifest;
  manifest.dataset_id = "synthetic-" + o.noise;
  manifest.split = Split::Test;
  std::vector<MacroReportEntry> macro;
  for (std::uint64_t seed = lo;; ++seed) {
    const auto scene = generate_random_scene(seed);
    const auto input = perturb(scene, *noise, o.noise_seed);
    write_slide_input(det_dir, input);
    std::string thumb;
    if (o.thumbnails) {
      thumb = "thumbnails/" + input.slide_id + ".png";
      write_file(out / thumb, encode_png(render_thumbnail(scene)));
    }
    manifest.entries.push_back({input.slide_id, thumb, scene.true_label, scene.n_sets});
    macro.push_back({input.slide_id, scene.true_label, scene.n_sets});
    if (seed == hi) break;
  }
  write_file(out / "manifest.csv", format_manifest(manifest));
  write_file(out / "macro.csv", format_macro_report(macro));
  std::cout << "slides " << manifest.entries.size() << "\n"
            << "noise " << o.noise << "\n"
            << "out " << out.string() << "\n";
  return 0;
}

// ---- qc ----

int cmd_qc(const std::string& run_path, const std::string& macro_path,
           const std::string& format) {
  const auto record = load_run(read_file(run_path), run_path);
  const auto report = parse_macro_report(read_file(macro_path), macro_path);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  const auto records = qc_compare(record.verdicts, report.entries);
  const auto t = tally(records);

  if (format == "json") {
    json rows = json::array();
    for (const auto& r : records) rows.push_back(qc_record_to_json(r));
    print_json(json{{"run_id", record.run_id},
                    {"records", rows},
                    {"tallies", {{"match", t.match},
                                 {"discrepancy", t.discrepancy},
                                 {"needs_review", t.needs_review}}}});
    return 0;
  }
  std::size_t width = 8;
  for (const auto& r : records) width = std::max(width, r.slide_id.size());
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : "-"; };
  std::cout << pad("slide_id", width)
            << "  status        predicted  reported  reason\n";
  for (const auto& r : records) {
    std::string reason = "-";
    if (r.rejection) reason = to_string(*r.rejection);
    if (r.missing_report) reason = "missing_report";
    std::cout << pad(r.slide_id, width) << "  " << pad(to_string(r.status), 12) << "  "
              << pad(opt(r.predicted), 9) << "  " << pad(opt(r.reported), 8) << "  "
              << reason << "\n";
  }
  std::cout << "\nmatch " << t.match << "\n"
            << "discrepancy " << t.discrepancy << "\n"
            << "needs_review " << t.needs_review << "\n";
  return 0;
}

// ---- serve ----

int cmd_serve(std::string store, const std::string& host, int port) {
  if (store.empty()) {
    if (const char* env = std::getenv("COUNTPATH_STORE")) store = env;
  }
  if (store.empty()) throw UsageError("--store not given and COUNTPATH_STORE is unset");
  ReviewService service(store);
  httplib::Server server;
  mount_routes(server, service);
  std::cout << "serving " << store << " on http://" << host << ":" << port << "/v1\n"
            << std::flush;
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return kExitFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"countpath: fragment and set counting for slide thumbnails"};
  app.require_subcommand(1);
  const std::vector<std::string> formats = {"text", "json"};

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run the pipeline over a manifest");
  run_cmd->add_option("--manifest", run.manifest, "Manifest CSV")->required();
  run_cmd->add_option("--detections", run.detections, "Detection file directory")->required();
  run_cmd->add_option("--mode", run.mode, "detection | classification | hybrid")
      ->check(CLI::IsMember({"detection", "classification", "hybrid"}))
      ->capture_default_str();
  run_cmd->add_option("--policy", run.policy, "none | reject")
      ->check(CLI::IsMember({"none", "reject"}))
      ->capture_default_str();
  run_cmd->add_option("--out", run.out, "Run record to write (JSON)")->required();
  run_cmd->add_option("--run-id", run.run_id, "Run id (default: --out file stem)");
  run_cmd->add_option("--thumbnails", run.thumbnails,
                      "Root for relative thumbnail paths (default: manifest directory)");
  run_cmd->add_option("--set-threshold", run.set_threshold, "Set confidence threshold")
      ->capture_default_str();
  run_cmd->add_option("--fragment-threshold", run.fragment_threshold,
                      "Fragment confidence threshold")
      ->capture_default_str();
  run_cmd->add_option("--set-iou", run.set_iou,
                      "Suppress sets overlapping above this IoU (default: any overlap)");
  run_cmd->add_option("--fragment-iou", run.fragment_iou,
                      "Suppress fragments overlapping above this IoU (default: any overlap)");
  run_cmd->add_option("--threads", run.threads, "Worker threads")
      ->check(CLI::Range(1u, 256u))
      ->capture_default_str();
  run_cmd->add_option("--format", run.format, "text | json")
      ->check(CLI::IsMember(formats))
      ->capture_default_str();

  std::string eval_run, eval_truth, eval_format = "text";
  auto* eval_cmd = app.add_subcommand("eval", "Score a run record against manifest truths");
  eval_cmd->add_option("--run", eval_run, "Run record")->required();
  eval_cmd->add_option("--truth", eval_truth, "Manifest with truth labels")->required();
  eval_cmd->add_option("--format", eval_format, "text | json")
      ->check(CLI::IsMember(formats))
      ->capture_default_str();

  std::string agree_table, agree_truth, agree_icc = "2,1", agree_format = "text";
  auto* agree_cmd = app.add_subcommand("agree", "Inter-observer agreement for a rater table");
  agree_cmd->add_option("--table", agree_table, "Rater table CSV")->required();
  agree_cmd->add_option("--truth", agree_truth, "Manifest with truth labels per item");
  agree_cmd->add_option("--icc", agree_icc, "ICC form: 1,1 2,1 3,1 1,k 2,k 3,k")
      ->capture_default_str();
  agree_cmd->add_option("--format", agree_format, "text | json")
      ->check(CLI::IsMember(formats))
      ->capture_default_str();

  SynthOptions synth;
  bool no_thumbnails = false;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus");
  synth_cmd->add_option("--seeds", synth.seeds, "Scene seed range A..B")->required();
  synth_cmd->add_option("--noise", synth.noise, "none | light | moderate | heavy")
      ->check(CLI::IsMember({"none", "light", "moderate", "heavy"}))
      ->capture_default_str();
  synth_cmd->add_option("--noise-seed", synth.noise_seed, "Noise realization seed")
      ->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_flag("--no-thumbnails", no_thumbnails, "Skip PNG rendering");

  std::string qc_run, qc_macro, qc_format = "text";
  auto* qc_cmd = app.add_subcommand("qc", "Compare a run with a macroscopic report");
  qc_cmd->add_option("--run", qc_run, "Run record")->required();
  qc_cmd->add_option("--macro", qc_macro, "Macroscopic report CSV")->required();
  qc_cmd->add_option("--format", qc_format, "text | json")
      ->check(CLI::IsMember(formats))
      ->capture_default_str();

  std::string serve_store, serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the review API under /v1");
  serve_cmd->add_option("--store", serve_store, "Store directory (default: $COUNTPATH_STORE)");
  serve_cmd->add_option("--host", serve_host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve_port, "Port")
      ->check(CLI::Range(1, 65535))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*eval_cmd) return cmd_eval(eval_run, eval_truth, eval_format);
    if (*agree_cmd) return cmd_agree(agree_table, agree_truth, agree_icc, agree_format);
    if (*synth_cmd) {
      synth.thumbnails = !no_thumbnails;
      return cmd_synth(synth);
    }
    if (*qc_cmd) return cmd_qc(qc_run, qc_macro, qc_format);
    if (*serve_cmd) return cmd_serve(serve_store, serve_host, serve_port);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
