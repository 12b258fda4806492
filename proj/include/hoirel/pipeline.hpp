// Copyright 2026 The hoirel Authors.
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

#pragma once

// Pipeline stages behind the command-line tool. Each stage reads its inputs
// (from the config or earlier stages' artifacts in out_dir) and writes its
// artifacts into out_dir. Every stage returns a short JSON summary.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "hoirel/config.hpp"
#include "hoirel/evalbench.hpp"
#include "hoirel/feature_store.hpp"
#include "hoirel/geometry.hpp"
#include "hoirel/infer.hpp"
#include "hoirel/ingest.hpp"
#include "hoirel/metric.hpp"
#include "hoirel/parallel.hpp"
#include "hoirel/webfilter.hpp"

namespace hoirel {

namespace fs = std::filesystem;

// Missing inputs are reported as usage errors naming the path.
inline const std::string& require_file(const std::string& path, const char* key) {
  if (path.empty()) throw InputError(std::string("missing input: no '") + key + "' configured");
  if (!fs::exists(path)) throw InputError("missing input: " + path);
  return path;
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("missing input: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

inline void prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error("cannot create " + cfg.out_dir + ": " + ec.message());
}

inline std::string clean_annotations_path(const RunConfig& cfg) { return cfg.out("annotations.clean.jsonl"); }

inline std::vector<ImageRecord> load_clean(const RunConfig& cfg) {
  return parse_annotations(require_file(clean_annotations_path(cfg), "annotations.clean.jsonl"));
}

// ingest ------------------------------------------------------------------------

inline json run_ingest(const RunConfig& cfg) {
  const auto raw = parse_annotations(require_file(cfg.annotations, "annotations"));
  CleanupTables tables;
  if (!cfg.lemmas.empty()) tables.lemmas = read_lemma_table(require_file(cfg.lemmas, "lemmas"));
  if (!cfg.blocklist.empty()) tables.blocklist = read_blocklist(require_file(cfg.blocklist, "blocklist"));
  if (!cfg.subtypes.empty()) tables.subtypes = read_subtype_table(require_file(cfg.subtypes, "subtypes"));
  if (!cfg.corrections.empty()) {
    for (auto& [k, v] : read_lemma_table(require_file(cfg.corrections, "corrections"))) tables.corrections[k] = v;
  }
  std::optional<WordVectorTable> vectors;
  if (!cfg.word_vectors.empty()) {
    vectors = read_word_vectors(require_file(cfg.word_vectors, "word_vectors"));
    tables.word_vectors = &*vectors;
  }
  tables.merge_threshold = cfg.merge_threshold;

  prepare_out_dir(cfg);
  CleanupReport rep;
  const auto clean = clean_records(raw, tables, &rep);
  const auto vocab = build_vocabulary(clean);
  write_annotations(clean_annotations_path(cfg), clean);
  write_name_list(cfg.out("predicates.txt"), vocab.predicates);
  write_name_list(cfg.out("objects.txt"), vocab.objects);
  write_triple_list(cfg.out("triples.tsv"), vocab.relationship_types);

  json summary = {{"images", clean.size()},
                  {"relationships_in", rep.relationships_in},
                  {"relationships_out", rep.relationships_out},
                  {"discarded_predicates", rep.discarded_predicates},
                  {"nonhuman_subjects", rep.nonhuman_subjects},
                  {"human_objects", rep.human_objects},
                  {"merged_objects", rep.merged_objects},
                  {"predicates", vocab.predicates.size()},
                  {"objects", vocab.objects.size()},
                  {"relationship_types", vocab.relationship_types.size()},
                  {"warnings", rep.warnings}};
  write_json(cfg.out("cleanup.json"), summary);
  summary.erase("warnings");
  return summary;
}

// split --------------------------------------------------------------------------

inline json run_split(const RunConfig& cfg) {
  const auto records = load_clean(cfg);
  if (records.empty()) throw Error("empty dataset");
  const double n = static_cast<double>(records.size());
  const std::size_t train_size = cfg.train_size ? cfg.train_size : static_cast<std::size_t>(std::llround(cfg.train_fraction * n));
  const std::size_t test_size =
      cfg.test_seen_size ? cfg.test_seen_size : static_cast<std::size_t>(std::llround(cfg.test_seen_fraction * n));
  SplitReport rep;
  const auto split = build_splits(records, train_size, test_size, cfg.seed, &rep);
  write_json(cfg.out("split.json"), split_to_json(split));
  const json report = {{"train", split.train.size()},
                       {"test_seen", split.test_seen.size()},
                       {"test_zeroshot", split.test_zeroshot.size()},
                       {"longtail_types", split.longtail_types.size()},
                       {"moved_to_zeroshot", rep.moved_to_zeroshot},
                       {"unassigned", rep.unassigned},
                       {"test_seen_shortfall", rep.test_seen_shortfall}};
  write_json(cfg.out("split_report.json"), report);
  // Search space for zero-shot inference: seen and unseen types alike.
  write_triple_list(cfg.out("universe.tsv"), type_counts(records));
  return {{"train", split.train.size()},
          {"test_seen", split.test_seen.size()},
          {"test_zeroshot", split.test_zeroshot.size()},
          {"longtail_types", split.longtail_types.size()}};
}

// stats --------------------------------------------------------------------------

inline json run_stats(const RunConfig& cfg) {
  const auto records = load_clean(cfg);
  std::optional<SplitSpec> split;
  if (fs::exists(cfg.out("split.json"))) split = read_split(cfg.out("split.json"));
  const auto st = compute_stats(records, split ? &*split : nullptr, cfg.stats_global);
  auto j = stats_to_json(st);
  j["with_split"] = split.has_value();
  j["longtail_counted_globally"] = cfg.stats_global || !split;
  write_json(cfg.out("stats.json"), j);

  std::ofstream csv(cfg.out("rank_frequency.csv"), std::ios::binary | std::ios::trunc);
  if (!csv) throw Error("cannot write " + cfg.out("rank_frequency.csv"));
  csv << "rank,count,subject,predicate,object\n";
  std::size_t rank = 0;
  for (const auto& [t, n] : st.type_frequency_histogram) {
    csv << ++rank << ',' << n << ',' << to_string(t.subject) << ',' << t.predicate << ',' << t.object << '\n';
  }
  return {{"images", st.n_images},
          {"instances", st.n_instances},
          {"relationship_types", st.n_relationship_types},
          {"zeroshot_types", st.n_zeroshot_types},
          {"predicates", st.n_predicates},
          {"objects", st.n_objects},
          {"longtail_types", st.n_longtail_types}};
}

// filter-web ---------------------------------------------------------------------

inline WebCorpus load_configured_web(const RunConfig& cfg, const std::string& labels) {
  const auto features = read_feature_store(require_file(cfg.web_features, "web_features"));
  return load_web_corpus(require_file(labels, "web_labels"), features);
}

inline json run_filter_web(const RunConfig& cfg) {
  const auto corpus = load_configured_web(cfg, cfg.web_labels);
  FilterConfig fc;
  fc.group_size = cfg.group_size;
  fc.epochs = cfg.filter_epochs;
  fc.learning_rate = cfg.filter_lr;
  fc.seed = cfg.seed;
  const auto res = train_filter(corpus, fc);
  WebCorpus scored = corpus;
  for (std::size_t i = 0; i < scored.samples.size(); ++i) scored.samples[i].confidence = res.confidence[i];
  const auto filtered = filter_top(std::move(scored), cfg.keep_ratio);
  prepare_out_dir(cfg);
  write_filter_manifest(cfg.out("web_manifest.jsonl"), filtered);

  std::ofstream csv(cfg.out("filter_loss.csv"), std::ios::binary | std::ios::trunc);
  csv << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, res.epoch_loss[e]);
    csv << buf;
  }
  const auto kept = kept_only(filtered).samples.size();
  return {{"samples", corpus.samples.size()}, {"kept", kept}, {"classes", corpus.classes().size()}};
}

// train --------------------------------------------------------------------------

inline WebCorpus load_filtered_web(const RunConfig& cfg) {
  return load_configured_web(cfg, require_file(cfg.out("web_manifest.jsonl"), "web_manifest.jsonl"));
}

inline json run_train(const RunConfig& cfg) {
  const auto records = load_clean(cfg);
  const auto split = read_split(require_file(cfg.out("split.json"), "split.json"));
  const auto features = read_feature_store(require_file(cfg.union_features, "union_features"));
  const auto web = kept_only(load_filtered_web(cfg));

  // One label space over everything either side can carry.
  std::map<RelType, std::size_t> label;
  auto label_of = [&](const RelType& t) { return label.try_emplace(t, label.size()).first->second; };

  const std::set<std::string> train_ids(split.train.begin(), split.train.end());
  std::vector<Sample> dataset;
  std::size_t missing = 0;
  for (const auto& rec : records) {
    if (!train_ids.count(rec.image_id)) continue;
    for (const auto& rel : rec.relationships) {
      auto t = relationship_type(rec, rel);
      if (!t) continue;
      auto f = features.get(union_feature_id(rec.image_id, rel.subject, rel.object));
      if (!f) {
        ++missing;
        continue;
      }
      dataset.push_back({std::vector<double>(f->begin(), f->end()), label_of(*t)});
    }
  }
  std::vector<Sample> web_samples;
  for (const auto& s : web.samples) web_samples.push_back({s.features, label_of(s.cls)});
  if (dataset.empty()) throw Error("no training samples with union features");
  if (web_samples.empty()) throw Error("no kept web samples");
  if (features.dim() != web_samples.front().features.size()) {
    throw Error("union feature dimension " + std::to_string(features.dim()) + " differs from web feature dimension " +
                std::to_string(web_samples.front().features.size()));
  }

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.decay_factor = cfg.decay_factor;
  tc.decay_every = cfg.decay_every;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.per_anchor_negatives = cfg.per_anchor_negatives;
  tc.alpha = cfg.alpha;
  tc.seed = cfg.seed;
  const auto init = MetricModel::initialized(features.dim(), cfg.seed, cfg.hidden);
  const auto res = train(init, dataset, web_samples, tc);
  prepare_out_dir(cfg);
  write_model(cfg.out("model.hcvm"), res.model);
  write_loss_curve(cfg.out("loss.csv"), res.epoch_loss);
  return {{"dataset_samples", dataset.size()},
          {"web_samples", web_samples.size()},
          {"missing_union_features", missing},
          {"skipped_batches", res.skipped_batches},
          {"final_loss", res.epoch_loss.empty() ? json(nullptr) : json(res.epoch_loss.back())}};
}

// infer --------------------------------------------------------------------------

inline std::string universe_path(const RunConfig& cfg) {
  if (!cfg.universe.empty()) return require_file(cfg.universe, "universe");
  const auto p = cfg.out("universe.tsv");
  return fs::exists(p) ? p : std::string();
}

inline json run_infer(const RunConfig& cfg) {
  const auto records = load_clean(cfg);
  const auto split = read_split(require_file(cfg.out("split.json"), "split.json"));
  const auto features = read_feature_store(require_file(cfg.union_features, "union_features"));
  const auto model = read_model(require_file(cfg.out("model.hcvm"), "model.hcvm"));
  const auto web = load_filtered_web(cfg);
  std::vector<ImageRecord> detections;
  if (!cfg.detections.empty()) detections = parse_annotations(require_file(cfg.detections, "detections"));

  std::optional<std::set<RelType>> universe;
  if (const auto up = universe_path(cfg); !up.empty()) {
    universe.emplace();
    for (const auto& [t, n] : read_triple_list(up)) universe->insert(t);
  }
  const auto index = build_index(model, web, universe ? &*universe : nullptr);
  if (index.size() == 0) throw Error("web index is empty");

  PredictOptions opt;
  opt.top_k = cfg.top_k;
  opt.neighbors = cfg.neighbors;
  opt.aggregation = parse_aggregation(cfg.aggregation);
  opt.universe = universe ? &*universe : nullptr;

  std::set<std::string> test_ids(split.test_seen.begin(), split.test_seen.end());
  test_ids.insert(split.test_zeroshot.begin(), split.test_zeroshot.end());
  std::vector<const ImageRecord*> gt_images;
  for (const auto& r : records) {
    if (test_ids.count(r.image_id)) gt_images.push_back(&r);
  }
  std::vector<const ImageRecord*> det_images;
  for (const auto& r : detections) {
    if (test_ids.count(r.image_id)) det_images.push_back(&r);
  }
  const NmsParams nms_params{cfg.nms_iou, cfg.nms_score};

  // Per-image slots keep the output independent of the thread count.
  auto run = [&](const std::vector<const ImageRecord*>& images, bool gt_mode) {
    std::vector<std::vector<ScoredTriplet>> out(images.size());
    std::vector<PredictDiagnostics> diag(images.size());
    parallel_for(images.size(), cfg.threads, [&](std::size_t i) {
      const auto& rec = *images[i];
      if (gt_mode) {
        out[i] = predict_pairs(rec.image_id, ground_truth_pairs(rec), features, model, index, opt, &diag[i]);
      } else {
        std::vector<Detection> dets = detections_of(rec);
        for (auto& d : dets) d.category = normalize_name(d.category);
        out[i] = predict_triplets(rec.image_id, nms(dets, nms_params), features, model, index, opt, &diag[i]);
      }
    });
    std::vector<ScoredTriplet> flat;
    PredictDiagnostics total;
    for (std::size_t i = 0; i < images.size(); ++i) {
      flat.insert(flat.end(), out[i].begin(), out[i].end());
      total += diag[i];
    }
    return std::make_pair(flat, total);
  };

  prepare_out_dir(cfg);
  const auto [pred_gt, diag_gt] = run(gt_images, true);
  write_predictions(cfg.out("predictions_predicate.jsonl"), pred_gt);
  json summary = {{"index_size", index.size()},
                  {"predicate_mode", {{"images", gt_images.size()},
                                      {"pairs", diag_gt.pairs},
                                      {"predictions", pred_gt.size()},
                                      {"missing_features", diag_gt.missing_features},
                                      {"empty_candidate_pairs", diag_gt.empty_candidate_pairs}}}};
  if (!cfg.detections.empty()) {
    const auto [pred_det, diag_det] = run(det_images, false);
    write_predictions(cfg.out("predictions.jsonl"), pred_det);
    summary["detection_mode"] = {{"images", det_images.size()},
                                 {"pairs", diag_det.pairs},
                                 {"predictions", pred_det.size()},
                                 {"missing_features", diag_det.missing_features},
                                 {"empty_candidate_pairs", diag_det.empty_candidate_pairs}};
  }
  return summary;
}

// eval ---------------------------------------------------------------------------

inline json run_eval(const RunConfig& cfg, const std::vector<Suite>& suites = {kSuites.begin(), kSuites.end()}) {
  const auto records = load_clean(cfg);
  const auto split = read_split(require_file(cfg.out("split.json"), "split.json"));

  SuitePredictions sp;
  const std::string det_path = cfg.predictions.empty() ? cfg.out("predictions.jsonl") : cfg.predictions;
  std::string pred_path = cfg.predicate_predictions;
  // The GT-box predictions of `infer` are picked up only alongside its own
  // detection predictions; an explicit predictions file is scored alone.
  if (pred_path.empty() && cfg.predictions.empty() && fs::exists(cfg.out("predictions_predicate.jsonl"))) {
    pred_path = cfg.out("predictions_predicate.jsonl");
  }
  if (!cfg.predictions.empty() || fs::exists(det_path) || pred_path.empty()) {
    auto pf = read_predictions(require_file(det_path, "predictions"));
    sp.detection = std::move(pf.predictions);
    sp.unknown_subjects += pf.unknown_subjects;
  }
  if (!pred_path.empty()) {
    auto pf = read_predictions(require_file(pred_path, "predicate_predictions"));
    sp.predicate = std::move(pf.predictions);
    sp.unknown_subjects += pf.unknown_subjects;
  }

  prepare_out_dir(cfg);
  json summary = json::object();
  for (auto suite : suites) {
    const auto rep = run_suite(records, split, sp, suite);
    const auto name = std::string(to_string(suite));
    write_json(cfg.out("report_" + name + ".json"), report_to_json(rep));
    const auto r = rep.cell(EvalTask::kPredicate, 50, 1).count.recall();
    summary[name] = {{"gt_instances", rep.gt_instances}, {"predicate_det_r50_top1", r ? json(*r) : json(nullptr)}};
  }
  return summary;
}

// report -------------------------------------------------------------------------

inline json run_report(const RunConfig& cfg) {
  json summary = json::object();
  std::string csv = "suite,task,R,top_k,recall,matched,total\n";
  char buf[256];
  for (auto suite : kSuites) {
    const auto name = std::string(to_string(suite));
    const auto path = cfg.out("report_" + name + ".json");
    if (!fs::exists(path)) continue;
    const auto rep = read_json(path);
    json grid = json::object();
    for (const auto& c : rep.at("cells")) {
      const auto task = c.at("task").get<std::string>();
      const auto key = "R@" + std::to_string(c.at("R").get<std::size_t>()) + "/top-" +
                       std::to_string(c.at("top_k").get<std::size_t>());
      grid[task][key] = c.at("recall");
      std::string rs;
      if (!c.at("recall").is_null()) {
        std::snprintf(buf, sizeof buf, "%.6f", c.at("recall").get<double>());
        rs = buf;
      }
      std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%s,%zu,%zu\n", name.c_str(), task.c_str(),
                    c.at("R").get<std::size_t>(), c.at("top_k").get<std::size_t>(), rs.c_str(),
                    c.at("matched").get<std::size_t>(), c.at("total").get<std::size_t>());
      csv += buf;
    }
    summary[name] = {{"gt_instances", rep.at("gt_instances")}, {"recall", grid}};
  }
  if (summary.empty()) throw InputError("missing input: no report_*.json in " + cfg.out_dir);
  write_json(cfg.out("summary.json"), summary);
  std::ofstream out(cfg.out("summary.csv"), std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + cfg.out("summary.csv"));
  out << csv;
  return summary;
}

// ingest -> split -> stats -> filter-web -> train -> infer -> eval -> report.
inline json run_all(const RunConfig& cfg) {
  json j;
  j["ingest"] = run_ingest(cfg);
  j["split"] = run_split(cfg);
  j["stats"] = run_stats(cfg);
  j["filter-web"] = run_filter_web(cfg);
  j["train"] = run_train(cfg);
  j["infer"] = run_infer(cfg);
  j["eval"] = run_eval(cfg);
  j["report"] = run_report(cfg);
  return j;
}

}  // namespace hoirel
