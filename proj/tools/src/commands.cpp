// Copyright 2026 The DnD Authors
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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dnd/analysis/analysis.hpp"
#include "dnd/moldata/jsonl.hpp"
#include "dnd/moldata/overlap.hpp"
#include "dnd/moldata/split.hpp"
#include "dnd/moldata/synthetic.hpp"
#include "dnd/trainer/trainer.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::cli {

namespace {

using train::Checkpoint;

std::uint64_t seed_of(const Json& cfg) { return cfg.value("seed", std::uint64_t{0}); }

Json data_defaults() {
  return {{"dir", nullptr}, {"train", nullptr}, {"val", nullptr}, {"test", nullptr}};
}

void absolutize(Json& cfg, const std::string& path) {
  const Json& v = at_path(cfg, path);
  if (!v.is_string() || v.get<std::string>().empty()) return;
  set_path(cfg, path, fs::absolute(v.get<std::string>()).lexically_normal().generic_string());
}

void absolutize_data(Json& cfg) {
  for (const char* key : {"dir", "train", "val", "test"}) absolutize(cfg, std::string("data.") + key);
}

// Path of a split: an explicit data.<split>, else <dir>/<split>.jsonl where
// dir may be a gen-data run directory. A file in data.dir stands for every
// split when allow_file is set.
std::optional<fs::path> split_path(const Json& cfg, const std::string& split, bool allow_file) {
  const Json& explicit_path = at_path(cfg, "data." + split);
  if (explicit_path.is_string()) return fs::path(explicit_path.get<std::string>());
  const Json& dir = at_path(cfg, "data.dir");
  if (!dir.is_string()) return std::nullopt;
  fs::path base = dir.get<std::string>();
  if (fs::is_regular_file(base)) {
    if (allow_file) return base;
    return std::nullopt;
  }
  if (fs::exists(base / "data" / (split + ".jsonl"))) base /= "data";
  return base / (split + ".jsonl");
}

void require_split(const Json& cfg, const std::string& split, bool allow_file, Violations& v) {
  const auto path = split_path(cfg, split, allow_file);
  if (!path) {
    const Json& dir = at_path(cfg, "data.dir");
    if (dir.is_string() && fs::is_regular_file(dir.get<std::string>())) {
      v.add("data.dir", "must be a directory holding " + split + ".jsonl");
    } else {
      v.add("data." + split, "required (pass --data DIR or set data." + split + ")");
    }
    return;
  }
  if (!fs::is_regular_file(*path)) v.add("data." + split, "file not found: " + path->string());
}

mol::Dataset load_split(const Json& cfg, const std::string& split, bool allow_file, Run& run) {
  const auto path = split_path(cfg, split, allow_file);
  if (!path) throw ConfigError("data." + split + ": not configured");
  run.add_input("data." + split, *path);
  return mol::parse_jsonl(*path);
}

std::optional<mol::Dataset> load_optional_split(const Json& cfg, const std::string& split,
                                                Run& run) {
  const auto path = split_path(cfg, split, false);
  if (!path || !fs::is_regular_file(*path)) return std::nullopt;
  run.add_input("data." + split, *path);
  return mol::parse_jsonl(*path);
}

// Accepts a checkpoint file or a run directory, whose best checkpoint is used.
fs::path resolve_checkpoint(const std::string& given) {
  fs::path p = given;
  if (fs::is_directory(p)) {
    if (fs::is_regular_file(p / "checkpoints" / "best.ckpt")) return p / "checkpoints" / "best.ckpt";
    if (fs::is_regular_file(p / "best.ckpt")) return p / "best.ckpt";
  }
  return p;
}

void require_checkpoint(const Json& cfg, const std::string& field, const std::string& flag,
                        Violations& v) {
  const Json& value = at_path(cfg, field);
  if (!value.is_string() || value.get<std::string>().empty()) {
    v.add(field, "required (pass " + flag + ")");
    return;
  }
  const auto path = resolve_checkpoint(value.get<std::string>());
  if (!fs::is_regular_file(path)) v.add(field, "checkpoint not found: " + path.string());
}

template <typename T>
std::optional<T> parse_section(const Json& cfg, const std::string& path, Violations& v) {
  try {
    return at_path(cfg, path).get<T>();
  } catch (const ConfigError& e) {
    v.add(path, e.what());
  } catch (const Json::exception& e) {
    v.add(path, e.what());
  }
  return std::nullopt;
}

void check_identifier_width(const enc2d::Encoder2DConfig& c, const mol::Dataset& data,
                            const std::string& field) {
  if (data.max_atoms() > static_cast<std::size_t>(c.identifier_dim)) {
    throw ConfigError(field + ".identifier_dim (" + std::to_string(c.identifier_dim) +
                      ") is smaller than the largest molecule (" +
                      std::to_string(data.max_atoms()) + " atoms)");
  }
}

void write_json(const Json& j, const fs::path& path, Run& run, const std::string& role) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
  out.close();
  run.add_output(role, path);
}

// Owns resume checkpoints for the lifetime of a training call.
class Training {
 public:
  // Checkpoints land in `dir` after every epoch so an interrupted run can
  // continue with --resume.
  Training(const Context& ctx, const fs::path& dir, std::string stage, int epochs) {
    options_.on_checkpoint = [dir](const Checkpoint& last, const Checkpoint& best) {
      train::save_checkpoint(best, dir / "best.ckpt");
      train::save_checkpoint(last, dir / "last.ckpt");
    };
    if (ctx.resume) {
      last_ = train::load_checkpoint(*ctx.resume);
      options_.resume = &*last_;
      const auto best_path = ctx.resume->parent_path() / "best.ckpt";
      if (fs::is_regular_file(best_path)) {
        best_ = train::load_checkpoint(best_path);
        options_.resume_best = &*best_;
      }
    }
    if (!ctx.quiet) {
      options_.on_epoch = [stage = std::move(stage), epochs](const train::MetricsRow& r) {
        std::ostringstream line;
        line.precision(6);
        line << stage << " epoch " << r.epoch << "/" << epochs << " train_loss=" << r.train_loss
             << " val_loss=" << r.val_loss << " lr=" << r.lr << " t=" << r.wall_time_s << "s";
        std::cerr << line.str() << std::endl;
      };
    }
  }
  const train::TrainOptions& options() const { return options_; }

 private:
  std::optional<Checkpoint> last_;
  std::optional<Checkpoint> best_;
  train::TrainOptions options_;
};

void save_training(const train::TrainResult& res, Run& run) {
  const auto best = run.checkpoints() / "best.ckpt";
  const auto last = run.checkpoints() / "last.ckpt";
  const auto metrics = run.metrics() / "metrics.csv";
  train::save_checkpoint(res.best, best);
  train::save_checkpoint(res.last, last);
  res.log.write_csv(metrics);
  run.add_output("checkpoint.best", best);
  run.add_output("checkpoint.last", last);
  run.add_output("metrics", metrics);
  auto& s = run.summary();
  s["best_epoch"] = res.best_epoch;
  if (!res.log.empty()) {
    s["epochs_run"] = res.log.back().epoch;
    s["final_train_loss"] = res.log.back().train_loss;
    s["final_val_loss"] = res.log.back().val_loss;
  }
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ParseError(path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  const auto width = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != width) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": not a number: '" + s + "'");
  }
}

// ---- gen-data ----

Json gen_data_defaults() {
  const mol::SyntheticConfig s;
  return {{"seed", 0},
          {"synthetic",
           {{"count", s.count},
            {"min_atoms", s.min_atoms},
            {"max_atoms", s.max_atoms},
            {"element_set", s.element_set},
            {"ring_probability", s.ring_probability},
            {"charge_probability", s.charge_probability},
            {"chain", s.chain}}},
          {"split", {{"train", 0.8}, {"val", 0.1}, {"test", 0.1}}}};
}

void gen_data_validate(const Json& cfg, Violations& v) {
  const Json& s = cfg.at("synthetic");
  const auto count = s.at("count").get<double>();
  if (count < 1) v.add("synthetic.count", "must be >= 1");
  const auto lo = s.at("min_atoms").get<double>();
  const auto hi = s.at("max_atoms").get<double>();
  if (lo < 4) v.add("synthetic.min_atoms", "must be >= 4");
  if (hi > 30) v.add("synthetic.max_atoms", "must be <= 30");
  if (lo > hi) v.add("synthetic.min_atoms", "must not exceed synthetic.max_atoms");
  const Json& elements = s.at("element_set");
  if (elements.empty()) v.add("synthetic.element_set", "must not be empty");
  for (const auto& z : elements) {
    if (!z.is_number_integer() || z.get<int>() < 1 || z.get<int>() >= mol::kAtomFeatureVocab[0]) {
      v.add("synthetic.element_set", "atomic numbers must be integers in [1, " +
                                         std::to_string(mol::kAtomFeatureVocab[0] - 1) + "]");
      break;
    }
  }
  for (const char* key : {"ring_probability", "charge_probability"}) {
    const double p = s.at(key).get<double>();
    if (!(p >= 0 && p <= 1)) v.add(std::string("synthetic.") + key, "must lie in [0, 1]");
  }
  double total = 0;
  for (const char* key : {"train", "val", "test"}) {
    const double r = cfg.at("split").at(key).get<double>();
    if (!(r >= 0)) v.add(std::string("split.") + key, "must be >= 0");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) v.add("split", "ratios must sum to 1");
}

void gen_data_execute(const Json& cfg, Run& run, const Context& ctx) {
  const Json& s = cfg.at("synthetic");
  mol::SyntheticConfig sc;
  sc.count = s.at("count").get<std::size_t>();
  sc.seed = seed_of(cfg);
  sc.min_atoms = s.at("min_atoms").get<std::size_t>();
  sc.max_atoms = s.at("max_atoms").get<std::size_t>();
  sc.element_set = s.at("element_set").get<std::vector<int>>();
  sc.ring_probability = s.at("ring_probability").get<double>();
  sc.charge_probability = s.at("charge_probability").get<double>();
  sc.chain = s.at("chain").get<bool>();
  const auto dataset = mol::generate_synthetic(sc);
  const auto& r = cfg.at("split");
  const auto splits = mol::split_random(
      dataset, {r.at("train").get<double>(), r.at("val").get<double>(), r.at("test").get<double>()},
      sc.seed);

  const std::pair<const char*, const mol::Dataset*> outputs[] = {
      {"all", &dataset}, {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
  for (const auto& [name, data] : outputs) {
    const auto path = run.data() / (std::string(name) + ".jsonl");
    mol::write_jsonl(*data, path);
    run.add_output(std::string("data.") + name, path);
  }
  std::size_t unconverged = 0;
  for (const auto& rec : dataset.records) unconverged += rec.relax_converged ? 0 : 1;
  if (unconverged && !ctx.quiet) {
    std::cerr << "warning: " << unconverged << " conformers hit the relaxation step limit"
              << std::endl;
  }
  auto& sum = run.summary();
  sum["records"] = dataset.size();
  sum["train"] = splits.train.size();
  sum["val"] = splits.val.size();
  sum["test"] = splits.test.size();
  sum["relax_not_converged"] = unconverged;
}

// ---- pretrain-denoise ----

void denoise_validate(const Json& cfg, Violations& v) {
  require_split(cfg, "train", false, v);
  require_split(cfg, "val", false, v);
  const auto c = parse_section<train::DenoiseConfig>(cfg, "denoise", v);
  if (!c) return;
  v.collect("denoise.teacher", [&] { c->teacher.validate(); });
  v.collect("denoise.train", [&] { c->train.validate(); });
  if (!(c->sigma > 0) || !std::isfinite(c->sigma)) v.add("denoise.sigma", "must be > 0");
}

void denoise_execute(const Json& cfg, Run& run, const Context& ctx) {
  const auto config = cfg.at("denoise").get<train::DenoiseConfig>();
  const auto seed = seed_of(cfg);
  const auto train_set = load_split(cfg, "train", false, run);
  const auto val_set = load_split(cfg, "val", false, run);
  const auto test_set = load_optional_split(cfg, "test", run);

  train::DenoiseModel model(config.teacher, seed);
  Training training(ctx, run.checkpoints(), "pretrain-denoise", config.train.epochs);
  const auto res = train::train_denoise(model, train_set, val_set, config, training.options());
  save_training(res, run);

  const auto best = train::DenoiseModel::from_checkpoint(res.best);
  Json report = {{"best_epoch", res.best_epoch},
                 {"sigma", config.sigma},
                 {"val_loss", train::denoise_eval(*best, val_set, config.sigma, mix_seed(seed, 0x7a1))}};
  if (test_set) {
    report["test_loss"] = train::denoise_eval(*best, *test_set, config.sigma, mix_seed(seed, 0x7e57));
  }
  report["teacher_parameter_sha256"] = train::parameter_hash(res.best, "encoder3d");
  run.summary()["report"] = report;
  write_json(report, run.reports() / "denoise.json", run, "report");
}

// ---- distill ----

void distill_validate(const Json& cfg, Violations& v) {
  require_checkpoint(cfg, "teacher", "--teacher", v);
  require_split(cfg, "train", false, v);
  require_split(cfg, "val", false, v);
  const auto c = parse_section<train::DistillConfig>(cfg, "distill", v);
  if (!c) return;
  v.collect("distill.student", [&] { c->student.validate(); });
  v.collect("distill.train", [&] { c->train.validate(); });
}

void distill_execute(const Json& cfg, Run& run, const Context& ctx) {
  const auto config = cfg.at("distill").get<train::DistillConfig>();
  const auto seed = seed_of(cfg);
  const auto teacher_path = resolve_checkpoint(cfg.at("teacher").get<std::string>());
  run.add_input("teacher", teacher_path);
  const auto hash_before = file_sha256(teacher_path);
  const auto teacher_ckpt = train::load_checkpoint(teacher_path);
  const auto teacher = train::load_teacher(teacher_ckpt);

  const auto train_set = load_split(cfg, "train", false, run);
  const auto val_set = load_split(cfg, "val", false, run);
  const auto test_set = load_optional_split(cfg, "test", run);
  check_identifier_width(config.student, train_set, "distill.student");
  check_identifier_width(config.student, val_set, "distill.student");
  if (test_set) check_identifier_width(config.student, *test_set, "distill.student");

  train::DistillModel model(config.student,
                            static_cast<std::size_t>(teacher->config().hidden_dim), seed);
  Training training(ctx, run.checkpoints(), "distill-" + obj::distill_variant_name(config.variant),
                    config.train.epochs);
  const auto res =
      train::train_distill(model, *teacher, train_set, val_set, config, training.options());
  save_training(res, run);

  const auto hash_after = file_sha256(teacher_path);
  const auto best = train::DistillModel::from_checkpoint(res.best);
  Json report = {{"variant", obj::distill_variant_name(config.variant)},
                 {"best_epoch", res.best_epoch},
                 {"val_loss", train::distill_eval(*best, *teacher, val_set, config.variant)},
                 {"teacher_sha256_before", hash_before},
                 {"teacher_parameter_sha256", train::parameter_hash(teacher_ckpt, "encoder3d")},
                 {"teacher_sha256_after", hash_after},
                 {"teacher_unchanged", hash_before == hash_after}};
  if (test_set) report["test_loss"] = train::distill_eval(*best, *teacher, *test_set, config.variant);
  run.summary()["report"] = report;
  write_json(report, run.reports() / "distill.json", run, "report");
}

// ---- finetune ----

void finetune_validate(const Json& cfg, Violations& v) {
  const Json& student = cfg.at("student");
  if (!student.is_null()) require_checkpoint(cfg, "student", "--student", v);
  require_split(cfg, "train", false, v);
  require_split(cfg, "val", false, v);
  const auto c = parse_section<train::FinetuneConfig>(cfg, "finetune", v);
  if (!c) return;
  v.collect("finetune", [&] { c->validate(); });
  if (c->readout != train::Readout::kVirtual) return;
  // +vn needs a virtual node in whichever student will be used.
  bool has_virtual = c->student.use_virtual_node;
  std::string field = "finetune.student.use_virtual_node";
  if (student.is_string()) {
    const auto path = resolve_checkpoint(student.get<std::string>());
    if (!fs::is_regular_file(path)) return;
    try {
      const auto ck = train::load_checkpoint(path);
      const Json snap = Json::parse(ck.config.dump());
      const Json& s = snap.contains("student") ? snap["student"] : Json();
      has_virtual = s.is_object() && s.value("use_virtual_node", false);
      field = "student";
    } catch (const Error& e) {
      v.add("student", e.what());
      return;
    }
  }
  if (!has_virtual) v.add(field, "readout 'vn' requires a student with use_virtual_node = true");
}

void finetune_execute(const Json& cfg, Run& run, const Context& ctx) {
  const auto config = cfg.at("finetune").get<train::FinetuneConfig>();
  const auto seed = seed_of(cfg);
  std::optional<Checkpoint> student_ckpt;
  if (cfg.at("student").is_string()) {
    const auto path = resolve_checkpoint(cfg.at("student").get<std::string>());
    run.add_input("student", path);
    student_ckpt = train::load_checkpoint(path);
  }
  const auto train_set = load_split(cfg, "train", false, run);
  const auto val_set = load_split(cfg, "val", false, run);
  const auto test_set = load_optional_split(cfg, "test", run);

  auto model = train::make_finetune_model(config, student_ckpt ? &*student_ckpt : nullptr, seed);
  const auto& scfg = model->student().config();
  check_identifier_width(scfg, train_set, "student");
  check_identifier_width(scfg, val_set, "student");
  if (test_set) check_identifier_width(scfg, *test_set, "student");

  Training training(ctx, run.checkpoints(), "finetune", config.train.epochs);
  const auto res = train::train_finetune(*model, train_set, val_set, config, training.options());
  save_training(res, run);

  const auto best = train::FinetuneModel::from_checkpoint(res.best);
  std::vector<train::Metric> metrics = {config.selection_metric()};
  if (config.task == obj::TaskType::kRegression) metrics.push_back(train::Metric::kRmse);
  Json report = {{"best_epoch", res.best_epoch},
                 {"pretrained", student_ckpt.has_value()},
                 {"readout", train::readout_name(config.readout)},
                 {"label_fraction", config.label_fraction},
                 {"train_records_used", res.best.extra.value("train_records", 0)}};
  std::vector<std::string> warnings;
  for (const auto m : metrics) {
    report["val_" + train::metric_name(m)] =
        train::evaluate(*best, val_set, config.targets, m, &warnings);
    if (test_set) {
      report["test_" + train::metric_name(m)] =
          train::evaluate(*best, *test_set, config.targets, m, &warnings);
    }
  }
  report["warnings"] = warnings;
  run.summary()["report"] = report;
  write_json(report, run.reports() / "finetune.json", run, "report");
}

// ---- train-contrastive ----

void contrastive_validate(const Json& cfg, Violations& v) {
  require_split(cfg, "train", false, v);
  require_split(cfg, "val", false, v);
  const auto c = parse_section<train::ContrastiveConfig>(cfg, "contrastive", v);
  if (!c) return;
  v.collect("contrastive.student", [&] { c->student.validate(); });
  v.collect("contrastive.teacher", [&] { c->teacher.validate(); });
  v.collect("contrastive.train", [&] { c->train.validate(); });
  if (!(c->temperature > 0)) v.add("contrastive.temperature", "must be > 0");
  if (c->train.batch_size < 2) v.add("contrastive.train.batch_size", "must be >= 2");
}

void contrastive_execute(const Json& cfg, Run& run, const Context& ctx) {
  const auto config = cfg.at("contrastive").get<train::ContrastiveConfig>();
  const auto seed = seed_of(cfg);
  const auto train_set = load_split(cfg, "train", false, run);
  const auto val_set = load_split(cfg, "val", false, run);
  check_identifier_width(config.student, train_set, "contrastive.student");
  check_identifier_width(config.student, val_set, "contrastive.student");

  train::ContrastiveModel model(config.student, config.teacher, seed);
  Training training(ctx, run.checkpoints(), "train-contrastive", config.train.epochs);
  const auto res = train::train_contrastive(model, train_set, val_set, config, training.options());
  save_training(res, run);
  Json report = {{"best_epoch", res.best_epoch}, {"temperature", config.temperature}};
  if (!res.log.empty()) {
    report["first_train_loss"] = res.log.rows().front().train_loss;
    report["final_train_loss"] = res.log.back().train_loss;
  }
  run.summary()["report"] = report;
  write_json(report, run.reports() / "contrastive.json", run, "report");
}

// ---- eval ----

void single_split_validate(const Json& cfg, Violations& v) {
  require_checkpoint(cfg, "checkpoint", "--checkpoint", v);
  const Json& split = cfg.at("split");
  if (!split.is_string() || (split != "train" && split != "val" && split != "test")) {
    v.add("split", "must be one of train, val, test");
    return;
  }
  require_split(cfg, split.get<std::string>(), true, v);
}

void eval_validate(const Json& cfg, Violations& v) {
  single_split_validate(cfg, v);
  const Json& metric = cfg.at("metric");
  if (!metric.is_null()) {
    v.collect("metric", [&] { train::parse_metric(metric.get<std::string>()); });
  }
}

void eval_execute(const Json& cfg, Run& run, const Context&) {
  const auto path = resolve_checkpoint(cfg.at("checkpoint").get<std::string>());
  run.add_input("checkpoint", path);
  const auto ckpt = train::load_checkpoint(path);
  train::require_stage(ckpt, {train::Stage::kFinetune}, "eval");
  const auto split = cfg.at("split").get<std::string>();
  const auto data = load_split(cfg, split, true, run);
  const auto metric = train::parse_metric(cfg.at("metric").is_string()
                                              ? cfg.at("metric").get<std::string>()
                                              : ckpt.extra.value("selection_metric", "mae"));
  std::vector<std::string> warnings;
  const double value = train::evaluate(ckpt, data, metric, &warnings);
  Json report = {{"checkpoint_sha256", train::content_hash(ckpt)},
                 {"split", split},
                 {"records", data.size()},
                 {"metric", train::metric_name(metric)},
                 {"value", value},
                 {"warnings", warnings}};
  run.summary()["report"] = report;
  write_json(report, run.reports() / "eval.json", run, "report");
}

// ---- analyze-attention ----

void analyze_validate(const Json& cfg, Violations& v) {
  single_split_validate(cfg, v);
  const Json& bins = cfg.at("bins");
  if (!bins.is_number_integer() || bins.get<int>() < 1) v.add("bins", "must be an integer >= 1");
}

void analyze_execute(const Json& cfg, Run& run, const Context&) {
  const auto path = resolve_checkpoint(cfg.at("checkpoint").get<std::string>());
  run.add_input("checkpoint", path);
  const auto ckpt = train::load_checkpoint(path);
  auto student = analysis::load_student(ckpt);
  const auto split = cfg.at("split").get<std::string>();
  const auto data = load_split(cfg, split, true, run);
  check_identifier_width(student->config(), data, "student");

  const auto report = analysis::attention_report(*student, data);
  const auto corr_csv = run.reports() / "attention_correlations.csv";
  const auto dist_csv = run.reports() / "attention_distances.csv";
  analysis::write_correlations_csv(report.correlations, corr_csv);
  analysis::write_distances_csv(report.distances, dist_csv);
  run.add_output("attention.correlations", corr_csv);
  run.add_output("attention.distances", dist_csv);

  std::vector<double> values;
  double max_abs = 0;
  for (const auto& h : report.correlations) {
    values.push_back(h.abs_pearson);
    max_abs = std::max(max_abs, h.abs_pearson);
  }
  const auto svg = run.reports() / "attention_histogram.svg";
  {
    std::ofstream out(svg);
    out << analysis::histogram_svg(values, cfg.at("bins").get<int>(), 0.0, 1.0,
                                   "per-head |Pearson| of attention logits vs distance");
    if (!out) throw IoError("write failed for " + svg.string());
  }
  run.add_output("attention.histogram", svg);

  Json summary = {{"stage", train::stage_name(ckpt.stage)},
                  {"split", split},
                  {"molecules_used", report.molecules_used},
                  {"skipped_small", report.skipped_small},
                  {"skipped_constant", report.skipped_constant},
                  {"max_abs_pearson", max_abs}};
  run.summary()["report"] = summary;
  write_json(summary, run.reports() / "attention.json", run, "report");
}

// ---- stats ----

Json dataset_stats(const mol::Dataset& data) {
  Json j = {{"records", data.size()}};
  if (data.empty()) return j;
  std::size_t min_atoms = SIZE_MAX, max_atoms = 0, atoms = 0, bonds = 0, ringed = 0, conformers = 0;
  std::map<int, std::size_t> elements;
  std::vector<std::vector<double>> labels;
  for (const auto& r : data.records) {
    const auto n = r.graph.num_atoms();
    min_atoms = std::min(min_atoms, n);
    max_atoms = std::max(max_atoms, n);
    atoms += n;
    bonds += r.graph.num_bonds();
    bool ring = false;
    for (const auto& a : r.graph.atoms) {
      ++elements[a.atomic_number];
      ring = ring || a.is_in_ring;
    }
    ringed += ring ? 1 : 0;
    conformers += r.conformer ? 1 : 0;
    if (r.labels) {
      if (labels.size() < r.labels->size()) labels.resize(r.labels->size());
      for (std::size_t t = 0; t < r.labels->size(); ++t) {
        if ((*r.labels)[t]) labels[t].push_back(*(*r.labels)[t]);
      }
    }
  }
  const double n = static_cast<double>(data.size());
  j["atoms"] = {{"min", min_atoms}, {"max", max_atoms}, {"mean", static_cast<double>(atoms) / n}};
  j["bonds_mean"] = static_cast<double>(bonds) / n;
  j["ring_fraction"] = static_cast<double>(ringed) / n;
  j["conformer_fraction"] = static_cast<double>(conformers) / n;
  Json el = Json::object();
  for (const auto& [z, c] : elements) el[std::to_string(z)] = c;
  j["elements"] = el;
  Json targets = Json::array();
  for (const auto& col : labels) {
    Json t = {{"count", col.size()}};
    if (!col.empty()) {
      double mean = 0;
      for (double x : col) mean += x;
      mean /= static_cast<double>(col.size());
      double var = 0;
      for (double x : col) var += (x - mean) * (x - mean);
      t["mean"] = mean;
      t["std"] = std::sqrt(var / static_cast<double>(col.size()));
    }
    targets.push_back(t);
  }
  j["labels"] = targets;
  return j;
}

Json overlap_json(const mol::OverlapStats& s) {
  return {{"element_pct", s.element_pct},
          {"composition_pct", s.composition_pct},
          {"molecule_pct", s.molecule_pct}};
}

void stats_validate(const Json& cfg, Violations& v) {
  const Json& dir = at_path(cfg, "data.dir");
  bool any = false;
  for (const char* split : {"train", "val", "test"}) {
    const auto p = split_path(cfg, split, true);
    any = any || (p && fs::is_regular_file(*p));
  }
  if (!any) {
    v.add("data", dir.is_string() ? "no dataset found at " + dir.get<std::string>()
                                  : "required (pass --data PATH)");
  }
  const Json& ref = cfg.at("reference");
  if (!ref.is_null() && (!ref.is_string() || !fs::is_regular_file(ref.get<std::string>()))) {
    v.add("reference", "file not found");
  }
}

void stats_execute(const Json& cfg, Run& run, const Context&) {
  std::map<std::string, mol::Dataset> sets;
  const Json& dir = at_path(cfg, "data.dir");
  const bool single_file = dir.is_string() && fs::is_regular_file(dir.get<std::string>()) &&
                           at_path(cfg, "data.train").is_null() &&
                           at_path(cfg, "data.val").is_null() && at_path(cfg, "data.test").is_null();
  if (single_file) {
    run.add_input("data", dir.get<std::string>());
    sets["data"] = mol::parse_jsonl(fs::path(dir.get<std::string>()));
  } else {
    for (const char* split : {"train", "val", "test"}) {
      const auto p = split_path(cfg, split, false);
      if (!p || !fs::is_regular_file(*p)) continue;
      run.add_input(std::string("data.") + split, *p);
      sets[split] = mol::parse_jsonl(*p);
    }
  }
  Json report = Json::object();
  for (const auto& [name, data] : sets) report[name] = dataset_stats(data);

  Json overlaps = Json::object();
  if (sets.count("train") && sets.count("test") && !sets["test"].empty() && !sets["train"].empty()) {
    overlaps["test_vs_train"] = overlap_json(mol::dataset_overlap(sets["test"], sets["train"]));
  }
  if (cfg.at("reference").is_string()) {
    const fs::path ref_path = cfg.at("reference").get<std::string>();
    run.add_input("reference", ref_path);
    const auto reference = mol::parse_jsonl(ref_path);
    for (const auto& [name, data] : sets) {
      if (data.empty() || reference.empty()) continue;
      const auto stats = mol::dataset_overlap(data, reference);
      overlaps[name + "_vs_reference"] = overlap_json(stats);
      const auto csv = run.reports() / ("overlap_" + name + ".csv");
      std::ofstream out(csv);
      mol::write_overlap_csv(stats, out);
      out.close();
      run.add_output("overlap." + name, csv);
    }
  }
  if (!overlaps.empty()) report["overlap"] = overlaps;
  run.summary()["report"] = report;
  write_json(report, run.reports() / "stats.json", run, "report");
}

// ---- export-plots ----

void export_validate(const Json& cfg, Violations& v) {
  const Json& curves = cfg.at("curves");
  const Json& corr = cfg.at("correlations");
  const Json& dist = cfg.at("distances");
  if (!curves.is_null() && !curves.is_object()) {
    v.add("curves", "must map variant names to metrics CSV paths");
  } else if (curves.is_object()) {
    for (const auto& [name, path] : curves.items()) {
      if (!path.is_string() || !fs::is_regular_file(path.get<std::string>())) {
        v.add("curves." + name, "metrics CSV not found");
      }
    }
  }
  for (const auto& [key, value] : {std::pair{"correlations", &corr}, {"distances", &dist}}) {
    if (!value->is_null() && (!value->is_string() || !fs::is_regular_file(value->get<std::string>()))) {
      v.add(key, "CSV not found");
    }
  }
  const bool no_curves = curves.is_null() || (curves.is_object() && curves.empty());
  if (no_curves && corr.is_null() && dist.is_null()) {
    v.add("curves", "nothing to export (pass --curve NAME=CSV, --correlations or --distances)");
  }
  const Json& bins = cfg.at("bins");
  if (!bins.is_number_integer() || bins.get<int>() < 1) v.add("bins", "must be an integer >= 1");
}

void export_execute(const Json& cfg, Run& run, const Context&) {
  const Json& curves = cfg.at("curves");
  if (curves.is_object() && !curves.empty()) {
    std::vector<std::pair<std::string, train::MetricsLog>> logs;
    for (const auto& [name, path] : curves.items()) {
      const fs::path p = path.get<std::string>();
      run.add_input("curve." + name, p);
      logs.emplace_back(name, train::MetricsLog::read_csv(p));
    }
    const auto out = run.reports() / "curves.csv";
    analysis::export_curves(logs, out);
    run.add_output("curves", out);
  }
  if (cfg.at("correlations").is_string()) {
    const fs::path p = cfg.at("correlations").get<std::string>();
    run.add_input("correlations", p);
    std::vector<double> values;
    for (const auto& row : read_csv(p, "layer,head,abs_pearson")) values.push_back(to_double(row[2], p));
    const auto svg = run.reports() / "correlation_histogram.svg";
    std::ofstream out(svg);
    out << analysis::histogram_svg(values, cfg.at("bins").get<int>(), 0.0, 1.0,
                                   "per-head |Pearson| of attention logits vs distance");
    out.close();
    if (!out) throw IoError("write failed for " + svg.string());
    run.add_output("correlation_histogram", svg);
  }
  if (cfg.at("distances").is_string()) {
    const fs::path p = cfg.at("distances").get<std::string>();
    run.add_input("distances", p);
    std::map<int, std::pair<double, int>> by_layer;
    for (const auto& row : read_csv(p, "layer,head,mean_weighted_distance_angstrom")) {
      auto& acc = by_layer[static_cast<int>(to_double(row[0], p))];
      acc.first += to_double(row[2], p);
      acc.second += 1;
    }
    const auto csv = run.reports() / "distance_by_layer.csv";
    std::ofstream out(csv);
    out.precision(17);
    out << "layer,mean_weighted_distance_angstrom\n";
    for (const auto& [layer, acc] : by_layer) out << layer << "," << acc.first / acc.second << "\n";
    out.close();
    if (!out) throw IoError("write failed for " + csv.string());
    run.add_output("distance_by_layer", csv);
  }
}

void normalize_training(Json& cfg, const std::string& section) {
  absolutize_data(cfg);
  set_path(cfg, section + ".train.seed", cfg.at("seed"));
}

std::vector<CommandSpec> build_specs() {
  std::vector<CommandSpec> specs;
  const FlagSpec data_flag{"--data", "data.dir", "dataset directory (or a gen-data run)",
                           FlagKind::kString};

  {
    CommandSpec s;
    s.name = "gen-data";
    s.description = "Generate a synthetic molecule set with relaxed conformers and splits";
    s.defaults = gen_data_defaults();
    s.has_seed = true;
    s.flags = {{"--count", "synthetic.count", "number of molecules"},
               {"--min-atoms", "synthetic.min_atoms", "smallest heavy-atom count"},
               {"--max-atoms", "synthetic.max_atoms", "largest heavy-atom count"},
               {"--ring-probability", "synthetic.ring_probability", "chance of a ring closure"},
               {"--chain", "synthetic.chain", "path graphs only", FlagKind::kSwitch}};
    s.normalize = [](Json&) {};
    s.validate = gen_data_validate;
    s.execute = gen_data_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "pretrain-denoise";
    s.description = "Pretrain the 3D teacher by coordinate denoising";
    s.defaults = {{"seed", 0}, {"data", data_defaults()}, {"denoise", train::DenoiseConfig()}};
    s.has_seed = true;
    s.resumable = true;
    s.flags = {data_flag,
               {"--epochs", "denoise.train.epochs", "training epochs"},
               {"--sigma", "denoise.sigma", "noise scale in angstrom"}};
    s.normalize = [](Json& c) { normalize_training(c, "denoise"); };
    s.validate = denoise_validate;
    s.execute = denoise_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "distill";
    s.description = "Distill a frozen 3D teacher into the 2D student";
    s.defaults = {{"seed", 0},
                  {"data", data_defaults()},
                  {"teacher", nullptr},
                  {"distill", train::DistillConfig()}};
    s.has_seed = true;
    s.resumable = true;
    s.flags = {data_flag,
               {"--teacher", "teacher", "denoise checkpoint or run directory", FlagKind::kString},
               {"--variant", "distill.variant", "graph or node", FlagKind::kString},
               {"--epochs", "distill.train.epochs", "training epochs"}};
    s.normalize = [](Json& c) {
      normalize_training(c, "distill");
      absolutize(c, "teacher");
    };
    s.validate = distill_validate;
    s.execute = distill_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "finetune";
    s.description = "Finetune a pretrained or randomly initialized student on labels";
    s.defaults = {{"seed", 0},
                  {"data", data_defaults()},
                  {"student", nullptr},
                  {"finetune", train::FinetuneConfig()}};
    s.has_seed = true;
    s.resumable = true;
    s.flags = {data_flag,
               {"--student", "student", "distill or contrastive checkpoint (omit for RandInit)",
                FlagKind::kString},
               {"--readout", "finetune.readout", "mp or vn", FlagKind::kString},
               {"--label-fraction", "finetune.label_fraction", "fraction of labeled training records"},
               {"--task", "finetune.task", "regression or classification", FlagKind::kString},
               {"--targets", "finetune.targets", "JSON list of label indices"},
               {"--epochs", "finetune.train.epochs", "training epochs"}};
    s.normalize = [](Json& c) {
      normalize_training(c, "finetune");
      absolutize(c, "student");
    };
    s.validate = finetune_validate;
    s.execute = finetune_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "train-contrastive";
    s.description = "Train the contrastive 2D-3D baseline";
    s.defaults = {{"seed", 0}, {"data", data_defaults()}, {"contrastive", train::ContrastiveConfig()}};
    s.has_seed = true;
    s.resumable = true;
    s.flags = {data_flag,
               {"--temperature", "contrastive.temperature", "NT-Xent temperature"},
               {"--epochs", "contrastive.train.epochs", "training epochs"}};
    s.normalize = [](Json& c) { normalize_training(c, "contrastive"); };
    s.validate = contrastive_validate;
    s.execute = contrastive_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "eval";
    s.description = "Evaluate a finetune checkpoint on a dataset split";
    s.defaults = {{"checkpoint", nullptr}, {"data", data_defaults()}, {"split", "test"},
                  {"metric", nullptr}};
    s.flags = {data_flag,
               {"--checkpoint", "checkpoint", "finetune checkpoint or run directory",
                FlagKind::kString},
               {"--split", "split", "train, val or test", FlagKind::kString},
               {"--metric", "metric", "rmse, mae or roc_auc", FlagKind::kString}};
    s.normalize = [](Json& c) {
      absolutize_data(c);
      absolutize(c, "checkpoint");
    };
    s.validate = eval_validate;
    s.execute = eval_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "analyze-attention";
    s.description = "Correlate student attention logits with 3D distances per head";
    s.defaults = {{"checkpoint", nullptr}, {"data", data_defaults()}, {"split", "test"}, {"bins", 20}};
    s.flags = {data_flag,
               {"--checkpoint", "checkpoint", "student checkpoint or run directory",
                FlagKind::kString},
               {"--split", "split", "train, val or test", FlagKind::kString},
               {"--bins", "bins", "histogram bins"}};
    s.normalize = [](Json& c) {
      absolutize_data(c);
      absolutize(c, "checkpoint");
    };
    s.validate = analyze_validate;
    s.execute = analyze_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "stats";
    s.description = "Summarize datasets and their overlap";
    s.defaults = {{"data", data_defaults()}, {"reference", nullptr}};
    s.flags = {{"--data", "data.dir", "dataset file, directory or gen-data run", FlagKind::kString},
               {"--reference", "reference", "dataset to measure overlap against", FlagKind::kString}};
    s.normalize = [](Json& c) {
      absolutize_data(c);
      absolutize(c, "reference");
    };
    s.validate = stats_validate;
    s.execute = stats_execute;
    specs.push_back(std::move(s));
  }
  {
    CommandSpec s;
    s.name = "export-plots";
    s.description = "Emit plot-ready CSV and SVG from metrics and attention reports";
    s.defaults = {{"curves", nullptr}, {"correlations", nullptr}, {"distances", nullptr}, {"bins", 20}};
    s.flags = {{"--curve", "curves", "NAME=metrics.csv, repeatable", FlagKind::kKeyValue},
               {"--correlations", "correlations", "attention_correlations.csv", FlagKind::kString},
               {"--distances", "distances", "attention_distances.csv", FlagKind::kString},
               {"--bins", "bins", "histogram bins"}};
    s.normalize = [](Json& c) {
      absolutize(c, "correlations");
      absolutize(c, "distances");
      if (c.at("curves").is_object()) {
        for (auto& [name, path] : c["curves"].items()) {
          if (path.is_string()) path = fs::absolute(path.get<std::string>()).lexically_normal().generic_string();
        }
      }
    };
    s.validate = export_validate;
    s.execute = export_execute;
    specs.push_back(std::move(s));
  }
  return specs;
}

}  // namespace

const std::vector<CommandSpec>& command_specs() {
  static const std::vector<CommandSpec> specs = build_specs();
  return specs;
}

}  // namespace dnd::cli
