// Copyright 2026 The VDV Toolkit Authors.
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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "vdv/vdv.hpp"

namespace vdv::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::uint64_t seed = 0;
  std::string kernel = "poly";
  double gamma = 0.002;
  int degree = 3;
  double coef0 = 1.0;
  double c = 100.0;
  double tol = 1e-3;
  int max_passes = 10;
  std::string score_rule = "vote-fraction";
  std::vector<std::string> features;
  std::string labels;
  std::string out;

  std::size_t n_maj = 900;
  std::size_t n_min = 100;
  std::size_t dim = 8;
  double separation = 1.5;
  double test_fraction = 0.2;
  bool patient_wise = false;
  std::vector<std::string> pca_tags;
  bool no_pca = false;
  unsigned threads = 1;
  std::string model;
  std::string log;
  std::string roc;
  std::string subset_auc;
  std::string scores;
  double oversample_jitter = 0.0;
};

struct TaggedPath {
  std::string tag;  // empty for a bare path
  std::string path;
};

TaggedPath parse_tagged(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {"", arg};
  if (eq == 0 || eq + 1 == arg.size()) throw UsageError("malformed --features '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) fields.push_back(cell);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

/// Rows of a CSV with a header; `columns` must all be present.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InvalidArgument("CSV lacks column '" + name + "'");
  }
};

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.header = split_fields(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != csv.header.size())
      throw InvalidArgument(path + ": row has " + std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(csv.header.size()));
    csv.rows.push_back(std::move(fields));
  }
  return csv;
}

std::unordered_map<std::string, Label> read_labels(const std::string& path) {
  const auto csv = read_csv(path);
  const auto id_col = csv.column("sample_id"), label_col = csv.column("label");
  std::unordered_map<std::string, Label> out;
  for (const auto& row : csv.rows) {
    const auto& v = row[label_col];
    if (v != "0" && v != "1") throw InvalidArgument(path + ": label '" + v + "' is not 0 or 1");
    if (!out.emplace(row[id_col], static_cast<Label>(v == "1")).second)
      throw InvalidArgument(path + ": duplicate sample_id '" + row[id_col] + "'");
  }
  return out;
}

FeatureSet relabel(const FeatureSet& set, const std::unordered_map<std::string, Label>& labels) {
  std::vector<Label> l(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto it = labels.find(set.sample_ids()[i]);
    if (it == labels.end()) throw InvalidArgument("no label for sample '" + set.sample_ids()[i] + "'");
    l[i] = it->second;
  }
  const auto sids = set.sample_ids();
  const auto pids = set.patient_ids();
  return FeatureSet(set.features(), std::move(l), {sids.begin(), sids.end()}, {pids.begin(), pids.end()});
}

FeatureSet load_set(const std::string& path, const Options& o) {
  auto set = load_feature_set(path);
  if (!o.labels.empty()) set = relabel(set, read_labels(o.labels));
  return set;
}

KernelSpec kernel_from(const Options& o) {
  KernelSpec spec = o.kernel == "linear" ? KernelSpec::linear()
                                         : KernelSpec::polynomial(o.degree, o.gamma, o.coef0);
  spec.validate();
  return spec;
}

TrainConfig config_from(const Options& o) {
  TrainConfig cfg;
  cfg.c = o.c;
  cfg.tolerance = o.tol;
  cfg.max_passes = o.max_passes;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

bool pca_for(const std::string& tag, const Options& o) {
  if (o.no_pca) return false;
  if (tag == "densenet121") return true;
  return std::find(o.pca_tags.begin(), o.pca_tags.end(), tag) != o.pca_tags.end();
}

std::string stem_tag(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

VdvModel load_model(const std::string& path) {
  const auto bytes = io::read_file(path);
  if (bytes.size() >= 4 && std::equal(kBlockMagic.begin(), kBlockMagic.end(), bytes.begin()))
    return VdvModel{{deserialize_block(bytes)}};
  return deserialize_vdv(bytes);
}

/// Feature files matched to the model's blocks, in block order. Every file
/// must list the same samples in the same order.
std::vector<FeatureSet> block_inputs(const VdvModel& model, const Options& o) {
  std::map<std::string, std::string> by_tag;
  for (const auto& arg : o.features) {
    auto tp = parse_tagged(arg);
    if (tp.tag.empty()) {
      if (model.blocks.size() != 1 || o.features.size() != 1)
        throw UsageError("bare --features paths need a single-block model");
      tp.tag = model.blocks.front().extractor_tag;
    }
    if (!by_tag.emplace(tp.tag, tp.path).second) throw UsageError("duplicate tag '" + tp.tag + "'");
  }
  std::vector<FeatureSet> sets;
  for (const auto& block : model.blocks) {
    const auto it = by_tag.find(block.extractor_tag);
    if (it == by_tag.end()) throw InvalidArgument("no --features for block '" + block.extractor_tag + "'");
    sets.push_back(load_set(it->second, o));
    by_tag.erase(it);
    if (!std::ranges::equal(sets.back().sample_ids(), sets.front().sample_ids()))
      throw InvalidArgument("feature file for '" + block.extractor_tag +
                            "' lists different samples than '" + model.blocks.front().extractor_tag + "'");
  }
  if (!by_tag.empty()) throw InvalidArgument("model has no block '" + by_tag.begin()->first + "'");
  return sets;
}

VdvOutputs run_model(const VdvModel& model, const std::vector<FeatureSet>& sets, ScoreRule rule) {
  std::vector<Matrix> inputs;
  for (const auto& s : sets) inputs.push_back(s.features_as_double());
  return vdv_outputs(model, inputs, rule);
}

struct TrainedBlocks {
  VdvModel model;
  std::string log;
};

TrainedBlocks train_blocks(const Options& o) {
  if (o.features.empty()) throw UsageError("at least one --features is required");
  const auto spec = kernel_from(o);
  const auto cfg = config_from(o);
  TrainedBlocks out;
  out.log = "block,tag,k,subset,pca,n_train,n_support,iterations,dual_objective,max_kkt_violation\n";
  std::set<std::string> seen;
  for (const auto& arg : o.features) {
    auto tp = parse_tagged(arg);
    if (tp.tag.empty()) tp.tag = stem_tag(tp.path);
    if (!seen.insert(tp.tag).second) throw UsageError("duplicate tag '" + tp.tag + "'");
    const auto train = load_set(tp.path, o);
    BlockTrainOptions opts;
    opts.use_pca = pca_for(tp.tag, o);
    opts.threads = std::max(1u, o.threads);
    auto block = train_block(train, tp.tag, spec, cfg, opts);
    const auto n_train = 2 * std::min(train.count(kNegative), train.count(kPositive));
    for (std::size_t s = 0; s < block.k(); ++s) {
      const auto& d = block.models[s].diagnostics;
      out.log += std::to_string(out.model.blocks.size()) + "," + tp.tag + "," +
                 std::to_string(block.k()) + "," + std::to_string(s) + "," +
                 (block.uses_pca() ? "1" : "0") + "," + std::to_string(n_train) + "," +
                 std::to_string(block.models[s].n_support()) + "," + std::to_string(d.iterations) +
                 "," + num(d.dual_objective) + "," + num(d.max_kkt_violation) + "\n";
    }
    out.model.blocks.push_back(std::move(block));
  }
  return out;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

int cmd_synth(const Options& o, std::ostream& out) {
  require(o.out, "--out");
  const auto set = synth_imbalanced(o.n_maj, o.n_min, o.dim, o.separation, o.seed);
  save_feature_set(set, o.out);
  out << "n_samples,dim,n_negative,n_positive\n"
      << set.size() << "," << set.dim() << "," << set.count(kNegative) << ","
      << set.count(kPositive) << "\n";
  return kExitOk;
}

std::string single_path(const Options& o) {
  if (o.features.size() != 1) throw UsageError("exactly one --features is required");
  return parse_tagged(o.features.front()).path;
}

int cmd_split(const Options& o, std::ostream& out) {
  require(o.out, "--out");
  const auto set = load_set(single_path(o), o);
  set.require_labels("split");
  const auto [train, test] = o.patient_wise ? patient_wise_split(set, o.test_fraction, o.seed)
                                            : random_split(set, o.test_fraction, o.seed);
  save_feature_set(train, o.out + "_train.fvec");
  save_feature_set(test, o.out + "_test.fvec");
  out << "part,n_samples,n_negative,n_positive,n_patients\n";
  for (const auto& [name, part] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
    std::set<std::string> patients(part->patient_ids().begin(), part->patient_ids().end());
    out << name << "," << part->size() << "," << part->count(kNegative) << ","
        << part->count(kPositive) << "," << patients.size() << "\n";
  }
  return kExitOk;
}

int cmd_subsets(const Options& o, std::ostream& out) {
  const auto set = load_set(single_path(o), o);
  set.require_labels("subsets");
  const auto plan = plan_balanced_subsets(set.labels(), o.seed);
  std::string csv = "subset,sample_id,label\n";
  for (std::size_t s = 0; s < plan.k; ++s) {
    std::vector<std::size_t> rows = plan.slices[s];
    rows.insert(rows.end(), plan.minority.begin(), plan.minority.end());
    std::ranges::sort(rows);
    for (auto r : rows)
      csv += std::to_string(s) + "," + set.sample_ids()[r] + "," + std::to_string(set.label(r)) + "\n";
  }
  for (auto r : plan.trimmed)
    csv += "trimmed," + set.sample_ids()[r] + "," + std::to_string(set.label(r)) + "\n";
  emit(csv, o.out, out);
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, bool single_block) {
  require(o.out, "--out");
  if (single_block && o.features.size() != 1) throw UsageError("train-block takes one --features");
  const auto trained = train_blocks(o);
  if (single_block)
    io::write_file(o.out, serialize_block(trained.model.blocks.front()));
  else
    io::write_file(o.out, serialize_vdv(trained.model));
  emit(trained.log, o.log, out);
  return kExitOk;
}

int cmd_predict(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  const auto model = load_model(o.model);
  const auto sets = block_inputs(model, o);
  const auto res = run_model(model, sets, parse_score_rule(o.score_rule));
  std::string csv = "sample_id,prediction,score\n";
  for (std::size_t i = 0; i < sets.front().size(); ++i)
    csv += sets.front().sample_ids()[i] + "," + std::to_string(res.combined.predictions[i]) + "," +
           num(res.combined.scores[i]) + "\n";
  emit(csv, o.out, out);
  return kExitOk;
}

/// AUC of every block member from its own decision values, with the mean and
/// population standard deviation over the block's members.
std::string subset_auc_csv(const VdvModel& model, const std::vector<FeatureSet>& sets) {
  std::string csv = "block,tag,subset,auc,block_auc_mean,block_auc_std\n";
  const auto& labels = sets.front().labels();
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const Matrix d = block_decisions(model.blocks[b], sets[b].features_as_double());
    std::vector<double> aucs;
    for (Eigen::Index m = 0; m < d.cols(); ++m) {
      const Vector col = d.col(m);
      aucs.push_back(roc_auc(std::span<const double>(col.data(), col.size()), labels).auc);
    }
    double mean = 0.0, var = 0.0;
    for (auto a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    for (auto a : aucs) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(aucs.size()));
    for (std::size_t m = 0; m < aucs.size(); ++m)
      csv += std::to_string(b) + "," + model.blocks[b].extractor_tag + "," + std::to_string(m) + "," +
             num(aucs[m]) + "," + num(mean) + "," + num(sd) + "\n";
  }
  return csv;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  const auto model = load_model(o.model);
  const auto sets = block_inputs(model, o);
  sets.front().require_labels("evaluate");
  const auto rule = parse_score_rule(o.score_rule);
  const auto res = run_model(model, sets, rule);
  const auto& labels = sets.front().labels();
  std::string csv = std::string(kReportCsvHeader) + "\n";
  for (std::size_t b = 0; b < model.blocks.size(); ++b)
    csv += report_csv_row(model.blocks[b].extractor_tag,
                          evaluate(labels, res.blocks[b].predictions, res.blocks[b].scores,
                                   to_string(rule))) + "\n";
  csv += report_csv_row("vdv", evaluate(labels, res.combined.predictions, res.combined.scores,
                                        to_string(rule))) + "\n";
  emit(csv, o.out, out);
  if (!o.roc.empty()) emit(roc_csv(roc_auc(res.combined.scores, labels)), o.roc, out);
  if (!o.subset_auc.empty()) emit(subset_auc_csv(model, sets), o.subset_auc, out);
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  std::string train_path, test_path;
  for (const auto& arg : o.features) {
    const auto tp = parse_tagged(arg);
    if (tp.tag == "train") train_path = tp.path;
    else if (tp.tag == "test") test_path = tp.path;
    else throw UsageError("compare takes --features train=PATH and --features test=PATH");
  }
  if (train_path.empty() || test_path.empty())
    throw UsageError("compare takes --features train=PATH and --features test=PATH");
  const auto train = load_set(train_path, o);
  const auto test = load_set(test_path, o);
  ComparisonOptions opts;
  opts.score_rule = parse_score_rule(o.score_rule);
  opts.oversample_jitter = o.oversample_jitter;
  const auto rows = run_comparison(train, test, kernel_from(o), config_from(o), o.seed, opts);
  emit(comparison_csv(rows), o.out, out);
  return kExitOk;
}

int cmd_roc(const Options& o, std::ostream& out) {
  require(o.scores, "--scores");
  const auto csv = read_csv(o.scores);
  const auto id_col = csv.column("sample_id"), score_col = csv.column("score");
  std::unordered_map<std::string, Label> labels;
  if (!o.labels.empty()) {
    labels = read_labels(o.labels);
  } else {
    const auto set = load_feature_set(single_path(o));
    set.require_labels("roc");
    for (std::size_t i = 0; i < set.size(); ++i) labels.emplace(set.sample_ids()[i], set.label(i));
  }
  std::vector<double> scores;
  std::vector<Label> truth;
  for (const auto& row : csv.rows) {
    const auto it = labels.find(row[id_col]);
    if (it == labels.end()) throw InvalidArgument("no label for sample '" + row[id_col] + "'");
    std::size_t used = 0;
    double s = 0.0;
    try {
      s = std::stod(row[score_col], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != row[score_col].size())
      throw InvalidArgument("bad score '" + row[score_col] + "'");
    scores.push_back(s);
    truth.push_back(it->second);
  }
  emit(roc_csv(roc_auc(scores, truth)), o.out, out);
  return kExitOk;
}

void add_seed(CLI::App* sub, Options& o) { sub->add_option("--seed", o.seed, "RNG seed"); }

void add_model_flags(CLI::App* sub, Options& o) {
  sub->add_option("--kernel", o.kernel, "kernel family")
      ->check(CLI::IsMember({"linear", "poly"}))
      ->capture_default_str();
  sub->add_option("--gamma", o.gamma, "polynomial gamma")->capture_default_str();
  sub->add_option("--degree", o.degree, "polynomial degree")->capture_default_str();
  sub->add_option("--coef0", o.coef0, "polynomial coef0")->capture_default_str();
  sub->add_option("--c", o.c, "soft-margin C")->capture_default_str();
  sub->add_option("--tol", o.tol, "KKT tolerance")->capture_default_str();
  sub->add_option("--max-passes", o.max_passes, "iteration budget in passes")->capture_default_str();
}

void add_score_rule(CLI::App* sub, Options& o) {
  sub->add_option("--score-rule", o.score_rule, "continuous score for AUC")
      ->check(CLI::IsMember({"vote-fraction", "mean-decision"}))
      ->capture_default_str();
}

void add_features(CLI::App* sub, Options& o, const char* help) {
  sub->add_option("--features", o.features, help)->take_all()->allow_extra_args(false);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Imbalanced binary classification with SVM ensembles"};
  app.name("vdv-cli");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* synth = app.add_subcommand("synth", "write a synthetic imbalanced feature file");
  synth->add_option("--n-maj", o.n_maj, "class-0 samples")->capture_default_str();
  synth->add_option("--n-min", o.n_min, "class-1 samples")->capture_default_str();
  synth->add_option("--dim", o.dim, "feature dimension")->capture_default_str();
  synth->add_option("--separation", o.separation, "class-1 shift on the first axis")
      ->capture_default_str();
  add_seed(synth, o);
  synth->add_option("--out", o.out, "output feature file");

  auto* split = app.add_subcommand("split", "split a feature file into train and test parts");
  add_features(split, o, "input feature file");
  split->add_option("--labels", o.labels, "CSV sample_id,label overriding stored labels");
  split->add_option("--test-fraction", o.test_fraction, "share of samples held out")
      ->capture_default_str();
  split->add_flag("--patient-wise", o.patient_wise, "keep each patient on one side");
  add_seed(split, o);
  split->add_option("--out", o.out, "output prefix; writes PREFIX_train.fvec and PREFIX_test.fvec");

  auto* subsets = app.add_subcommand("subsets", "list the balanced mini-set membership");
  add_features(subsets, o, "training feature file");
  subsets->add_option("--labels", o.labels, "CSV sample_id,label");
  add_seed(subsets, o);
  subsets->add_option("--out", o.out, "output CSV (default stdout)");

  auto* train_blk = app.add_subcommand("train-block", "train one block and write BLK1");
  auto* train_vdv = app.add_subcommand("train-vdv", "train one block per feature file and write VDV1");
  for (auto* sub : {train_blk, train_vdv}) {
    add_features(sub, o, "TAG=PATH training feature file");
    sub->add_option("--labels", o.labels, "CSV sample_id,label");
    add_model_flags(sub, o);
    add_seed(sub, o);
    sub->add_option("--pca", o.pca_tags, "also apply PCA to blocks with this tag");
    sub->add_flag("--no-pca", o.no_pca, "disable PCA for every block");
    sub->add_option("--threads", o.threads, "mini-sets trained concurrently")->capture_default_str();
    sub->add_option("--out", o.out, "output model file");
    sub->add_option("--log", o.log, "training log CSV (default stdout)");
  }

  auto* predict = app.add_subcommand("predict", "predict labels and scores");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "per-block and combined metrics");
  for (auto* sub : {predict, evaluate_cmd}) {
    sub->add_option("--model", o.model, "BLK1 or VDV1 model file");
    add_features(sub, o, "TAG=PATH feature file per block");
    sub->add_option("--labels", o.labels, "CSV sample_id,label");
    add_score_rule(sub, o);
    sub->add_option("--out", o.out, "output CSV (default stdout)");
  }
  evaluate_cmd->add_option("--roc", o.roc, "ROC CSV of the combined score");
  evaluate_cmd->add_option("--subset-auc", o.subset_auc, "per-member AUC CSV with block spread");

  auto* compare = app.add_subcommand("compare", "weight balancing, sampling and ensemble side by side");
  add_features(compare, o, "train=PATH and test=PATH");
  compare->add_option("--labels", o.labels, "CSV sample_id,label");
  add_model_flags(compare, o);
  add_seed(compare, o);
  add_score_rule(compare, o);
  compare->add_option("--oversample-jitter", o.oversample_jitter,
                      "Gaussian jitter on replicas, in minority standard deviations")
      ->capture_default_str();
  compare->add_option("--out", o.out, "output CSV (default stdout)");

  auto* roc = app.add_subcommand("roc", "ROC curve from a prediction CSV");
  roc->add_option("--scores", o.scores, "CSV with sample_id and score columns");
  roc->add_option("--labels", o.labels, "CSV sample_id,label");
  add_features(roc, o, "labeled feature file, used when --labels is absent");
  roc->add_option("--out", o.out, "output CSV (default stdout)");

  // Linear is the comparison default; an explicit --kernel still wins.
  compare->preparse_callback([&o](std::size_t) { o.kernel = "linear"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out);
    if (split->parsed()) return cmd_split(o, out);
    if (subsets->parsed()) return cmd_subsets(o, out);
    if (train_blk->parsed()) return cmd_train(o, out, true);
    if (train_vdv->parsed()) return cmd_train(o, out, false);
    if (predict->parsed()) return cmd_predict(o, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(o, out);
    if (compare->parsed()) return cmd_compare(o, out);
    if (roc->parsed()) return cmd_roc(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConvergenceError& e) {
    err << "convergence failure: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace vdv::cli
