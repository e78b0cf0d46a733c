#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vidrec/bench.hpp"
#include "vidrec/checks.hpp"
#include "vidrec/config.hpp"
#include "vidrec/experiment.hpp"
#include "vidrec/metrics.hpp"

namespace fs = std::filesystem;
using namespace vidrec;

namespace {

HarnessConfig load_config(const std::string& path) {
  if (path.empty()) return HarnessConfig::toy_default();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return HarnessConfig::load(in);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    open_out(path) << text;
  }
}

int report_checks(const std::vector<CheckResult>& results) {
  bool ok = true;
  for (const CheckResult& r : results) {
    std::printf("%s  %-48s %.3e (tol %.0e)\n", r.pass() ? "PASS" : "FAIL", r.name.c_str(), r.value, r.tolerance);
    ok = ok && r.pass();
  }
  return ok ? 0 : 1;
}

std::vector<ScoreRow> score_rows(const std::vector<std::string>& ids, const std::vector<PredictionScores>& scores) {
  std::vector<ScoreRow> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) rows.emplace_back(ids[i], scores[i]);
  return rows;
}

int eval_offline(const std::vector<std::string>& score_files, const std::string& annotations_path,
                 const std::string& vocab_path, const std::string& out_path) {
  auto read_ann = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open annotations '" + path + "'");
    return read_annotations(in);
  };
  const std::vector<Annotation> ann = read_ann(annotations_path);
  const std::vector<Annotation> vocab_rows = vocab_path.empty() ? ann : read_ann(vocab_path);

  std::vector<std::vector<ScoreRow>> members;
  for (const std::string& path : score_files) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scores '" + path + "'");
    members.push_back(read_scores(in));
  }
  const ClassCounts counts = members.front().at(0).second.counts();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const Annotation& a : vocab_rows) pairs.emplace_back(a.verb, a.noun);
  const ActionVocab vocab = ActionVocab::build(pairs, counts.verbs, counts.nouns);
  if (vocab.actions() != counts.actions) {
    throw std::runtime_error("score files have " + std::to_string(counts.actions) + " action columns but the vocabulary has " +
                             std::to_string(vocab.actions()));
  }

  std::vector<std::map<std::string, const PredictionScores*>> lookup(members.size());
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (const ScoreRow& row : members[m]) lookup[m][row.first] = &row.second;
  }
  std::vector<TaskLabels> labels;
  std::vector<std::vector<PredictionScores>> per_member(members.size());
  std::vector<PredictionScores> ensemble;
  for (const Annotation& a : ann) {
    std::vector<PredictionScores> row;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto it = lookup[m].find(a.segment_id);
      if (it == lookup[m].end()) throw std::runtime_error("segment '" + a.segment_id + "' missing from " + score_files[m]);
      row.push_back(*it->second);
      per_member[m].push_back(*it->second);
    }
    ensemble.push_back(average_normalized(row));
    labels.push_back(vocab.labels(a.verb, a.noun));
  }
  std::vector<std::pair<std::string, MetricReport>> table;
  for (std::size_t m = 0; m < members.size(); ++m) {
    table.emplace_back(fs::path(score_files[m]).stem().string(), evaluate(per_member[m], labels));
  }
  const MetricReport ens = evaluate(ensemble, labels);
  table.emplace_back("Ensemble", ens);
  std::cout << metrics_table(table);
  emit(out_path, metrics_csv(ens));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  retain_freed_memory();
  CLI::App app{"vidrec: space-time mixing attention, gate-shift-fuse and the evaluation harness"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "64-bit seed for all randomness")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "attention oracle-equivalence suite");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");

  auto* bench = app.add_subcommand("bench", "attention MAC scaling in the number of frames");
  std::string bench_model = "both", bench_out;
  std::vector<std::size_t> bench_frames{2, 4, 8, 16};
  std::size_t bench_tokens = 49, bench_dim = 64;
  int bench_tw = 1;
  bench->add_option("--model", bench_model, "stm, full or both")->capture_default_str();
  bench->add_option("--frames", bench_frames, "frame counts")->delimiter(',')->capture_default_str();
  bench->add_option("--tokens", bench_tokens, "tokens per frame S")->capture_default_str();
  bench->add_option("--head-dim", bench_dim, "head dimension")->capture_default_str();
  bench->add_option("--t-w", bench_tw, "temporal window")->capture_default_str();
  bench->add_option("--out", bench_out, "CSV path (default stdout)");

  std::string config_path;
  auto* train = app.add_subcommand("train-toy", "train one toy model on synthetic videos");
  std::string train_model = "gsf", checkpoint_path, history_path;
  bool shuffled = false;
  train->add_option("--model", train_model, "gsf, plain2d or xvit")->capture_default_str();
  train->add_option("--config", config_path, "harness JSON config");
  train->add_flag("--shuffled", shuffled, "train and test on frame-shuffled videos");
  train->add_option("--checkpoint", checkpoint_path, "write trained parameters here");
  train->add_option("--history", history_path, "write per-epoch CSV here");

  auto* eval = app.add_subcommand("eval", "views + ensemble + metrics (synthetic end-to-end or score files)");
  std::string eval_out, scores_dir, annotations_path, vocab_path;
  std::vector<std::string> score_files;
  eval->add_option("--config", config_path, "harness JSON config");
  eval->add_option("--out", eval_out, "metrics CSV path (default stdout)");
  eval->add_option("--scores-dir", scores_dir, "write per-member video score CSVs here");
  eval->add_option("--scores", score_files, "offline mode: member score CSVs (repeatable)");
  eval->add_option("--annotations", annotations_path, "offline mode: segment annotations CSV");
  eval->add_option("--vocab", vocab_path, "offline mode: annotations defining the action vocabulary");

  auto* synth = app.add_subcommand("synth", "write the synthetic dataset");
  std::string synth_out;
  synth->add_option("--config", config_path, "harness JSON config");
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* show = app.add_subcommand("config", "print the effective configuration");
  show->add_option("--config", config_path, "harness JSON config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return report_checks(equivalence_suite(seed));
    if (*gradcheck) return report_checks(gradient_suite(seed));

    if (*bench) {
      std::vector<AttentionKind> kinds;
      if (bench_model == "both") {
        kinds = {AttentionKind::kSpaceTimeMixing, AttentionKind::kFullSpaceTime};
      } else {
        kinds = {parse_attention_kind(bench_model)};
      }
      std::vector<ScalingResult> results;
      for (AttentionKind k : kinds) {
        results.push_back(mac_scaling_experiment(k, bench_frames, bench_tokens, bench_dim, seed, bench_tw));
      }
      emit(bench_out, scaling_csv(results));
      for (const ScalingResult& r : results) {
        std::fprintf(stderr, "slope %s %.4f\n", attention_kind_name(r.kind), r.slope);
      }
      return 0;
    }

    if (*show) {
      std::cout << load_config(config_path).to_json_text();
      return 0;
    }

    if (*train) {
      const HarnessConfig cfg = load_config(config_path);
      const MemberOutcome m = train_on_synthetic(cfg, train_model, seed, seed, shuffled);
      std::ostringstream hist;
      hist << "epoch,loss,train_action_top1,lr\n";
      for (const EpochRecord& e : m.training.history) {
        hist << e.epoch << ',' << format_double(e.mean_loss, 9) << ',' << format_double(e.action_top1, 6) << ','
             << format_double(e.lr, 9) << '\n';
      }
      if (!history_path.empty()) emit(history_path, hist.str());
      std::cerr << hist.str();
      if (!checkpoint_path.empty()) {
        std::ofstream out = open_out(checkpoint_path);
        m.training.params.save(out);
      }
      const std::vector<std::pair<std::string, MetricReport>> table{
          {m.name + (shuffled ? " (shuffled)" : ""), m.report}};
      std::cout << metrics_table(table);
      return 0;
    }

    if (*eval) {
      if (!score_files.empty()) {
        if (annotations_path.empty()) throw std::runtime_error("--scores needs --annotations");
        return eval_offline(score_files, annotations_path, vocab_path, eval_out);
      }
      const HarnessConfig cfg = load_config(config_path);
      const EvalOutcome r = run_synthetic_eval(cfg, seed);
      std::vector<std::pair<std::string, MetricReport>> table;
      for (const MemberOutcome& m : r.members) table.emplace_back(m.name, m.report);
      table.emplace_back("Ensemble", r.ensemble);
      std::cout << metrics_table(table);
      emit(eval_out, metrics_csv(r.ensemble));
      if (!scores_dir.empty()) {
        fs::create_directories(scores_dir);
        for (const MemberOutcome& m : r.members) {
          std::ofstream out = open_out(fs::path(scores_dir) / (m.name + ".csv"));
          write_scores(out, score_rows(r.video_ids, m.scores));
        }
        std::ofstream ann = open_out(fs::path(scores_dir) / "annotations.csv");
        write_annotations(ann, dataset_annotations(make_synthetic_data(cfg, seed).test));
      }
      return 0;
    }

    if (*synth) {
      const HarnessConfig cfg = load_config(config_path);
      const SyntheticData data = make_synthetic_data(cfg, seed);
      for (const auto& [split, set] : {std::pair{"train", &data.train}, std::pair{"test", &data.test}}) {
        const fs::path dir = fs::path(synth_out) / split;
        fs::create_directories(dir);
        for (const LabeledVideo& item : set->items) {
          std::ofstream out = open_out(dir / (item.video.id + ".tensor"));
          write_tensor(out, item.video.frames);
        }
        std::ofstream ann = open_out(fs::path(synth_out) / (std::string(split) + "_annotations.csv"));
        write_annotations(ann, dataset_annotations(*set));
      }
      std::cout << "wrote " << data.train.items.size() << " train and " << data.test.items.size() << " test videos to "
                << synth_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
