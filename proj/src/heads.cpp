#include "vidrec/heads.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vidrec {

// ---------------------------------------------------------------------------
// ActionVocab

ActionVocab ActionVocab::build(std::span<const std::pair<std::size_t, std::size_t>> annotations, std::size_t verbs,
                               std::size_t nouns) {
  if (annotations.empty()) throw std::invalid_argument("cannot build an action vocabulary from no annotations");
  ActionVocab vocab;
  vocab.verbs_ = verbs;
  vocab.nouns_ = nouns;
  for (std::size_t row = 0; row < annotations.size(); ++row) {
    const auto& p = annotations[row];
    if (p.first >= verbs || p.second >= nouns) {
      throw std::out_of_range("annotation row " + std::to_string(row + 1) + ": (" + std::to_string(p.first) + ", " +
                              std::to_string(p.second) + ") outside " + std::to_string(verbs) + " verbs x " +
                              std::to_string(nouns) + " nouns");
    }
    if (vocab.pair_to_action_.emplace(p, vocab.pairs_.size()).second) vocab.pairs_.push_back(p);
  }
  return vocab;
}

std::optional<std::size_t> ActionVocab::compose(std::size_t verb, std::size_t noun) const {
  if (verb >= verbs_ || noun >= nouns_) {
    throw std::out_of_range("verb/noun id out of range: (" + std::to_string(verb) + ", " + std::to_string(noun) + ")");
  }
  const auto it = pair_to_action_.find({verb, noun});
  if (it == pair_to_action_.end()) return std::nullopt;
  return it->second;
}

std::pair<std::size_t, std::size_t> ActionVocab::decompose(std::size_t action) const {
  if (action >= pairs_.size()) throw std::out_of_range("action id " + std::to_string(action) + " out of range");
  return pairs_[action];
}

// ---------------------------------------------------------------------------
// Heads and loss

namespace {

constexpr const char* kTasks[3] = {"verb", "noun", "action"};

std::size_t task_classes(const ClassCounts& c, int task) { return task == 0 ? c.verbs : task == 1 ? c.nouns : c.actions; }

}  // namespace

void add_head_params(ParamStore& store, const std::string& prefix, std::size_t feature_dim, const ClassCounts& counts,
                     std::mt19937_64& rng) {
  for (int task = 0; task < 3; ++task) {
    const std::size_t n = task_classes(counts, task);
    const std::string base = prefix + "." + kTasks[task];
    store.add(base + ".w", uniform_init(Shape{feature_dim, n}, feature_dim, rng));
    store.add(base + ".b", uniform_init(Shape{n}, feature_dim, rng));
  }
}

ScoreVars multitask_heads(const Var& feature, const BoundParams& params, const std::string& prefix) {
  const std::size_t d = feature.value().size();
  const Var row = ag::reshape(feature, Shape{1, d});
  Var out[3];
  for (int task = 0; task < 3; ++task) {
    const std::string base = prefix + "." + kTasks[task];
    const Var& w = params[base + ".w"];
    if (w.shape().size() != 2 || w.shape()[0] != d) {
      throw std::invalid_argument("head '" + base + "' expects features of length " + std::to_string(w.shape()[0]) +
                                  ", got " + std::to_string(d));
    }
    const Var logits = ag::linear(row, w, params[base + ".b"]);
    out[task] = ag::reshape(logits, Shape{w.shape()[1]});
  }
  return {out[0], out[1], out[2]};
}

PredictionScores multitask_heads(const Tensor& feature, const ParamStore& params, const std::string& prefix) {
  return multitask_heads(constant(feature), BoundParams::constants(params), prefix).values();
}

Var multitask_loss(const ScoreVars& scores, const TaskLabels& target) {
  Var loss = ag::add(ag::softmax_cross_entropy(scores.verb, target.verb),
                     ag::softmax_cross_entropy(scores.noun, target.noun));
  if (target.action) loss = ag::add(loss, ag::softmax_cross_entropy(scores.action, *target.action));
  return loss;
}

double multitask_loss(const PredictionScores& scores, const TaskLabels& target) {
  return multitask_loss(ScoreVars{constant(scores.verb), constant(scores.noun), constant(scores.action)}, target)
      .value()
      .item();
}

// ---------------------------------------------------------------------------
// Ensembling

double pairwise_sum(std::vector<double> values) {
  if (values.empty()) return 0.0;
  while (values.size() > 1) {
    std::vector<double> next;
    next.reserve((values.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < values.size(); i += 2) next.push_back(values[i] + values[i + 1]);
    if (values.size() % 2) next.push_back(values.back());
    values = std::move(next);
  }
  return values[0];
}

PredictionScores softmax_scores(const PredictionScores& logits) {
  return {softmax_lastdim(logits.verb), softmax_lastdim(logits.noun), softmax_lastdim(logits.action)};
}

PredictionScores average_normalized(std::span<const PredictionScores> members) {
  if (members.empty()) throw std::invalid_argument("ensemble needs at least one member");
  const ClassCounts counts = members[0].counts();
  for (const PredictionScores& m : members) {
    if (m.counts() != counts) throw std::invalid_argument("ensemble members disagree on class counts");
  }
  auto reduce = [&](auto field) {
    const Tensor& first = members[0].*field;
    Tensor out(first.shape());
    std::vector<double> column(members.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
      for (std::size_t m = 0; m < members.size(); ++m) column[m] = (members[m].*field)[c];
      std::sort(column.begin(), column.end());
      out[c] = pairwise_sum(column) / static_cast<double>(members.size());
    }
    return out;
  };
  return {reduce(&PredictionScores::verb), reduce(&PredictionScores::noun), reduce(&PredictionScores::action)};
}

PredictionScores ensemble_average(std::span<const PredictionScores> members) {
  std::vector<PredictionScores> normalized;
  normalized.reserve(members.size());
  for (const PredictionScores& m : members) normalized.push_back(softmax_scores(m));
  return average_normalized(normalized);
}

// ---------------------------------------------------------------------------
// CSV files

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::size_t parse_index(const std::string& s, std::size_t row) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || s[0] == '-') {
    throw std::runtime_error("row " + std::to_string(row) + ": bad class id '" + s + "'");
  }
  return v;
}

double parse_score(const std::string& s, std::size_t row) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw std::runtime_error("row " + std::to_string(row) + ": bad score '" + s + "'");
  return v;
}

}  // namespace

std::vector<Annotation> read_annotations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("annotations: missing header row");
  const auto header = split_csv(line);
  if (header != std::vector<std::string>{"segment_id", "verb_id", "noun_id"}) {
    throw std::runtime_error("annotations: header must be 'segment_id,verb_id,noun_id'");
  }
  std::vector<Annotation> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw std::runtime_error("annotations row " + std::to_string(row) + ": expected 3 columns");
    rows.push_back({cells[0], parse_index(cells[1], row), parse_index(cells[2], row)});
  }
  return rows;
}

void write_annotations(std::ostream& out, std::span<const Annotation> rows) {
  out << "segment_id,verb_id,noun_id\n";
  for (const Annotation& a : rows) out << a.segment_id << ',' << a.verb << ',' << a.noun << '\n';
}

void write_scores(std::ostream& out, std::span<const ScoreRow> rows) {
  if (rows.empty()) throw std::invalid_argument("no score rows to write");
  const ClassCounts counts = rows[0].second.counts();
  out << "segment_id";
  for (std::size_t i = 0; i < counts.verbs; ++i) out << ",v" << i;
  for (std::size_t i = 0; i < counts.nouns; ++i) out << ",n" << i;
  for (std::size_t i = 0; i < counts.actions; ++i) out << ",a" << i;
  out << '\n';
  for (const auto& [id, s] : rows) {
    if (s.counts() != counts) throw std::invalid_argument("score rows disagree on class counts");
    out << id;
    for (const Tensor* t : {&s.verb, &s.noun, &s.action}) {
      for (double v : t->data()) out << ',' << format_double(v, 9);
    }
    out << '\n';
  }
}

std::vector<ScoreRow> read_scores(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("scores: missing header row");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "segment_id") throw std::runtime_error("scores: header must start with segment_id");
  ClassCounts counts;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string expect_v = "v" + std::to_string(counts.verbs);
    const std::string expect_n = "n" + std::to_string(counts.nouns);
    const std::string expect_a = "a" + std::to_string(counts.actions);
    if (counts.nouns == 0 && counts.actions == 0 && header[i] == expect_v) {
      ++counts.verbs;
    } else if (counts.actions == 0 && header[i] == expect_n) {
      ++counts.nouns;
    } else if (header[i] == expect_a) {
      ++counts.actions;
    } else {
      throw std::runtime_error("scores: unexpected header column '" + header[i] + "'");
    }
  }
  if (!counts.verbs || !counts.nouns || !counts.actions) throw std::runtime_error("scores: header lacks a task");
  std::vector<ScoreRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("scores row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                               " columns");
    }
    PredictionScores s{Tensor(Shape{counts.verbs}), Tensor(Shape{counts.nouns}), Tensor(Shape{counts.actions})};
    std::size_t col = 1;
    for (Tensor* t : {&s.verb, &s.noun, &s.action}) {
      for (double& v : t->data()) v = parse_score(cells[col++], row);
    }
    rows.emplace_back(cells[0], std::move(s));
  }
  return rows;
}

}  // namespace vidrec
