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

#include "rftag/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rftag/error.hpp"

namespace rftag::eval {

namespace {

std::string join(const std::vector<std::string>& v, std::size_t limit = 10) {
  std::string out;
  for (std::size_t i = 0; i < v.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  if (v.size() > limit) out += ", ... (" + std::to_string(v.size()) + " total)";
  return out;
}

void require_aligned(const std::vector<std::string>& a,
                     const std::vector<std::string>& b, const std::string& what) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::vector<std::string> diff;
  std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                std::back_inserter(diff));
  if (!diff.empty() || a.size() != b.size()) {
    throw ValidationError(what + " sets differ: " + join(diff));
  }
}

std::unordered_map<std::string, std::size_t> index_of(const std::vector<std::string>& v) {
  std::unordered_map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < v.size(); ++i) m.emplace(v[i], i);
  return m;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) {
    throw ValidationError(where + ": '" + s + "' is not a number");
  }
  return v;
}

struct Table {
  std::vector<std::string> ids;
  std::vector<std::string> tags;
  std::vector<std::string> cells;
};

Table parse_table(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  Table t;
  if (!std::getline(is, line)) throw ValidationError(origin + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line, '\t');
  if (header.size() < 2 || header[0] != "track_id") {
    throw ValidationError(origin + ": header must start with track_id and name tags");
  }
  t.tags.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != header.size()) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " columns, got " +
                            std::to_string(cols.size()));
    }
    t.ids.push_back(cols[0]);
    t.cells.insert(t.cells.end(), cols.begin() + 1, cols.end());
  }
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw RuntimeFailure("cannot write " + path.string());
  f << text;
  if (!f) throw RuntimeFailure("failed writing " + path.string());
}

}  // namespace

void PredictionSet::validate() const {
  if (scores.size() != ids.size() * tags.size()) {
    throw ValidationError("prediction matrix has " + std::to_string(scores.size()) +
                          " entries for " + std::to_string(ids.size()) + "x" +
                          std::to_string(tags.size()));
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate track id " + id);
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw ValidationError("prediction score outside [0,1]: " + std::to_string(s));
    }
  }
  if (decisions && decisions->size() != scores.size()) {
    throw ValidationError("decision matrix does not match the score matrix");
  }
  if (decisions && !thresholds) {
    throw ValidationError("decisions require an attached threshold set");
  }
}

double average_precision(std::span<const double> scores,
                         std::span<const std::uint8_t> labels,
                         std::span<const std::string> ids) {
  if (scores.size() != labels.size() || scores.size() != ids.size()) {
    throw ValidationError("average_precision: scores, labels and ids differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  std::size_t positives = 0;
  for (std::uint8_t y : labels) positives += y ? 1 : 0;
  if (positives == 0) throw ValidationError("average_precision: no positive labels");
  // Step-wise area over score thresholds: each group of tied scores enters
  // the ranking at once, so within-tie order never changes the value.
  const double npos = static_cast<double>(positives);
  std::size_t tp = 0;
  double ap = 0, recall_prev = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += labels[order[k]] ? 1 : 0;
    const bool group_end = k + 1 == order.size() ||
                           scores[order[k + 1]] != scores[order[k]];
    if (!group_end) continue;
    const double recall = static_cast<double>(tp) / npos;
    const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    ap += (recall - recall_prev) * precision;
    recall_prev = recall;
  }
  return ap;
}

std::vector<std::string> EvalReport::excluded() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!ap[i]) out.push_back(tags[i]);
  }
  return out;
}

PredictionSet reorder(const PredictionSet& preds, const std::vector<std::string>& ids,
                      const std::vector<std::string>& tags) {
  require_aligned(preds.ids, ids, "track id");
  require_aligned(preds.tags, tags, "tag");
  if (preds.ids == ids && preds.tags == tags) return preds;
  const auto row = index_of(preds.ids);
  const auto col = index_of(preds.tags);
  PredictionSet out;
  out.ids = ids;
  out.tags = tags;
  out.scores.resize(ids.size() * tags.size());
  if (preds.decisions) out.decisions.emplace(out.scores.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < tags.size(); ++j) {
      const std::size_t src = row.at(ids[i]) * preds.tags.size() + col.at(tags[j]);
      out.scores[i * tags.size() + j] = preds.scores[src];
      if (preds.decisions) (*out.decisions)[i * tags.size() + j] = (*preds.decisions)[src];
    }
  if (preds.thresholds) {
    ThresholdSet t = *preds.thresholds;
    const auto tcol = index_of(t.tags);
    ThresholdSet r = t;
    for (std::size_t j = 0; j < tags.size(); ++j) {
      const std::size_t s = tcol.at(tags[j]);
      r.tags[j] = t.tags[s];
      r.thresholds[j] = t.thresholds[s];
      r.f1[j] = t.f1[s];
      r.flagged[j] = t.flagged[s];
    }
    out.thresholds = r;
  }
  return out;
}

EvalReport macro_pr_auc(const PredictionSet& preds, const LabelSet& labels) {
  preds.validate();
  require_aligned(preds.ids, labels.ids, "track id");
  require_aligned(preds.tags, labels.tags, "tag");
  const auto row = index_of(labels.ids);
  const auto col = index_of(labels.tags);
  const std::size_t n = preds.tracks();
  EvalReport report;
  report.tags = preds.tags;
  double sum = 0;
  std::size_t scored = 0;
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t j = 0; j < preds.tags.size(); ++j) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = preds.score(i, j);
      y[i] = labels.at(row.at(preds.ids[i]), col.at(preds.tags[j])) ? 1 : 0;
      pos += y[i];
    }
    report.positives.push_back(pos);
    if (pos == 0) {
      report.ap.emplace_back();
      continue;
    }
    const double ap = average_precision(s, y, preds.ids);
    report.ap.push_back(ap);
    sum += ap;
    ++scored;
  }
  if (scored == 0) throw ValidationError("no tag has a positive label; PR-AUC undefined");
  report.macro_pr_auc = sum / static_cast<double>(scored);
  return report;
}

PredictionSet ensemble_average(const std::vector<PredictionSet>& members) {
  if (members.empty()) throw ValidationError("ensemble needs at least one member");
  PredictionSet out;
  out.ids = members[0].ids;
  out.tags = members[0].tags;
  const std::size_t cells = members[0].scores.size();
  std::vector<std::vector<double>> aligned;
  for (std::size_t m = 0; m < members.size(); ++m) {
    members[m].validate();
    try {
      aligned.push_back(reorder(members[m], out.ids, out.tags).scores);
    } catch (const ValidationError& e) {
      throw ValidationError("ensemble member " + std::to_string(m) + ": " + e.what());
    }
  }
  out.scores.resize(cells);
  const double k = static_cast<double>(members.size());
  std::vector<double> cell(members.size());
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t m = 0; m < aligned.size(); ++m) cell[m] = aligned[m][i];
    // Summing in sorted order makes the result independent of member order.
    std::sort(cell.begin(), cell.end());
    if (cell.front() == cell.back()) {
      // The mean of equal values is that value; summing could round it away.
      out.scores[i] = cell.front();
      continue;
    }
    double sum = 0;
    for (double v : cell) sum += v;
    out.scores[i] = sum / k;
  }
  return out;
}

namespace {

double f1_at(const std::vector<std::pair<double, std::uint8_t>>& col, double t) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [s, y] : col) {
    const bool d = s >= t;
    if (d && y) ++tp;
    else if (d) ++fp;
    else if (y) ++fn;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

}  // namespace

ThresholdSet tune_thresholds(const PredictionSet& preds, const LabelSet& labels) {
  preds.validate();
  require_aligned(preds.ids, labels.ids, "track id");
  require_aligned(preds.tags, labels.tags, "tag");
  const auto row = index_of(labels.ids);
  const auto lcol = index_of(labels.tags);
  ThresholdSet out;
  out.tags = preds.tags;
  for (std::size_t j = 0; j < preds.tags.size(); ++j) {
    std::vector<std::pair<double, std::uint8_t>> col;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < preds.tracks(); ++i) {
      const std::uint8_t y = labels.at(row.at(preds.ids[i]), lcol.at(preds.tags[j]));
      col.emplace_back(preds.score(i, j), y);
      pos += y ? 1 : 0;
    }
    std::vector<double> distinct;
    for (const auto& c : col) distinct.push_back(c.first);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (pos == 0 || distinct.size() < 2) {
      out.thresholds.push_back(0.5);
      out.f1.push_back(f1_at(col, 0.5));
      out.flagged.push_back(true);
      continue;
    }
    std::vector<double> candidates{0.5};
    for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
      candidates.push_back(0.5 * (distinct[k] + distinct[k + 1]));
    }
    double best_t = 0.5, best_f = -1.0;
    for (double t : candidates) {
      const double f = f1_at(col, t);
      if (f > best_f || (f == best_f && t > best_t)) {
        best_f = f;
        best_t = t;
      }
    }
    out.thresholds.push_back(best_t);
    out.f1.push_back(best_f);
    out.flagged.push_back(false);
  }
  return out;
}

PredictionSet apply_thresholds(PredictionSet preds, const ThresholdSet& t) {
  require_aligned(preds.tags, t.tags, "tag");
  const auto col = index_of(t.tags);
  preds.decisions.emplace(preds.scores.size());
  for (std::size_t i = 0; i < preds.tracks(); ++i)
    for (std::size_t j = 0; j < preds.tags.size(); ++j) {
      const std::size_t k = i * preds.tags.size() + j;
      (*preds.decisions)[k] = preds.scores[k] >= t.thresholds[col.at(preds.tags[j])];
    }
  preds.thresholds = t;
  return preds;
}

std::string format_predictions(const PredictionSet& preds) {
  std::string out = "track_id";
  for (const auto& t : preds.tags) out += "\t" + t;
  out += "\n";
  for (std::size_t i = 0; i < preds.tracks(); ++i) {
    out += preds.ids[i];
    for (std::size_t j = 0; j < preds.tags.size(); ++j) out += "\t" + fmt6(preds.score(i, j));
    out += "\n";
  }
  return out;
}

std::string format_decisions(const PredictionSet& preds) {
  if (!preds.decisions) throw ValidationError("prediction set carries no decisions");
  std::string out = "track_id";
  for (const auto& t : preds.tags) out += "\t" + t;
  out += "\n";
  for (std::size_t i = 0; i < preds.tracks(); ++i) {
    out += preds.ids[i];
    for (std::size_t j = 0; j < preds.tags.size(); ++j) {
      out += (*preds.decisions)[i * preds.tags.size() + j] ? "\t1" : "\t0";
    }
    out += "\n";
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
  write_file(path, format_predictions(preds));
}

void write_decisions(const std::filesystem::path& path, const PredictionSet& preds) {
  write_file(path, format_decisions(preds));
}

PredictionSet parse_predictions(const std::string& text, const std::string& origin) {
  Table t = parse_table(text, origin);
  PredictionSet p;
  p.ids = std::move(t.ids);
  p.tags = std::move(t.tags);
  p.scores.reserve(t.cells.size());
  for (const auto& c : t.cells) p.scores.push_back(parse_double(c, origin));
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  return p;
}

PredictionSet read_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path), path.string());
}

LabelSet parse_labels(const std::string& text, const std::string& origin) {
  Table t = parse_table(text, origin);
  LabelSet l;
  l.ids = std::move(t.ids);
  l.tags = std::move(t.tags);
  for (const auto& c : t.cells) {
    if (c != "0" && c != "1") {
      throw ValidationError(origin + ": label '" + c + "' is not 0 or 1");
    }
    l.values.push_back(c == "1");
  }
  return l;
}

LabelSet read_labels(const std::filesystem::path& path) {
  return parse_labels(read_file(path), path.string());
}

std::string format_report(const EvalReport& report) {
  std::string out = "tag,ap,positives\n";
  for (std::size_t j = 0; j < report.tags.size(); ++j) {
    out += report.tags[j] + "," + (report.ap[j] ? fmt6(*report.ap[j]) : "excluded") +
           "," + std::to_string(report.positives[j]) + "\n";
  }
  out += "macro_pr_auc=" + fmt6(report.macro_pr_auc) + "\n";
  return out;
}

std::string format_thresholds(const ThresholdSet& t) {
  std::ostringstream os;
  os << "# metric=" << t.metric << " source=" << t.source << "\n";
  os << "tag\tthreshold\tf1\tflagged\n";
  char buf[64];
  for (std::size_t j = 0; j < t.tags.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\t%d", t.thresholds[j], t.f1[j],
                  t.flagged[j] ? 1 : 0);
    os << t.tags[j] << '\t' << buf << '\n';
  }
  return os.str();
}

ThresholdSet parse_thresholds(const std::string& text, const std::string& origin) {
  ThresholdSet t;
  std::istringstream is(text);
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.starts_with("#")) {
      std::istringstream ls(line.substr(1));
      std::string kv;
      while (ls >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        if (kv.substr(0, eq) == "metric") t.metric = kv.substr(eq + 1);
        if (kv.substr(0, eq) == "source") t.source = kv.substr(eq + 1);
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    auto c = split(line, '\t');
    if (c.size() != 4) throw ValidationError(origin + ": malformed threshold row");
    t.tags.push_back(c[0]);
    t.thresholds.push_back(parse_double(c[1], origin));
    t.f1.push_back(parse_double(c[2], origin));
    t.flagged.push_back(c[3] == "1");
  }
  return t;
}

}  // namespace rftag::eval
