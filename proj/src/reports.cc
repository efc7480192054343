// Copyright 2026 The topicprobe Authors.
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

#include <map>
#include <sstream>
#include <string>

#include "topicprobe/experiment.h"
#include "topicprobe/util.h"

namespace topicprobe {

namespace {

// Scores are rendered in percent with one decimal.
std::string pct(double value) { return format_fixed(100.0 * value, 1); }

std::string pct(const std::optional<double>& value) {
  return value ? pct(*value) : "-";
}

std::string signed_pct(double value) {
  std::string s = pct(value);
  if (value >= 0.0 && s != "-0.0") s.insert(0, "+");
  if (s == "-0.0") s = "+0.0";
  return s;
}

void header(std::ostringstream& out, const std::vector<std::string>& cols) {
  out << '|';
  for (const auto& c : cols) out << ' ' << c << " |";
  out << "\n|";
  for (size_t i = 0; i < cols.size(); ++i) out << (i == 0 ? "---|" : "---:|");
  out << '\n';
}

void row(std::ostringstream& out, const std::vector<std::string>& cells) {
  out << '|';
  for (const auto& c : cells) out << ' ' << c << " |";
  out << '\n';
}

}  // namespace

std::string render_csv(std::span<const CsvRow> rows) {
  std::string out = "model,task,mode,fold,seed,metric,value\n";
  for (const CsvRow& r : rows) {
    out += r.model + ',' + r.task + ',' + r.mode + ',' +
           std::to_string(r.fold) + ',' + std::to_string(r.seed) + ',' +
           r.metric + ',' + format_double(r.value) + '\n';
  }
  return out;
}

std::string render_gap_table(const GapReport& report,
                             std::span<const std::string> tasks) {
  std::map<std::pair<std::string, std::string>, const GapCell*> cells;
  for (const GapCell& c : report.cells) cells[{c.model, c.task}] = &c;
  std::vector<std::string> cols = {"Model"};
  for (const auto& t : tasks) {
    cols.push_back(t + " In");
    cols.push_back(t + " Cross");
  }
  cols.insert(cols.end(), {"Avg In", "Avg Cross", "Delta"});
  std::ostringstream out;
  header(out, cols);
  for (const ModelGap& m : report.models) {
    std::vector<std::string> cells_out = {m.model};
    for (const auto& t : tasks) {
      auto it = cells.find({m.model, t});
      if (it == cells.end()) {
        cells_out.insert(cells_out.end(), {"-", "-"});
      } else {
        cells_out.push_back(pct(it->second->in_mean));
        cells_out.push_back(pct(it->second->cross_mean));
      }
    }
    cells_out.push_back(pct(m.in_mean));
    cells_out.push_back(pct(m.cross_mean));
    cells_out.push_back(signed_pct(m.delta));
    row(out, cells_out);
  }
  return out.str();
}

std::string render_seen_table(std::span<const SeenCell> cells) {
  std::ostringstream out;
  header(out, {"Model", "Task", "Mode", "Seen F1", "Unseen F1", "Seen %",
               "Unseen %"});
  for (const SeenCell& c : cells) {
    row(out, {c.model, c.task, c.mode, pct(c.seen_f1), pct(c.unseen_f1),
              pct(c.seen_ratio), pct(1.0 - c.seen_ratio)});
  }
  return out.str();
}

std::string render_amnesic_table(std::span<const AmnesicCell> cells) {
  std::ostringstream out;
  header(out, {"Model", "Task", "Mode", "Baseline", "Amnesic", "Delta",
               "Random", "Delta random", "Removed rank"});
  for (const AmnesicCell& c : cells) {
    row(out, {c.model, c.task, c.mode, pct(c.baseline), pct(c.amnesic),
              signed_pct(c.amnesic - c.baseline), pct(c.random),
              signed_pct(c.random - c.baseline),
              std::to_string(c.removed_rank)});
  }
  return out.str();
}

std::string render_mdl_table(std::span<const MdlCell> cells) {
  std::ostringstream out;
  header(out, {"Model", "Task", "I In", "I Cross", "Delta I"});
  for (const MdlCell& c : cells) {
    row(out, {c.model, c.task,
              c.has_in ? format_fixed(c.in_compression, 3) : "-",
              c.has_cross ? format_fixed(c.cross_compression, 3) : "-",
              c.has_in && c.has_cross
                  ? format_fixed(c.cross_compression - c.in_compression, 3)
                  : "-"});
  }
  return out.str();
}

std::string render_reprobe_table(std::span<const ReprobeCell> cells) {
  std::ostringstream out;
  header(out, {"Task", "Mode", "Pre-trained", "Fine-tuned", "Delta"});
  for (const ReprobeCell& c : cells) {
    row(out, {c.task, c.mode, pct(c.pretrained), pct(c.finetuned),
              signed_pct(c.finetuned - c.pretrained)});
  }
  return out.str();
}

}  // namespace topicprobe
