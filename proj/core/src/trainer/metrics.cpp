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

#include "dnd/trainer/metrics.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dnd/util/error.hpp"

namespace dnd::train {

void MetricsLog::append(MetricsRow row) {
  for (auto it = rows_.rbegin(); it != rows_.rend(); ++it) {
    if (it->stage != row.stage) continue;
    if (row.epoch <= it->epoch) {
      throw ContractError("metrics: epoch " + std::to_string(row.epoch) + " after " +
                          std::to_string(it->epoch) + " in stage " + row.stage);
    }
    break;
  }
  rows_.push_back(std::move(row));
}

void MetricsLog::write_csv(std::ostream& out) const {
  out << kHeader << '\n';
  // 17 significant digits round-trip doubles exactly.
  out << std::setprecision(17);
  for (const auto& r : rows_) {
    out << r.stage << ',' << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr
        << ',' << r.wall_time_s << '\n';
  }
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_csv(out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

double parse_double(const std::string& s, std::size_t line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("metrics line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

MetricsLog MetricsLog::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw ParseError("metrics: expected header '" + std::string(kHeader) + "'");
  }
  MetricsLog log;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) {
      throw ParseError("metrics line " + std::to_string(n) + ": expected 6 fields");
    }
    MetricsRow r;
    r.stage = f[0];
    r.epoch = static_cast<int>(parse_double(f[1], n));
    r.train_loss = parse_double(f[2], n);
    r.val_loss = parse_double(f[3], n);
    r.lr = parse_double(f[4], n);
    r.wall_time_s = parse_double(f[5], n);
    log.append(std::move(r));
  }
  return log;
}

MetricsLog MetricsLog::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_csv(in);
}

bool MetricsLog::same_trajectory(const MetricsLog& other) const {
  if (rows_.size() != other.rows_.size()) return false;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& a = rows_[i];
    const auto& b = other.rows_[i];
    if (a.stage != b.stage || a.epoch != b.epoch || a.train_loss != b.train_loss ||
        a.val_loss != b.val_loss || a.lr != b.lr) {
      return false;
    }
  }
  return true;
}

}  // namespace dnd::train
