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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dnd::train {

struct MetricsRow {
  std::string stage;
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
  double wall_time_s = 0;
};

// Per-epoch training record. Epochs strictly increase within a stage.
class MetricsLog {
 public:
  static constexpr const char* kHeader = "stage,epoch,train_loss,val_loss,lr,wall_time_s";

  // Throws ContractError when the epoch does not increase.
  void append(MetricsRow row);
  const std::vector<MetricsRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  const MetricsRow& back() const { return rows_.back(); }

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  // Throws ParseError on malformed rows.
  static MetricsLog read_csv(std::istream& in);
  static MetricsLog read_csv(const std::filesystem::path& path);

  // Equality on every column except wall_time_s.
  bool same_trajectory(const MetricsLog& other) const;

 private:
  std::vector<MetricsRow> rows_;
};

}  // namespace dnd::train
