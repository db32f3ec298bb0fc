// Copyright 2026 The Anaforge Authors.
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

// Bits shared by the three trainers: loss logs and the non-finite guard.

#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace anaforge {

class TrainingError : public std::runtime_error {
 public:
  enum class Kind { kNonFiniteLoss, kEmptyTrainingSet };

  TrainingError(Kind kind, const std::string &what)
      : std::runtime_error(std::string(kind == Kind::kNonFiniteLoss ? "NonFiniteLoss" : "EmptyTrainingSet") +
                           ": " + what),
        kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Per-epoch loss components; row 0 is the untrained model.
class LossLog {
 public:
  explicit LossLog(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add(int epoch, std::vector<double> values) {
    if (values.size() != columns_.size()) throw std::logic_error("loss row width");
    rows_.push_back({epoch, std::move(values)});
  }

  size_t size() const { return rows_.size(); }
  const std::vector<double> &row(size_t i) const { return rows_.at(i).values; }
  int epoch(size_t i) const { return rows_.at(i).epoch; }
  // Last column is the total by convention.
  double total(size_t i) const { return rows_.at(i).values.back(); }
  double initial_total() const { return total(0); }
  double final_total() const { return total(rows_.size() - 1); }

  std::string csv() const {
    std::ostringstream os;
    os << "epoch";
    for (const auto &c : columns_) os << ',' << c;
    os << '\n' << std::setprecision(10);
    for (const auto &r : rows_) {
      os << r.epoch;
      for (double v : r.values) os << ',' << v;
      os << '\n';
    }
    return os.str();
  }

  void write(const std::string &path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << csv();
  }

 private:
  struct Row {
    int epoch;
    std::vector<double> values;
  };
  std::vector<std::string> columns_;
  std::vector<Row> rows_;
};

inline void check_finite_loss(double v, const std::string &where) {
  if (!std::isfinite(v)) throw TrainingError(TrainingError::Kind::kNonFiniteLoss, where);
}

}  // namespace anaforge
