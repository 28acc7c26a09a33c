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

#include "dnd/analysis/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "dnd/encoder3d/encoder3d.hpp"
#include "dnd/util/error.hpp"

namespace dnd::analysis {

using ad::Array;
using ad::Shape;

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson: sequences differ in length");
  if (x.size() < 2) throw DimensionError("pearson: needs at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // Relative threshold so rounding noise on a constant input is rejected.
  const auto flat = [](double ss, double m, double count) {
    return ss <= 1e-24 * std::max(1.0, m * m) * count;
  };
  if (flat(sxx, mx, n) || flat(syy, my, n)) {
    throw DegenerateError("pearson: correlation undefined for a constant sequence");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

AttentionReport attention_report(enc2d::Encoder2D<train::Real>& student, const mol::Dataset& data,
                                 const MoleculeObserver& observer) {
  const int num_layers = student.config().num_layers;
  const int num_heads = student.config().num_heads;
  const std::size_t slots = static_cast<std::size_t>(num_layers * num_heads);
  std::vector<double> corr_sum(slots, 0), dist_sum(slots, 0);
  std::vector<std::size_t> corr_n(slots, 0), dist_n(slots, 0);
  AttentionReport report;

  const bool had_capture = student.config().capture_attention;
  student.set_capture_attention(true);
  try {
    for (const auto& rec : data.records) {
      if (!rec.conformer) {
        throw ValidationError("attention analysis: record '" + rec.id + "' has no conformer");
      }
      const std::size_t n = rec.graph.num_atoms();
      if (n < 3) {
        ++report.skipped_small;
        continue;
      }
      if (observer) observer(rec);
      const auto tokens =
          enc2d::tokenize(rec.graph, train::eval_identifier_seed(rec), student.config());
      ad::Tape<train::Real> tape(false);
      const auto enc = student.encode(tape, tokens);
      const auto& trace = *enc.trace;
      const auto dist = enc3d::pairwise_distances(rec.conformer->coords);
      std::vector<double> d;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) d.push_back(dist[i * n + j]);
      for (int l = 0; l < num_layers; ++l) {
        for (int h = 0; h < num_heads; ++h) {
          const std::size_t slot = static_cast<std::size_t>(l * num_heads + h);
          const auto& logits = trace.logit(l, h);
          const auto& weights = trace.weight(l, h);
          std::vector<double> x;
          double wsum = 0, wd = 0;
          std::size_t k = 0;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              if (i == j) continue;
              x.push_back(logits(i, j));
              wsum += weights(i, j);
              wd += weights(i, j) * d[k++];
            }
          }
          try {
            corr_sum[slot] += std::abs(pearson(x, d));
            ++corr_n[slot];
          } catch (const DegenerateError&) {
            ++report.skipped_constant;
          }
          if (wsum > 0) {
            dist_sum[slot] += wd / wsum;
            ++dist_n[slot];
          }
        }
      }
      ++report.molecules_used;
    }
  } catch (...) {
    student.set_capture_attention(had_capture);
    throw;
  }
  student.set_capture_attention(had_capture);
  if (report.molecules_used == 0) {
    throw DegenerateError("attention analysis: no molecule with at least 3 atoms");
  }
  for (int l = 0; l < num_layers; ++l) {
    for (int h = 0; h < num_heads; ++h) {
      const std::size_t slot = static_cast<std::size_t>(l * num_heads + h);
      report.correlations.push_back(
          {l, h, corr_n[slot] ? corr_sum[slot] / static_cast<double>(corr_n[slot]) : 0.0,
           corr_n[slot]});
      report.distances.push_back(
          {l, h, dist_n[slot] ? dist_sum[slot] / static_cast<double>(dist_n[slot]) : 0.0,
           dist_n[slot]});
    }
  }
  return report;
}

std::vector<HeadCorrelation> attention_distance_report(enc2d::Encoder2D<train::Real>& student,
                                                       const mol::Dataset& data) {
  return attention_report(student, data).correlations;
}

std::vector<HeadDistance> attention_weighted_distance(enc2d::Encoder2D<train::Real>& student,
                                                      const mol::Dataset& data) {
  return attention_report(student, data).distances;
}

std::unique_ptr<enc2d::Encoder2D<train::Real>> load_student(const train::Checkpoint& ckpt) {
  train::require_stage(ckpt,
                       {train::Stage::kDistillGraph, train::Stage::kDistillNode,
                        train::Stage::kContrastive, train::Stage::kFinetune},
                       "student analysis");
  auto student = std::make_unique<enc2d::Encoder2D<train::Real>>(
      ckpt.config.at("student").get<enc2d::Encoder2DConfig>(), 0);
  train::restore_parameters(ckpt, student->params());
  return student;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  return out;
}

}  // namespace

void write_correlations_csv(const std::vector<HeadCorrelation>& rows,
                            const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "layer,head,abs_pearson\n";
  for (const auto& r : rows) out << r.layer << ',' << r.head << ',' << r.abs_pearson << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_distances_csv(const std::vector<HeadDistance>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "layer,head,mean_weighted_distance_angstrom\n";
  for (const auto& r : rows) {
    out << r.layer << ',' << r.head << ',' << r.mean_weighted_distance << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string histogram_svg(std::span<const double> values, int bins, double lo, double hi,
                          const std::string& title) {
  if (bins < 1 || !(hi > lo)) throw ContractError("histogram: need bins >= 1 and hi > lo");
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * bins));
    b = std::clamp<long>(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  const std::size_t peak = std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end()));
  const double width = 480, height = 240, left = 40, top = 30, bar = width / bins;
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width + 2 * left
      << "\" height=\"" << height + 2 * top << "\">\n";
  std::string escaped;
  for (char c : title) {
    if (c == '<') escaped += "&lt;";
    else if (c == '>') escaped += "&gt;";
    else if (c == '&') escaped += "&amp;";
    else escaped += c;
  }
  svg << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << escaped << "</text>\n";
  for (int b = 0; b < bins; ++b) {
    const double h = height * static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                     static_cast<double>(peak);
    svg << "<rect x=\"" << left + b * bar << "\" y=\"" << top + height - h << "\" width=\""
        << bar * 0.9 << "\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
  }
  svg << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << left + width
      << "\" y2=\"" << top + height << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"" << top + height + 18
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << lo << "</text>\n";
  svg << "<text x=\"" << left + width - 20 << "\" y=\"" << top + height + 18
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << hi << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void GaussianMixtureOracle::validate() const {
  if (components.empty()) throw ContractError("oracle: no components");
  if (weights.size() != components.size()) {
    throw ContractError("oracle: weights and components differ in count");
  }
  double total = 0;
  for (double w : weights) {
    if (!(w > 0)) throw ContractError("oracle: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("oracle: weights must sum to 1");
  for (const auto& c : components) {
    if (c.size() != components.front().size()) {
      throw ContractError("oracle: components differ in atom count");
    }
  }
  if (!(sigma > 0)) throw ContractError("oracle: sigma must be positive");
}

ad::Array<double> oracle_denoiser(const GaussianMixtureOracle& oracle,
                                  const std::vector<mol::Vec3>& perturbed) {
  oracle.validate();
  const std::size_t n = perturbed.size();
  if (oracle.components.front().size() != n) {
    throw DimensionError("oracle: perturbed coordinates do not match component atom count");
  }
  const std::size_t k = oracle.components.size();
  std::vector<double> logw(k);
  for (std::size_t c = 0; c < k; ++c) {
    double sq = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) {
        const double diff = perturbed[i][a] - oracle.components[c][i][a];
        sq += diff * diff;
      }
    logw[c] = std::log(oracle.weights[c]) - sq / (2 * oracle.sigma * oracle.sigma);
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0;
  for (double& l : logw) z += std::exp(l - mx);
  Array<double> out(Shape{n, 3});
  for (std::size_t c = 0; c < k; ++c) {
    const double w = std::exp(logw[c] - mx) / z;
    if (w == 0) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a)
        out(i, static_cast<std::size_t>(a)) +=
            w * (perturbed[i][a] - oracle.components[c][i][a]) / oracle.sigma;
  }
  return out;
}

std::vector<mol::Vec3> kabsch_align(const std::vector<mol::Vec3>& mobile,
                                    const std::vector<mol::Vec3>& target) {
  if (mobile.size() != target.size() || mobile.empty()) {
    throw DimensionError("kabsch: point sets must be non-empty and equal in size");
  }
  const std::size_t n = mobile.size();
  Eigen::Vector3d pc = Eigen::Vector3d::Zero(), qc = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    pc += Eigen::Vector3d(mobile[i][0], mobile[i][1], mobile[i][2]);
    qc += Eigen::Vector3d(target[i][0], target[i][1], target[i][2]);
  }
  pc /= static_cast<double>(n);
  qc /= static_cast<double>(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = Eigen::Vector3d(mobile[i][0], mobile[i][1], mobile[i][2]) - pc;
    const Eigen::Vector3d q = Eigen::Vector3d(target[i][0], target[i][1], target[i][2]) - qc;
    h += p * q.transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();
  std::vector<mol::Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p =
        r * (Eigen::Vector3d(mobile[i][0], mobile[i][1], mobile[i][2]) - pc) + qc;
    out[i] = {p[0], p[1], p[2]};
  }
  return out;
}

ad::Array<double> aligned_oracle_denoiser(const std::vector<mol::Vec3>& reference,
                                          const std::vector<mol::Vec3>& perturbed, double sigma) {
  GaussianMixtureOracle oracle;
  oracle.components = {kabsch_align(reference, perturbed)};
  oracle.weights = {1.0};
  oracle.sigma = sigma;
  return oracle_denoiser(oracle, perturbed);
}

void export_curves(const std::vector<std::pair<std::string, train::MetricsLog>>& logs,
                   std::ostream& out) {
  std::set<std::pair<std::string, int>> seen;
  out << "variant,epoch,split,loss,log10_loss,gap\n" << std::setprecision(17);
  for (const auto& [variant, log] : logs) {
    for (const auto& r : log.rows()) {
      if (!seen.insert({variant, r.epoch}).second) {
        throw ContractError("export_curves: variant '" + variant + "' repeats epoch " +
                            std::to_string(r.epoch));
      }
      const double gap = r.val_loss - r.train_loss;
      out << variant << ',' << r.epoch << ",train," << r.train_loss << ','
          << std::log10(r.train_loss) << ',' << gap << '\n';
      out << variant << ',' << r.epoch << ",val," << r.val_loss << ',' << std::log10(r.val_loss)
          << ',' << gap << '\n';
    }
  }
}

void export_curves(const std::vector<std::pair<std::string, train::MetricsLog>>& logs,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  export_curves(logs, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace dnd::analysis
