// Copyright 2026 The DCP Toolkit Authors
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

#include "dcp/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace dcp {
namespace {

absl::Status CheckProbabilityRow(std::span<const double> row,
                                 absl::string_view what) {
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!(row[i] >= 0.0) || !std::isfinite(row[i])) {
      return absl::InvalidArgumentError(
          absl::StrFormat("%s: entry %d is not a non-negative number", what,
                          i));
    }
    total += row[i];
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%s: row sums to %.17g, expected 1", what, total));
  }
  return absl::OkStatus();
}

std::vector<double> Marginals(const Matrix& joint) {
  std::vector<double> out(joint.rows(), 0.0);
  for (std::size_t s = 0; s < joint.rows(); ++s) {
    for (double v : joint.row(s)) out[s] += v;
  }
  return out;
}

std::vector<SecretPair> DefaultAdjacency(const World& world) {
  std::vector<SecretPair> pairs;
  for (int s = 0; s < world.num_secrets(); ++s) {
    for (int t = 0; t < world.num_secrets(); ++t) {
      if (s != t && world.secret_marginals[s] > 0.0 &&
          world.secret_marginals[t] > 0.0) {
        pairs.push_back({s, t});
      }
    }
  }
  return pairs;
}

absl::StatusOr<Matrix> ParseMatrix(const nlohmann::json& rows,
                                   absl::string_view what) {
  if (!rows.is_array()) {
    return absl::InvalidArgumentError(absl::StrCat(what, " must be an array"));
  }
  std::vector<std::vector<double>> out;
  for (const auto& row : rows) {
    if (!row.is_array()) {
      return absl::InvalidArgumentError(
          absl::StrCat(what, " rows must be arrays"));
    }
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number()) {
        return absl::InvalidArgumentError(
            absl::StrCat(what, " entries must be numbers"));
      }
      r.push_back(v.get<double>());
    }
    if (!out.empty() && r.size() != out.front().size()) {
      return absl::InvalidArgumentError(
          absl::StrCat(what, " rows have different lengths"));
    }
    out.push_back(std::move(r));
  }
  return Matrix::FromRows(out);
}

absl::StatusOr<std::vector<std::string>> ParseLabels(const nlohmann::json& doc,
                                                     absl::string_view key) {
  auto it = doc.find(std::string(key));
  if (it == doc.end() || !it->is_array()) {
    return absl::InvalidArgumentError(
        absl::StrCat("missing array field '", key, "'"));
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      return absl::InvalidArgumentError(
          absl::StrCat("'", key, "' must contain strings"));
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

nlohmann::json MatrixToJson(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.RowVector(r));
  return rows;
}

}  // namespace

double World::PStar() const {
  double best = kInfinity;
  for (const SecretPair& p : adjacency) {
    best = std::min({best, secret_marginals[p.first],
                     secret_marginals[p.second]});
  }
  if (adjacency.empty()) {
    for (double m : secret_marginals) {
      if (m > 0.0) best = std::min(best, m);
    }
  }
  return std::isfinite(best) ? best : 0.0;
}

absl::Status ValidateWorld(const World& world) {
  const Matrix& joint = world.joint;
  if (world.secrets.empty() || world.datasets.empty()) {
    return absl::InvalidArgumentError("world needs secrets and datasets");
  }
  if (joint.rows() != world.secrets.size() ||
      joint.cols() != world.datasets.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "joint is %dx%d but there are %d secrets and %d datasets",
        joint.rows(), joint.cols(), world.secrets.size(),
        world.datasets.size()));
  }
  double total = 0.0;
  for (std::size_t s = 0; s < joint.rows(); ++s) {
    for (std::size_t x = 0; x < joint.cols(); ++x) {
      const double v = joint(s, x);
      if (!(v >= 0.0) || !std::isfinite(v)) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "joint entry (%d, %d) is not a non-negative number", s, x));
      }
      total += v;
    }
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "invariant 'joint sums to 1' violated: total is %.17g", total));
  }
  std::set<SecretPair> pairs(world.adjacency.begin(), world.adjacency.end());
  for (const SecretPair& p : world.adjacency) {
    if (p.first < 0 || p.second < 0 || p.first >= world.num_secrets() ||
        p.second >= world.num_secrets()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "adjacency pair (%d, %d) is out of range", p.first, p.second));
    }
    if (p.first == p.second) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "adjacency pair (%d, %d) relates a secret to itself", p.first,
          p.second));
    }
    for (int s : {p.first, p.second}) {
      if (!(world.secret_marginals[s] > 0.0)) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "adjacency pair (%d, %d) touches secret '%s' with zero marginal",
            p.first, p.second, world.secrets[s]));
      }
    }
    if (!pairs.contains({p.second, p.first})) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "adjacency is not symmetric: (%d, %d) present without (%d, %d)",
          p.first, p.second, p.second, p.first));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<SecretPair>> BuildAdjacency(const Matrix& metric,
                                                       double threshold,
                                                       const World& world) {
  const std::size_t n = world.secrets.size();
  if (metric.rows() != n || metric.cols() != n) {
    return absl::InvalidArgumentError(
        absl::StrFormat("metric table must be %dx%d", n, n));
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      if (!(metric(s, t) >= 0.0)) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "metric entry (%d, %d) is negative", s, t));
      }
      if (std::abs(metric(s, t) - metric(t, s)) > kProbabilityTolerance) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "metric is asymmetric at (%d, %d)", s, t));
      }
    }
  }
  std::vector<SecretPair> pairs;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      if (s != t && metric(s, t) <= threshold &&
          world.secret_marginals[s] > 0.0 && world.secret_marginals[t] > 0.0) {
        pairs.push_back({static_cast<int>(s), static_cast<int>(t)});
      }
    }
  }
  return pairs;
}

absl::StatusOr<World> MakeWorld(std::vector<std::string> secrets,
                                std::vector<std::string> datasets,
                                Matrix joint,
                                std::optional<std::vector<SecretPair>> pairs,
                                std::optional<MetricTable> metric) {
  if (pairs.has_value() && metric.has_value()) {
    return absl::InvalidArgumentError(
        "adjacency takes either pairs or a metric, not both");
  }
  World world;
  world.secrets = std::move(secrets);
  world.datasets = std::move(datasets);
  world.joint = std::move(joint);
  world.secret_marginals = Marginals(world.joint);
  if (absl::Status s = ValidateWorld(world); !s.ok()) return s;
  if (pairs.has_value()) {
    world.adjacency = *std::move(pairs);
  } else if (metric.has_value()) {
    absl::StatusOr<std::vector<SecretPair>> built =
        BuildAdjacency(metric->distances, metric->threshold, world);
    if (!built.ok()) return built.status();
    world.adjacency = *std::move(built);
  } else {
    world.adjacency = DefaultAdjacency(world);
  }
  std::sort(world.adjacency.begin(), world.adjacency.end());
  world.adjacency.erase(
      std::unique(world.adjacency.begin(), world.adjacency.end()),
      world.adjacency.end());
  if (absl::Status s = ValidateWorld(world); !s.ok()) return s;
  return world;
}

absl::StatusOr<std::vector<double>> ConditionalDataset(const World& world,
                                                       int secret) {
  if (secret < 0 || secret >= world.num_secrets()) {
    return absl::OutOfRangeError(absl::StrCat("no secret ", secret));
  }
  const double mass = world.secret_marginals[secret];
  if (!(mass > 0.0)) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "secret '%s' has zero marginal", world.secrets[secret]));
  }
  std::vector<double> out = world.joint.RowVector(secret);
  for (double& v : out) v /= mass;
  return out;
}

InvertibilityReport IsInvertible(const World& world) {
  InvertibilityReport report;
  report.invertible = true;
  report.witness.assign(world.num_secrets(), -1);
  for (int s = 0; s < world.num_secrets(); ++s) {
    const double mass = world.secret_marginals[s];
    if (!(mass > 0.0)) continue;
    for (int x = 0; x < world.num_datasets(); ++x) {
      if (std::abs(world.joint(s, x) / mass - 1.0) <= kProbabilityTolerance) {
        report.witness[s] = x;
        break;
      }
    }
    if (report.witness[s] < 0) report.invertible = false;
  }
  if (!report.invertible) report.witness.assign(world.num_secrets(), -1);
  return report;
}

absl::Status ValidateMechanism(const MechanismKernel& mech, int num_datasets) {
  if (static_cast<int>(mech.kernel.rows()) != num_datasets) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "mechanism '%s' has %d rows, expected one per dataset (%d)",
        mech.name, mech.kernel.rows(), num_datasets));
  }
  if (mech.kernel.cols() == 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("mechanism '%s' has no outputs", mech.name));
  }
  if (!mech.outputs.empty() && mech.outputs.size() != mech.kernel.cols()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "mechanism '%s' labels %d outputs but its kernel has %d columns",
        mech.name, mech.outputs.size(), mech.kernel.cols()));
  }
  for (std::size_t x = 0; x < mech.kernel.rows(); ++x) {
    if (absl::Status s = CheckProbabilityRow(
            mech.kernel.row(x),
            absl::StrFormat("mechanism '%s' row %d", mech.name, x));
        !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

Matrix GroupMarginal(const DependenceGroup& group,
                     const std::vector<MechanismKernel>& mechs,
                     int position) {
  std::vector<std::size_t> sizes;
  for (int m : group.members) sizes.push_back(mechs[m].kernel.cols());
  std::size_t stride = 1;
  for (std::size_t i = position + 1; i < sizes.size(); ++i) stride *= sizes[i];
  const std::size_t width = sizes[position];
  Matrix out(group.joint_kernel.rows(), width);
  for (std::size_t x = 0; x < group.joint_kernel.rows(); ++x) {
    for (std::size_t j = 0; j < group.joint_kernel.cols(); ++j) {
      out(x, (j / stride) % width) += group.joint_kernel(x, j);
    }
  }
  return out;
}

absl::Status ValidateDependenceGroups(
    const std::vector<DependenceGroup>& groups,
    const std::vector<MechanismKernel>& mechs, int num_datasets) {
  std::set<int> seen;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const DependenceGroup& group = groups[g];
    if (group.members.size() < 2) {
      return absl::InvalidArgumentError(
          absl::StrFormat("dependence group %d needs at least 2 members", g));
    }
    std::size_t product = 1;
    for (int m : group.members) {
      if (m < 0 || m >= static_cast<int>(mechs.size())) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "dependence group %d names unknown mechanism %d", g, m));
      }
      if (!seen.insert(m).second) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "mechanism %d belongs to more than one dependence group", m));
      }
      product *= mechs[m].kernel.cols();
    }
    if (static_cast<int>(group.joint_kernel.rows()) != num_datasets ||
        group.joint_kernel.cols() != product) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "dependence group %d joint kernel must be %dx%d", g, num_datasets,
          product));
    }
    for (std::size_t x = 0; x < group.joint_kernel.rows(); ++x) {
      if (absl::Status s = CheckProbabilityRow(
              group.joint_kernel.row(x),
              absl::StrFormat("dependence group %d row %d", g, x));
          !s.ok()) {
        return s;
      }
    }
    for (std::size_t pos = 0; pos < group.members.size(); ++pos) {
      const Matrix marginal = GroupMarginal(group, mechs, pos);
      const Matrix& kernel = mechs[group.members[pos]].kernel;
      for (std::size_t x = 0; x < kernel.rows(); ++x) {
        for (std::size_t y = 0; y < kernel.cols(); ++y) {
          if (std::abs(marginal(x, y) - kernel(x, y)) > kMarginalTolerance) {
            return absl::InvalidArgumentError(absl::StrFormat(
                "dependence group %d does not marginalize to mechanism %d at "
                "dataset %d, output %d (%.12g vs %.12g)",
                g, group.members[pos], x, y, marginal(x, y), kernel(x, y)));
          }
        }
      }
    }
  }
  return absl::OkStatus();
}

std::vector<double> EffectiveKernel::Cumulative(int secret) const {
  std::vector<double> out(psi.cols());
  double running = 0.0;
  for (std::size_t y = 0; y < psi.cols(); ++y) {
    running += psi(secret, y);
    out[y] = running;
  }
  return out;
}

absl::StatusOr<EffectiveKernel> ComputeEffectiveKernel(
    const World& world, const MechanismKernel& mech) {
  if (static_cast<int>(mech.kernel.rows()) != world.num_datasets()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "mechanism '%s' has %d rows but the world has %d datasets", mech.name,
        mech.kernel.rows(), world.num_datasets()));
  }
  EffectiveKernel out;
  out.psi = Matrix(world.num_secrets(), mech.kernel.cols());
  for (int s = 0; s < world.num_secrets(); ++s) {
    const double mass = world.secret_marginals[s];
    if (!(mass > 0.0)) continue;
    for (int x = 0; x < world.num_datasets(); ++x) {
      const double w = world.joint(s, x) / mass;
      if (w == 0.0) continue;
      for (std::size_t y = 0; y < mech.kernel.cols(); ++y) {
        out.psi(s, y) += w * mech.kernel(x, y);
      }
    }
  }
  return out;
}

absl::StatusOr<Model> ParseModel(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("model must be a JSON object");
  }
  absl::StatusOr<std::vector<std::string>> secrets =
      ParseLabels(doc, "secrets");
  if (!secrets.ok()) return secrets.status();
  absl::StatusOr<std::vector<std::string>> datasets =
      ParseLabels(doc, "datasets");
  if (!datasets.ok()) return datasets.status();
  if (!doc.contains("joint")) {
    return absl::InvalidArgumentError("missing field 'joint'");
  }
  absl::StatusOr<Matrix> joint = ParseMatrix(doc["joint"], "joint");
  if (!joint.ok()) return joint.status();

  std::optional<std::vector<SecretPair>> pairs;
  std::optional<MetricTable> metric;
  if (auto it = doc.find("adjacency"); it != doc.end() && !it->is_null()) {
    if (it->contains("pairs")) {
      pairs.emplace();
      for (const auto& p : (*it)["pairs"]) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
            !p[1].is_number_integer()) {
          return absl::InvalidArgumentError(
              "adjacency pairs must be [i, j] integer arrays");
        }
        pairs->push_back({p[0].get<int>(), p[1].get<int>()});
      }
    } else if (it->contains("metric")) {
      absl::StatusOr<Matrix> table =
          ParseMatrix((*it)["metric"], "adjacency metric");
      if (!table.ok()) return table.status();
      if (!it->contains("d") || !(*it)["d"].is_number()) {
        return absl::InvalidArgumentError("adjacency metric needs 'd'");
      }
      metric = MetricTable{*std::move(table), (*it)["d"].get<double>()};
    } else {
      return absl::InvalidArgumentError(
          "adjacency must hold 'pairs' or 'metric'");
    }
  }

  Model model;
  absl::StatusOr<World> world =
      MakeWorld(*std::move(secrets), *std::move(datasets), *std::move(joint),
                std::move(pairs), std::move(metric));
  if (!world.ok()) return world.status();
  model.world = *std::move(world);

  if (auto it = doc.find("mechanisms"); it != doc.end()) {
    for (const auto& m : *it) {
      MechanismKernel mech;
      mech.name = m.value("name", "");
      if (m.contains("outputs")) {
        for (const auto& o : m["outputs"]) mech.outputs.push_back(o.dump());
        for (std::size_t i = 0; i < mech.outputs.size(); ++i) {
          if (m["outputs"][i].is_string()) {
            mech.outputs[i] = m["outputs"][i].get<std::string>();
          }
        }
      }
      if (!m.contains("kernel")) {
        return absl::InvalidArgumentError(
            absl::StrCat("mechanism '", mech.name, "' has no kernel"));
      }
      absl::StatusOr<Matrix> kernel = ParseMatrix(m["kernel"], "kernel");
      if (!kernel.ok()) return kernel.status();
      mech.kernel = *std::move(kernel);
      if (absl::Status s =
              ValidateMechanism(mech, model.world.num_datasets());
          !s.ok()) {
        return s;
      }
      model.mechanisms.push_back(std::move(mech));
    }
  }

  if (auto it = doc.find("dependence"); it != doc.end() && !it->is_null()) {
    for (const auto& g : *it) {
      DependenceGroup group;
      if (!g.contains("members") || !g.contains("joint_kernel")) {
        return absl::InvalidArgumentError(
            "dependence groups need 'members' and 'joint_kernel'");
      }
      group.members = g["members"].get<std::vector<int>>();
      absl::StatusOr<Matrix> kernel =
          ParseMatrix(g["joint_kernel"], "joint_kernel");
      if (!kernel.ok()) return kernel.status();
      group.joint_kernel = *std::move(kernel);
      if (g.contains("joint_outputs")) {
        for (const auto& o : g["joint_outputs"]) {
          group.joint_outputs.push_back(o.is_string() ? o.get<std::string>()
                                                      : o.dump());
        }
      }
      model.dependence.push_back(std::move(group));
    }
    if (absl::Status s = ValidateDependenceGroups(
            model.dependence, model.mechanisms, model.world.num_datasets());
        !s.ok()) {
      return s;
    }
  }
  return model;
}

absl::StatusOr<nlohmann::json> ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json doc =
      nlohmann::json::parse(buffer.str(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    return absl::InvalidArgumentError(
        absl::StrCat("parse error: ", path, " is not valid JSON"));
  }
  return doc;
}

absl::StatusOr<Model> LoadModel(const std::string& path) {
  absl::StatusOr<nlohmann::json> doc = ReadJsonFile(path);
  if (!doc.ok()) return doc.status();
  return ParseModel(*doc);
}

absl::StatusOr<World> LoadWorld(const std::string& path) {
  absl::StatusOr<Model> model = LoadModel(path);
  if (!model.ok()) return model.status();
  return std::move(model->world);
}

nlohmann::json ModelToJson(const Model& model) {
  nlohmann::json doc;
  doc["secrets"] = model.world.secrets;
  doc["datasets"] = model.world.datasets;
  doc["joint"] = MatrixToJson(model.world.joint);
  nlohmann::json pairs = nlohmann::json::array();
  for (const SecretPair& p : model.world.adjacency) {
    pairs.push_back({p.first, p.second});
  }
  doc["adjacency"] = {{"pairs", pairs}};
  doc["mechanisms"] = nlohmann::json::array();
  for (const MechanismKernel& m : model.mechanisms) {
    doc["mechanisms"].push_back(
        {{"name", m.name}, {"outputs", m.outputs},
         {"kernel", MatrixToJson(m.kernel)}});
  }
  if (!model.dependence.empty()) {
    doc["dependence"] = nlohmann::json::array();
    for (const DependenceGroup& g : model.dependence) {
      doc["dependence"].push_back({{"members", g.members},
                                   {"joint_kernel",
                                    MatrixToJson(g.joint_kernel)},
                                   {"joint_outputs", g.joint_outputs}});
    }
  }
  return doc;
}

}  // namespace dcp
