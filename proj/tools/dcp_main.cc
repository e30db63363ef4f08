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

// dcp: command-line front end for checking, composing, auditing and
// designing DCP mechanisms on finite worlds.
//
// Exit codes: 0 success, 1 a property or certificate failed, 2 bad usage or
// input.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "dcp/audit.h"
#include "dcp/composition.h"
#include "dcp/copula.h"
#include "dcp/divergence.h"
#include "dcp/experiment.h"
#include "dcp/ic.h"
#include "dcp/model.h"
#include "dcp/pld.h"
#include "json.hpp"

namespace {

constexpr char kVersion[] = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct GlobalFlags {
  std::string model;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t cap = dcp::kDefaultOutcomeCap;
  int bins = 512;
};

int ExitCodeFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kNotFound:
    case absl::StatusCode::kOutOfRange:
    case absl::StatusCode::kResourceExhausted:
      return kExitUsage;
    default:
      return kExitFailed;
  }
}

int Fail(const absl::Status& status) {
  std::cerr << "dcp: " << status.message() << "\n";
  return ExitCodeFor(status);
}

std::string Sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += absl::StrFormat("%02x", digest[i]);
  }
  return hex;
}

std::string ModelHash(const std::string& path) {
  if (path.empty()) return "none";
  std::ifstream in(path, std::ios::binary);
  if (!in) return "none";
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Sha256Hex(buffer.str());
}

// Writes the provenance header and `body` to --out, or stdout.
int Emit(const GlobalFlags& flags, const std::string& body) {
  const std::string header =
      absl::StrFormat("# dcp %s seed=%d model_sha=%s\n", kVersion, flags.seed,
                      ModelHash(flags.model));
  if (flags.out.empty()) {
    std::cout << header << body;
    return kExitOk;
  }
  std::ofstream out(flags.out, std::ios::binary);
  if (!out) {
    std::cerr << "dcp: cannot write " << flags.out << "\n";
    return kExitUsage;
  }
  out << header << body;
  return kExitOk;
}

absl::StatusOr<dcp::Model> RequireModel(const GlobalFlags& flags) {
  if (flags.model.empty()) {
    return absl::InvalidArgumentError("--model is required");
  }
  return dcp::LoadModel(flags.model);
}

std::string PairLabel(const dcp::World& world, dcp::SecretPair p) {
  return absl::StrCat(world.secrets[p.first], ",", world.secrets[p.second]);
}

std::string Num(double v) { return absl::StrFormat("%.12g", v); }

nlohmann::json MatrixJson(const dcp::Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.RowVector(r));
  return rows;
}

absl::StatusOr<dcp::SecretPair> ParsePair(const dcp::World& world,
                                          const std::vector<std::string>& pair) {
  if (pair.empty()) {
    if (world.adjacency.empty()) {
      return absl::InvalidArgumentError("world has no adjacent pairs");
    }
    return world.adjacency.front();
  }
  if (pair.size() != 2) {
    return absl::InvalidArgumentError("--pair takes two secrets");
  }
  int idx[2];
  for (int k = 0; k < 2; ++k) {
    auto it = std::find(world.secrets.begin(), world.secrets.end(), pair[k]);
    if (it != world.secrets.end()) {
      idx[k] = static_cast<int>(it - world.secrets.begin());
      continue;
    }
    try {
      idx[k] = std::stoi(pair[k]);
    } catch (const std::exception&) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown secret '", pair[k], "'"));
    }
    if (idx[k] < 0 || idx[k] >= world.num_secrets()) {
      return absl::InvalidArgumentError(
          absl::StrCat("secret index out of range: ", pair[k]));
    }
  }
  return dcp::SecretPair{idx[0], idx[1]};
}

// ---------------------------------------------------------------- check

int RunCheck(const GlobalFlags& flags, double eps, double delta) {
  absl::StatusOr<dcp::Model> model = RequireModel(flags);
  if (!model.ok()) return Fail(model.status());
  const dcp::World& world = model->world;
  nlohmann::json report;
  report["eps"] = eps;
  report["delta"] = delta;
  bool all = true;
  report["mechanisms"] = nlohmann::json::array();
  for (const dcp::MechanismKernel& m : model->mechanisms) {
    absl::StatusOr<dcp::DcpCheck> c = dcp::CheckDcp(world, m, eps, delta);
    if (!c.ok()) return Fail(c.status());
    all = all && c->holds;
    report["mechanisms"].push_back(
        {{"name", m.name},
         {"holds", c->holds},
         {"worst_pair", PairLabel(world, c->worst_pair)},
         {"worst_delta", c->worst_delta}});
  }
  if (!model->mechanisms.empty()) {
    absl::StatusOr<dcp::ComposedJoint> joint = dcp::ComposeJoint(
        world, model->mechanisms, model->dependence, flags.cap);
    if (!joint.ok()) return Fail(joint.status());
    absl::StatusOr<dcp::DcpCheck> c =
        dcp::CheckDcpChannel(world, joint->rows, eps, delta);
    if (!c.ok()) return Fail(c.status());
    all = all && c->holds;
    report["composition"] = {{"holds", c->holds},
                             {"worst_pair", PairLabel(world, c->worst_pair)},
                             {"worst_delta", c->worst_delta}};
  }
  report["holds"] = all;
  const int code = Emit(flags, report.dump(2) + "\n");
  return code != kExitOk ? code : (all ? kExitOk : kExitFailed);
}

// ---------------------------------------------------------------- compose

int RunCompose(const GlobalFlags& flags, const std::vector<double>& delta_grid,
               const std::vector<double>& eps_grid) {
  absl::StatusOr<dcp::Model> model = RequireModel(flags);
  if (!model.ok()) return Fail(model.status());
  const dcp::World& world = model->world;
  absl::StatusOr<dcp::CompositionReport> report =
      dcp::ComputeCompositionReport(world, model->mechanisms,
                                    model->dependence, delta_grid, eps_grid,
                                    flags.cap);
  if (!report.ok()) return Fail(report.status());
  std::string body = "s0,s1,delta_g,underline_opt,true_opt,overline_opt\n";
  for (const dcp::CompositionRow& r : report->opt_rows) {
    absl::StrAppend(&body, PairLabel(world, r.pair), ",", Num(r.delta_g), ",",
                    Num(r.underline_opt), ",", Num(r.true_opt), ",",
                    Num(r.overline_opt), "\n");
  }
  absl::StrAppend(&body,
                  "\ns0,s1,eps_g,underline_dt,true_dt,overline_dt\n");
  for (const dcp::ProfileRow& r : report->profile_rows) {
    absl::StrAppend(&body, PairLabel(world, r.pair), ",", Num(r.eps_g), ",",
                    Num(r.underline_dt), ",", Num(r.true_dt), ",",
                    Num(r.overline_dt), "\n");
  }
  const int code = Emit(flags, body);
  if (code != kExitOk) return code;
  if (!report->OrderingHolds()) {
    std::cerr << "dcp: ordering underline <= true <= overline violated\n";
    return kExitFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- pld

absl::StatusOr<dcp::AdditiveDiscretization> GridFromCopula(
    const nlohmann::json& doc, const dcp::World& world, int bins) {
  dcp::AdditiveDiscretization grid;
  grid.bins = bins;
  for (const char* key : {"query1", "query2"}) {
    if (!doc.contains(key)) {
      return absl::InvalidArgumentError(
          absl::StrCat("copula block needs '", key, "'"));
    }
  }
  grid.query1 = doc["query1"].get<std::vector<double>>();
  grid.query2 = doc["query2"].get<std::vector<double>>();
  if (static_cast<int>(grid.query1.size()) != world.num_datasets() ||
      static_cast<int>(grid.query2.size()) != world.num_datasets()) {
    return absl::InvalidArgumentError("queries need one value per dataset");
  }
  return grid;
}

int RunPld(const GlobalFlags& flags, const std::string& kind,
           const std::vector<std::string>& pair_arg,
           const std::optional<int>& mechanism) {
  absl::StatusOr<dcp::Model> model = RequireModel(flags);
  if (!model.ok()) return Fail(model.status());
  const dcp::World& world = model->world;
  absl::StatusOr<dcp::SecretPair> pair = ParsePair(world, pair_arg);
  if (!pair.ok()) return Fail(pair.status());

  absl::StatusOr<dcp::Pld> pld = absl::InternalError("unset");
  if (kind == "copula") {
    absl::StatusOr<nlohmann::json> doc = dcp::ReadJsonFile(flags.model);
    if (!doc.ok()) return Fail(doc.status());
    if (!doc->contains("copula")) {
      return Fail(absl::InvalidArgumentError("model has no 'copula' block"));
    }
    absl::StatusOr<dcp::GaussianCopulaSpec> spec =
        dcp::ParseCopulaSpec((*doc)["copula"], world);
    if (!spec.ok()) return Fail(spec.status());
    absl::StatusOr<dcp::AdditiveDiscretization> grid =
        GridFromCopula((*doc)["copula"], world, flags.bins);
    if (!grid.ok()) return Fail(grid.status());
    pld = dcp::CopulaPlrv(*spec, world, *grid, *pair);
  } else if (mechanism.has_value()) {
    if (*mechanism < 0 ||
        *mechanism >= static_cast<int>(model->mechanisms.size())) {
      return Fail(absl::InvalidArgumentError("--mechanism out of range"));
    }
    absl::StatusOr<dcp::EffectiveKernel> psi =
        dcp::ComputeEffectiveKernel(world, model->mechanisms[*mechanism]);
    if (!psi.ok()) return Fail(psi.status());
    pld = dcp::PldFromPair(dcp::ChannelPair(psi->psi, *pair));
  } else if (kind == "true") {
    absl::StatusOr<dcp::ComposedJoint> joint = dcp::ComposeJoint(
        world, model->mechanisms, model->dependence, flags.cap);
    if (!joint.ok()) return Fail(joint.status());
    pld = dcp::PldFromPair(dcp::ChannelPair(joint->rows, *pair));
  } else if (kind == "underline") {
    absl::StatusOr<dcp::Matrix> product = dcp::ProductOfEffectiveKernels(
        world, model->mechanisms, flags.cap);
    if (!product.ok()) return Fail(product.status());
    pld = dcp::PldFromPair(dcp::ChannelPair(*product, *pair));
  } else if (kind == "overline") {
    pld = dcp::OverlinePld(world, model->mechanisms, model->dependence, *pair,
                           flags.cap);
  }
  if (!pld.ok()) return Fail(pld.status());
  std::ostringstream body;
  dcp::WritePldCsv(*pld, body);
  return Emit(flags, body.str());
}

// ---------------------------------------------------------------- copula-sample

int RunCopulaSample(const GlobalFlags& flags, const std::string& secret,
                    int n) {
  absl::StatusOr<dcp::Model> model = RequireModel(flags);
  if (!model.ok()) return Fail(model.status());
  const dcp::World& world = model->world;
  absl::StatusOr<nlohmann::json> doc = dcp::ReadJsonFile(flags.model);
  if (!doc.ok()) return Fail(doc.status());
  if (!doc->contains("copula")) {
    return Fail(absl::InvalidArgumentError("model has no 'copula' block"));
  }
  absl::StatusOr<dcp::GaussianCopulaSpec> spec =
      dcp::ParseCopulaSpec((*doc)["copula"], world);
  if (!spec.ok()) return Fail(spec.status());
  absl::StatusOr<dcp::SecretPair> who = ParsePair(world, {secret, secret});
  if (!who.ok()) return Fail(who.status());
  if (n <= 0) return Fail(absl::InvalidArgumentError("--n must be positive"));
  std::mt19937_64 rng(flags.seed);
  std::string body = "z1,z2,u1,u2,v1,v2\n";
  for (int i = 0; i < n; ++i) {
    absl::StatusOr<dcp::NoiseSamplePair> v =
        dcp::PsedrSample(*spec, who->first, rng);
    if (!v.ok()) return Fail(v.status());
    absl::StrAppend(&body,
                    absl::StrFormat("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                                    v->z1, v->z2, v->u1, v->u2, v->v1, v->v2));
  }
  return Emit(flags, body);
}

// ---------------------------------------------------------------- ic

nlohmann::json SolutionJson(const dcp::IcSolution& sol) {
  nlohmann::json j;
  j["alpha"] = MatrixJson(sol.alpha);
  j["pi"] = MatrixJson(sol.pi);
  j["tau_g"] = sol.tau_g;
  j["eps_g"] = sol.eps_g;
  j["feasibility"] = sol.feasibility;
  j["certified"] = sol.certified;
  j["direct_check_delta"] = sol.direct_check_delta;
  j["variant"] = dcp::VariantName(sol.variant);
  j["loss"] = sol.loss;
  j["stages"] = {{"posterior_constraints", sol.cert.stage1},
                 {"tail_mass", sol.cert.tail_mass},
                 {"tail_bound", sol.cert.stage2},
                 {"direct_check", sol.cert.stage3},
                 {"internal_error", sol.cert.internal_error}};
  j["diagnostics"] = sol.diagnostics;
  return j;
}

int RunIc(const GlobalFlags& flags, int task, double tau, double delta_g,
          int alphabet, const std::string& loss) {
  absl::StatusOr<dcp::Model> model = RequireModel(flags);
  if (!model.ok()) return Fail(model.status());
  dcp::IcProblem problem;
  problem.world = model->world;
  problem.mechs = model->mechanisms;
  problem.dependence = model->dependence;
  problem.delta_g = delta_g;
  problem.tau_g = tau;
  problem.alphabet_size = alphabet;
  problem.loss = loss == "brier" ? dcp::LossKind::kBrier : dcp::LossKind::kLog;
  problem.seed = flags.seed;
  problem.cap = flags.cap;
  absl::StatusOr<dcp::IcSolution> sol =
      task == 1 ? dcp::SolveTask1(problem) : dcp::SolveTask2(problem);
  if (!sol.ok()) return Fail(sol.status());
  const int code = Emit(flags, SolutionJson(*sol).dump(2) + "\n");
  if (code != kExitOk) return code;
  return sol->certified ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------- audit

int RunAudit(const GlobalFlags& flags, const std::vector<double>& eps_grid,
             double delta_g, int alphabet,
             const std::vector<std::string>& pair_arg) {
  absl::StatusOr<dcp::Model> model = RequireModel(flags);
  if (!model.ok()) return Fail(model.status());
  std::optional<dcp::SecretPair> pair;
  if (!pair_arg.empty()) {
    absl::StatusOr<dcp::SecretPair> p = ParsePair(model->world, pair_arg);
    if (!p.ok()) return Fail(p.status());
    pair = *p;
  }
  std::string body = "eps_g,delta_g,auc_composed,auc_single,gap\n";
  bool all = true;
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    absl::StatusOr<dcp::ExperimentRow> row = dcp::CompareAtBudget(
        model->world, model->mechanisms, model->dependence, eps_grid[k],
        delta_g, alphabet, flags.seed + k, flags.cap, pair);
    if (!row.ok()) return Fail(row.status());
    if (!row->flag.empty()) {
      std::cerr << "dcp: eps_g=" << eps_grid[k] << ": " << row->flag << "\n";
      all = false;
    }
    absl::StrAppend(&body, Num(row->eps_g), ",", Num(row->delta_g), ",",
                    Num(row->auc_composed), ",", Num(row->auc_single), ",",
                    Num(row->gap), "\n");
  }
  const int code = Emit(flags, body);
  if (code != kExitOk) return code;
  return all ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------- experiment

int RunExperimentCommand(const GlobalFlags& flags, const std::string& name,
                         const std::string& svg) {
  dcp::ExperimentConfig config = dcp::DefaultExperiment(
      name == "copula" ? dcp::ExperimentKind::kCopula
                       : dcp::ExperimentKind::kIndependent);
  config.seed = flags.seed;
  config.cap = flags.cap;
  absl::StatusOr<std::vector<dcp::ExperimentRow>> rows =
      dcp::RunExperiment(config);
  if (!rows.ok()) return Fail(rows.status());
  std::ostringstream csv;
  dcp::WriteExperimentCsv(*rows, csv);
  int code = Emit(flags, csv.str());
  if (code != kExitOk) return code;
  if (!svg.empty()) {
    std::ofstream out(svg);
    if (!out) {
      std::cerr << "dcp: cannot write " << svg << "\n";
      return kExitUsage;
    }
    out << absl::StrFormat("<!-- dcp %s seed=%d model_sha=none -->\n",
                           kVersion, flags.seed);
    dcp::WriteExperimentSvg(*rows, out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential confounding privacy toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  GlobalFlags flags;
  app.add_option("--model", flags.model, "Model JSON file");
  app.add_option("--seed", flags.seed, "Random seed")->capture_default_str();
  app.add_option("--out", flags.out, "Output file (default: stdout)");
  app.add_option("--cap", flags.cap, "Largest enumerated output space")
      ->check(CLI::Range(std::size_t{1}, dcp::kDefaultOutcomeCap))
      ->capture_default_str();
  app.add_option("--bins", flags.bins, "Bins per axis for copula grids")
      ->check(CLI::Range(2, 1 << 14))
      ->capture_default_str();

  double check_eps = 0.0;
  double check_delta = 0.0;
  CLI::App* check = app.add_subcommand("check", "Check (eps, delta)-DCP");
  check->add_option("--eps", check_eps, "Epsilon")->required();
  check->add_option("--delta", check_delta, "Delta")->capture_default_str();

  std::vector<double> compose_delta = {0.0, 0.02};
  std::vector<double> compose_eps = {0.5, 1.0};
  CLI::App* compose =
      app.add_subcommand("compose", "Composition accounts for a model");
  compose->add_option("--delta-g", compose_delta, "Delta grid")
      ->delimiter(',')
      ->capture_default_str();
  compose->add_option("--eps-g", compose_eps, "Epsilon grid")
      ->delimiter(',')
      ->capture_default_str();

  std::string pld_kind = "true";
  std::vector<std::string> pld_pair;
  std::optional<int> pld_mechanism;
  CLI::App* pld = app.add_subcommand("pld", "Privacy loss distribution CSV");
  pld->add_option("--kind", pld_kind, "true|underline|overline|copula")
      ->check(CLI::IsMember({"true", "underline", "overline", "copula"}))
      ->capture_default_str();
  pld->add_option("--pair", pld_pair, "Ordered secret pair, e.g. s0,s1")
      ->delimiter(',');
  pld->add_option("--mechanism", pld_mechanism,
                  "Index of a single mechanism (effective kernel only)");

  std::string sample_secret = "0";
  int sample_n = 1000;
  CLI::App* sample = app.add_subcommand(
      "copula-sample", "Draw noise pairs from the model's copula block");
  sample->add_option("--secret", sample_secret, "Secret label or index")
      ->capture_default_str();
  sample->add_option("--n", sample_n, "Number of samples")
      ->capture_default_str();

  int ic_task = 1;
  double ic_tau = 2.0;
  double ic_delta = 0.0;
  int ic_alphabet = 2;
  std::string ic_loss = "log";
  CLI::App* ic = app.add_subcommand("ic", "Inverse composition solver");
  ic->add_option("--task", ic_task, "1 designs alpha, 2 certifies")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  ic->add_option("--tau", ic_tau, "Ratio budget tau_g (task 1)")
      ->capture_default_str();
  ic->add_option("--delta-g", ic_delta, "Delta_g")->capture_default_str();
  ic->add_option("--alphabet", ic_alphabet, "Output alphabet size of alpha")
      ->capture_default_str();
  ic->add_option("--loss", ic_loss, "log|brier")
      ->check(CLI::IsMember({"log", "brier"}))
      ->capture_default_str();

  std::vector<double> audit_eps = {0.25, 0.5, 1.5, 3.0, 5.0};
  double audit_delta = 0.02;
  int audit_alphabet = 2;
  CLI::App* audit = app.add_subcommand(
      "audit", "AUC of the composition plus IC against IC alone");
  audit->add_option("--eps-g", audit_eps, "Epsilon grid")
      ->delimiter(',')
      ->capture_default_str();
  audit->add_option("--delta-g", audit_delta, "Delta_g")->capture_default_str();
  audit->add_option("--alphabet", audit_alphabet, "Output alphabet of alpha")
      ->capture_default_str();
  std::vector<std::string> audit_pair;
  audit->add_option("--pair", audit_pair,
                    "Audit this ordered pair instead of the worst one")
      ->delimiter(',');

  std::string exp_name = "independent";
  std::string exp_svg;
  CLI::App* experiment =
      app.add_subcommand("experiment", "Synthetic AUC-versus-budget runs");
  experiment->add_option("--name", exp_name, "independent|copula")
      ->check(CLI::IsMember({"independent", "copula"}))
      ->capture_default_str();
  experiment->add_option("--svg", exp_svg, "Also write an SVG chart here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (check->parsed()) return RunCheck(flags, check_eps, check_delta);
  if (compose->parsed()) return RunCompose(flags, compose_delta, compose_eps);
  if (pld->parsed()) return RunPld(flags, pld_kind, pld_pair, pld_mechanism);
  if (sample->parsed()) return RunCopulaSample(flags, sample_secret, sample_n);
  if (ic->parsed()) {
    return RunIc(flags, ic_task, ic_tau, ic_delta, ic_alphabet, ic_loss);
  }
  if (audit->parsed()) {
    return RunAudit(flags, audit_eps, audit_delta, audit_alphabet,
                    audit_pair);
  }
  if (experiment->parsed()) {
    return RunExperimentCommand(flags, exp_name, exp_svg);
  }
  return kExitUsage;
}
