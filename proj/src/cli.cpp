/*
 * Copyright 2026 The ploc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ploc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "ploc/error.hpp"
#include "ploc/report.hpp"

namespace ploc {

namespace fs = std::filesystem;

namespace {

/// Input that does not exist; maps to kExitInput.
class MissingInput : public Error {
public:
  using Error::Error;
};

void require_file(const std::string &path, const char *what) {
  if (!fs::is_regular_file(path))
    throw MissingInput(std::string(what) + " not found: " + path);
}

std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw MissingInput("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The function to sign: the one named `name`, or the only function in the
// bundle.
const FunctionCFG &pick_function(const BinaryPool &pool, const std::string &name,
                                 const std::string &path) {
  if (!name.empty()) {
    if (const auto *f = pool.find(name))
      return *f;
    throw Error("function '" + name + "' not found in " + path);
  }
  if (pool.functions().size() == 1)
    return pool.functions().front();
  throw Error(path + " holds " + std::to_string(pool.functions().size()) +
              " functions; choose one with --function");
}

struct SignArgs {
  std::vector<std::string> cfgs;
  std::vector<std::string> sources;
  std::string patch;
  std::string out;
  std::string cve;
  std::string function;
  std::string dump_ag;
};

int cmd_sign(const SignArgs &a, std::ostream &out) {
  for (const auto &p : a.cfgs)
    require_file(p, "CFG bundle");
  for (const auto &p : a.sources)
    require_file(p, "source file");
  require_file(a.patch, "patch");

  const auto vul_pool = load_cfg_bundle(a.cfgs[0]);
  const auto fix_pool = load_cfg_bundle(a.cfgs[1]);
  auto symbols = function_symbols(vul_pool);
  symbols.merge(function_symbols(fix_pool));

  SignatureInputs in;
  in.vul = &pick_function(vul_pool, a.function, a.cfgs[0]);
  in.fix = &pick_function(fix_pool, a.function, a.cfgs[1]);
  in.vul_source = read_text(a.sources[0]);
  in.fix_source = read_text(a.sources[1]);
  in.patch = parse_patch(a.patch);
  in.cve = a.cve.empty() ? fs::path(a.patch).stem().string() : a.cve;
  in.anchor_options.function_symbols = &symbols;

  SignatureTrace trace;
  SignaturePair pair;
  try {
    pair = generate_signature_pair(in, &trace);
  } catch (const UndetectablePatch &) {
    if (!a.dump_ag.empty()) {
      write_file_atomic(fs::path(a.dump_ag) / "vul.dot", to_dot(trace.vul_ag));
      write_file_atomic(fs::path(a.dump_ag) / "fix.dot", to_dot(trace.fix_ag));
    }
    throw;
  }
  if (!a.dump_ag.empty()) {
    write_file_atomic(fs::path(a.dump_ag) / "vul.dot", to_dot(trace.vul_ag));
    write_file_atomic(fs::path(a.dump_ag) / "fix.dot", to_dot(trace.fix_ag));
  }
  auto path = save_signature(pair, a.out);
  out << path.string() << "\n";
  return kExitOk;
}

struct DetectArgs {
  std::string sig;
  std::string pool;
  std::string simdb;
  std::string callees;
  Thresholds thresholds;
  std::string report;
  std::string csv;
  std::string truth;
  unsigned threads = 0;
  bool no_timing = false;
};

int cmd_detect(const DetectArgs &a, std::ostream &out) {
  require_file(a.sig, "signature");
  require_file(a.pool, "pool");
  if (!a.simdb.empty())
    require_file(a.simdb, "similarity table");
  if (!a.callees.empty())
    require_file(a.callees, "reference callee bundle");
  if (!a.truth.empty())
    require_file(a.truth, "truth file");

  const auto sig = load_signature(a.sig);
  const auto pool = load_cfg_bundle(a.pool);

  DetectOptions opts;
  opts.thresholds = a.thresholds;
  opts.threads = a.threads;
  opts.timing = !a.no_timing;
  auto histogram = std::make_shared<HistogramProvider>();
  if (a.simdb.empty())
    opts.provider = histogram;
  else
    opts.provider = std::make_shared<MatrixProvider>(MatrixProvider::load_csv(a.simdb, histogram));
  BinaryPool callee_pool;
  if (!a.callees.empty()) {
    callee_pool = load_cfg_bundle(a.callees);
    for (const auto &f : callee_pool.functions())
      opts.reference_callees.emplace(f.id(), &f);
  }

  auto report = detect_pool(sig, pool, opts);
  if (!a.truth.empty())
    report.metrics = compute_metrics(join_truth(report, load_truth_csv(a.truth)));
  write_file_atomic(a.report, to_json(report).dump(2) + "\n");
  if (!a.csv.empty())
    write_file_atomic(a.csv, to_csv(report));

  std::size_t counts[3] = {0, 0, 0};
  for (const auto &r : report.rows)
    ++counts[static_cast<int>(r.label)];
  out << report.rows.size() << " functions: " << counts[0] << " vulnerable, " << counts[1]
      << " fixed, " << counts[2] << " irrelevant\n";
  return kExitOk;
}

int cmd_evaluate(const std::string &report_path, const std::string &truth_path,
                 const std::string &out_path, std::ostream &out) {
  require_file(report_path, "report");
  require_file(truth_path, "truth file");
  auto report = load_report(report_path);
  auto metrics = compute_metrics(join_truth(report, load_truth_csv(truth_path)));
  auto text = to_json(metrics).dump(2) + "\n";
  if (!out_path.empty())
    write_file_atomic(out_path, text);
  out << text;
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  init_logging();
  CLI::App app{"Patch presence test over anchor graphs", "ploc"};
  app.require_subcommand(1);

  SignArgs sign;
  auto *sign_cmd = app.add_subcommand("sign", "Build a signature from two reference functions");
  sign_cmd->add_option("--cfg", sign.cfgs, "Vulnerable then fixed CFG bundle")->required()->expected(2);
  sign_cmd->add_option("--src", sign.sources, "Vulnerable then fixed source file")->required()->expected(2);
  sign_cmd->add_option("--patch", sign.patch, "Unified diff")->required();
  sign_cmd->add_option("--out", sign.out, "Signature directory")->required();
  sign_cmd->add_option("--cve", sign.cve, "Identifier (default: patch file stem)");
  sign_cmd->add_option("--function", sign.function, "Function to sign in each bundle");
  sign_cmd->add_option("--dump-ag", sign.dump_ag, "Write anchor graphs as DOT into this directory");

  DetectArgs detect;
  auto *detect_cmd = app.add_subcommand("detect", "Classify every function of a pool");
  detect_cmd->add_option("--sig", detect.sig, "Signature JSON")->required();
  detect_cmd->add_option("--pool", detect.pool, "Target CFG bundle")->required();
  detect_cmd->add_option("--simdb", detect.simdb, "query_id,candidate_id,score table");
  detect_cmd->add_option("--callees", detect.callees, "CFG bundle with reference callee bodies");
  detect_cmd->add_option("--t-iff", detect.thresholds.t_iff, "Irrelevant-function threshold")
      ->check(CLI::Range(0.0, 1.0));
  detect_cmd->add_option("--t-cpm", detect.thresholds.t_cpm, "Context match threshold")
      ->check(CLI::Range(0.0, 1.0));
  detect_cmd->add_option("--t-bcsd", detect.thresholds.t_bcsd, "Callee similarity threshold")
      ->check(CLI::Range(0.0, 1.0));
  detect_cmd->add_option("--report", detect.report, "Report JSON output")->required();
  detect_cmd->add_option("--csv", detect.csv, "Report CSV output");
  detect_cmd->add_option("--truth", detect.truth, "target_id,label file; adds metrics");
  detect_cmd->add_option("--threads", detect.threads, "Worker threads (0: all cores)");
  detect_cmd->add_flag("--no-timing", detect.no_timing, "Write time_ms as 0");

  std::string eval_report;
  std::string eval_truth;
  std::string eval_out;
  auto *eval_cmd = app.add_subcommand("evaluate", "Compute metrics for a report");
  eval_cmd->add_option("--report", eval_report, "Report JSON")->required();
  eval_cmd->add_option("--truth", eval_truth, "target_id,label file")->required();
  eval_cmd->add_option("--out", eval_out, "Also write the metrics here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    return app.exit(e, out, err);
  }

  try {
    if (*sign_cmd)
      return cmd_sign(sign, out);
    if (*detect_cmd)
      return cmd_detect(detect, out);
    if (*eval_cmd)
      return cmd_evaluate(eval_report, eval_truth, eval_out, out);
  } catch (const UndetectablePatch &e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const MissingInput &e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

} // namespace ploc
