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
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ploc/cli.hpp"
#include "ploc/error.hpp"
#include "ploc/report.hpp"

namespace py = pybind11;
using namespace ploc;

namespace {

const FunctionCFG &pick(const BinaryPool &pool, const std::string &name) {
  if (!name.empty()) {
    if (const auto *f = pool.find(name))
      return *f;
    throw Error("function '" + name + "' not found");
  }
  if (pool.functions().size() != 1)
    throw Error("bundle holds " + std::to_string(pool.functions().size()) +
                " functions; pass function=");
  return pool.functions().front();
}

std::string py_sign(const std::string &vul_cfg, const std::string &fix_cfg, const std::string &vul_src,
                 const std::string &fix_src, const std::string &patch, const std::string &cve,
                 const std::string &function) {
  const auto vul_pool = parse_cfg_bundle_text(vul_cfg);
  const auto fix_pool = parse_cfg_bundle_text(fix_cfg);
  auto symbols = function_symbols(vul_pool);
  symbols.merge(function_symbols(fix_pool));
  SignatureInputs in;
  in.vul = &pick(vul_pool, function);
  in.fix = &pick(fix_pool, function);
  in.vul_source = vul_src;
  in.fix_source = fix_src;
  in.patch = parse_patch_text(patch);
  in.cve = cve;
  in.anchor_options.function_symbols = &symbols;
  return to_json(generate_signature_pair(in)).dump();
}

std::string py_detect(const std::string &signature, const std::string &pool_text, double t_iff,
                   double t_cpm, double t_bcsd, const std::string &simdb, unsigned threads,
                   bool timing) {
  const auto sig = signature_from_json(nlohmann::json::parse(signature));
  const auto pool = parse_cfg_bundle_text(pool_text);
  DetectOptions opts;
  opts.thresholds = {t_iff, t_cpm, t_bcsd};
  opts.threads = threads;
  opts.timing = timing;
  auto histogram = std::make_shared<HistogramProvider>();
  if (simdb.empty())
    opts.provider = histogram;
  else
    opts.provider = std::make_shared<MatrixProvider>(MatrixProvider::parse_csv(simdb, histogram));
  Report report;
  {
    py::gil_scoped_release release;
    report = detect_pool(sig, pool, opts);
  }
  return to_json(report).dump();
}

std::string py_evaluate(const std::string &report, const std::string &truth) {
  auto r = report_from_json(nlohmann::json::parse(report));
  return to_json(compute_metrics(join_truth(r, parse_truth_csv(truth)))).dump();
}

std::string anchor_graph_dot(const std::string &cfg, const std::string &function) {
  const auto pool = parse_cfg_bundle_text(cfg);
  AnchorOptions opts;
  auto symbols = function_symbols(pool);
  opts.function_symbols = &symbols;
  return to_dot(build_anchor_graph(pick(pool, function), opts));
}

py::tuple cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_cli(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Patch presence test over anchor graphs. Documents cross as JSON text.";

  auto base = py::register_exception<Error>(m, "PlocError");
  py::register_exception<UndetectablePatch>(m, "UndetectablePatch", base.ptr());

  m.attr("DEFAULT_T_IFF") = kDefaultIffThreshold;
  m.attr("DEFAULT_T_CPM") = kDefaultCpmThreshold;
  m.attr("DEFAULT_T_BCSD") = kDefaultBcsdThreshold;

  m.def("sign", &py_sign, py::arg("vul_cfg"), py::arg("fix_cfg"), py::arg("vul_src"),
        py::arg("fix_src"), py::arg("patch"), py::arg("cve") = "", py::arg("function") = "",
        "Signature JSON for a vulnerable/fixed reference pair.");
  m.def("detect", &py_detect, py::arg("signature"), py::arg("pool"),
        py::arg("t_iff") = kDefaultIffThreshold, py::arg("t_cpm") = kDefaultCpmThreshold,
        py::arg("t_bcsd") = kDefaultBcsdThreshold, py::arg("simdb") = "", py::arg("threads") = 0,
        py::arg("timing") = true, "Report JSON for every function of a pool.");
  m.def("evaluate", &py_evaluate, py::arg("report"), py::arg("truth"),
        "Metrics JSON for a report and a target_id,label table.");
  m.def("anchor_graph_dot", &anchor_graph_dot, py::arg("cfg"), py::arg("function") = "");
  m.def("run_cli", &cli, py::arg("args"), "Runs the command line; returns (code, stdout, stderr).");
}
