// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: prepare, train, distill, translate, evaluate, bench.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "segsat/commands.hpp"
#include "segsat/config.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file");
  cmd->add_option("--set", c.sets, "override a config key, e.g. --set model.d_model=64")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace segsat;
  CLI::App app{"segsat: segment-parallel translation toolkit"};
  app.require_subcommand(1);

  Common prep_c, train_c;
  auto* prepare = app.add_subcommand("prepare", "build vocabulary and id cache");
  add_common(prepare, prep_c);
  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, train_c);

  DistillArgs dargs;
  auto* distill = app.add_subcommand("distill", "greedy-decode a source file with an AT model");
  distill->add_option("--checkpoint", dargs.checkpoint)->required();
  distill->add_option("--vocab", dargs.vocab)->required();
  distill->add_option("--input", dargs.input)->required();
  distill->add_option("--output", dargs.output)->required();
  distill->add_option("--workers", dargs.workers);

  TranslateArgs targs;
  std::optional<std::size_t> tbudget;
  auto* translate = app.add_subcommand("translate", "decode a source file");
  translate->add_option("--checkpoint", targs.checkpoint)->required();
  translate->add_option("--vocab", targs.vocab)->required();
  translate->add_option("--input", targs.input)->required();
  translate->add_option("--output", targs.output)->required();
  translate->add_option("-k,--segments", targs.k);
  translate->add_option("--budget", tbudget);
  translate->add_option("--workers", targs.workers);
  translate->add_option("--trace", targs.trace, "write a per-step TSV trace to this path");

  EvaluateArgs eargs;
  auto* evaluate = app.add_subcommand("evaluate", "score hypotheses against references");
  evaluate->add_option("--hyp", eargs.hyp)->required();
  evaluate->add_option("--ref", eargs.ref)->required();
  evaluate->add_option("--at-hyp", eargs.at_hyp);

  BenchArgs bargs;
  std::optional<std::size_t> bbudget;
  auto* bench = app.add_subcommand("bench", "batch-size-1 decoding speed per k");
  bench->add_option("--checkpoint", bargs.checkpoint)->required();
  bench->add_option("--vocab", bargs.vocab)->required();
  bench->add_option("--input", bargs.input)->required();
  bench->add_option("--k", bargs.ks)->required()->delimiter(',');
  bench->add_option("--repeats", bargs.repeats);
  bench->add_option("--budget", bbudget);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return run_guarded([&]() -> int {
    if (*prepare) return cmd_prepare(resolve_run_config(prep_c.config, prep_c.sets), std::cout);
    if (*train) return cmd_train(resolve_run_config(train_c.config, train_c.sets), std::cout);
    if (*distill) return cmd_distill(dargs, std::cout);
    if (*translate) {
      targs.budget = tbudget;
      return cmd_translate(targs, std::cout);
    }
    if (*evaluate) return cmd_evaluate(eargs, std::cout);
    bargs.budget = bbudget;
    return cmd_bench(bargs, std::cout);
  });
}
