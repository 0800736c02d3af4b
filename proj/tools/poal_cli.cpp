#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "poal/poal.hpp"

namespace {

int gen_synthetic_cmd(const std::string& spec_path, const std::string& out_path) {
  const auto spec = poal::synthetic_from_json(poal::read_json_file(spec_path));
  const poal::Dataset ds = poal::gen_synthetic(spec);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  poal::serialize_libsvm(ds, out);
  std::cout << "wrote " << ds.rows() << " rows (" << ds.count_ood() << " OOD) to " << out_path << "\n";
  return 0;
}

int run_cmd(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = poal::load_config(config_path);
  const auto start = std::chrono::steady_clock::now();
  const auto summary = poal::run_experiment(cfg);
  poal::write_report(summary, out_dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& s : summary.strategies)
    std::printf("%-20s AUBC %.4f (sd %.4f) over %zu trials\n", s.strategy.c_str(), s.aubc_mean, s.aubc_sd,
                s.aubc_per_trial.size());
  std::printf("finished in %.1f s; report in %s\n", secs, out_dir.c_str());
  return 0;
}

int report_cmd(const std::string& in_dir) {
  const auto summary = poal::read_json_file((std::filesystem::path(in_dir) / "summary.json").string());
  std::printf("%s\n", summary.at("code_version").get<std::string>().c_str());
  std::printf("%-20s %10s %10s %8s %14s\n", "strategy", "aubc_mean", "aubc_sd", "trials", "final_ood_mean");
  for (const auto& s : summary.at("strategies")) {
    const auto& ood = s.at("mean_cumulative_ood_by_round");
    std::printf("%-20s %10.4f %10.4f %8zu %14.2f\n", s.at("strategy").get<std::string>().c_str(),
                s.at("aubc_mean").get<double>(), s.at("aubc_sd").get<double>(), s.at("aubc_per_trial").size(),
                ood.empty() ? 0.0 : ood.back().get<double>());
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pareto-optimal batch active learning under out-of-distribution data"};
  app.require_subcommand(1);

  std::string spec_path, out_path;
  auto* gen = app.add_subcommand("gen-synthetic", "Generate the two-arc synthetic dataset as LIBSVM text");
  gen->add_option("--spec", spec_path, "JSON generator spec")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "Output LIBSVM file")->required();

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV/JSON reports");
  run->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();

  std::string in_dir;
  auto* report = app.add_subcommand("report", "Print the summary table of a finished run");
  report->add_option("--in", in_dir, "Run output directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_synthetic_cmd(spec_path, out_path);
    if (*run) return run_cmd(config_path, out_dir);
    if (*report) return report_cmd(in_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
