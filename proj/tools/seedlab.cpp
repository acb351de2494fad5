// seedlab command-line driver: single generations, detector runs and the
// experiment programs, writing CSV or JSON.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "seedlab/seedlab.hpp"

namespace {

using namespace seedlab;

struct Options {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
  std::string input_path;
};

ExperimentSettings load_settings(const Options& opt, ExperimentSettings s = {}) {
  if (!opt.config_path.empty()) s = load_config_file(opt.config_path, std::move(s));
  if (opt.seed) {
    s.seed = *opt.seed;
    s.base.run_seed = *opt.seed;
  }
  return s;
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(opt.out_path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + opt.out_path);
  out << text;
  if (!out) throw Error("write failed: " + opt.out_path);
}

std::string rows_text(const Options& opt, const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  if (opt.format == "json") {
    os << rows_to_json(rows).dump(2) << '\n';
  } else {
    write_csv(os, rows);
  }
  return os.str();
}

int cmd_generate(const Options& opt) {
  const auto s = load_settings(opt);
  const auto rec = generate(s.base);
  const ResultRow row = make_row("generate", s.base, rec);
  if (opt.format == "json") {
    auto j = record_to_json(rec);
    j["summary"] = row_to_json(row);
    emit(opt, j.dump(2) + "\n");
  } else {
    emit(opt, rows_text(opt, {row}));
  }
  return 0;
}

int cmd_detect(const Options& opt) {
  if (opt.input_path.empty()) throw Error("detect requires --input <record.json>");
  const auto s = load_settings(opt);
  if (!s.base.watermark) throw Error("detect requires a watermark configuration");
  std::ifstream in(opt.input_path);
  if (!in) throw Error("cannot open input file: " + opt.input_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("malformed record: ") + e.what());
  }
  const auto candidate = record_from_json(j, s.base);
  const TokenModel model(s.base.model);

  PipelineConfig ref_cfg = s.base;
  ref_cfg.attack.mode = AttackMode::off;
  ref_cfg.entropy = EntropyKind::honest;
  std::vector<SequenceRecord> corpus;
  for (std::size_t i = 0; i < s.reference_size; ++i) {
    ref_cfg.run_seed = mix64(s.seed ^ 0xEEF0C0A9E5ULL, i);
    corpus.push_back(generate(model, ref_cfg));
  }
  const auto reference = build_reference(corpus);
  double zb = 0.0;
  for (const auto& r : corpus) zb += z_score(r, s.base.watermark->gamma);
  zb /= static_cast<double>(corpus.size());

  const auto report = run_suite(candidate, reference, s.base.watermark->gamma, zb);
  ResultRow row = make_row("detect", s.base, candidate);
  row.statistics = report.statistics;
  row.trigger_count = report.trigger_count;
  if (!std::isnan(report.survival)) row.survival = report.survival;
  emit(opt, rows_text(opt, {row}));
  for (std::size_t k = 0; k < kDetectorCount; ++k)
    std::cerr << kDetectorNames[k] << ' ' << report.statistics[k] << (report.triggered[k] ? " TRIGGERED" : "")
              << " (threshold " << report.thresholds[k] << ")\n";
  return 0;
}

int cmd_matrix(const Options& opt) {
  const auto s = load_settings(opt);
  const auto result = experiment_detection_matrix(s);
  emit(opt, rows_text(opt, result.rows));
  for (const auto& sum : result.summary)
    std::cerr << sum.condition_id << ": zero triggers " << sum.zero_triggers << '/' << sum.replicates
              << ", mean z " << sum.mean_z << ", mean survival " << sum.mean_survival << ", pooled survival "
              << sum.pooled_survival << '\n';
  return 0;
}

int cmd_sweep(const Options& opt) {
  ExperimentSettings defaults;
  defaults.replicates = 10;
  const auto s = load_settings(opt, defaults);
  const auto result = experiment_sweep(s);
  emit(opt, rows_text(opt, result.cell_rows()));
  return 0;
}

int cmd_orthogonality(const Options& opt) {
  ExperimentSettings defaults;
  defaults.base.attack.mode = AttackMode::aware;
  const auto s = load_settings(opt, defaults);
  const auto result = experiment_orthogonality(s);
  std::ostringstream os;
  if (opt.format == "json") {
    nlohmann::json j;
    j["points"] = nlohmann::json::array();
    for (const auto& p : result.points)
      j["points"].push_back({{"delta", p.delta},
                             {"z_base", p.z_base},
                             {"z_attack", p.z_attack},
                             {"r_T", p.target_rate},
                             {"z_survival", to_json_value(p.z_survival)}});
    j["pearson_r"] = result.correlation ? nlohmann::json(result.correlation->r) : nlohmann::json(nullptr);
    j["p_value"] = result.correlation ? nlohmann::json(result.correlation->p) : nlohmann::json(nullptr);
    j["cv"] = result.cv;
    j["rows"] = rows_to_json(result.rows);
    os << j.dump(2) << '\n';
  } else {
    write_csv_line(os, {"delta", "z_base", "z_attack", "r_T", "z_survival"});
    for (const auto& p : result.points)
      write_csv_line(os, {format_number(p.delta), format_number(p.z_base), format_number(p.z_attack),
                          format_number(p.target_rate), format_number(p.z_survival)});
  }
  emit(opt, os.str());
  if (result.correlation)
    std::cerr << "pearson r " << result.correlation->r << ", p " << result.correlation->p;
  else
    std::cerr << "pearson r undefined";
  std::cerr << ", cv " << result.cv << '\n';
  return 0;
}

int cmd_defend(const Options& opt) {
  ExperimentSettings defaults = defense_settings(ExperimentSettings{});
  defaults.replicates = 50;
  const auto s = load_settings(opt, defaults);
  const auto result = experiment_qrng_defense(s);
  emit(opt, rows_text(opt, result.rows));
  for (const auto& sum : result.summary)
    std::cerr << sum.condition_id << ": z " << sum.mean_z << " +/- " << sum.sd_z << ", green fraction "
              << sum.mean_green_fraction << ", r_T " << sum.mean_target_rate << '\n';
  return 0;
}

int cmd_selftest(const Options&) {
  bool ok = true;
  for (const auto& r : run_selftests()) {
    std::cout << (r.passed ? "ok   " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seedlab: watermark, PRNG-hijack attack and detector experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config_path, "flat JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", opt.out_path, "output file (default: stdout)");
  app.add_option("--seed", opt.seed, "run seed / first replicate seed");
  app.add_option("--format", opt.format, "output format")->check(CLI::IsMember({"csv", "json"}));

  int (*handler)(const Options&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->callback([&handler, fn] { handler = fn; });
    return cmd;
  };
  sub("generate", "generate one sequence", cmd_generate);
  sub("detect", "run the detector suite on a generated record", cmd_detect)
      ->add_option("--input", opt.input_path, "record JSON written by `generate --format json`")
      ->required();
  sub("matrix", "detection-matrix experiment", cmd_matrix);
  sub("sweep", "activation x boost sweep in blind mode", cmd_sweep);
  sub("orthogonality", "watermark-strength sweep", cmd_orthogonality);
  sub("defend", "entropy-source defense experiment", cmd_defend);
  sub("selftest", "brute-force oracle checks", cmd_selftest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return handler(opt);
  } catch (const std::exception& e) {
    std::cerr << "seedlab: " << e.what() << '\n';
    return 1;
  }
}
