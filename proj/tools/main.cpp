// Command-line front end: detect / simulate / calibrate / report.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpmartingale/config.hpp"
#include "cpmartingale/cpmartingale.hpp"
#include "cpmartingale/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAlarm = 2;

struct CommonArgs {
  std::string config_file;
  std::vector<std::string> overrides;  // flags staged as key=value pairs
  std::string out;
};

cpm::ConfigMap load_config(const CommonArgs& args) {
  cpm::ConfigMap map;
  if (!args.config_file.empty()) {
    std::ifstream in(args.config_file);
    if (!in) throw std::runtime_error("cannot open config file '" + args.config_file + "'");
    map = cpm::ConfigMap::parse(in);
  }
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override '" + kv + "' is not of the form key=value");
    map.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return map;
}

// Stages a CLI flag as a config override so flags and file entries share
// one validation path.
void stage(CLI::App* cmd, CommonArgs& args, const std::string& flag, const std::string& key,
           const std::string& help) {
  auto value = std::make_shared<std::string>();
  cmd->add_option(flag, *value, help)->each([&args, key, value](const std::string&) {
    args.overrides.push_back(key + "=" + *value);
  });
}

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& default_out) {
  cmd->add_option("--config", args.config_file, "flat key-value config file");
  cmd->add_option("--set", args.overrides, "override any config key (key=value, repeatable)");
  args.out = default_out;
  cmd->add_option("--out", args.out, "output path (default: " + default_out + ")");
  stage(cmd, args, "--seed", "seed", "master seed");
  stage(cmd, args, "--jobs", "jobs", "worker threads for replications");
}

std::shared_ptr<const cpm::PrecomputedBetting> load_density(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open betting density file '" + path + "'");
  return std::make_shared<cpm::PrecomputedBetting>(cpm::PrecomputedBetting::load(in));
}

cpm::Series read_observation_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input file '" + path + "'");
  return cpm::parse_observations(in);
}

// ---------------------------------------------------------------------------
// detect

int cmd_detect(const CommonArgs& args, const std::string& input, const std::string& train_file) {
  auto map = load_config(args);
  const cpm::CliOptions opt = cpm::parse_cli_options(map);
  const auto family = opt.detector.family;
  if (family != cpm::DetectorSpec::Family::icm && family != cpm::DetectorSpec::Family::full_cm)
    throw std::runtime_error("detect supports detector=icm or detector=full-cm");

  cpm::Series all = read_observation_file(input);
  cpm::Series training(all.dim());
  cpm::Series stream(all.dim());
  if (!train_file.empty()) {
    training = read_observation_file(train_file);
    stream = std::move(all);
    if (training.dim() != stream.dim())
      throw std::runtime_error("training and stream dimensions differ");
  } else {
    if (family == cpm::DetectorSpec::Family::icm && opt.train_rows == 0)
      throw std::runtime_error("icm detection needs --train-rows or a --train file");
    if (opt.train_rows >= all.size() && family == cpm::DetectorSpec::Family::icm)
      throw std::runtime_error("--train-rows consumes the whole input; nothing left to monitor");
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (i < opt.train_rows) training.push(all.at(i));
      else stream.push(all.at(i));
    }
  }
  if (stream.empty()) throw std::runtime_error("no observations to monitor");

  cpm::BettingSpec betting = opt.detector.betting;
  if (betting.kind == cpm::BettingSpec::Kind::precomputed) {
    if (opt.density_file.empty())
      throw std::runtime_error("precomputed betting needs density_file");
    betting.density = load_density(opt.density_file);
  }

  cpm::RngHandle rng(opt.seed);
  cpm::AlarmResult result;
  if (family == cpm::DetectorSpec::Family::icm) {
    cpm::TrainingSet ts(std::move(training), rng);
    result = cpm::run_icm(std::move(ts), stream, opt.detector.ncm, betting, opt.h, rng, true);
  } else {
    result = cpm::run_full_cm(stream, betting, opt.h, rng, true);
  }

  std::ofstream trace(args.out);
  if (!trace) throw std::runtime_error("cannot write trace file '" + args.out + "'");
  cpm::write_trace_csv(trace, result.trace);

  if (result.tau) {
    std::cout << "ALARM at n=" << *result.tau << "\n";
    return kExitAlarm;
  }
  std::cout << "NO ALARM\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct PresetEntry {
  cpm::DetectorSpec detector;
  std::string note;
};

using DensityCache = std::map<cpm::NcmConfig::Kind, std::shared_ptr<const cpm::PrecomputedBetting>>;

std::shared_ptr<const cpm::PrecomputedBetting> preset_density(cpm::NcmConfig::Kind kind,
                                                              const cpm::CliOptions& opt,
                                                              DensityCache& cache) {
  if (const auto it = cache.find(kind); it != cache.end()) return it->second;
  cpm::NcmConfig ncm = opt.detector.ncm;
  ncm.kind = kind;
  const std::uint64_t tag = cpm::kCalibrationSubstream + static_cast<std::uint64_t>(kind);
  auto density = std::make_shared<cpm::PrecomputedBetting>(cpm::calibrate_precomputed_recipe(
      ncm, opt.m, opt.calib_length, opt.calib_theta, opt.calib_mu1, opt.grid_size,
      cpm::RngHandle(opt.seed).substream(tag)));
  cache.emplace(kind, density);
  return density;
}

std::vector<PresetEntry> preset_detectors(const std::string& preset, const cpm::CliOptions& opt,
                                          DensityCache& cache) {
  using Family = cpm::DetectorSpec::Family;
  auto icm = [&](cpm::NcmConfig::Kind ncm_kind, cpm::BettingSpec::Kind betting) {
    cpm::DetectorSpec spec = opt.detector;
    spec.family = Family::icm;
    spec.ncm.kind = ncm_kind;
    spec.betting.kind = betting;
    if (betting == cpm::BettingSpec::Kind::precomputed)
      spec.betting.density = preset_density(ncm_kind, opt, cache);
    return PresetEntry{spec, ""};
  };
  auto plain = [&](Family family) {
    cpm::DetectorSpec spec = opt.detector;
    spec.family = family;
    return PresetEntry{spec, ""};
  };

  cpm::BettingSpec::Kind betting;
  if (preset == "table1") betting = cpm::BettingSpec::Kind::constant;
  else if (preset == "table2") betting = cpm::BettingSpec::Kind::mixture;
  else if (preset == "table3") betting = cpm::BettingSpec::Kind::kde_window;
  else if (preset == "table4" || preset == "table5") betting = cpm::BettingSpec::Kind::precomputed;
  else throw std::runtime_error("unknown preset '" + preset + "' (expected table1..table5)");

  std::vector<PresetEntry> out;
  out.push_back(icm(cpm::NcmConfig::Kind::lr_gaussian, betting));
  out.push_back(icm(cpm::NcmConfig::Kind::knn, betting));
  if (preset == "table5") {
    out.push_back(plain(Family::cusum));
    out.push_back(plain(Family::sr));
    out.push_back(plain(Family::pp));
  } else {
    out.push_back(plain(Family::oracle_cusum));
    out.push_back(plain(Family::oracle_sr));
    out.push_back(plain(Family::oracle_pp));
  }
  return out;
}

int cmd_simulate(const CommonArgs& args, const std::string& preset) {
  auto map = load_config(args);
  const cpm::CliOptions opt = cpm::parse_cli_options(map);

  std::vector<cpm::ExperimentConfig> configs;
  DensityCache cache;
  if (!preset.empty()) {
    const auto detectors = preset_detectors(preset, opt, cache);
    if (detectors.empty()) throw std::runtime_error("preset produced no detectors");
    for (std::size_t theta : {std::size_t{100}, std::size_t{200}}) {
      for (double mu1 : {1.0, 1.5, 2.0}) {
        for (const auto& entry : detectors) {
          cpm::ExperimentConfig cfg = opt.experiment();
          cfg.theta = theta;
          cfg.mu1 = mu1;
          cfg.h_grid.clear();  // family defaults per detector
          cfg.detector = entry.detector;
          // optimal detectors assume the true post-change mean
          cfg.detector.model.mu1 = mu1;
          configs.push_back(std::move(cfg));
        }
      }
    }
  } else {
    cpm::ExperimentConfig cfg = opt.experiment();
    if (cfg.detector.betting.kind == cpm::BettingSpec::Kind::precomputed &&
        cfg.detector.uses_betting()) {
      if (opt.density_file.empty())
        throw std::runtime_error("precomputed betting needs density_file");
      cfg.detector.betting.density = load_density(opt.density_file);
    }
    configs.push_back(std::move(cfg));
  }

  std::vector<cpm::ResultRow> rows;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& cfg = configs[i];
    std::fprintf(stderr, "[%zu/%zu] %s ncm=%s betting=%s theta=%zu mu1=%g ...\n", i + 1,
                 configs.size(), cpm::detector_family_name(cfg.detector.family).c_str(),
                 cpm::ncm_kind_name(cfg.detector.ncm.kind).c_str(),
                 cpm::betting_kind_name(cfg.detector.betting.kind).c_str(), cfg.theta, cfg.mu1);
    auto sweep = cpm::run_sweep_bracketing(cfg, opt.target_fa, 3,
                                           [](std::size_t done, std::size_t total) {
                                             std::fprintf(stderr, "\r  %zu/%zu replications", done,
                                                          total);
                                             if (done == total) std::fprintf(stderr, "\n");
                                           });
    const auto cfg_rows = cpm::to_result_rows(sweep);
    rows.insert(rows.end(), cfg_rows.begin(), cfg_rows.end());
  }
  const auto secs =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);

  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot write results file '" + args.out + "'");
  cpm::write_results_csv(out, rows);
  std::cout << "wrote " << rows.size() << " rows to " << args.out << " in " << secs.count()
            << "s\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate

int cmd_calibrate(const CommonArgs& args, const std::string& input) {
  auto map = load_config(args);
  const cpm::CliOptions opt = cpm::parse_cli_options(map);

  std::optional<cpm::PrecomputedBetting> density;
  if (!input.empty()) {
    cpm::Series all = read_observation_file(input);
    if (opt.train_rows == 0 || opt.train_rows >= all.size())
      throw std::runtime_error("calibrate with --input needs 0 < train_rows < rows");
    cpm::Series training(all.dim());
    cpm::Series stream(all.dim());
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (i < opt.train_rows) training.push(all.at(i));
      else stream.push(all.at(i));
    }
    if (stream.size() < 10) throw std::runtime_error("calibration stream shorter than 10");
    cpm::RngHandle rng(opt.seed);
    cpm::TrainingSet ts(std::move(training), rng);
    const auto ps = cpm::icm_pvalues(std::move(ts), stream, opt.detector.ncm, rng);
    density.emplace(cpm::PrecomputedBetting::calibrate(ps, opt.grid_size));
  } else {
    density.emplace(cpm::calibrate_precomputed_recipe(
        opt.detector.ncm, opt.m, opt.calib_length, opt.calib_theta, opt.calib_mu1, opt.grid_size,
        cpm::RngHandle(opt.seed).substream(cpm::kCalibrationSubstream +
                                           static_cast<std::uint64_t>(opt.detector.ncm.kind))));
  }

  std::ofstream out(args.out);
  if (!out) throw std::runtime_error("cannot write density file '" + args.out + "'");
  density->save(out);
  std::cout << "wrote betting density (" << density->grid_size() << " nodes) to " << args.out
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

std::string format_fa(double fa) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g%%", fa * 100.0);
  return buf;
}

std::string detector_label(const std::string& detector, const std::string& ncm) {
  if (detector == "icm") {
    if (ncm == "lr-gaussian") return "ICM LR";
    if (ncm == "knn") return "ICM kNN";
    return "ICM " + ncm;
  }
  if (detector == "full-cm") return "CM";
  if (detector == "cusum") return "CUSUM";
  if (detector == "sr") return "S-R";
  if (detector == "pp") return "PP";
  if (detector == "oracle-cusum") return "CUSUM Oracle";
  if (detector == "oracle-sr") return "S-R Oracle";
  if (detector == "oracle-pp") return "PP Oracle";
  return detector;
}

int label_rank(const std::string& label) {
  static const std::vector<std::string> order{"ICM LR", "ICM kNN",      "CM",         "CUSUM",
                                              "S-R",    "PP",           "CUSUM Oracle",
                                              "S-R Oracle", "PP Oracle"};
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == label) return static_cast<int>(i);
  return 100;
}

int cmd_report(const CommonArgs& args, const std::string& input,
               const std::string& target_fa_csv) {
  auto map = load_config(args);
  if (!target_fa_csv.empty()) map.set("target_fa", target_fa_csv);
  const cpm::CliOptions opt = cpm::parse_cli_options(map);

  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open results file '" + input + "'");
  const auto rows = cpm::read_results_csv(in);
  const auto curves = cpm::group_curves(rows);
  if (curves.empty()) throw std::runtime_error("results file has no data rows");

  // long-format curves CSV
  std::ofstream curves_out(args.out);
  if (!curves_out) throw std::runtime_error("cannot write curves file '" + args.out + "'");
  curves_out << "detector,ncm,betting,theta,mu1,h,fa_prob,mean_delay\n";
  char buf[256];
  for (const auto& [key, curve] : curves) {
    for (std::size_t i = 0; i < curve.h.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%zu,%.10g,%.10g,%.10g,%.10g",
                    std::get<0>(key).c_str(), std::get<1>(key).c_str(), std::get<2>(key).c_str(),
                    std::get<3>(key), std::get<4>(key), curve.h[i], curve.fa[i], curve.delay[i]);
      curves_out << buf << "\n";
    }
  }

  // one table per betting kind, paper-style: rows (theta, mu1), columns
  // detector x target FA
  std::set<std::string> bettings;
  for (const auto& [key, curve] : curves) bettings.insert(std::get<2>(key));
  for (const auto& betting : bettings) {
    std::vector<std::string> labels;
    std::set<std::pair<std::size_t, double>> cells;
    for (const auto& [key, curve] : curves) {
      if (std::get<2>(key) != betting) continue;
      const std::string label = detector_label(std::get<0>(key), std::get<1>(key));
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
      cells.insert({std::get<3>(key), std::get<4>(key)});
    }
    std::sort(labels.begin(), labels.end(),
              [](const std::string& a, const std::string& b) { return label_rank(a) < label_rank(b); });

    std::printf("\nMean delay by false-alarm probability (betting: %s)\n", betting.c_str());
    std::printf("%-22s", "config");
    for (double fa : opt.target_fa)
      for (const auto& label : labels) std::printf("%16s", (label + "@" + format_fa(fa)).c_str());
    std::printf("\n");
    for (const auto& [theta, mu1] : cells) {
      std::snprintf(buf, sizeof(buf), "theta=%zu mu1=%g", theta, mu1);
      std::printf("%-22s", buf);
      for (double fa : opt.target_fa) {
        for (const auto& label : labels) {
          std::optional<double> delay;
          for (const auto& [key, curve] : curves) {
            if (std::get<2>(key) != betting || std::get<3>(key) != theta ||
                std::get<4>(key) != mu1)
              continue;
            if (detector_label(std::get<0>(key), std::get<1>(key)) != label) continue;
            delay = cpm::curve_delay_at_fa(curve, fa);
          }
          if (delay) {
            std::printf("%16.2f", *delay);
          } else {
            std::printf("%16s", "n/a");
            std::fprintf(stderr, "warning: FA=%g not bracketed for %s (theta=%zu mu1=%g)\n", fa,
                         label.c_str(), theta, mu1);
          }
        }
      }
      std::printf("\n");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-point detection with inductive conformal martingales"};
  app.require_subcommand(1);

  CommonArgs detect_args, simulate_args, calibrate_args, report_args;
  std::string detect_input, detect_train;
  std::string simulate_preset;
  std::string calibrate_input;
  std::string report_input, report_fa;

  auto* detect = app.add_subcommand("detect", "run detection on an observation file");
  add_common(detect, detect_args, "trace.csv");
  detect->add_option("--input", detect_input, "observation file")->required();
  detect->add_option("--train", detect_train, "separate training observation file");
  stage(detect, detect_args, "--train-rows", "train_rows", "leading input rows used as training");
  stage(detect, detect_args, "--threshold", "h", "alarm threshold");
  stage(detect, detect_args, "--detector", "detector", "detector family (icm, full-cm)");
  stage(detect, detect_args, "--ncm", "ncm", "non-conformity measure");
  stage(detect, detect_args, "--betting", "betting", "betting function");
  stage(detect, detect_args, "--density-file", "density_file", "precomputed betting density");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo false-alarm/delay sweeps");
  add_common(simulate, simulate_args, "results.csv");
  simulate->add_option("--preset", simulate_preset, "experiment battery (table1..table5)");
  stage(simulate, simulate_args, "--replications", "replications", "replications per configuration");
  stage(simulate, simulate_args, "--theta", "theta", "change index");
  stage(simulate, simulate_args, "--mu1", "mu1", "post-change mean");
  stage(simulate, simulate_args, "--detector", "detector", "detector family");
  stage(simulate, simulate_args, "--ncm", "ncm", "non-conformity measure");
  stage(simulate, simulate_args, "--betting", "betting", "betting function");
  stage(simulate, simulate_args, "--density-file", "density_file", "precomputed betting density");

  auto* calibrate = app.add_subcommand("calibrate", "fit the precomputed betting density");
  add_common(calibrate, calibrate_args, "density.txt");
  calibrate->add_option("--input", calibrate_input, "user calibration stream (default: recipe)");
  stage(calibrate, calibrate_args, "--train-rows", "train_rows", "training rows in --input");
  stage(calibrate, calibrate_args, "--ncm", "ncm", "non-conformity measure");
  stage(calibrate, calibrate_args, "--grid-size", "grid_size", "density grid nodes");
  stage(calibrate, calibrate_args, "--calib-length", "calib_length", "recipe stream length");
  stage(calibrate, calibrate_args, "--calib-theta", "calib_theta", "recipe change index");
  stage(calibrate, calibrate_args, "--calib-mu1", "calib_mu1", "recipe post-change mean");

  auto* report = app.add_subcommand("report", "delay tables at target false-alarm levels");
  add_common(report, report_args, "curves.csv");
  report->add_option("--input", report_input, "results CSV from simulate")->required();
  report->add_option("--target-fa", report_fa, "comma-separated false-alarm targets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (detect->parsed()) return cmd_detect(detect_args, detect_input, detect_train);
    if (simulate->parsed()) return cmd_simulate(simulate_args, simulate_preset);
    if (calibrate->parsed()) return cmd_calibrate(calibrate_args, calibrate_input);
    if (report->parsed()) return cmd_report(report_args, report_input, report_fa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
