#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "oscchain/error.hpp"
#include "oscchain/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kOther = 1;
constexpr int kConfig = 2;
constexpr int kNumeric = 3;
constexpr int kPartial = 4;

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw oscchain::ConfigError("bad sweep value '" + item + "'", "values");
    }
  }
  return out;
}

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anharmonic chain fluctuation experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis, values, plot_dir;
  std::uint64_t seed = 0;
  unsigned workers = 0;

  auto overrides = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "override the base seed");
    sub->add_option("--workers", workers, "worker threads (0: all hardware threads)");
    sub->add_option("--out", out_dir, "override the output directory");
  };
  auto* run = app.add_subcommand("run", "run every estimator in a config");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  overrides(run);
  auto* sw = app.add_subcommand("sweep", "repeat a run over one axis");
  sw->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  sw->add_option("--axis", axis, "n, ell, b_exp or a_exp")->required();
  sw->add_option("--values", values, "comma separated, increasing")->required();
  overrides(sw);
  auto* plot = app.add_subcommand("plot", "write SVG plots for a results directory");
  plot->add_option("dir", plot_dir, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (plot->parsed()) {
      const auto rep = oscchain::emit_plots(plot_dir);
      warn_all(rep.warnings);
      for (const auto& f : rep.files) std::cout << f.string() << '\n';
      return kOk;
    }
    auto config = oscchain::ExperimentConfig::load(config_path);
    auto* sub = run->parsed() ? run : sw;
    if (sub->count("--seed")) config.seed = seed;
    if (sub->count("--workers")) config.workers = workers;
    if (sub->count("--out")) config.output = out_dir;
    if (run->parsed()) {
      const auto rep = oscchain::run_experiment(config);
      warn_all(rep.warnings);
      std::cout << "wrote " << rep.files.size() << " files to " << rep.directory.string() << " in "
                << rep.wall_seconds << " s\n";
      return kOk;
    }
    const auto rep = oscchain::sweep(config, oscchain::parse_sweep_axis(axis), parse_values(values));
    warn_all(rep.warnings);
    for (const auto& f : rep.failures) std::cerr << "failed: " << f << '\n';
    std::cout << "wrote " << rep.aggregate.string() << '\n';
    return rep.failures.empty() ? kOk : kPartial;
  } catch (const oscchain::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfig;
  } catch (const oscchain::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const oscchain::EnvelopeFailure& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const oscchain::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kOther;
  } catch (const oscchain::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kOther;
  } catch (const oscchain::Error& e) {
    // domain, frame and resolution problems come from the chosen settings
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }
}
