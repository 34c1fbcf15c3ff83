// gpda: train / predict / simulate / evaluate for the non-stationary
// Gaussian-process discriminant analysis library.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gpda/io.hpp"
#include "gpda/rng.hpp"
#include "gpda/vi_engine.hpp"

namespace fs = std::filesystem;
using namespace gpda;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitNumerical = 4;

struct CommonFlags {
  std::string config_path;
  std::string data_path;
  std::string model_path;
  std::string truth_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string delimiter;  // comma | tab
  std::string header;     // yes | no
  std::optional<int> folds;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "configuration file (JSON)");
  cmd->add_option("--data", flags.data_path, "dataset file");
  cmd->add_option("--model", flags.model_path, "model archive");
  cmd->add_option("--truth", flags.truth_path, "signal ground-truth table");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--threads", flags.threads, "worker threads");
  cmd->add_option("--delimiter", flags.delimiter, "comma|tab")
      ->check(CLI::IsMember({"comma", "tab"}));
  cmd->add_option("--header", flags.header, "yes|no")
      ->check(CLI::IsMember({"yes", "no"}));
  cmd->add_option("--folds", flags.folds, "cross-validation folds");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig config;
  if (!flags.config_path.empty()) {
    config = load_config(flags.config_path);
  }
  if (!flags.data_path.empty()) config.data_path = flags.data_path;
  if (!flags.model_path.empty()) config.model_path = flags.model_path;
  if (!flags.truth_path.empty()) config.truth_path = flags.truth_path;
  if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
  if (flags.seed) {
    config.seed = *flags.seed;
    config.sim.seed = *flags.seed;
  }
  if (flags.threads) {
    config.fit.threads = *flags.threads;
  } else if (const char* env = std::getenv("GPDA_THREADS")) {
    config.fit.threads = std::max(1, std::atoi(env));
  }
  if (!flags.delimiter.empty()) {
    config.delimiter = (flags.delimiter == "tab") ? '\t' : ',';
  }
  if (!flags.header.empty()) config.header = (flags.header == "yes");
  if (flags.folds) config.folds = *flags.folds;
  return config;
}

DatasetFormat dataset_format(const RunConfig& config, bool labeled) {
  DatasetFormat fmt;
  fmt.delimiter = config.delimiter;
  fmt.header = config.header;
  fmt.labeled = labeled;
  fmt.delta = config.delta;
  return fmt;
}

fs::path out_file(const RunConfig& config, const std::string& name) {
  fs::create_directories(config.out_dir);
  return fs::path(config.out_dir) / name;
}

Eigen::VectorXi load_truth_gamma(const fs::path& path) {
  // The gamma column of the truth table written by the simulate command.
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<int> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto first = line.find(',');
    if (first == std::string::npos) {
      throw config_error("truth table: missing gamma column");
    }
    const auto second = line.find(',', first + 1);
    const std::string cell =
        line.substr(first + 1, second == std::string::npos
                                   ? std::string::npos
                                   : second - first - 1);
    values.push_back(std::stoi(cell));
  }
  Eigen::VectorXi gamma(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    gamma[static_cast<Eigen::Index>(i)] = values[i];
  }
  return gamma;
}

int cmd_train(const RunConfig& config) {
  if (config.data_path.empty()) {
    throw config_error("train: no dataset path given");
  }
  const FunctionalDataset data =
      load_dataset(config.data_path, dataset_format(config, true));
  const Hyperparams hyper = config.hyper.resolved_for(data.grid);

  FitReport report;
  const ModelState state = fit(data, hyper, config.fit, &report);

  const fs::path model_path = config.model_path.empty()
                                  ? out_file(config, "model.json")
                                  : fs::path(config.model_path);
  save_model(model_path, state, hyper, config.archive_latents);
  write_selection_table(out_file(config, "selection.csv"), state.selection);
  write_mean_table(out_file(config, "mean_functions.csv"), state);
  write_lengthscale_table(out_file(config, "lengthscales.csv"), state);
  write_elbo_table(out_file(config, "elbo_trace.csv"), state.elbo_trace);

  std::cout << "train: " << (state.converged ? "converged" : "max sweeps")
            << " after " << report.sweeps << " sweeps\n";
  return state.converged ? kExitOk : kExitNoConvergence;
}

int cmd_predict(const RunConfig& config) {
  if (config.model_path.empty()) {
    throw config_error("predict: no model path given");
  }
  if (config.data_path.empty()) {
    throw config_error("predict: no dataset path given");
  }
  const LoadedModel model = load_model(config.model_path);
  const FunctionalDataset data =
      load_dataset(config.data_path, dataset_format(config, false));
  if (data.T() != model.state.T()) {
    throw config_error("predict: dataset has " + std::to_string(data.T()) +
                       " locations, model expects " +
                       std::to_string(model.state.T()));
  }
  PredictOptions opts;
  opts.threshold = config.selection_threshold;
  std::vector<Prediction> preds;
  preds.reserve(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    preds.push_back(
        predict(data.X.row(i).transpose(), model.state, model.hyper, opts));
  }
  write_prediction_table(out_file(config, "predictions.csv"), preds);
  return kExitOk;
}

int cmd_simulate(const RunConfig& config) {
  const auto [data, truth] = generate_dataset(config.sim);
  save_dataset(out_file(config, "dataset.csv"), data,
               dataset_format(config, true));

  std::ostringstream out;
  out << "location,gamma,mu0,mu1,sigma0,sigma1,R\n";
  for (Eigen::Index j = 0; j < data.T(); ++j) {
    out << j << ',' << truth.gamma_star[j] << ','
        << format_double(truth.mu_star[0][j]) << ','
        << format_double(truth.mu_star[1][j]) << ','
        << format_double(truth.sigma_star[0][j]) << ','
        << format_double(truth.sigma_star[1][j]) << ','
        << format_double(truth.R_star[j]) << "\n";
  }
  std::ofstream truth_file(out_file(config, "truth.csv"));
  if (!truth_file) throw io_error("cannot write truth table");
  truth_file << out.str();
  return kExitOk;
}

// Stratified index split: per class, a seeded shuffle dealt round-robin
// across folds.
std::vector<std::vector<Eigen::Index>> stratified_folds(
    const Eigen::VectorXi& y, int k, std::uint64_t seed) {
  std::vector<std::vector<Eigen::Index>> folds(k);
  for (int label = 0; label < 2; ++label) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] == label) idx.push_back(i);
    }
    Rng rng(derive_seed(seed, 777 + label));
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      folds[i % k].push_back(idx[i]);
    }
  }
  return folds;
}

FunctionalDataset subset(const FunctionalDataset& data,
                         const std::vector<Eigen::Index>& idx) {
  FunctionalDataset out;
  out.grid = data.grid;
  out.X.resize(static_cast<Eigen::Index>(idx.size()), data.T());
  out.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = data.X.row(idx[r]);
    out.y[static_cast<Eigen::Index>(r)] = data.y[idx[r]];
  }
  return out;
}

int cmd_evaluate(const RunConfig& config) {
  if (config.data_path.empty()) {
    throw config_error("evaluate: no dataset path given");
  }
  const FunctionalDataset data =
      load_dataset(config.data_path, dataset_format(config, true));
  const Hyperparams hyper = config.hyper.resolved_for(data.grid);

  Eigen::VectorXi truth_gamma;
  if (!config.truth_path.empty()) {
    truth_gamma = load_truth_gamma(config.truth_path);
    if (truth_gamma.size() != data.T()) {
      throw config_error("evaluate: truth table length mismatch");
    }
  }

  const int k = std::max(config.folds, 0);
  std::vector<std::vector<Eigen::Index>> folds;
  if (k >= 2) {
    folds = stratified_folds(data.y, k, config.seed);
  } else {
    const int denom = std::max(
        2, static_cast<int>(
               std::lround(1.0 / std::max(config.test_fraction, 1e-9))));
    auto all = stratified_folds(data.y, denom, config.seed);
    folds.push_back(all[0]);  // single holdout split
  }

  bool all_converged = true;
  std::vector<EvalRow> rows;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::vector<Eigen::Index>& test_idx = folds[f];
    std::vector<Eigen::Index> train_idx;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (std::find(test_idx.begin(), test_idx.end(), i) == test_idx.end()) {
        train_idx.push_back(i);
      }
    }
    const FunctionalDataset train = subset(data, train_idx);
    const FunctionalDataset test = subset(data, test_idx);

    FitReport report;
    const ModelState state = fit(train, hyper, config.fit, &report);
    all_converged = all_converged && state.converged;

    PredictOptions popts;
    Eigen::VectorXi pred(test.n());
    for (Eigen::Index i = 0; i < test.n(); ++i) {
      pred[i] = predict(test.X.row(i).transpose(), state, hyper, popts)
                    .predicted_label;
    }
    const ClassificationMetrics m = classification_metrics(pred, test.y);
    EvalRow row;
    row.index = static_cast<int>(f);
    row.error = m.error_rate;
    row.tpr = m.tpr;
    row.tnr = m.tnr;
    if (truth_gamma.size() > 0) {
      row.mcc = mcc(
          threshold_selection(state.selection, config.selection_threshold),
          truth_gamma);
    }
    rows.push_back(row);
  }
  write_metrics_table(out_file(config, "metrics.csv"), rows);
  return all_converged ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Non-stationary GP discriminant analysis with variable selection"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit a model to labeled data");
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "classify new observations");
  CLI::App* simulate_cmd =
      app.add_subcommand("simulate", "draw a synthetic dataset");
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "cross-validated train/predict metrics");
  for (CLI::App* cmd : {train_cmd, predict_cmd, simulate_cmd, evaluate_cmd}) {
    add_common_flags(cmd, flags);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig config = resolve_config(flags);
    if (train_cmd->parsed()) return cmd_train(config);
    if (predict_cmd->parsed()) return cmd_predict(config);
    if (simulate_cmd->parsed()) return cmd_simulate(config);
    if (evaluate_cmd->parsed()) return cmd_evaluate(config);
    return kExitConfig;
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
