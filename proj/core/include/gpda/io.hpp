#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpda/classifier.hpp"
#include "gpda/metrics.hpp"
#include "gpda/model.hpp"
#include "gpda/simulate.hpp"

namespace gpda {

/// Unreadable/unwritable files.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed content, invalid configuration, shape mismatches.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetFormat {
  char delimiter = ',';
  bool header = false;
  bool labeled = true;  ///< first column holds the 0/1 label
  double delta = 1.0;   ///< grid spacing attached on load
};

/// Parses a delimited text matrix, one observation per row. Errors carry the
/// offending 1-based row/column coordinates.
FunctionalDataset load_dataset(const std::filesystem::path& path,
                               const DatasetFormat& fmt);

void save_dataset(const std::filesystem::path& path,
                  const FunctionalDataset& data, const DatasetFormat& fmt);

/// Everything a run needs: hyperparameters, fit options, generator and
/// evaluation settings, and I/O locations. Round-trips losslessly through its
/// JSON form.
struct RunConfig {
  // io
  std::string data_path;
  std::string model_path;
  std::string truth_path;  ///< optional signal ground truth for evaluate
  std::string out_dir = ".";
  char delimiter = ',';
  bool header = false;
  double delta = 1.0;

  Hyperparams hyper;
  FitOptions fit;
  std::uint64_t seed = 1;
  double selection_threshold = 0.5;

  SimConfig sim;

  // evaluate
  int folds = 0;             ///< 0: single stratified holdout
  double test_fraction = 0.3;

  bool archive_latents = false;
};

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& config);
std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);

/// Versioned model archive (structured text). Latent-process factors are
/// omitted unless requested; they are not needed for prediction.
void save_model(const std::filesystem::path& path, const ModelState& state,
                const Hyperparams& hyper, bool include_latents = false);

struct LoadedModel {
  ModelState state;
  Hyperparams hyper;
};
LoadedModel load_model(const std::filesystem::path& path);

// --- plot-ready result tables (delimited text with headers) -----------------

void write_selection_table(const std::filesystem::path& path,
                           const Eigen::VectorXd& w);
void write_mean_table(const std::filesystem::path& path,
                      const ModelState& state);
void write_lengthscale_table(const std::filesystem::path& path,
                             const ModelState& state);
void write_elbo_table(const std::filesystem::path& path,
                      const std::vector<double>& trace);
void write_prediction_table(const std::filesystem::path& path,
                            const std::vector<Prediction>& preds);

struct EvalRow {
  int index = 0;  ///< fold or replicate number
  double error = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  double mcc = 0.0;
};
void write_metrics_table(const std::filesystem::path& path,
                         const std::vector<EvalRow>& rows);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace gpda
