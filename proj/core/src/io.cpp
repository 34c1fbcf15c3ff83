#include "gpda/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gpda {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw io_error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw io_error("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw io_error("write failed for " + path.string());
  }
}

double parse_cell(const std::string& cell, Eigen::Index row, Eigen::Index col) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw config_error("non-numeric cell at row " + std::to_string(row + 1) +
                       ", column " + std::to_string(col + 1) + ": '" + cell +
                       "'");
  }
  return value;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace

FunctionalDataset load_dataset(const std::filesystem::path& path,
                               const DatasetFormat& fmt) {
  const std::string text = read_file(path);
  std::istringstream stream(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool skipped_header = !fmt.header;
  while (std::getline(stream, line)) {
    if (line.empty() || line == "\r") continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    rows.push_back(split_line(line, fmt.delimiter));
  }
  if (rows.empty()) {
    throw config_error("dataset " + path.string() + " has no data rows");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index offset = fmt.labeled ? 1 : 0;
  const Eigen::Index T = static_cast<Eigen::Index>(rows[0].size()) - offset;
  if (T < 2) {
    throw config_error("dataset rows must carry at least two locations");
  }

  FunctionalDataset data;
  data.X.resize(n, T);
  data.y = Eigen::VectorXi::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != T + offset) {
      throw config_error("ragged row " + std::to_string(i + 1) + ": expected " +
                         std::to_string(T + offset) + " cells, found " +
                         std::to_string(rows[i].size()));
    }
    if (fmt.labeled) {
      const double label = parse_cell(rows[i][0], i, 0);
      if (label != 0.0 && label != 1.0) {
        throw config_error("label outside {0,1} at row " +
                           std::to_string(i + 1));
      }
      data.y[i] = static_cast<int>(label);
    }
    for (Eigen::Index j = 0; j < T; ++j) {
      data.X(i, j) = parse_cell(rows[i][j + offset], i, j + offset);
    }
  }
  data.grid = GridSpec(T, fmt.delta);
  return data;
}

void save_dataset(const std::filesystem::path& path,
                  const FunctionalDataset& data, const DatasetFormat& fmt) {
  std::ostringstream out;
  const char d = fmt.delimiter;
  if (fmt.header) {
    if (fmt.labeled) out << "label" << d;
    for (Eigen::Index j = 0; j < data.T(); ++j) {
      out << "t" << j << (j + 1 < data.T() ? std::string(1, d) : "");
    }
    out << "\n";
  }
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (fmt.labeled) out << data.y[i] << d;
    for (Eigen::Index j = 0; j < data.T(); ++j) {
      out << format_double(data.X(i, j));
      if (j + 1 < data.T()) out << d;
    }
    out << "\n";
  }
  write_file(path, out.str());
}

// --- config ------------------------------------------------------------------

namespace {

json to_json(const InvGammaPrior& p) {
  return json{{"shape", p.shape}, {"rate", p.rate}};
}
void from_json_into(const json& j, InvGammaPrior& p) {
  p.shape = j.at("shape").get<double>();
  p.rate = j.at("rate").get<double>();
}
json to_json(const LogNormalPrior& p) {
  return json{{"mu", p.mu}, {"sigma", p.sigma}};
}
void from_json_into(const json& j, LogNormalPrior& p) {
  p.mu = j.at("mu").get<double>();
  p.sigma = j.at("sigma").get<double>();
}

json to_json(const Hyperparams& h) {
  return json{{"mean_scale", to_json(h.mean_scale)},
              {"noise", to_json(h.noise)},
              {"latent_scale", to_json(h.latent_scale)},
              {"common_scale", to_json(h.common_scale)},
              {"mean_ls_scale", to_json(h.mean_ls_scale)},
              {"mean_ls_length", to_json(h.mean_ls_length)},
              {"common_ls_length", to_json(h.common_ls_length)},
              {"mean_ls_prior_mean", h.mean_ls_prior_mean},
              {"common_ls_prior_mean", h.common_ls_prior_mean},
              {"zeta_variance", h.zeta_variance},
              {"auto_length_priors", h.auto_length_priors},
              {"ising",
               json{{"flat", h.ising.flat},
                    {"alpha_mean", h.ising.alpha_mean},
                    {"alpha_sd", h.ising.alpha_sd},
                    {"log_beta_mean", h.ising.log_beta_mean},
                    {"log_beta_sd", h.ising.log_beta_sd},
                    {"alpha_min", h.ising.alpha_min},
                    {"alpha_max", h.ising.alpha_max},
                    {"beta_max", h.ising.beta_max}}}};
}

void from_json_into(const json& j, Hyperparams& h) {
  from_json_into(j.at("mean_scale"), h.mean_scale);
  from_json_into(j.at("noise"), h.noise);
  from_json_into(j.at("latent_scale"), h.latent_scale);
  from_json_into(j.at("common_scale"), h.common_scale);
  from_json_into(j.at("mean_ls_scale"), h.mean_ls_scale);
  from_json_into(j.at("mean_ls_length"), h.mean_ls_length);
  from_json_into(j.at("common_ls_length"), h.common_ls_length);
  h.mean_ls_prior_mean = j.at("mean_ls_prior_mean").get<double>();
  h.common_ls_prior_mean = j.at("common_ls_prior_mean").get<double>();
  h.zeta_variance = j.at("zeta_variance").get<double>();
  h.auto_length_priors = j.at("auto_length_priors").get<bool>();
  const json& is = j.at("ising");
  h.ising.flat = is.at("flat").get<bool>();
  h.ising.alpha_mean = is.at("alpha_mean").get<double>();
  h.ising.alpha_sd = is.at("alpha_sd").get<double>();
  h.ising.log_beta_mean = is.at("log_beta_mean").get<double>();
  h.ising.log_beta_sd = is.at("log_beta_sd").get<double>();
  h.ising.alpha_min = is.at("alpha_min").get<double>();
  h.ising.alpha_max = is.at("alpha_max").get<double>();
  h.ising.beta_max = is.at("beta_max").get<double>();
}

}  // namespace

std::string config_to_json(const RunConfig& c) {
  json j;
  j["data"] = json{{"path", c.data_path},
                   {"delimiter", std::string(1, c.delimiter)},
                   {"header", c.header},
                   {"delta", c.delta}};
  j["model_path"] = c.model_path;
  j["truth_path"] = c.truth_path;
  j["out_dir"] = c.out_dir;
  j["hyper"] = to_json(c.hyper);
  j["fit"] = json{{"tol", c.fit.tol},
                  {"max_sweeps", c.fit.max_sweeps},
                  {"threads", c.fit.threads},
                  {"pure_cavi", c.fit.pure_cavi},
                  {"svb_steps", c.fit.svb_steps},
                  {"svb_grad_tol", c.fit.svb_grad_tol},
                  {"record_elbo", c.fit.record_elbo}};
  j["seed"] = c.seed;
  j["selection_threshold"] = c.selection_threshold;
  j["sim"] = json{{"setting", c.sim.setting},
                  {"T", c.sim.T},
                  {"n", c.sim.n},
                  {"delta", c.sim.delta},
                  {"signal_fraction", c.sim.signal_fraction},
                  {"signal_strength", c.sim.signal_strength},
                  {"signal_var_ratio", c.sim.signal_var_ratio},
                  {"block_position", c.sim.block_position},
                  {"noise_sd", c.sim.noise_sd},
                  {"tau_star", c.sim.tau_star},
                  {"tau2_star", c.sim.tau2_star},
                  {"lambda_star", c.sim.lambda_star},
                  {"index_perturbations", c.sim.index_perturbations},
                  {"uniform_rho", c.sim.uniform_rho},
                  {"class_balance", c.sim.class_balance},
                  {"seed", c.sim.seed}};
  j["evaluate"] = json{{"folds", c.folds}, {"test_fraction", c.test_fraction}};
  j["archive_latents"] = c.archive_latents;
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config parse failure: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("data")) {
      const json& d = j["data"];
      c.data_path = d.value("path", c.data_path);
      const std::string delim = d.value("delimiter", std::string(","));
      if (delim == "tab" || delim == "\t") {
        c.delimiter = '\t';
      } else if (delim == "comma" || delim == ",") {
        c.delimiter = ',';
      } else {
        throw config_error("unsupported delimiter '" + delim + "'");
      }
      c.header = d.value("header", c.header);
      c.delta = d.value("delta", c.delta);
    }
    c.model_path = j.value("model_path", c.model_path);
    c.truth_path = j.value("truth_path", c.truth_path);
    c.out_dir = j.value("out_dir", c.out_dir);
    if (j.contains("hyper")) from_json_into(j["hyper"], c.hyper);
    if (j.contains("fit")) {
      const json& f = j["fit"];
      c.fit.tol = f.value("tol", c.fit.tol);
      c.fit.max_sweeps = f.value("max_sweeps", c.fit.max_sweeps);
      c.fit.threads = f.value("threads", c.fit.threads);
      c.fit.pure_cavi = f.value("pure_cavi", c.fit.pure_cavi);
      c.fit.svb_steps = f.value("svb_steps", c.fit.svb_steps);
      c.fit.svb_grad_tol = f.value("svb_grad_tol", c.fit.svb_grad_tol);
      c.fit.record_elbo = f.value("record_elbo", c.fit.record_elbo);
    }
    c.seed = j.value("seed", c.seed);
    c.selection_threshold =
        j.value("selection_threshold", c.selection_threshold);
    if (j.contains("sim")) {
      const json& s = j["sim"];
      c.sim.setting = s.value("setting", c.sim.setting);
      c.sim.T = s.value("T", c.sim.T);
      c.sim.n = s.value("n", c.sim.n);
      c.sim.delta = s.value("delta", c.sim.delta);
      c.sim.signal_fraction = s.value("signal_fraction", c.sim.signal_fraction);
      c.sim.signal_strength = s.value("signal_strength", c.sim.signal_strength);
      c.sim.signal_var_ratio =
          s.value("signal_var_ratio", c.sim.signal_var_ratio);
      c.sim.block_position = s.value("block_position", c.sim.block_position);
      c.sim.noise_sd = s.value("noise_sd", c.sim.noise_sd);
      c.sim.tau_star = s.value("tau_star", c.sim.tau_star);
      c.sim.tau2_star = s.value("tau2_star", c.sim.tau2_star);
      c.sim.lambda_star = s.value("lambda_star", c.sim.lambda_star);
      c.sim.index_perturbations =
          s.value("index_perturbations", c.sim.index_perturbations);
      c.sim.uniform_rho = s.value("uniform_rho", c.sim.uniform_rho);
      c.sim.class_balance = s.value("class_balance", c.sim.class_balance);
      c.sim.seed = s.value("seed", c.sim.seed);
    }
    if (j.contains("evaluate")) {
      c.folds = j["evaluate"].value("folds", c.folds);
      c.test_fraction = j["evaluate"].value("test_fraction", c.test_fraction);
    }
    c.archive_latents = j.value("archive_latents", c.archive_latents);
  } catch (const json::exception& e) {
    throw config_error(std::string("config field failure: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_file(path));
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  write_file(path, config_to_json(config));
}

// --- model archive -------------------------------------------------------------

namespace {

constexpr int kArchiveVersion = 1;

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vec_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

json field_to_json(const GaussianFieldPosterior& q) {
  return json{{"mean", vec_to_json(q.mean)},
              {"ldiag", vec_to_json(q.omega.ldiag)},
              {"lsub", vec_to_json(q.omega.lsub)}};
}

GaussianFieldPosterior field_from_json(const json& j) {
  GaussianFieldPosterior q;
  q.mean = vec_from_json(j.at("mean"));
  q.omega.ldiag = vec_from_json(j.at("ldiag"));
  q.omega.lsub = vec_from_json(j.at("lsub"));
  q.refresh_cov();
  return q;
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelState& state,
                const Hyperparams& hyper, bool include_latents) {
  json j;
  j["format_version"] = kArchiveVersion;
  j["grid"] = json{{"T", state.grid.T}, {"delta", state.grid.delta}};
  j["n0"] = state.n0;
  j["n1"] = state.n1;
  j["selection"] = vec_to_json(state.selection);
  for (int k : kAllSlots) {
    j["mean_fields"].push_back(field_to_json(state.mean_fields[k]));
    j["mean_ls_fields"].push_back(field_to_json(state.mean_ls_fields[k]));
    j["mean_scales"].push_back(json{{"shape", state.mean_scales[k].shape},
                                    {"rate", state.mean_scales[k].rate}});
    j["noise"].push_back(json{{"shape", vec_to_json(state.noise[k].shape)},
                              {"rate", vec_to_json(state.noise[k].rate)}});
  }
  j["latent_scale"] = json{{"shape", state.latent_scale.shape},
                           {"rate", state.latent_scale.rate}};
  j["common_ls"] = field_to_json(state.common_ls);
  j["perturbations"] = vec_to_json(state.perturbations);
  j["map"] = json{{"common_length", state.map.common_length},
                  {"common_scale", state.map.common_scale},
                  {"mean_ls_scale", state.map.mean_ls_scale},
                  {"mean_ls_length", state.map.mean_ls_length}};
  j["ising"] = json{{"alpha", state.ising.alpha}, {"beta", state.ising.beta}};
  j["converged"] = state.converged;
  j["warning"] = state.warning;
  j["elbo_trace"] = state.elbo_trace;
  j["hyper"] = to_json(hyper);
  if (include_latents) {
    for (const auto& z : state.latents) {
      j["latents"].push_back(field_to_json(z));
    }
  }
  write_file(path, j.dump() + "\n");
}

LoadedModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw config_error(std::string("model archive parse failure: ") + e.what());
  }
  if (!j.contains("format_version") ||
      j["format_version"].get<int>() != kArchiveVersion) {
    throw config_error("unsupported model archive version");
  }
  LoadedModel out;
  ModelState& s = out.state;
  try {
    s.grid = GridSpec(j.at("grid").at("T").get<Eigen::Index>(),
                      j.at("grid").at("delta").get<double>());
    s.n0 = j.at("n0").get<Eigen::Index>();
    s.n1 = j.at("n1").get<Eigen::Index>();
    s.selection = vec_from_json(j.at("selection"));
    for (int k : kAllSlots) {
      s.mean_fields[k] = field_from_json(j.at("mean_fields")[k]);
      s.mean_ls_fields[k] = field_from_json(j.at("mean_ls_fields")[k]);
      s.mean_scales[k].shape = j.at("mean_scales")[k].at("shape").get<double>();
      s.mean_scales[k].rate = j.at("mean_scales")[k].at("rate").get<double>();
      s.noise[k].shape = vec_from_json(j.at("noise")[k].at("shape"));
      s.noise[k].rate = vec_from_json(j.at("noise")[k].at("rate"));
    }
    s.latent_scale.shape = j.at("latent_scale").at("shape").get<double>();
    s.latent_scale.rate = j.at("latent_scale").at("rate").get<double>();
    s.common_ls = field_from_json(j.at("common_ls"));
    s.perturbations = vec_from_json(j.at("perturbations"));
    s.map.common_length = j.at("map").at("common_length").get<double>();
    s.map.common_scale = j.at("map").at("common_scale").get<double>();
    s.map.mean_ls_scale = j.at("map").at("mean_ls_scale").get<double>();
    s.map.mean_ls_length = j.at("map").at("mean_ls_length").get<double>();
    s.ising.alpha = j.at("ising").at("alpha").get<double>();
    s.ising.beta = j.at("ising").at("beta").get<double>();
    s.converged = j.at("converged").get<bool>();
    s.warning = j.at("warning").get<bool>();
    s.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
    from_json_into(j.at("hyper"), out.hyper);
    if (j.contains("latents")) {
      for (const auto& zj : j["latents"]) {
        s.latents.push_back(field_from_json(zj));
      }
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("model archive field failure: ") + e.what());
  }
  return out;
}

// --- tables --------------------------------------------------------------------

namespace {

void write_table(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c] << (c + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
  write_file(path, out.str());
}

}  // namespace

void write_selection_table(const std::filesystem::path& path,
                           const Eigen::VectorXd& w) {
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    rows.push_back({std::to_string(j), format_double(w[j])});
  }
  write_table(path, "location,probability", rows);
}

void write_mean_table(const std::filesystem::path& path,
                      const ModelState& state) {
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index j = 0; j < state.T(); ++j) {
    rows.push_back({std::to_string(j),
                    format_double(state.mean_fields[kClass0].mean[j]),
                    format_double(state.mean_fields[kClass1].mean[j]),
                    format_double(state.mean_fields[kShared].mean[j])});
  }
  write_table(path, "location,m_mu0,m_mu1,m_mu_shared", rows);
}

void write_lengthscale_table(const std::filesystem::path& path,
                             const ModelState& state) {
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index j = 0; j < state.T(); ++j) {
    rows.push_back({std::to_string(j),
                    format_double(state.common_ls.mean[j]),
                    format_double(state.mean_ls_fields[kClass0].mean[j]),
                    format_double(state.mean_ls_fields[kClass1].mean[j]),
                    format_double(state.mean_ls_fields[kShared].mean[j])});
  }
  write_table(path, "location,m_R,m_nu0,m_nu1,m_nu_shared", rows);
}

void write_elbo_table(const std::filesystem::path& path,
                      const std::vector<double>& trace) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t s = 0; s < trace.size(); ++s) {
    rows.push_back({std::to_string(s + 1), format_double(trace[s])});
  }
  write_table(path, "sweep,elbo", rows);
}

void write_prediction_table(const std::filesystem::path& path,
                            const std::vector<Prediction>& preds) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    rows.push_back({std::to_string(i), format_double(preds[i].xi1),
                    std::to_string(preds[i].predicted_label),
                    format_double(preds[i].qda_score)});
  }
  write_table(path, "row,xi1,label,qda_score", rows);
}

void write_metrics_table(const std::filesystem::path& path,
                         const std::vector<EvalRow>& rows_in) {
  std::vector<std::vector<std::string>> rows;
  auto median_of = [&](auto getter) {
    std::vector<double> v;
    for (const auto& r : rows_in) v.push_back(getter(r));
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    return (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  };
  for (const auto& r : rows_in) {
    rows.push_back({std::to_string(r.index), format_double(r.error),
                    format_double(r.tpr), format_double(r.tnr),
                    format_double(r.mcc)});
  }
  if (!rows_in.empty()) {
    rows.push_back(
        {"median",
         format_double(median_of([](const EvalRow& r) { return r.error; })),
         format_double(median_of([](const EvalRow& r) { return r.tpr; })),
         format_double(median_of([](const EvalRow& r) { return r.tnr; })),
         format_double(median_of([](const EvalRow& r) { return r.mcc; }))});
  }
  write_table(path, "split,error,tpr,tnr,mcc", rows);
}

}  // namespace gpda
