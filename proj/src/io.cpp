#include "spinopt/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spinopt::io {

namespace {

std::vector<double> parse_csv_line(const std::string& line) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t comma = line.find(',', pos);
    const std::string cell =
        line.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad numeric cell '" + cell + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool looks_like_header(const std::string& line) {
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') continue;
    return !(std::isdigit(static_cast<unsigned char>(c)) || c == '-' ||
             c == '+' || c == '.');
  }
  return false;
}

// Two-or-more column CSV reader; returns the rows, skipping one header line.
std::vector<std::vector<double>> read_csv(const std::filesystem::path& file,
                                          std::size_t min_cols) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && looks_like_header(line)) {
      first = false;
      continue;
    }
    first = false;
    auto row = parse_csv_line(line);
    if (row.size() < min_cols) {
      throw std::invalid_argument("short row in " + file.string());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string fmt_g(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  ensure_dir(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

void write_sidecar(const std::filesystem::path& data_file,
                   const nlohmann::json& meta) {
  std::filesystem::path side = data_file;
  side += ".json";
  write_text(side, meta.dump(2) + "\n");
}

void write_waveform_csv(const std::filesystem::path& file, const Waveform& w) {
  validate(w);
  std::string text = "t_us,f,phi_rad\n";
  for (std::size_t k = 0; k < w.n_bins(); ++k) {
    text += fmt_g(w.bin_midpoint(k), 17);
    text += ',';
    text += fmt_g(w.f[k], 17);
    text += ',';
    text += fmt_g(w.phi[k], 17);
    text += '\n';
  }
  write_text(file, text);
}

Waveform read_waveform_csv(const std::filesystem::path& file, double omega1) {
  const auto rows = read_csv(file, 3);
  if (rows.empty()) throw std::invalid_argument("empty waveform " + file.string());
  Waveform w;
  w.omega1 = omega1;
  w.dt = rows.size() > 1 ? rows[1][0] - rows[0][0] : 2.0 * rows[0][0];
  for (const auto& row : rows) {
    w.f.push_back(row[1]);
    w.phi.push_back(row[2]);
  }
  validate(w);
  return w;
}

MeasuredTrace read_measured_csv(const std::filesystem::path& file) {
  const auto rows = read_csv(file, 2);
  MeasuredTrace tr;
  for (const auto& row : rows) {
    tr.times.push_back(row[0]);
    tr.volts.push_back(row[1]);
  }
  return tr;
}

void write_curve_csv(const std::filesystem::path& file,
                     const std::vector<double>& times,
                     const std::vector<double>& mean,
                     const std::vector<double>& stddev) {
  if (times.size() != mean.size() || times.size() != stddev.size()) {
    throw std::invalid_argument("curve arrays have mismatched lengths");
  }
  std::string text = "t_us,mean_sigma_z,std_sigma_z\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    text += fmt_g(times[i]);
    text += ',';
    text += fmt_g(mean[i]);
    text += ',';
    text += fmt_g(stddev[i]);
    text += '\n';
  }
  write_text(file, text);
}

std::string phi_mode_name(PhiMode mode) {
  switch (mode) {
    case PhiMode::kFixed: return "fixed";
    case PhiMode::kConstant: return "constant";
    case PhiMode::kTimeVarying: return "time-varying";
  }
  return "fixed";
}

PhiMode phi_mode_from_name(const std::string& name) {
  if (name == "fixed") return PhiMode::kFixed;
  if (name == "constant") return PhiMode::kConstant;
  if (name == "time-varying") return PhiMode::kTimeVarying;
  throw std::invalid_argument("unknown phi mode '" + name + "'");
}

std::string landscape_name(LandscapeMode mode) {
  return mode == LandscapeMode::kFresh ? "fresh-noise" : "frozen-noise";
}

LandscapeMode landscape_from_name(const std::string& name) {
  if (name == "fresh-noise") return LandscapeMode::kFresh;
  if (name == "frozen-noise") return LandscapeMode::kFrozen;
  throw std::invalid_argument("unknown landscape mode '" + name + "'");
}

nlohmann::json waveform_to_json(const Waveform& w) {
  return {{"omega1_rad_per_us", w.omega1},
          {"dt_us", w.dt},
          {"f", w.f},
          {"phi_rad", w.phi}};
}

nlohmann::json dcrab_config_to_json(const DcrabConfig& c) {
  return {{"n_c", c.n_c},
          {"beta_max", c.beta_max},
          {"phi_mode", phi_mode_name(c.phi_mode)},
          {"n_iter_total", c.n_iter_total},
          {"convergence_window", c.convergence_window},
          {"convergence_eps", c.convergence_eps},
          {"amp_variation_f", c.amp_variation_f},
          {"amp_variation_phi", c.amp_variation_phi},
          {"landscape", landscape_name(c.landscape)},
          {"seed", c.seed},
          {"scale_phi", c.scale_phi},
          {"scaling",
           {{"sigma_scale", c.scaling.sigma_scale},
            {"t_scale_us", c.scaling.t_scale}}},
          {"policy",
           {{"f_limit", c.policy.f_limit},
            {"mode", c.policy.mode == ClipMode::kTruncate ? "truncate"
                                                          : "rescale"}}}};
}

nlohmann::json record_to_json(const OptimizationRecord& rec) {
  nlohmann::json supers = nlohmann::json::array();
  for (const auto& si : rec.superiterations) {
    supers.push_back({{"start_index", si.start_index},
                      {"n_evaluations", si.n_evaluations},
                      {"dim", si.dim},
                      {"converged", si.converged},
                      {"best_value", si.best_value},
                      {"f_frequencies", si.f_frequencies},
                      {"phi_frequencies", si.phi_frequencies}});
  }
  nlohmann::json j = {
      {"tool", "spinopt"},
      {"budget_unit", "cost-function evaluations"},
      {"basis_element", "sin"},
      {"phi_dressing", "independent-a0"},
      {"config", dcrab_config_to_json(rec.config)},
      {"j_initial", rec.j_initial},
      {"j_history", rec.j_history},
      {"max_abs_f_history", rec.max_abs_f_history},
      {"superiteration_starts", rec.superiteration_starts},
      {"superiterations", supers},
      {"best_pulse", waveform_to_json(rec.best_pulse)},
      {"best_j", rec.best_j},
      {"j_reeval", rec.j_reeval},
      {"j_opt_mean", rec.j_opt_mean},
      {"j_opt_std", rec.j_opt_std},
  };
  if (rec.config.landscape == LandscapeMode::kFrozen) {
    j["frozen_key"] = rec.frozen_key;
  }
  return j;
}

void write_record(const std::filesystem::path& file,
                  const OptimizationRecord& rec) {
  write_text(file, record_to_json(rec).dump(2) + "\n");
}

}  // namespace spinopt::io
