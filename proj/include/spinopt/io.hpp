#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinopt/optimizer.hpp"
#include "spinopt/pulse.hpp"

namespace spinopt::io {

// printf %.*g formatting; waveforms use 17 digits so files round-trip
// bit-exactly, summary tables use 10.
std::string fmt_g(double v, int precision = 10);

void ensure_dir(const std::filesystem::path& dir);
void write_text(const std::filesystem::path& file, const std::string& text);

// Every data file gets a "<file>.json" sidecar carrying the resolved
// configuration and seed that produced it.
void write_sidecar(const std::filesystem::path& data_file,
                   const nlohmann::json& meta);

// Waveform CSV: header "t_us,f,phi_rad", one row per bin midpoint.
void write_waveform_csv(const std::filesystem::path& file, const Waveform& w);
Waveform read_waveform_csv(const std::filesystem::path& file,
                           double omega1 = kTwoPi);

// Measured trace CSV: header "t_us,volts" at 1 ns pitch.
MeasuredTrace read_measured_csv(const std::filesystem::path& file);

// Ensemble curve CSV: header "t_us,mean_sigma_z,std_sigma_z".
void write_curve_csv(const std::filesystem::path& file,
                     const std::vector<double>& times,
                     const std::vector<double>& mean,
                     const std::vector<double>& stddev);

std::string phi_mode_name(PhiMode mode);
PhiMode phi_mode_from_name(const std::string& name);
std::string landscape_name(LandscapeMode mode);
LandscapeMode landscape_from_name(const std::string& name);

nlohmann::json waveform_to_json(const Waveform& w);
nlohmann::json dcrab_config_to_json(const DcrabConfig& c);
nlohmann::json record_to_json(const OptimizationRecord& rec);
void write_record(const std::filesystem::path& file,
                  const OptimizationRecord& rec);

}  // namespace spinopt::io
