#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "xbar/experiment.hpp"
#include "xbar/matrix.hpp"

namespace xbar {

// =============================================================================
// Output files
// =============================================================================
// All outputs are written atomically (temp file + rename) with stable,
// versioned schemas, so a rerun from the same manifest is byte-identical.

inline const char *kTraceCsvSchema = "# xbarsim trace csv v1";
inline const char *kDeviceTraceCsvSchema = "# xbarsim device-traces csv v1";
inline const char *kArrayStateCsvSchema = "# xbarsim array-state csv v1";
inline const char *kEpsCurveCsvSchema = "# xbarsim eps-curve csv v1";

namespace iodetail {

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

} // namespace iodetail

/// Writes content to path via a temporary file in the same directory,
/// then renames it into place.
inline void atomic_write_file(const std::filesystem::path &path, const std::string &content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write file '" + tmp.string() + "'");
    }
    out << content;
    out.flush();
    if (!out) {
      throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file '" + path.string() + "'");
  }
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

inline std::string trace_csv(const TraceResult &result) {
  std::string out;
  out += kTraceCsvSchema;
  out += "\nstep,a,r_or_mupast,h,w,omega,chopper,pulses\n";
  for (const TraceRecord &rec : result.records) {
    out += std::to_string(rec.step);
    out += ',';
    out += iodetail::format_value(rec.a_sel);
    out += ',';
    out += iodetail::format_value(rec.ref_sel);
    out += ',';
    out += iodetail::format_value(rec.h_sel);
    out += ',';
    out += iodetail::format_value(rec.w_sel);
    out += ',';
    out += iodetail::format_value(rec.omega);
    out += ',';
    out += std::to_string(rec.chopper);
    out += ',';
    out += std::to_string(rec.pulses);
    out += '\n';
  }
  return out;
}

/// Device trajectories: one row per pulse, one column per device.
inline std::string device_traces_csv(const Matrix &traj) {
  std::string out;
  out += kDeviceTraceCsvSchema;
  out += "\npulse";
  for (int j = 0; j < traj.cols(); ++j) {
    out += ",device_" + std::to_string(j);
  }
  out += '\n';
  for (int i = 0; i < traj.rows(); ++i) {
    out += std::to_string(i);
    for (int j = 0; j < traj.cols(); ++j) {
      out += ',';
      out += iodetail::format_value(traj(i, j));
    }
    out += '\n';
  }
  return out;
}

/// Sampled element state of a device array, including the symmetry points.
inline std::string array_state_csv(const DeviceArray &array) {
  std::string out;
  out += kArrayStateCsvSchema;
  out += "\nrow,col,w,b_max,b_min,alpha_plus,alpha_minus,sp\n";
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) {
      const DeviceElement e = array.element(i, j);
      out += std::to_string(i);
      out += ',';
      out += std::to_string(j);
      out += ',';
      out += iodetail::format_value(e.w);
      out += ',';
      out += iodetail::format_value(e.b_max);
      out += ',';
      out += iodetail::format_value(e.b_min);
      out += ',';
      out += iodetail::format_value(e.alpha_plus);
      out += ',';
      out += iodetail::format_value(e.alpha_minus);
      out += ',';
      out += iodetail::format_value(symmetry_point(e));
      out += '\n';
    }
  }
  return out;
}

inline std::string eps_curve_csv(const WeightProgramResult &result, double target_std) {
  std::string out;
  out += kEpsCurveCsvSchema;
  out += "\nstep,eps_abs,eps_rel\n";
  for (std::size_t idx = 0; idx < result.eval_steps.size(); ++idx) {
    out += std::to_string(result.eval_steps[idx]);
    out += ',';
    out += iodetail::format_value(result.eps_abs[idx]);
    out += ',';
    out += iodetail::format_value(result.eps_abs[idx] / target_std);
    out += '\n';
  }
  return out;
}

} // namespace xbar
