#pragma once

// CSV tables and a raw binary trajectory format.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lllab/dynamics.hpp"
#include "lllab/error.hpp"
#include "lllab/grid.hpp"

namespace lllab::io {

/// Decimal with 17 significant digits.
inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row) {
    require(row.size() == header.size(), Errc::invalid_argument,
            "csv row has " + std::to_string(row.size()) + " fields, header has " +
                std::to_string(header.size()));
    rows.push_back(std::move(row));
  }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + csv_escape(header[i]);
    out += "\r\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_number(r[i]);
      out += "\r\n";
    }
    return out;
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), Errc::invalid_argument, "cannot open " + path.string() + " for writing");
  f << text;
  require(f.good(), Errc::invalid_argument, "write to " + path.string() + " failed");
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) { write_text(path, t.str()); }

enum class TrajectoryFrame : std::uint64_t { hydro = 0, spin = 1 };

// Layout (little-endian host order): "LLTRAJ01", u64 n, f64 dx, f64 x_min,
// u64 frame, f64 twist, u64 count, then count records of f64 t, n f64 v, n f64 w.
// Spin runs are stored through their hydrodynamic fields; frame records the source.
struct StoredTrajectory {
  Grid grid;
  TrajectoryFrame frame = TrajectoryFrame::hydro;
  double twist = 0.0;
  std::vector<double> times;
  std::vector<HydroState> states;
};

inline constexpr char kTrajectoryMagic[8] = {'L', 'L', 'T', 'R', 'A', 'J', '0', '1'};

inline void write_trajectory(const std::filesystem::path& path, const StoredTrajectory& tr) {
  require(tr.times.size() == tr.states.size(), Errc::invalid_argument, "times and states differ in length");
  std::ofstream f(path, std::ios::binary);
  require(f.good(), Errc::invalid_argument, "cannot open " + path.string() + " for writing");
  auto put = [&](const auto& x) { f.write(reinterpret_cast<const char*>(&x), sizeof x); };
  f.write(kTrajectoryMagic, 8);
  put(static_cast<std::uint64_t>(tr.grid.n));
  put(tr.grid.dx);
  put(tr.grid.x_min);
  put(static_cast<std::uint64_t>(tr.frame));
  put(tr.twist);
  put(static_cast<std::uint64_t>(tr.times.size()));
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    put(tr.times[i]);
    f.write(reinterpret_cast<const char*>(tr.states[i].v.data()), static_cast<std::streamsize>(tr.grid.n * 8));
    f.write(reinterpret_cast<const char*>(tr.states[i].w.data()), static_cast<std::streamsize>(tr.grid.n * 8));
  }
  require(f.good(), Errc::invalid_argument, "write to " + path.string() + " failed");
}

inline StoredTrajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), Errc::config, "cannot open trajectory " + path.string());
  auto get = [&](auto& x) {
    f.read(reinterpret_cast<char*>(&x), sizeof x);
    require(f.good(), Errc::config, "trajectory " + path.string() + " is truncated");
  };
  char magic[8];
  f.read(magic, 8);
  require(f.good() && std::equal(magic, magic + 8, kTrajectoryMagic), Errc::config,
          path.string() + " is not a trajectory file");
  std::uint64_t n = 0, frame = 0, count = 0;
  double dx = 0, x_min = 0;
  StoredTrajectory tr;
  get(n);
  get(dx);
  get(x_min);
  get(frame);
  get(tr.twist);
  get(count);
  require(frame <= 1, Errc::config, "unknown trajectory frame tag");
  try {
    tr.grid = Grid(x_min, dx, n);
  } catch (const Error& e) {
    throw Error(Errc::config, "trajectory header: " + e.detail());
  }
  tr.frame = static_cast<TrajectoryFrame>(frame);
  for (std::uint64_t i = 0; i < count; ++i) {
    double t = 0;
    get(t);
    HydroState s(tr.grid);
    f.read(reinterpret_cast<char*>(s.v.data()), static_cast<std::streamsize>(n * 8));
    f.read(reinterpret_cast<char*>(s.w.data()), static_cast<std::streamsize>(n * 8));
    require(f.good(), Errc::config, "trajectory " + path.string() + " is truncated");
    tr.times.push_back(t);
    tr.states.push_back(std::move(s));
  }
  return tr;
}

}  // namespace lllab::io
