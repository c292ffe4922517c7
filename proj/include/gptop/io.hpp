#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "gptop/problem.hpp"
#include "gptop/trainer.hpp"

namespace gptop::io {

// Strict config parsing: unknown keys and missing required fields fail with
// a config.parse error naming the offending path.
problem::ProblemSpec parse_spec(const std::string& json_text);
problem::ProblemSpec load_spec(const std::string& path);
std::string serialize_spec(const problem::ProblemSpec& spec);

// Training history CSV: a schema comment, one header line, then one row per
// epoch with every value printed at full double precision.
std::string history_header(int n_phases);
std::string history_row(const trainer::EpochRecord& r, int n_phases);

class HistoryWriter {
 public:
  HistoryWriter(const std::string& path, int n_phases);
  void append(const trainer::EpochRecord& r);

 private:
  std::ofstream out_;
  int n_phases_;
};

void write_history_csv(const std::string& path,
                       const std::vector<trainer::EpochRecord>& hist,
                       int n_phases);

// Per-element density table (centers, all phases, argmax) and its loader.
void write_design_csv(const std::string& path, const grid::CollocationGrid& g,
                      const Eigen::MatrixXd& rho);
Eigen::MatrixXd load_design_csv(const std::string& path);

// Rasters over the full lattice cell grid (2D only): one grayscale PGM per
// phase and a combined palette PPM of the winning phase per cell.
void write_phase_pgm(const std::string& path, const grid::CollocationGrid& g,
                     const Eigen::RowVectorXd& rho_phase);
void write_phase_ppm(const std::string& path, const grid::CollocationGrid& g,
                     const Eigen::MatrixXd& rho,
                     const std::vector<std::string>& phase_names);

// Legacy ASCII rectilinear VTK with per-cell phase densities; masked cells
// carry -1 so cutouts stay visible in the viewer.
void write_vtk(const std::string& path, const grid::CollocationGrid& g,
               const Eigen::MatrixXd& rho,
               const std::vector<std::string>& phase_names);

// Run metadata: config echo plus the derived quantities a rerun needs to be
// interpreted (scales, schedules, conditioning sizes, initial fractions).
void write_run_json(const std::string& path, const problem::Assembled& a,
                    double psi_m0, double psi_p0);

// Binary network checkpoints; shapes must match the assembled networks.
void save_checkpoint(const std::string& path, const problem::Assembled& a);
void load_checkpoint(const std::string& path, problem::Assembled& a);

}  // namespace gptop::io
