#pragma once

#include <functional>

#include "gptop/optim.hpp"
#include "gptop/problem.hpp"

namespace gptop::trainer {

// Constraint-target ramp: psi0 at n=0, psil at n = gamma * n_tol, flat after.
double scheduled_fraction(int n, double psi0, double psil, double gamma,
                          int n_tol);
// Property-penalization continuation: 1 at n=0 up to p_final at half budget.
double penal_schedule(int n, int n_tol, double p_final);

// Raw (unweighted) loss terms; `total` is the weighted training loss.
struct LossBreakdown {
  double total = 0, sens = 0, mech = 0, mech_adj = 0, thermal = 0,
         thermal_adj = 0, c_mass = 0, c_cost = 0;
};

struct EnergyBreakdown {
  double objective = 0;  // logged physical objective (no gradient role)
  double strain = 0, spring = 0, external_work = 0;
  double thermal = 0, convection = 0, source = 0;
  double mass = 0, cost = 0;
};

struct EpochRecord {
  int epoch = 0, grid = 0;
  double lr = 0, penal = 1, psi_m = 0, psi_p = 0;
  LossBreakdown loss;
  EnergyBreakdown energy;
  double gray_total = 0;
  Eigen::VectorXd gray_phase;
};

// Equilibrium-identity ratios |2 stored - work| / |work|; negative entries
// mean "not applicable" for the trained problem class / boundary data.
struct VirtualWork {
  double primary_mech = -1;
  double adjoint_mech = -1;
  double adjoint_thermal = -1;
  double primary_thermal = -1;
};

struct DesignExtract {
  Eigen::MatrixXd rho;         // n_phases x n_elems at finest-grid centers
  Eigen::VectorXi phase;       // argmax phase per center
  Eigen::VectorXd gray_phase;  // fraction of centers with 0.1 < rho_i < 0.9
  double gray_total = 0;       // fraction of centers with no phase >= 0.9
};

struct RunHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(int epoch)> on_checkpoint;
};

class Trainer {
 public:
  explicit Trainer(problem::Assembled assembled);

  // State-only mode: densities come from this fixed per-grid field, and all
  // density-gradient terms (sensitivity functional, constraints) drop out.
  void freeze_density(
      std::function<Eigen::MatrixXd(const grid::CollocationGrid&)> field);

  // One tape build + backward + Adam update on family grid `grid_index`.
  EpochRecord step(int epoch, int grid_index);

  // Loss and parameter gradients at the current state, no update applied.
  // grads[k] aligns with nets()[k]->params(); empty when that net is unused.
  struct GradientProbe {
    double loss = 0;
    std::vector<std::vector<Eigen::MatrixXd>> grads;
  };
  GradientProbe probe_gradients(int epoch, int grid_index);
  const std::vector<nn::PgcanNet*>& nets() const { return nets_; }

  int sample_grid();

  // Full loop: initial-fraction estimate, per-epoch grid sampling, schedule,
  // incremental hooks. Aborts with trainer.nonfinite on a non-finite loss.
  std::vector<EpochRecord> run(const RunHooks& hooks = {});

  DesignExtract extract_design() const;
  VirtualWork virtual_work();

  double psi_m0() const { return psi_m0_; }
  double psi_p0() const { return psi_p0_; }
  const problem::Assembled& assembled() const { return asm_; }
  problem::Assembled& assembled() { return asm_; }

 private:
  struct Forward;
  Forward forward_fields(ad::Tape& tp, int g, double penal) const;
  EpochRecord step_impl(int epoch, int grid_index, bool update,
                        GradientProbe* probe);
  void estimate_initial_fractions();

  problem::Assembled asm_;
  std::vector<nn::PgcanNet*> nets_;     // construction order, non-null only
  std::vector<nn::AdamState> adam_;     // aligned with nets_
  nn::AdamConfig adam_cfg_;
  std::mt19937_64 rng_;
  std::function<Eigen::MatrixXd(const grid::CollocationGrid&)> frozen_;
  double psi_m0_ = 0, psi_p0_ = 0;
  bool fractions_ready_ = false;
};

DesignExtract design_metrics(const Eigen::MatrixXd& rho);

}  // namespace gptop::trainer
