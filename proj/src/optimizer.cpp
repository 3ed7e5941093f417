#include "spinopt/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spinopt/rng.hpp"

namespace spinopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vertex {
  std::vector<double> x;
  double value = kInf;
};

void mean_and_std(const std::vector<double>& v, double& mean, double& sd) {
  const std::size_t n = v.size();
  mean = n == 0 ? 0.0 : pairwise_sum(v.data(), n) / static_cast<double>(n);
  if (n < 2) {
    sd = 0.0;
    return;
  }
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  sd = std::sqrt(acc / static_cast<double>(n - 1));
}

}  // namespace

NelderMeadResult nelder_mead_adaptive(const Objective& objective,
                                      const std::vector<double>& x0,
                                      const std::vector<double>& steps,
                                      const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("x0 must not be empty");
  if (steps.size() != n) {
    throw std::invalid_argument("steps and x0 lengths differ");
  }
  for (double s : steps) {
    if (s == 0.0 || !std::isfinite(s)) {
      throw std::invalid_argument("steps must be finite and nonzero");
    }
  }
  if (options.budget < n + 1) {
    throw std::invalid_argument("budget smaller than one simplex initialization");
  }

  const double nd = static_cast<double>(n);
  const double chi = 1.0 + 2.0 / nd;        // expansion
  const double gamma = 0.75 - 0.5 / nd;     // contraction
  const double shrink_c = 1.0 - 1.0 / nd;   // shrink
  const std::size_t reeval_every =
      options.reeval_interval == 0 ? n + 1 : options.reeval_interval;

  NelderMeadResult res;
  res.best_x = x0;
  res.best_value = kInf;
  std::vector<double> runmin;
  std::size_t since_reeval = 0;

  auto charge = [&](const std::vector<double>& x) {
    double v = objective(x);
    if (!std::isfinite(v)) v = kInf;  // rejected by ordering
    res.history.push_back(v);
    runmin.push_back(runmin.empty() ? v : std::min(runmin.back(), v));
    if (v < res.best_value) {
      res.best_value = v;
      res.best_x = x;
    }
    ++since_reeval;
    return v;
  };
  auto exhausted = [&] { return res.history.size() >= options.budget; };
  auto try_charge = [&](const std::vector<double>& x, double& out) {
    if (exhausted()) return false;
    out = charge(x);
    return true;
  };
  auto improvement_stalled = [&] {
    const std::size_t w = options.conv_window;
    const std::size_t len = runmin.size();
    if (len < w + 1) return false;
    const double drop = runmin[len - 1 - w] - runmin[len - 1];
    return drop / static_cast<double>(w) < options.conv_eps;
  };

  std::vector<Vertex> simplex;
  simplex.reserve(n + 1);
  simplex.push_back(Vertex{x0, 0.0});
  simplex[0].value = charge(simplex[0].x);
  for (std::size_t i = 0; i < n; ++i) {
    Vertex v;
    v.x = x0;
    v.x[i] += steps[i];
    v.value = charge(v.x);
    simplex.push_back(std::move(v));
  }

  auto order = [&] {
    std::stable_sort(simplex.begin(), simplex.end(),
                     [](const Vertex& a, const Vertex& b) {
                       return a.value < b.value;
                     });
  };

  std::vector<double> centroid(n), cand(n);
  // x = centroid + t * (centroid - worst); t = 1 reflect, chi expand,
  // +/-gamma outside/inside contraction.
  auto blend = [&](double t) {
    for (std::size_t j = 0; j < n; ++j) {
      cand[j] = centroid[j] + t * (centroid[j] - simplex[n].x[j]);
    }
    return cand;
  };

  while (!exhausted()) {
    if (improvement_stalled()) {
      res.converged = true;
      break;
    }
    order();
    if (since_reeval >= reeval_every) {
      double v;
      if (!try_charge(simplex[0].x, v)) break;
      simplex[0].value = v;
      since_reeval = 0;
      continue;
    }

    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += simplex[i].x[j];
      centroid[j] = acc / nd;
    }

    double fr;
    if (!try_charge(blend(1.0), fr)) break;
    const std::vector<double> xr = cand;

    if (fr < simplex[0].value) {
      double fe;
      if (!try_charge(blend(chi), fe)) {
        simplex[n] = Vertex{xr, fr};
        break;
      }
      simplex[n] = fe < fr ? Vertex{cand, fe} : Vertex{xr, fr};
      continue;
    }
    if (fr < simplex[n - 1].value) {
      simplex[n] = Vertex{xr, fr};
      continue;
    }

    bool shrink;
    if (fr < simplex[n].value) {  // outside contraction
      double fc;
      if (!try_charge(blend(gamma), fc)) {
        simplex[n] = Vertex{xr, fr};
        break;
      }
      if (fc <= fr) {
        simplex[n] = Vertex{cand, fc};
        shrink = false;
      } else {
        shrink = true;
      }
    } else {  // inside contraction
      double fc;
      if (!try_charge(blend(-gamma), fc)) break;
      if (fc < simplex[n].value) {
        simplex[n] = Vertex{cand, fc};
        shrink = false;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t i = 1; i <= n; ++i) {
        std::vector<double> xi(n);
        for (std::size_t j = 0; j < n; ++j) {
          xi[j] = simplex[0].x[j] + shrink_c * (simplex[i].x[j] - simplex[0].x[j]);
        }
        double fi;
        if (!try_charge(xi, fi)) return res;
        simplex[i] = Vertex{std::move(xi), fi};
      }
    }
  }
  if (!res.converged && improvement_stalled()) res.converged = true;
  return res;
}

double evaluate_cost(const Waveform& pulse, const SimulationConfig& sim,
                     const Landscape& landscape) {
  const std::uint64_t ctx = landscape.mode == LandscapeMode::kFresh
                                ? stream_ctx::optimizer_eval
                                : stream_ctx::frozen_candidate;
  return inversion_infidelity_set(pulse, sim, ctx, landscape.key);
}

FrozenSelection select_representative_realization(const Waveform& pulse,
                                                  const SimulationConfig& sim) {
  if (sim.n_rep < 1) throw std::invalid_argument("need at least one candidate");
  FrozenSelection sel;
  sel.j_candidates.resize(sim.n_rep);
  for (std::size_t r = 0; r < sim.n_rep; ++r) {
    sel.j_candidates[r] =
        inversion_infidelity_set(pulse, sim, stream_ctx::frozen_candidate, r);
  }
  mean_and_std(sel.j_candidates, sel.j_mean, sel.j_std);
  std::size_t pick = 0;
  double best = std::abs(sel.j_candidates[0] - sel.j_mean);
  for (std::size_t r = 1; r < sim.n_rep; ++r) {
    const double d = std::abs(sel.j_candidates[r] - sel.j_mean);
    if (d < best) {
      best = d;
      pick = r;
    }
  }
  sel.key = pick;
  sel.j = sel.j_candidates[pick];
  return sel;
}

namespace {

// Parameter vector layout for one super-iteration. The first round has no
// dressing coefficients (a0 is pinned to zero); later rounds prepend one per
// composed channel. A constant-phase search carries a single offset instead
// of an expansion.
struct ParamLayout {
  bool dressed = false;
  std::size_t n_c = 0;
  PhiMode mode = PhiMode::kFixed;

  std::size_t dim() const {
    std::size_t d = (dressed ? 1 : 0) + n_c;
    if (mode == PhiMode::kConstant) d += 1;
    if (mode == PhiMode::kTimeVarying) d += (dressed ? 1 : 0) + n_c;
    return d;
  }
};

}  // namespace

OptimizationRecord dcrab_optimize(const Waveform& initial,
                                  const DcrabConfig& config,
                                  const SimulationConfig& sim) {
  validate(initial);
  if (config.n_c < 1) {
    throw std::invalid_argument("need at least one basis element per channel");
  }
  if (config.beta_max < 0.1) {
    throw std::invalid_argument("beta_max below the minimum frequency 0.1");
  }
  {
    const ParamLayout first{false, config.n_c, config.phi_mode};
    if (config.n_iter_total != 0 && config.n_iter_total < first.dim() + 1) {
      throw std::invalid_argument(
          "budget smaller than one simplex initialization");
    }
  }

  OptimizationRecord rec;
  rec.config = config;

  const std::size_t n_bins = initial.n_bins();
  AssemblySpec aspec;
  aspec.omega1 = initial.omega1;
  aspec.dt = initial.dt;
  aspec.base_phi = initial.phi;
  aspec.scaling = config.scaling;
  aspec.policy = config.policy;

  Landscape scape{config.landscape, 0};
  std::uint64_t serial = 0;
  if (config.landscape == LandscapeMode::kFrozen) {
    const FrozenSelection sel = select_representative_realization(initial, sim);
    rec.frozen_key = sel.key;
    scape.key = sel.key;
  }
  auto eval_pulse = [&](const Waveform& w) {
    if (config.landscape == LandscapeMode::kFresh) scape.key = serial;
    ++serial;
    return evaluate_cost(w, sim, scape);
  };

  rec.j_initial = eval_pulse(initial);  // probe, not charged
  rec.best_pulse = initial;
  rec.best_j = rec.j_initial;

  ChannelState prev_f = ChannelState::zero(n_bins);
  ChannelState prev_phi = ChannelState::zero(n_bins);
  double incumbent_offset = 0.0;

  std::size_t used = 0;
  for (std::size_t s = 1;; ++s) {
    const ParamLayout lay{s > 1, config.n_c, config.phi_mode};
    const std::size_t dim = lay.dim();
    if (config.n_iter_total < used + dim + 1) break;

    RngStream f_rng(config.seed, {stream_ctx::basis, s, 0});
    const FourierBasis f_basis = draw_basis(config.n_c, config.beta_max, f_rng);
    FourierBasis phi_basis;
    if (config.phi_mode == PhiMode::kTimeVarying) {
      RngStream p_rng(config.seed, {stream_ctx::basis, s, 1});
      phi_basis = draw_basis(config.n_c, config.beta_max, p_rng);
    }

    std::vector<double> x0, steps;
    x0.reserve(dim);
    steps.reserve(dim);
    if (lay.dressed) {
      x0.push_back(1.0);
      steps.push_back(config.amp_variation_f);
    }
    for (std::size_t k = 0; k < config.n_c; ++k) {
      x0.push_back(0.0);
      steps.push_back(config.amp_variation_f);
    }
    if (config.phi_mode == PhiMode::kConstant) {
      x0.push_back(incumbent_offset);
      steps.push_back(config.amp_variation_phi);
    } else if (config.phi_mode == PhiMode::kTimeVarying) {
      if (lay.dressed) {
        x0.push_back(1.0);
        steps.push_back(config.amp_variation_phi);
      }
      for (std::size_t k = 0; k < config.n_c; ++k) {
        x0.push_back(0.0);
        steps.push_back(config.amp_variation_phi);
      }
    }

    auto build = [&](const std::vector<double>& x) {
      std::size_t i = 0;
      const double a0f = lay.dressed ? x[i++] : 0.0;
      const std::vector<double> fc(x.begin() + i, x.begin() + i + config.n_c);
      i += config.n_c;
      const ChannelState fch =
          compose_channel(prev_f, a0f, fc, f_basis, initial.dt);
      ChannelState pch = ChannelState::zero(n_bins);
      AssemblySpec sp = aspec;
      if (config.phi_mode == PhiMode::kConstant) {
        pch.values.assign(n_bins, x[i]);
        sp.scale_phi = false;  // a constant offset is not edge-shaped
      } else if (config.phi_mode == PhiMode::kTimeVarying) {
        const double a0p = lay.dressed ? x[i++] : 0.0;
        const std::vector<double> pc(x.begin() + i,
                                     x.begin() + i + config.n_c);
        pch = compose_channel(prev_phi, a0p, pc, phi_basis, initial.dt);
        sp.scale_phi = config.scale_phi;
      } else {
        sp.scale_phi = false;
      }
      return assemble_waveform(sp, fch, pch);
    };

    const std::size_t start = rec.j_history.size();
    auto objective = [&](const std::vector<double>& x) {
      const Waveform w = build(x);
      double peak = 0.0;
      for (double v : w.f) peak = std::max(peak, std::abs(v));
      const double j = eval_pulse(w);
      rec.j_history.push_back(j);
      rec.max_abs_f_history.push_back(peak);
      if (j < rec.best_j) {
        rec.best_j = j;
        rec.best_pulse = w;
      }
      return j;
    };

    NelderMeadOptions nm;
    nm.budget = config.n_iter_total - used;
    nm.conv_eps = config.convergence_eps;
    nm.conv_window = config.convergence_window;
    const NelderMeadResult r = nelder_mead_adaptive(objective, x0, steps, nm);
    used += r.history.size();

    SuperIterationInfo info;
    info.start_index = start;
    info.n_evaluations = r.history.size();
    info.dim = dim;
    info.converged = r.converged;
    info.best_value = r.best_value;
    info.f_frequencies = f_basis.beta;
    info.phi_frequencies = phi_basis.beta;
    info.promoted = build(r.best_x);

    // Promote the round's best composition so the next round dresses it.
    {
      const std::vector<double>& bx = r.best_x;
      std::size_t i = 0;
      const double a0f = lay.dressed ? bx[i++] : 0.0;
      const std::vector<double> fc(bx.begin() + i, bx.begin() + i + config.n_c);
      i += config.n_c;
      prev_f = compose_channel(prev_f, a0f, fc, f_basis, initial.dt);
      if (config.phi_mode == PhiMode::kConstant) {
        incumbent_offset = bx[i];
      } else if (config.phi_mode == PhiMode::kTimeVarying) {
        const double a0p = lay.dressed ? bx[i++] : 0.0;
        const std::vector<double> pc(bx.begin() + i,
                                     bx.begin() + i + config.n_c);
        prev_phi = compose_channel(prev_phi, a0p, pc, phi_basis, initial.dt);
      }
    }

    rec.superiteration_starts.push_back(start);
    rec.superiterations.push_back(std::move(info));
  }

  rec.j_reeval.resize(sim.n_rep);
  for (std::size_t r = 0; r < sim.n_rep; ++r) {
    rec.j_reeval[r] = inversion_infidelity_set(rec.best_pulse, sim,
                                               stream_ctx::reevaluation, r);
  }
  mean_and_std(rec.j_reeval, rec.j_opt_mean, rec.j_opt_std);
  return rec;
}

OptimizationRecord resume_optimization(const OptimizationRecord& record,
                                       const Waveform& initial,
                                       const SimulationConfig& sim,
                                       std::size_t new_total) {
  if (new_total < record.j_history.size()) {
    throw std::invalid_argument("new budget is below the recorded history");
  }
  DcrabConfig cfg = record.config;
  cfg.n_iter_total = new_total;
  OptimizationRecord out = dcrab_optimize(initial, cfg, sim);
  const bool prefix_ok =
      out.j_initial == record.j_initial &&
      out.j_history.size() >= record.j_history.size() &&
      std::equal(record.j_history.begin(), record.j_history.end(),
                 out.j_history.begin());
  if (!prefix_ok) {
    throw std::runtime_error(
        "stored history does not replay; pulse, config, or seeds differ");
  }
  return out;
}

}  // namespace spinopt
