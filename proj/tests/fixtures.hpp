#pragma once

#include <gwb/pipeline.hpp>

#include <numbers>

namespace fixtures {

/// Same model and basis settings as configs/disordered.conf, no output directory.
inline gwb::PipelineConfig disordered(int L = 12) {
  gwb::PipelineConfig c;
  c.model_type = "disordered";
  c.L = L;
  c.gap = 2.0;
  c.w = 0.5;
  c.seed = 7;
  c.tail_eps = 0.1;
  c.tail_power = 4.2;
  c.l_sweep = {8, 12, 16};
  c.out_dir.clear();
  return c;
}

inline gwb::PipelineConfig haldane(double m, int L = 12) {
  gwb::PipelineConfig c;
  c.model_type = "haldane";
  c.L = L;
  c.t1 = 1.0;
  c.t2 = 1.0 / 3.0;
  c.phi = std::numbers::pi / 2;
  c.m = m;
  c.l_sweep = {8, 12, 16};
  c.out_dir.clear();
  return c;
}

inline gwb::PipelineConfig atomic(int L = 8) {
  gwb::PipelineConfig c;
  c.model_type = "atomic";
  c.L = L;
  c.m = 1.0;
  c.deltas = {4.0, 8.0};
  c.out_dir.clear();
  return c;
}

inline gwb::PipelineConfig ssh(int L = 32) {
  gwb::PipelineConfig c;
  c.model_type = "ssh";
  c.L = L;
  c.t1 = 1.0;
  c.t2 = 0.5;
  c.basis_mode = gwb::BasisMode::pxp_eigen;
  c.out_dir.clear();
  return c;
}

}  // namespace fixtures
