#pragma once

#include <vector>

#include "jsr/complex_matrix.hpp"
#include "jsr/rng.hpp"

namespace jsr {

enum class SparsityMode { kIid, kGrouped };

struct SparsityConfig {
  SparsityMode mode = SparsityMode::kIid;
  int n = 0;        // signal coordinates
  double p = 0.0;   // per-coordinate access probability (kIid)
  int groups = 1;   // group count, must divide n (kGrouped)

  void validate() const;
};

// Active row indices (0-based, sorted), shared by every column of X.
struct Support {
  std::vector<int> active;
};

struct NoiseModel {
  double sigma2 = 0.0;  // complex per-entry variance; re/im parts get sigma2/2 each

  void validate() const;
};

// kIid: each index active independently with probability p.
// kGrouped: exactly one contiguous block of n/groups indices, chosen uniformly.
Support gen_support(const SparsityConfig& cfg, RngStream& rng);

// X in C^{n x m}: rows in the support have i.i.d. CN(0,1) entries
// (re and im parts each N(0, 1/2)); rows outside it are exactly zero.
ComplexMatrix gen_signals(const Support& support, int n, int m, RngStream& rng);

// Entries i.i.d. CN(0,1); with normalize, each column rescaled to norm sqrt(l).
ComplexMatrix gen_measurement_matrix(int l, int n, RngStream& rng, bool normalize);

// Z with entries i.i.d. CN(0, sigma2).
ComplexMatrix gen_noise(Eigen::Index rows, Eigen::Index cols, double sigma2, RngStream& rng);

// Y = A X + Z.
ComplexMatrix measure(const ComplexMatrix& a, const ComplexMatrix& x,
                      const NoiseModel& noise, RngStream& rng);

}  // namespace jsr
