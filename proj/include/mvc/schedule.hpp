#pragma once

#include <vector>

#include "mvc/errors.hpp"

namespace mvc {

// Forward-process noise schedule over timesteps t in {1..T}. Values are
// precomputed in double and narrowed where they meet float32 tensors.
// beta_t = beta_start + (beta_end - beta_start) * (t - 1) / T, so
// alpha_bar_1 = 1 - beta_start and the default T=200, beta in [1e-4, 0.02]
// gives alpha_bar_T ~ 0.1335.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta[t-1]
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // running product of alpha

    double beta_at(int t) const { return beta.at(check(t) - 1); }
    double alpha_at(int t) const { return alpha.at(check(t) - 1); }
    double alpha_bar_at(int t) const { return alpha_bar.at(check(t) - 1); }

  private:
    int check(int t) const {
        require(1 <= t && t <= T, ErrorKind::invalid_argument, "timestep out of range");
        return t;
    }
};

NoiseSchedule make_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

}  // namespace mvc
