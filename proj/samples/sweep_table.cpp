// Prints CTMC and closed-form delays across the ten-point PU load sweep
// (N = 10, mu_pu = 5e3, lambda_su = 4e4, mu_su = 1e4).

#include <cstdio>

#include "crnq/conservation.hpp"
#include "crnq/ctmc.hpp"
#include "crnq/mmn.hpp"

int main() {
  const int n = 10;
  const double mu_pu = 0.5e4;
  const crnq::ClassParams su(4e4, 1e4);
  std::printf("%6s %12s %12s %12s %12s %10s\n", "rho_pu", "D1_ctmc", "D1_mmn", "D2_ctmc", "D2_law",
              "sum_err");
  for (int k = 0; k < 10; ++k) {
    const double rho = 0.6 + (5.4 - 0.6) * k / 9.0;
    const crnq::NetworkModel model(n, crnq::ClassParams(rho * mu_pu, mu_pu), su);
    const auto pmf = crnq::solve_with_auto_truncation(model);
    const auto d = crnq::delays_from_pmf(pmf);
    const double law = crnq::conservation_sum(model);
    const double sum = rho * *d.d_pu + su.rho() * *d.d_su;
    std::printf("%6.2f %12.5e %12.5e %12.5e %12.5e %10.5f\n", rho, *d.d_pu,
                crnq::mmn_total_delay(model.pu(), n), *d.d_su, crnq::secondary_delay_from_law(model),
                (sum - law) / law);
  }
}
