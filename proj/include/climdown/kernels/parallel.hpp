#pragma once

namespace climdown::kernels {

/// Thread count used by the OpenMP kernels. 0 restores the OpenMP default.
void set_num_threads(int n);
int num_threads();

}  // namespace climdown::kernels
