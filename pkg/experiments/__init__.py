from experiments.benchmark import DEFAULT_D_POLICY, BenchmarkReport, BenchmarkRow, benchmark_peps_vs_ed
from experiments.disorder import (DisorderEnergyReport, DisorderSpec, OccupationAsymmetry, disorder_energy_bounds,
                                  occupation_asymmetry, sample_couplings)
from experiments.scan import (FirstPeakScan, LinearFit, ScanResult, Window, energy_vs_kappa_fit, energy_vs_n_fit,
                              first_peak_scan, fixed_n_window_scan, linear_fit)
