from dynamics.correlation import (CorrelationSeries, EnsembleCorrelation, correlation, correlation_run,
                                  dialogue_ranking, disorder_correlation, evolve_initial_state)
from dynamics.evolution import ConservationReport, SpectralPropagator, TimeGrid, conservation_report, spectral_evolve
from dynamics.initial_state import InitialStateSpec, build_initial_state
