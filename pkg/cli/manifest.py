"""
Experiment manifests: YAML files naming one experiment kind, its physical parameters, seeds and grids.

Every kind has a schema of dotted field paths with defaults. Loading applies `--set` overrides, fills defaults,
checks types, rejects unknown keys and converts energy-valued fields to joules.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import yaml

from data.constants import (DEFAULT_CONVERGENCE_TOL, DEFAULT_FIRST_PEAK_FLOOR, DEFAULT_MAX_SWEEPS,
                            DEFAULT_REGULARIZATION_EPS, DEFAULT_UNIT_SCALE, HBAR, ExperimentKind, Units)
from fock.params import HamiltonianParams
from lattice.topology import CELL_BONDS, Bond, bond_key
from utils.data_helper import config_hash
from utils.errors import ConfigurationError, ManifestParseError

logger = logging.getLogger(__name__)

REQUIRED = object()


def _as_int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError('expected an integer')
    return value


def _as_float(value: Any) -> float:
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a dot (1e-8) as strings
        try:
            return float(value)
        except ValueError:
            raise TypeError('expected a number') from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError('expected a number')
    return float(value)


def _as_fraction(value: Any) -> float:
    number = _as_float(value)
    if not 0.0 < number < 1.0:
        raise TypeError('expected a number strictly between 0 and 1')
    return number


def _as_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise TypeError('expected true or false')
    return value


def _as_str(value: Any) -> str:
    if not isinstance(value, str):
        raise TypeError('expected a string')
    return value


def _optional(parser: Callable[[Any], Any]) -> Callable[[Any], Any]:
    return lambda value: None if value is None else parser(value)


def _as_list(parser: Callable[[Any], Any]) -> Callable[[Any], Any]:
    def parse(value: Any) -> list:
        if not isinstance(value, list):
            raise TypeError('expected a list')
        return [parser(item) for item in value]
    return parse


def _as_pair(value: Any) -> tuple[int, int]:
    if not isinstance(value, list) or len(value) != 2:
        raise TypeError('expected a two-element list of sites')
    return _as_int(value[0]), _as_int(value[1])


def _as_couplings(value: Any) -> dict[Bond, float]:
    """Mapping 'u-v' -> kappa."""
    if not isinstance(value, dict):
        raise TypeError("expected a mapping of 'u-v' bonds to couplings")
    couplings = {}
    for key, kappa in value.items():
        try:
            u, v = (int(part) for part in str(key).split('-'))
        except ValueError:
            raise TypeError(f"bond key {key!r} is not of the form 'u-v'") from None
        couplings[bond_key(u, v)] = _as_float(kappa)
    return couplings


def _as_int_mapping(value: Any) -> dict[int, int]:
    if not isinstance(value, dict):
        raise TypeError('expected a mapping of integers')
    return {_as_int(key): _as_int(item) for key, item in value.items()}


def _as_amplitudes(value: Any) -> list[tuple[tuple[int, ...], complex]]:
    """List of [occupation vector, re, im] entries."""
    parsed = []
    for item in _as_list(lambda entry: entry)(value):
        if not isinstance(item, list) or len(item) != 3:
            raise TypeError('amplitudes are [occupations, re, im] entries')
        occupation = tuple(_as_list(_as_int)(item[0]))
        parsed.append((occupation, complex(_as_float(item[1]), _as_float(item[2]))))
    return parsed


PARSERS: dict[str, Callable[[Any], Any]] = {
    'int': _as_int,
    'float': _as_float,
    'bool': _as_bool,
    'str': _as_str,
    'int?': _optional(_as_int),
    'float?': _optional(_as_float),
    'fraction': _as_fraction,
    'str?': _optional(_as_str),
    'int list': _as_list(_as_int),
    'float list': _as_list(_as_float),
    'site pair': _as_pair,
    'site pair list': _as_list(_as_pair),
    'bond couplings?': _optional(_as_couplings),
    'int mapping': _as_int_mapping,
    'amplitudes': _as_amplitudes,
}


@dataclass(frozen=True)
class FieldSpec:
    """One manifest field: dotted path, type name, default and whether it carries an energy."""

    path: str
    type_name: str
    default: Any = REQUIRED
    help: str = ''
    energy: bool = False

    @property
    def required(self) -> bool:
        return self.default is REQUIRED

    def parse(self, value: Any) -> Any:
        return PARSERS[self.type_name](value)


COMMON_FIELDS = (
    FieldSpec('kind', 'str', help='Experiment kind.'),
    FieldSpec('units', 'str', help="'dimensionless' (energies in hbar*Omega_R, frequencies in Omega_R) or 'si'."),
    FieldSpec('seed', 'int', 0, 'Master seed of every random stream.'),
    FieldSpec('output_dir', 'str?', None, 'Run directory; defaults to <output root>/<kind>-<hash>.'),
)

PHYSICS_FIELDS = (
    FieldSpec('physics.omega_d', 'float', help='Cavity frequency (omega_d / Omega_R, or rad/s).'),
    FieldSpec('physics.kappa', 'float?', None, 'Uniform hopping strength on all 18 bonds.', energy=True),
    FieldSpec('physics.couplings', 'bond couplings?', None, "Per-bond hopping, keys 'u-v'; overrides kappa.",
              energy=True),
    FieldSpec('physics.mu', 'float', 0.0, 'Chemical potential.', energy=True),
    FieldSpec('physics.unit_scale', 'float', DEFAULT_UNIT_SCALE, 'Reference frequency Omega_R, rad/s.'),
)

INITIAL_STATE_FIELDS = (
    FieldSpec('initial_state.kind', 'str', 'localized', "'localized', 'superposition' or 'custom'."),
    FieldSpec('initial_state.site', 'int', 1, 'Reference cavity of a localized start.'),
    FieldSpec('initial_state.photons', 'int', 2, 'Photons of a localized start.'),
    FieldSpec('initial_state.phase', 'float', 0.0, 'Relative phase phi of the superposition, radians.'),
    FieldSpec('initial_state.sites', 'site pair', [1, 7], 'Emitting cavities of the superposition.'),
    FieldSpec('initial_state.amplitudes', 'amplitudes', [], 'Custom start as [occupations, re, im] entries.'),
)

TIME_FIELDS = (
    FieldSpec('time.t_start', 'float', 0.0, 'First sample of Omega_R * t.'),
    FieldSpec('time.t_end', 'float', 30.0, 'Last sample of Omega_R * t.'),
    FieldSpec('time.n_samples', 'int', 3001, 'Number of samples.'),
)

DISORDER_FIELDS = (
    FieldSpec('disorder.kappa_low', 'float', help='Lower end kappa_1 of the coupling interval.', energy=True),
    FieldSpec('disorder.kappa_high', 'float', help='Upper end kappa_2 of the coupling interval.', energy=True),
    FieldSpec('disorder.realizations', 'int', 20, 'Number of coupling maps.'),
    FieldSpec('disorder.master_seed', 'int?', None, 'Seed of the ensemble; defaults to the manifest seed.'),
    FieldSpec('disorder.distribution', 'str', 'uniform', 'Per-bond distribution.'),
)

PEPS_FIELDS = (
    FieldSpec('peps.n_photons', 'int', help='Target photon number N (<= 3).'),
    FieldSpec('peps.bond_cap', 'int?', None, 'Bond dimension cap D; unset means D = (N + 1)^2.'),
    FieldSpec('peps.max_sweeps', 'int', DEFAULT_MAX_SWEEPS, 'Sweep budget.'),
    FieldSpec('peps.convergence_tol', 'float', DEFAULT_CONVERGENCE_TOL, '|Delta E| per sweep, hbar*Omega_R.'),
    FieldSpec('peps.regularization_eps', 'fraction', DEFAULT_REGULARIZATION_EPS, 'Relative cutoff on N_eff.'),
    FieldSpec('peps.number_penalty', 'float?', None, 'Weight of (N - N0)^2 in hbar*Omega_R; 0 is grand-canonical.'),
    FieldSpec('peps.checkpoint', 'bool', False, 'Also write the optimized tensors to state.npz.'),
)

SCHEMAS: dict[ExperimentKind, tuple[FieldSpec, ...]] = {
    ExperimentKind.ED_SPECTRUM: COMMON_FIELDS + PHYSICS_FIELDS + (
        FieldSpec('ed.n_photons', 'int', help='Photon sector N (<= 8).'),
        FieldSpec('ed.k_lowest', 'int?', None, 'Number of eigenpairs; unset means the whole sector.'),
    ),
    ExperimentKind.PEPS_OPTIMIZE: COMMON_FIELDS + PHYSICS_FIELDS + PEPS_FIELDS,
    ExperimentKind.BENCHMARK: COMMON_FIELDS + PHYSICS_FIELDS + (
        FieldSpec('benchmark.n_photons', 'int list', [1, 2, 3], 'Photon numbers of the PEPS rows (<= 3).'),
        FieldSpec('benchmark.d_policy', 'int mapping', {3: 6}, 'Bond cap per N; other N run uncapped.'),
        FieldSpec('benchmark.ed_n_photons', 'int list', [1, 2, 3, 4, 5], 'Photon numbers of the ED fit (<= 5).'),
        FieldSpec('benchmark.max_sweeps', 'int', DEFAULT_MAX_SWEEPS, 'Sweep budget per row.'),
        FieldSpec('benchmark.convergence_tol', 'float', DEFAULT_CONVERGENCE_TOL, '|Delta E| per sweep.'),
        FieldSpec('benchmark.number_penalty', 'float?', None, 'Weight of (N - N0)^2 in hbar*Omega_R.'),
    ),
    ExperimentKind.DYNAMICS: COMMON_FIELDS + PHYSICS_FIELDS + INITIAL_STATE_FIELDS + TIME_FIELDS + (
        FieldSpec('dynamics.pairs', 'site pair list', [[1, 7]], 'Cavity pairs (k, k\') to correlate.'),
        FieldSpec('dynamics.ranking_reference', 'int?', 1, 'Rank every partner of this cavity by peak G.'),
        FieldSpec('dynamics.first_peak_floor', 'float', DEFAULT_FIRST_PEAK_FLOOR, 'Floor of the first-peak search.'),
    ),
    ExperimentKind.DISORDER_DYNAMICS: COMMON_FIELDS + PHYSICS_FIELDS + INITIAL_STATE_FIELDS + TIME_FIELDS
    + DISORDER_FIELDS + (
        FieldSpec('dynamics.pair', 'site pair', [1, 7], 'Cavity pair (k, k\') to correlate.'),
        FieldSpec('dynamics.first_peak_kappas', 'float list', [], 'Uniform couplings of a first-peak scan.',
                  energy=True),
        FieldSpec('dynamics.first_peak_floor', 'float', DEFAULT_FIRST_PEAK_FLOOR, 'Floor of the first-peak search.'),
    ),
    ExperimentKind.DISORDER_ENERGY: COMMON_FIELDS + PHYSICS_FIELDS + DISORDER_FIELDS + (
        FieldSpec('ed.n_photons', 'int', help='Photon sector N (<= 8).'),
    ),
    ExperimentKind.MU_SCAN: COMMON_FIELDS + PHYSICS_FIELDS + (
        FieldSpec('scan.axis', 'str', 'mu', "'mu' or 'kappa'."),
        FieldSpec('scan.start', 'float', help='First grid value.', energy=True),
        FieldSpec('scan.stop', 'float', help='Last grid value.', energy=True),
        FieldSpec('scan.points', 'int', 201, 'Number of grid points.'),
        FieldSpec('scan.n_photons', 'int list', [0, 1, 2, 3, 4], 'Sectors compared at every point.'),
    ),
    ExperimentKind.TOPOLOGY_EXPORT: COMMON_FIELDS,
}

# kinds whose Hamiltonian takes its couplings from physics.kappa / physics.couplings
COUPLED_KINDS = frozenset({ExperimentKind.ED_SPECTRUM, ExperimentKind.PEPS_OPTIMIZE, ExperimentKind.BENCHMARK,
                           ExperimentKind.DYNAMICS})
# values excluded from the configuration hash because they do not change results
UNHASHED_PATHS = frozenset({'output_dir'})


def parse_kind(kind: str) -> ExperimentKind:
    try:
        return ExperimentKind(kind)
    except ValueError:
        known = ', '.join(item.value for item in ExperimentKind)
        raise ManifestParseError(f'Unknown experiment kind {kind!r}; expected one of {known}') from None


def describe(kind: str) -> str:
    """
    Render the manifest schema of one kind with its defaults.

    Raises:
        ManifestParseError: If the kind is unknown.
    """
    experiment = parse_kind(kind)
    width = max(len(spec.path) for spec in SCHEMAS[experiment])
    lines = [f'Manifest schema for {experiment.value}:']
    for spec in SCHEMAS[experiment]:
        default = 'required' if spec.required else f'default {spec.default!r}'
        energy = ' [energy]' if spec.energy else ''
        lines.append(f'  {spec.path:<{width}}  {spec.type_name:<16} {default:<24} {spec.help}{energy}')
    if experiment in COUPLED_KINDS:
        lines.append('  One of physics.kappa or physics.couplings is required.')
    return '\n'.join(lines)


def _lookup(raw: Mapping[str, Any], path: str) -> Any:
    node: Any = raw
    for part in path.split('.'):
        if not isinstance(node, Mapping) or part not in node:
            return REQUIRED
        node = node[part]
    return node


def _unknown_keys(raw: Mapping[str, Any], allowed: set[str], prefix: str = '') -> list[str]:
    unknown = []
    for key, value in raw.items():
        path = f'{prefix}{key}'
        if path in allowed:
            continue
        if isinstance(value, Mapping) and any(item.startswith(f'{path}.') for item in allowed):
            unknown.extend(_unknown_keys(value, allowed, f'{path}.'))
        else:
            unknown.append(path)
    return unknown


def apply_overrides(raw: Mapping[str, Any], overrides: Iterable[str]) -> dict[str, Any]:
    """
    Apply `dotted.key=value` overrides; values are typed as YAML scalars or flow collections.

    Raises:
        ManifestParseError: If an override is not of the form key=value or its value is not valid YAML.
    """
    result = _deep_copy(raw)
    for override in overrides:
        key, separator, text = override.partition('=')
        if not separator or not key.strip():
            raise ManifestParseError(f'Override {override!r} is not of the form key=value')
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as error:
            raise ManifestParseError(f'Override {override!r} has an unparsable value: {error}') from None
        node = result
        parts = key.strip().split('.')
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = node[part] = {}
            node = child
        node[parts[-1]] = value
        logger.debug(f'Override {key.strip()} = {value!r}')
    return result


def _deep_copy(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {key: _deep_copy(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_deep_copy(item) for item in value]
    return value


@dataclass(frozen=True)
class Manifest:
    """
    A validated manifest.

    Attributes:
        kind: Experiment kind.
        units: Declared unit system of the raw values.
        values: Dotted path -> parsed value with defaults filled in and energies converted to joules.
        raw: The manifest as read, overrides applied.
        source: File the manifest came from, if any.
    """

    kind: ExperimentKind
    units: Units
    values: Mapping[str, Any] = field(repr=False)
    raw: Mapping[str, Any] = field(repr=False)
    source: Path | None = None

    def __getitem__(self, path: str) -> Any:
        return self.values[path]

    @property
    def seed(self) -> int:
        return self.values['seed']

    @property
    def energy_unit(self) -> float:
        return HBAR * self.values.get('physics.unit_scale', DEFAULT_UNIT_SCALE)

    @cached_property
    def config_hash(self) -> str:
        """sha256 of the resolved values (defaults and seed included, output location excluded)."""
        return config_hash({path: value for path, value in self.values.items() if path not in UNHASHED_PATHS})

    def resolved(self) -> dict[str, Any]:
        return dict(self.values)

    def params(self) -> HamiltonianParams:
        """
        Physical parameters in SI units. Kinds that sample their own couplings get an empty coupling map.
        """
        unit_scale = self.values['physics.unit_scale']
        omega_d = self.values['physics.omega_d']
        if self.units is Units.DIMENSIONLESS:
            omega_d *= unit_scale
        couplings = self.values['physics.couplings']
        if couplings is None and self.values['physics.kappa'] is not None:
            couplings = {bond: self.values['physics.kappa'] for bond in CELL_BONDS}
        return HamiltonianParams(omega_d=omega_d, couplings=couplings or {}, mu=self.values['physics.mu'],
                                 unit_scale=unit_scale, hbar=HBAR)


def _convert_energy(value: Any, scale: float) -> Any:
    if value is None:
        return None
    if isinstance(value, dict):
        return {key: item * scale for key, item in value.items()}
    if isinstance(value, list):
        return [item * scale for item in value]
    return value * scale


def validate_manifest(raw: Mapping[str, Any], source: Path | None = None) -> Manifest:
    """
    Check a raw manifest mapping against the schema of its kind.

    Raises:
        ConfigurationError: On a missing, mistyped or unknown field, an unknown kind or unknown units.
    """
    if not isinstance(raw.get('kind'), str):
        raise ConfigurationError("Manifest must name its experiment 'kind'")
    try:
        kind = ExperimentKind(raw['kind'])
    except ValueError:
        raise ConfigurationError(f'Unknown experiment kind {raw["kind"]!r}') from None
    if not isinstance(raw.get('units'), str):
        raise ConfigurationError("Manifest must declare 'units' explicitly (dimensionless or si)")
    try:
        units = Units(raw['units'])
    except ValueError:
        raise ConfigurationError(f"Unknown units {raw['units']!r}; expected 'dimensionless' or 'si'") from None

    schema = SCHEMAS[kind]
    unknown = _unknown_keys(raw, {spec.path for spec in schema})
    if unknown:
        raise ConfigurationError(f'Unknown manifest fields for {kind.value}: {", ".join(sorted(unknown))}')

    values: dict[str, Any] = {}
    for spec in schema:
        value = _lookup(raw, spec.path)
        if value is REQUIRED:
            if spec.required:
                raise ConfigurationError(f'Missing required field {spec.path!r} for {kind.value}')
            value = _deep_copy(spec.default)
        try:
            values[spec.path] = spec.parse(value)
        except TypeError as error:
            raise ConfigurationError(f'Field {spec.path!r}: {error}, got {value!r}') from None

    if kind in COUPLED_KINDS and values['physics.kappa'] is None and values['physics.couplings'] is None:
        raise ConfigurationError(f'{kind.value} needs physics.kappa or physics.couplings')
    if 'physics.unit_scale' in values and units is Units.DIMENSIONLESS:
        scale = HBAR * values['physics.unit_scale']
        for spec in schema:
            if spec.energy:
                values[spec.path] = _convert_energy(values[spec.path], scale)
    return Manifest(kind=kind, units=units, values=values, raw=_deep_copy(raw), source=source)


def load_manifest(path: str | Path, overrides: Iterable[str] = (), seed: int | None = None) -> Manifest:
    """
    Read, override and validate a YAML manifest.

    Args:
        path (str | Path): Manifest file.
        overrides (Iterable[str]): `dotted.key=value` strings applied in order.
        seed (int | None): Replaces the manifest seed when given.

    Raises:
        ManifestParseError: If the file cannot be read or is not a YAML mapping.
        ConfigurationError: If validation fails.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding='utf-8'))
    except OSError as error:
        raise ManifestParseError(f'Cannot read manifest {path}: {error}') from None
    except yaml.YAMLError as error:
        raise ManifestParseError(f'Manifest {path} is not valid YAML: {error}') from None
    if not isinstance(raw, dict):
        raise ManifestParseError(f'Manifest {path} must be a YAML mapping')
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        raw['seed'] = seed
    manifest = validate_manifest(raw, path)
    logger.info(f'Loaded {manifest.kind.value} manifest {path} (config hash {manifest.config_hash[:12]})')
    return manifest
